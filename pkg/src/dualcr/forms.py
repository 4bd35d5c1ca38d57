"""The coframe eta', eta'', theta, the complex structures J and J* on H_p,
and the first-order splitting du = d'u + d''u + (Upsilon u) theta.

1-forms along a chart are stored as covector jets (one jet per chart
variable); 2-forms at the base point as antisymmetric matrices over the chart
basis. Restriction to the maximal complex subspace H_p is by projection onto
a stored real basis of H_p. The dual complex structure is transported through
the derivative of the dual map:

    J* = (D'(p))^{-1} o J o D'(p)     on H_p.

The splitting of a 1-form into its J-linear and J*-linear parts follows the
block linear system (w1, w2) -> (w1 + w2) + i(-w1 o J - w2 o J*), which is
invertible because ker(J* - J) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDual, ResidualTooLarge
from .fields import FieldJet, apply_field, build_field, xt_fields
from .hypersurface import Chart, j_matrix
from .jets import Jet

# -- covector jets -----------------------------------------------------------


def theta_cov(chart: Chart):
    """theta = -sum w_j dz_j as a covector jet (components per chart var)."""
    def build():
        k1 = chart.order - 1
        comps = []
        for i in range(chart.space.num_vars):
            acc = None
            for zj, wj in zip(chart.z_jets, chart.w_jets):
                term = wj.trunc(k1) * zj.partial(i).trunc(k1)
                acc = term if acc is None else acc + term
            comps.append(-acc)
        return comps

    return chart.memo("cov:theta", build)


def theta_cov_alt(chart: Chart):
    """The second description theta = +sum z_j dw_j."""
    def build():
        k1 = chart.order - 1
        comps = []
        for i in range(chart.space.num_vars):
            acc = None
            for zj, wj in zip(chart.z_jets, chart.w_jets):
                term = zj.trunc(k1) * wj.partial(i).trunc(k1)
                acc = term if acc is None else acc + term
            comps.append(acc)
        return comps

    return chart.memo("cov:theta_alt", build)


def eta_cov(chart: Chart, which: str, j: int, k: int):
    """eta'_jk = z_k dz_j - z_j dz_k (which='prime') or the w analogue."""
    if j > k:
        return [-c for c in eta_cov(chart, which, k, j)]

    def build():
        k1 = chart.order - 1
        fj, fk = ((chart.z_jets[j - 1], chart.z_jets[k - 1]) if which == "prime"
                  else (chart.w_jets[j - 1], chart.w_jets[k - 1]))
        comps = []
        for i in range(chart.space.num_vars):
            comps.append(fk.trunc(k1) * fj.partial(i).trunc(k1)
                         - fj.trunc(k1) * fk.partial(i).trunc(k1))
        return comps

    return chart.memo(f"cov:eta:{which}:{j}{k}", build)


def row_at_base(cov) -> np.ndarray:
    """Constant terms of a covector jet: the 1-form value at the base point."""
    return np.array([c.value for c in cov])


def exterior_at_base(cov) -> np.ndarray:
    """d(omega) at the base point as an antisymmetric matrix on chart vectors."""
    m = len(cov)
    space = cov[0].space
    jac = np.array([[c.coeffs[space.var_index(a)] for a in range(m)] for c in cov])
    # jac[b, a] = d_a omega_b ; (d omega)(e_a, e_b) = d_a omega_b - d_b omega_a
    return jac.T - jac


def wedge_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a ^ b)(V, W) = a(V) b(W) - a(W) b(V) as a matrix."""
    return np.outer(a, b) - np.outer(b, a)


def scale_cov(cov, factor: Jet):
    order = min(factor.order, cov[0].order)
    f = factor.trunc(order)
    return [f * c.trunc(order) for c in cov]


def add_cov(a, b):
    order = min(a[0].order, b[0].order)
    return [x.trunc(order) + y.trunc(order) for x, y in zip(a, b)]


# -- the H_p frame with both complex structures --------------------------------


@dataclass
class HFrame:
    """Real basis (E_1, iE_1, ...) of H_p with J, J* in matrix form."""

    chart: Chart
    e_basis: np.ndarray        # (n, n-1) complex orthonormal kernel of w
    basis_ambient: np.ndarray  # (2n, 2n-2) real
    basis_chart: np.ndarray    # (2n-1, 2n-2) real
    J: np.ndarray              # (2n-2, 2n-2) real
    Jstar: np.ndarray          # (2n-2, 2n-2) real
    dual_cond: float
    _pinv: np.ndarray

    def to_h(self, chart_vec: np.ndarray, rtol: float = 1e-7) -> np.ndarray:
        """Coordinates in the H basis of a chart vector lying in H tensor C."""
        x = self._pinv @ chart_vec
        res = np.linalg.norm(self.basis_chart @ x - chart_vec)
        if res > rtol * (1.0 + np.linalg.norm(chart_vec)):
            raise ResidualTooLarge(
                f"vector is not in H_p (projection residual {res:.3e})"
            )
        return x

    def split(self, x: np.ndarray):
        """Decompose x in H tensor C as x' + x'' with x' = V1 + i J* V1 and
        x'' = V2 + i J V2 (V1, V2 real)."""
        d = self.J.shape[0]
        m = np.zeros((2 * d, 2 * d))
        m[:d, :d] = np.eye(d)
        m[:d, d:] = np.eye(d)
        m[d:, :d] = self.Jstar
        m[d:, d:] = self.J
        rhs = np.concatenate([x.real, x.imag])
        sol = np.linalg.solve(m, rhs)
        v1, v2 = sol[:d], sol[d:]
        return v1 + 1j * (self.Jstar @ v1), v2 + 1j * (self.J @ v2)

    def restrict(self, form_full: np.ndarray) -> np.ndarray:
        """Restrict a 2-form (chart-basis matrix) to H_p."""
        return self.basis_chart.T @ form_full @ self.basis_chart


def h_frame(chart: Chart) -> HFrame:
    def build():
        n = chart.n
        e, basis_ambient, basis_chart = chart.h_basis
        d = 2 * n - 2
        jmat = j_matrix(n - 1)  # exact block structure in the (E, iE) ordering
        j_amb = j_matrix(n)
        d_cols = chart.w_real @ basis_chart  # ambient images under D'(p)
        cond = float(np.linalg.cond(d_cols))
        if not np.isfinite(cond) or cond > chart.surface.tol.cond_max:
            raise DegenerateDual(f"D'(p) on H_p has condition number {cond:.3e}")
        target = j_amb @ d_cols
        jstar, *_ = np.linalg.lstsq(d_cols, target, rcond=None)
        res = np.linalg.norm(d_cols @ jstar - target)
        if res > 1e-7 * (1.0 + np.linalg.norm(target)):
            raise DegenerateDual(
                f"dual image of H_p is not J-invariant (residual {res:.3e})"
            )
        return HFrame(
            chart=chart,
            e_basis=e,
            basis_ambient=basis_ambient,
            basis_chart=basis_chart,
            J=jmat,
            Jstar=jstar,
            dual_cond=cond,
            _pinv=np.linalg.pinv(basis_chart),
        )

    return chart.memo("hframe", build)


def type_part_norms(form_h: np.ndarray, frame: HFrame):
    """Max magnitudes of the (2,0), (0,2) and (1,1) parts of a 2-form on H."""
    d = form_h.shape[0]
    prim, sec = [], []
    for a in range(d):
        e = np.zeros(d, dtype=np.complex128)
        e[a] = 1.0
        xp, xpp = frame.split(e)
        prim.append(xp)
        sec.append(xpp)
    prim = np.array(prim).T
    sec = np.array(sec).T
    n20 = float(np.max(np.abs(prim.T @ form_h @ prim)))
    n02 = float(np.max(np.abs(sec.T @ form_h @ sec)))
    n11 = float(np.max(np.abs(prim.T @ form_h @ sec)) +
                np.max(np.abs(sec.T @ form_h @ prim)))
    return n20, n02, n11


# -- the frame of 1-forms at a point --------------------------------------------


@dataclass
class FormFrame:
    chart: Chart
    theta: list
    eta_prime: dict
    eta_dprime: dict
    dtheta: np.ndarray        # full 2-form at base, chart basis
    hframe: HFrame
    theta_agreement: float    # max coefficient gap between the two theta forms

    @property
    def J(self) -> np.ndarray:
        return self.hframe.J

    @property
    def Jstar(self) -> np.ndarray:
        return self.hframe.Jstar

    @property
    def dtheta_h(self) -> np.ndarray:
        return self.hframe.restrict(self.dtheta)

    def theta_row(self) -> np.ndarray:
        return row_at_base(self.theta)

    def eta_prime_row(self, j: int, k: int) -> np.ndarray:
        return row_at_base(eta_cov(self.chart, "prime", j, k))

    def eta_dprime_row(self, j: int, k: int) -> np.ndarray:
        return row_at_base(eta_cov(self.chart, "dprime", j, k))


def eval_forms(chart: Chart) -> FormFrame:
    """Coframe, d theta and both complex structures at the chart's base point."""
    def build():
        n = chart.n
        theta = theta_cov(chart)
        alt = theta_cov_alt(chart)
        agreement = max((a - b).max_abs() for a, b in zip(theta, alt))
        scale = 1.0 + max(c.max_abs() for c in theta)
        if agreement > 1e-6 * scale:
            raise ResidualTooLarge(
                f"the two descriptions of theta disagree by {agreement:.3e}"
            )
        pairs = [(j, k) for j in range(1, n + 1) for k in range(j + 1, n + 1)]
        eta_p = {jk: eta_cov(chart, "prime", *jk) for jk in pairs}
        eta_pp = {jk: eta_cov(chart, "dprime", *jk) for jk in pairs}
        dtheta = exterior_at_base(theta)
        return FormFrame(
            chart=chart,
            theta=theta,
            eta_prime=eta_p,
            eta_dprime=eta_pp,
            dtheta=dtheta,
            hframe=h_frame(chart),
            theta_agreement=agreement,
        )

    return chart.memo("formframe", build)


# -- first-order splitting -------------------------------------------------------


@dataclass
class HFormSplit:
    """d'u and d''u as complex covectors on H_p, plus the theta component."""

    dprime_u: np.ndarray    # row in the H basis, J-linear
    ddprime_u: np.ndarray   # row in the H basis, J*-linear
    d0_u: complex           # (Upsilon u)(p)
    lam: complex | None
    recon_residual: float   # du = d'~u + d''~u + d0 u as jets
    cross_residual: float   # explicit formulas vs the block-system solve


def dtilde_prime_cov(chart: Chart, u: Jet):
    """The chosen extension d'~u: (Tu) eta' resp. the half-sum for n > 2."""
    n = chart.n
    if n == 2:
        t = build_field(chart, "T")
        return scale_cov(eta_cov(chart, "prime", 1, 2), apply_field(t, u))
    acc = None
    for (j, k), f in _t_pairs(chart):
        term = scale_cov(eta_cov(chart, "prime", j, k), apply_field(f, u))
        acc = term if acc is None else add_cov(acc, term)
    return acc


def dtilde_dprime_cov(chart: Chart, u: Jet):
    n = chart.n
    if n == 2:
        x = build_field(chart, "X")
        return scale_cov(eta_cov(chart, "dprime", 1, 2), apply_field(x, u))
    acc = None
    for (j, k), f in _x_pairs(chart):
        term = scale_cov(eta_cov(chart, "dprime", j, k), apply_field(f, u))
        acc = term if acc is None else add_cov(acc, term)
    return acc


def _t_pairs(chart: Chart):
    n = chart.n
    return [((j, k), build_field(chart, f"T_{j}{k}" if n > 2 else "T"))
            for j in range(1, n + 1) for k in range(j + 1, n + 1)]


def _x_pairs(chart: Chart):
    n = chart.n
    return [((j, k), build_field(chart, f"X_{j}{k}" if n > 2 else "X"))
            for j in range(1, n + 1) for k in range(j + 1, n + 1)]


def split_d(chart: Chart, u: Jet) -> HFormSplit:
    """Split du|_H into its J-linear and J*-linear parts.

    Uses the explicit coframe formulas, then cross-checks against the direct
    solve of the defining block system and verifies the reconstruction
    du = d'~u + d''~u + (Upsilon u) theta as jets.
    """
    frame = eval_forms(chart)
    hf = frame.hframe
    ups = build_field(chart, "Upsilon")
    upsu = apply_field(ups, u)

    dp = dtilde_prime_cov(chart, u)
    dpp = dtilde_dprime_cov(chart, u)
    d0 = scale_cov(theta_cov(chart), upsu)

    # reconstruction du = d'~u + d''~u + d0 u, coefficient-wise
    total = add_cov(add_cov(dp, dpp), d0)
    order = total[0].order
    recon = max(
        (u.partial(i).trunc(order) - total[i]).max_abs()
        for i in range(chart.space.num_vars)
    )
    du_row = np.array([u.partial(i).value for i in range(chart.space.num_vars)])
    scale = 1.0 + float(np.max(np.abs(du_row))) + u.max_abs()
    if recon > 1e-6 * scale:
        raise ResidualTooLarge(f"du reconstruction residual {recon:.3e}")

    b = hf.basis_chart
    dprime_row = row_at_base(dp) @ b
    ddprime_row = row_at_base(dpp) @ b

    # independent route: solve (w1, w2) -> (w1 + w2) + i(-w1 J - w2 J*) = du|_H
    du_h = du_row @ b
    d = b.shape[1]
    m = np.zeros((2 * d, 2 * d))
    m[:d, :d] = np.eye(d)
    m[:d, d:] = np.eye(d)
    m[d:, :d] = hf.J.T
    m[d:, d:] = hf.Jstar.T
    rhs = np.concatenate([du_h.real, -du_h.imag])
    sol = np.linalg.solve(m, rhs)
    w1, w2 = sol[:d], sol[d:]
    omega_p = w1 - 1j * (w1 @ hf.J)
    omega_pp = w2 - 1j * (w2 @ hf.Jstar)
    cross = float(max(np.max(np.abs(omega_p - dprime_row)),
                      np.max(np.abs(omega_pp - ddprime_row))))
    if cross > 1e-6 * scale:
        raise ResidualTooLarge(f"d'/d'' split cross-check residual {cross:.3e}")

    return HFormSplit(
        dprime_u=dprime_row,
        ddprime_u=ddprime_row,
        d0_u=upsu.value,
        lam=None,
        recon_residual=recon,
        cross_residual=cross,
    )


# -- the nu matrix and lambda extraction ------------------------------------------


@dataclass
class NuMatrix:
    """nu_p and d theta evaluated on the (T_jk, X_lm) field pairs."""

    t_pairs: list
    x_pairs: list
    nu: np.ndarray            # nu_p(T_jk, X_lm), rows indexed by t_pairs
    dtheta: np.ndarray        # d theta(T_jk, X_lm)
    second_order: dict        # (jk, lm) -> (X_lm T_jk u)(p)
    nu_form_h: np.ndarray     # nu_p as a 2-form matrix on the H basis


def nu_matrix(chart: Chart, u: Jet) -> NuMatrix:
    """nu_p = d d'~u |_H via the type-(1,1) double-sum formula."""
    if chart.n <= 2:
        raise ValueError("the nu matrix is defined for n > 2")
    frame = eval_forms(chart)
    hf = frame.hframe
    tp = _t_pairs(chart)
    xp = _x_pairs(chart)

    tu = {jk: apply_field(f, u) for jk, f in tp}
    second = {}
    m = chart.space.num_vars
    nu_full = np.zeros((m, m), dtype=np.complex128)
    for (jk, tf) in tp:
        ep_row = row_at_base(eta_cov(chart, "prime", *jk))
        for (lm, xf) in xp:
            val = apply_field(xf, tu[jk]).value
            second[(jk, lm)] = val
            epp_row = row_at_base(eta_cov(chart, "dprime", *lm))
            nu_full += val * wedge_rows(epp_row, ep_row)
    nu_h = hf.restrict(nu_full)

    t_vecs = {jk: hf.to_h(f.value()) for jk, f in tp}
    x_vecs = {lm: hf.to_h(f.value()) for lm, f in xp}
    dth_h = frame.dtheta_h
    nu_vals = np.array([[t_vecs[jk] @ nu_h @ x_vecs[lm] for lm, _ in xp]
                        for jk, _ in tp])
    dth_vals = np.array([[t_vecs[jk] @ dth_h @ x_vecs[lm] for lm, _ in xp]
                         for jk, _ in tp])
    return NuMatrix(
        t_pairs=[jk for jk, _ in tp],
        x_pairs=[lm for lm, _ in xp],
        nu=nu_vals,
        dtheta=dth_vals,
        second_order=second,
        nu_form_h=nu_h,
    )


@dataclass
class LambdaResult:
    lam: complex
    deviation: float
    details: dict


def lambda_of(chart: Chart, u: Jet) -> LambdaResult:
    """The candidate scalar lambda with nu_p + lambda d theta = 0 on H.

    For n = 2 this is lambda = XTu(p); the deviation reports the two
    coefficients of the closedness expansion of d(d'~u + lambda theta), which
    vanish exactly when the decomposability residuals do. For n > 2 lambda is
    the least-squares ratio over all (T_jk, X_lm) pairs and the deviation the
    worst-case |nu + lambda d theta|.
    """
    if chart.n == 2:
        x = build_field(chart, "X")
        t = build_field(chart, "T")
        ups = build_field(chart, "Upsilon")
        tu = apply_field(t, u)
        xtu = apply_field(x, tu)
        lam = xtu.value
        cov = add_cov(dtilde_prime_cov(chart, u), scale_cov(theta_cov(chart), xtu))
        f2 = exterior_at_base(cov)
        c_eta_p = t.value() @ f2 @ ups.value()   # eta' ^ theta coefficient
        c_eta_pp = x.value() @ f2 @ ups.value()  # eta'' ^ theta coefficient
        dev = float(max(abs(c_eta_p), abs(c_eta_pp)))
        return LambdaResult(lam, dev, {
            "eta_prime_theta_coeff": complex(c_eta_p),
            "eta_dprime_theta_coeff": complex(c_eta_pp),
        })

    numat = nu_matrix(chart, u)
    nu_flat = numat.nu.ravel()
    dth_flat = numat.dtheta.ravel()
    denom = float(np.vdot(dth_flat, dth_flat).real)
    lam = (-np.vdot(dth_flat, nu_flat) / denom) if denom > 0 else 0j
    dev = float(np.max(np.abs(nu_flat + lam * dth_flat)))
    return LambdaResult(complex(lam), dev, {"pairs": len(nu_flat)})
