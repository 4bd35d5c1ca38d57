"""Hypersurfaces S = {rho = 0} in C^n, their charts and the dual map.

A Surface wraps a real-valued defining expression rho. Charts parametrize S
near a base point as a graph over the real tangent space: the 2n-1 chart
variables move along an orthonormal tangent frame, and the graph coordinate is
taken along the gradient direction (the direction of largest directional
derivative of rho). The dual map

    w_j = (d rho / d z_j) / sum_k z_k (d rho / d z_k)

is evaluated both pointwise and in jet arithmetic along charts; its values on
S do not depend on the choice of defining function.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from types import SimpleNamespace

import numpy as np

from . import expr as ex
from .errors import (
    ChartError,
    NoHitZeroViolated,
    ProjectionDiverged,
    RepairFailed,
)
from .jets import Jet, get_space, implicit_solve

# -- real <-> complex vector plumbing ------------------------------------------


def r_of(v) -> np.ndarray:
    """Complex (k,) vector -> real (2k,) vector, interleaved re/im."""
    v = np.asarray(v, dtype=np.complex128)
    out = np.empty(2 * v.size)
    out[0::2] = v.real
    out[1::2] = v.imag
    return out


def c_of(r) -> np.ndarray:
    """Real (2k,) vector -> complex (k,). For complexified vectors this
    returns the d-zeta components (it annihilates the (0,1) part)."""
    r = np.asarray(r)
    return r[0::2] + 1j * r[1::2]


def j_matrix(k: int) -> np.ndarray:
    """Multiplication by i on R^{2k} in interleaved coordinates."""
    m = np.zeros((2 * k, 2 * k))
    for a in range(k):
        m[2 * a, 2 * a + 1] = -1.0
        m[2 * a + 1, 2 * a] = 1.0
    return m


def real_matrix(cols_complex: np.ndarray) -> np.ndarray:
    """Complex (k, m) matrix of real vectors -> real (2k, m)."""
    k, m = cols_complex.shape
    out = np.empty((2 * k, m))
    out[0::2, :] = cols_complex.real
    out[1::2, :] = cols_complex.imag
    return out


def null_space_real(a: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of a real matrix."""
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    tol = rtol * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    return vh[rank:].T


def null_space_complex(a: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    tol = rtol * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T


# -- tolerances -----------------------------------------------------------------


@dataclass(frozen=True)
class Tolerances:
    """Numerical policy knobs; defaults are the documented contract."""

    no_hit_zero: float = 1e-8        # |sum z_j drho/dz_j| floor for the dual map
    point_residual: float = 1e-10    # surface membership, scaled by 1 + |z|^2
    projection_target: float = 1e-13
    chart_residual: float = 1e-9     # rho along chart, scaled by 1 + |z|^2
    margin_flag: float = 1e-8        # structure-report margin threshold
    eigen_flag: float = 1e-10        # Levi eigenvalue threshold
    star_repair: float = 1e-6        # (star) margin below which repair kicks in
    cond_max: float = 1e8            # linear-solve conditioning guard
    dropped_row: float = 1e-9        # automatic consistency rows in field solves
    reject: float = 1e-6             # residual > reject*scale  => rejected
    consistent: float = 1e-8         # residual < consistent*scale => consistent


# -- surface and points -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SurfacePoint:
    z: np.ndarray
    residual: float


class Surface:
    """A hypersurface {rho = 0} with rho from the expression language."""

    def __init__(self, n: int, rho: ex.Expr, spec: str, kind: str = "poly",
                 weights=None, tol: Tolerances | None = None):
        if n < 2:
            raise ValueError("ambient dimension must be at least 2")
        if ex.uses_w(rho):
            raise ValueError("a defining function may involve z symbols only")
        if ex.max_symbol_index(rho, "z") > n:
            raise ValueError("rho uses symbols beyond the ambient dimension")
        if not ex.is_real_valued(rho, n):
            raise ValueError("rho is not real-valued")
        self.n = n
        self.rho = rho
        self.spec = spec
        self.kind = kind
        self.weights = None if weights is None else tuple(float(a) for a in weights)
        self.tol = tol or Tolerances()

    def __repr__(self):
        return f"Surface({self.spec!r})"

    # -- constructors ----------------------------------------------------------

    @staticmethod
    def sphere(n: int, tol: Tolerances | None = None) -> "Surface":
        rho = Surface._quadric_expr([1.0] * n)
        return Surface(n, rho, f"sphere:n={n}", kind="sphere",
                       weights=[1.0] * n, tol=tol)

    @staticmethod
    def ellipsoid(weights, tol: Tolerances | None = None) -> "Surface":
        weights = [float(a) for a in weights]
        if len(weights) < 2 or any(a <= 0 for a in weights):
            raise ValueError("ellipsoid needs at least two positive weights")
        spec = "ellipsoid:" + ",".join(_fmt_weight(a) for a in weights)
        return Surface(len(weights), Surface._quadric_expr(weights),
                       spec, kind="ellipsoid", weights=weights, tol=tol)

    @staticmethod
    def from_expr(text_or_expr, n: int | None = None,
                  tol: Tolerances | None = None) -> "Surface":
        if isinstance(text_or_expr, str):
            rho = ex.parse(text_or_expr, n)
            spec = f"poly:{text_or_expr}"
        else:
            rho = text_or_expr
            spec = f"poly:{ex.pretty(rho)}"
        n_used = ex.max_symbol_index(rho, "z")
        if n is None:
            n = n_used
        return Surface(n, rho, spec, kind="poly", tol=tol)

    @staticmethod
    def parse_spec(spec: str, tol: Tolerances | None = None) -> "Surface":
        """Parse `sphere:n=<N>`, `ellipsoid:<a1>,...,<aN>` or `poly:<expr>`."""
        head, sep, rest = spec.partition(":")
        if not sep:
            raise ValueError(f"malformed surface spec {spec!r}")
        if head == "sphere":
            if not rest.startswith("n="):
                raise ValueError(f"sphere spec must look like sphere:n=<N>, got {spec!r}")
            return Surface.sphere(int(rest[2:]), tol=tol)
        if head == "ellipsoid":
            return Surface.ellipsoid([float(x) for x in rest.split(",")], tol=tol)
        if head == "poly":
            return Surface.from_expr(rest, tol=tol)
        raise ValueError(f"unknown surface kind {head!r}")

    @staticmethod
    def _quadric_expr(weights) -> ex.Expr:
        terms = None
        for k, a in enumerate(weights):
            t = ex.Mul(ex.Sym("z", k + 1), ex.Conj(ex.Sym("z", k + 1)))
            if a != 1.0:
                t = ex.Mul(ex.Lit(complex(a)), t)
            terms = t if terms is None else ex.Add(terms, t)
        return ex.Sub(terms, ex.Lit(1 + 0j))

    # -- derivatives of rho ------------------------------------------------------

    @cached_property
    def rho_dz(self):
        return tuple(ex.wirtinger(self.rho, j + 1, bar=False) for j in range(self.n))

    @cached_property
    def rho_dz_dzbar(self):
        return tuple(
            tuple(ex.wirtinger(dj, k + 1, bar=True) for k in range(self.n))
            for dj in self.rho_dz
        )

    # -- pointwise evaluation ------------------------------------------------------

    def rho_value(self, z) -> float:
        return float(np.real(ex.eval_value(self.rho, z)))

    def rho_dz_values(self, z) -> np.ndarray:
        return np.array([ex.eval_value(d, z) for d in self.rho_dz])

    def grad_real(self, z) -> np.ndarray:
        """Real gradient of rho as a complex n-vector: 2*conj(d rho/dz)."""
        return 2.0 * np.conj(self.rho_dz_values(z))

    def hermitian_hessian(self, z) -> np.ndarray:
        h = np.empty((self.n, self.n), dtype=np.complex128)
        for j in range(self.n):
            for k in range(self.n):
                h[j, k] = ex.eval_value(self.rho_dz_dzbar[j][k], z)
        return h

    # -- jet evaluation --------------------------------------------------------------

    def rho_jet(self, z_jets) -> Jet:
        return ex.eval_jet(self.rho, SimpleNamespace(z_jets=z_jets, w_jets=None))

    def rho_dz_jets(self, z_jets):
        env = SimpleNamespace(z_jets=z_jets, w_jets=None)
        return [ex.eval_jet(d, env) for d in self.rho_dz]

    # -- points ------------------------------------------------------------------------

    def point(self, z) -> SurfacePoint:
        z = np.asarray(z, dtype=np.complex128)
        res = abs(self.rho_value(z))
        limit = self.tol.point_residual * (1.0 + float(np.sum(np.abs(z) ** 2)))
        if res > limit:
            raise ValueError(f"point is off the surface: |rho| = {res:.3e}")
        return SurfacePoint(z, res)

    def linear_image(self, m: np.ndarray) -> "Surface":
        """The surface M(S), with defining function rho(M^{-1} z)."""
        m = np.asarray(m, dtype=np.complex128)
        minv = np.linalg.inv(m)
        z_map = [ex.linear_combination(minv[j], "z") for j in range(self.n)]
        rho2 = ex.substitute(self.rho, z_map=z_map)
        return Surface(self.n, rho2, f"linear-image({self.spec})",
                       kind="poly", tol=self.tol)


def _fmt_weight(a: float) -> str:
    return repr(int(a)) if float(a).is_integer() else repr(a)


# -- dual map and projection -----------------------------------------------------------


def dual_map(surface: Surface, p: SurfacePoint) -> np.ndarray:
    """w(z) at p; raises NoHitZeroViolated if the tangent plane hits 0."""
    dz = surface.rho_dz_values(p.z)
    denom = np.dot(p.z, dz)
    if abs(denom) <= surface.tol.no_hit_zero:
        raise NoHitZeroViolated(
            f"|sum z_j drho/dz_j| = {abs(denom):.3e} at {p.z}"
        )
    return dz / denom


def project_to_surface(surface: Surface, ambient, max_iter: int = 50) -> SurfacePoint:
    """Newton projection along the gradient direction from an ambient seed."""
    z = np.asarray(ambient, dtype=np.complex128).copy()
    tol = surface.tol
    for _ in range(max_iter):
        val = surface.rho_value(z)
        scale = 1.0 + float(np.sum(np.abs(z) ** 2))
        if abs(val) < tol.projection_target * scale:
            return SurfacePoint(z, abs(val))
        g = surface.grad_real(z)
        g2 = float(np.sum(np.abs(g) ** 2))
        if g2 < 1e-24:
            raise ProjectionDiverged("gradient vanished during projection")
        z = z - (val / g2) * g
        if not np.all(np.isfinite(z)):
            raise ProjectionDiverged("projection produced non-finite values")
    raise ProjectionDiverged(f"no convergence after {max_iter} iterations")


def sample_points(surface: Surface, num: int, seed: int) -> list[SurfacePoint]:
    """Seeded ambient complex Gaussians projected onto the surface."""
    rng = np.random.default_rng(seed)
    pts = []
    attempts = 0
    while len(pts) < num:
        attempts += 1
        if attempts > 50 * num:
            raise ProjectionDiverged("sampling failed to converge on points")
        seed_vec = rng.standard_normal(surface.n) + 1j * rng.standard_normal(surface.n)
        try:
            pts.append(project_to_surface(surface, seed_vec))
        except ProjectionDiverged:
            continue
    return pts


# -- charts --------------------------------------------------------------------------------


class Chart:
    """Order-K graph parametrization of S at a base point.

    Chart variables t_0..t_{2n-2} move along an orthonormal real tangent
    frame; the graph coordinate (solved by the implicit function theorem in
    jet arithmetic) is taken along the unit gradient direction. z_jets and
    w_jets are the ambient coordinates and dual-map components as jets of the
    chart variables.
    """

    def __init__(self, surface, base, order, frame, normal, z_jets, w_jets,
                 graph_jet, rho_check):
        self.surface = surface
        self.base = base
        self.order = order
        self.frame = frame          # (2n-1, n) complex rows = real tangent dirs
        self.normal = normal        # (n,) complex, unit real vector
        self.z_jets = z_jets
        self.w_jets = w_jets
        self.graph_jet = graph_jet
        self.rho_check = rho_check
        self.space = z_jets[0].space
        self._memo = {}

    @property
    def n(self) -> int:
        return self.surface.n

    def memo(self, key, fn):
        if key not in self._memo:
            self._memo[key] = fn()
        return self._memo[key]

    @property
    def z0(self) -> np.ndarray:
        return self.base.z

    @cached_property
    def w0(self) -> np.ndarray:
        return np.array([w.value for w in self.w_jets])

    @cached_property
    def zbar_jets(self):
        return [z.conj() for z in self.z_jets]

    @cached_property
    def z_rows(self) -> np.ndarray:
        """(n, 2n-1): d z_j / d t_i at the base point."""
        idx = [self.space.var_index(i) for i in range(self.space.num_vars)]
        return np.array([[z.coeffs[k] for k in idx] for z in self.z_jets])

    @cached_property
    def w_rows(self) -> np.ndarray:
        idx = [self.space.var_index(i) for i in range(self.space.num_vars)]
        return np.array([[w.coeffs[k] for k in idx] for w in self.w_jets])

    @cached_property
    def z_real(self) -> np.ndarray:
        """(2n, 2n-1) real differential of the chart map."""
        return real_matrix(self.z_rows)

    @cached_property
    def w_real(self) -> np.ndarray:
        return real_matrix(self.w_rows)

    @cached_property
    def _z_real_pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.z_real)

    def pullback(self, ambient, rtol: float = 1e-8) -> np.ndarray:
        """Chart coordinates of an ambient tangent vector (real (2n,) or
        complexified complex (2n,) array)."""
        v = np.asarray(ambient)
        c = self._z_real_pinv @ v
        res = np.linalg.norm(self.z_real @ c - v)
        if res > rtol * (1.0 + np.linalg.norm(v)):
            raise ChartError(f"vector is not tangent to S (residual {res:.3e})")
        return c

    @cached_property
    def h_basis(self):
        """Real basis of H_p = ker(sum w_j dz_j) as chart/ambient data.

        Returns (E, basis_ambient, basis_chart): E is a complex orthonormal
        basis of the kernel of the w covector (n x (n-1)); basis_ambient the
        real vectors (E_1, iE_1, ...) as a real (2n, 2n-2) matrix; basis_chart
        their chart coordinates, real (2n-1, 2n-2).
        """
        e = null_space_complex(self.w0[None, :])
        cols = []
        for a in range(e.shape[1]):
            cols.append(e[:, a])
            cols.append(1j * e[:, a])
        basis_c = np.array(cols).T  # (n, 2n-2)
        basis_ambient = real_matrix(basis_c)
        basis_chart = np.empty((self.space.num_vars, basis_ambient.shape[1]))
        for a in range(basis_ambient.shape[1]):
            basis_chart[:, a] = np.real(self.pullback(basis_ambient[:, a]))
        return e, basis_ambient, basis_chart


def make_chart(surface: Surface, p: SurfacePoint, order: int = 5,
               frame_seed: int | None = None) -> Chart:
    """Build an order-K chart at p. `frame_seed` rotates the tangent frame
    (intrinsic results must not depend on it)."""
    n = surface.n
    grad = surface.grad_real(p.z)
    gnorm = np.linalg.norm(r_of(grad))
    if gnorm <= 1e-8:
        raise ChartError(f"|grad rho| = {gnorm:.3e} at base point")
    normal = grad / gnorm

    frame_real = null_space_real(r_of(grad)[None, :]).T  # (2n-1, 2n)
    if frame_seed is not None:
        rng = np.random.default_rng(frame_seed)
        q, r = np.linalg.qr(rng.standard_normal((2 * n - 1, 2 * n - 1)))
        q = q * np.sign(np.diag(r))
        frame_real = q.T @ frame_real
    frame = np.array([c_of(row) for row in frame_real])  # (2n-1, n) complex

    # ambient jet space: chart variables then the graph variable last
    amb = get_space(2 * n, order)
    z_amb = []
    for j in range(n):
        c = np.zeros(amb.size, dtype=np.complex128)
        c[0] = p.z[j]
        for i in range(2 * n - 1):
            c[amb.var_index(i)] = frame[i, j]
        c[amb.var_index(2 * n - 1)] = normal[j]
        z_amb.append(Jet(amb, c))
    rho_amb = surface.rho_jet(z_amb)
    g = implicit_solve(rho_amb, 2 * n - 1)

    chart_space = get_space(2 * n - 1, order)
    z_jets = []
    for j in range(n):
        c = np.zeros(chart_space.size, dtype=np.complex128)
        c[0] = p.z[j]
        for i in range(2 * n - 1):
            c[chart_space.var_index(i)] = frame[i, j]
        z_jets.append(Jet(chart_space, c) + g * normal[j])

    rho_check = surface.rho_jet(z_jets)
    limit = surface.tol.chart_residual * (1.0 + float(np.sum(np.abs(p.z) ** 2)))
    if rho_check.max_abs() > limit:
        raise ChartError(
            f"rho along chart has residual {rho_check.max_abs():.3e}"
        )

    dz_jets = surface.rho_dz_jets(z_jets)
    denom = None
    for zj, dj in zip(z_jets, dz_jets):
        term = zj * dj
        denom = term if denom is None else denom + term
    if abs(denom.value) <= surface.tol.no_hit_zero:
        raise NoHitZeroViolated(
            f"|sum z_j drho/dz_j| = {abs(denom.value):.3e} along chart"
        )
    inv = denom.inverse()
    w_jets = [dj * inv for dj in dz_jets]

    return Chart(surface, p, order, frame, normal, z_jets, w_jets, g, rho_check)


# -- structure report ---------------------------------------------------------------------


@dataclass(frozen=True)
class StructureReport:
    no_hit_0_margin: float
    no_hit_0_ok: bool
    addendum_margin: float
    addendum_ok: bool
    levi_min_eig: float
    levi_ok: bool
    star_margin: float
    star_pair_margins: dict
    star_ok: bool
    dtheta_min_sv: float
    dtheta_ok: bool

    @property
    def structural_ok(self) -> bool:
        """All structural hypotheses hold. The (star) margin is deliberately
        excluded: it is a pointwise convenience condition for the
        higher-dimensional decomposition test, not a defect of S."""
        return (self.no_hit_0_ok and self.addendum_ok and self.levi_ok
                and self.dtheta_ok)


def star_margins(z: np.ndarray, w: np.ndarray) -> dict:
    """|z_j w_j + z_k w_k| for all pairs j <= k (1-based keys)."""
    n = len(z)
    zw = z * w
    return {
        (j + 1, k + 1): float(abs(zw[j] + zw[k]))
        for j in range(n) for k in range(j, n)
    }


def check_structure(surface: Surface, p: SurfacePoint, order: int = 3) -> StructureReport:
    """Margins for the structural hypotheses at p.

    Strong C-convexity itself admits no finite test; this verifies necessary
    numerical consequences only (Levi positivity for the given rho, the dual
    map being nowhere C-linear on complex lines, nondegeneracy of d theta on
    the maximal complex subspace).
    """
    tol = surface.tol
    dz = surface.rho_dz_values(p.z)
    no_hit = float(abs(np.dot(p.z, dz)))

    chart = make_chart(surface, p, order=order)
    e, basis_ambient, basis_chart = chart.h_basis
    n = surface.n

    # Addendum margin: the dual-map derivative fails C-linearity on every
    # complex line of H_p.
    d_h = chart.w_real @ basis_chart  # (2n, 2n-2)
    opnorm = float(np.linalg.norm(d_h, 2))
    j_amb = j_matrix(n)
    margins = []
    for a in range(e.shape[1]):
        v = basis_ambient[:, 2 * a]
        jv = j_amb @ v
        dv = chart.w_real @ np.real(chart.pullback(v))
        djv = chart.w_real @ np.real(chart.pullback(jv))
        margins.append(float(np.linalg.norm(djv - j_amb @ dv)))
    addendum_margin = min(margins)
    addendum_ok = addendum_margin > tol.margin_flag * max(opnorm, 1e-30)

    # Levi form of rho on an orthonormal complex basis of H_p.
    hess = surface.hermitian_hessian(p.z)
    levi = e.conj().T @ hess @ e
    levi_min = float(np.min(np.linalg.eigvalsh(0.5 * (levi + levi.conj().T))))

    w = chart.w0
    pair_margins = star_margins(p.z, w)
    star_min = min(pair_margins.values())

    # d theta = sum dz_j ^ dw_j restricted to H_p
    f_full = chart.z_rows.T @ chart.w_rows - chart.w_rows.T @ chart.z_rows
    f_h = basis_chart.T @ f_full @ basis_chart
    svals = np.linalg.svd(f_h, compute_uv=False)
    dtheta_min = float(svals[-1]) if svals.size else 0.0

    return StructureReport(
        no_hit_0_margin=no_hit,
        no_hit_0_ok=no_hit > tol.margin_flag,
        addendum_margin=addendum_margin,
        addendum_ok=addendum_ok,
        levi_min_eig=levi_min,
        levi_ok=levi_min > tol.eigen_flag,
        star_margin=star_min,
        star_pair_margins=pair_margins,
        star_ok=star_min > tol.margin_flag,
        dtheta_min_sv=dtheta_min,
        dtheta_ok=dtheta_min > tol.margin_flag,
    )


# -- coordinate repair for the (star) condition ---------------------------------------------


def _random_unitary(rng, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    return q * (d / np.abs(d))


def repair_star(surface: Surface, p: SurfacePoint, seed: int,
                max_tries: int = 100) -> np.ndarray:
    """Invertible M such that after z -> Mz (and w -> M^{-T} w) every pair sum
    z_j w_j + z_k w_k at the image of p has magnitude above threshold.

    Deterministic for a fixed seed: each attempt draws a unitary (to clear
    zero entries) followed by a random shear in the first coordinate. Returns
    the identity when no repair is needed.
    """
    if surface.n <= 2:
        raise ValueError("coordinate repair applies to n > 2 only")
    tol = surface.tol.star_repair
    w = dual_map(surface, p)
    if min(star_margins(p.z, w).values()) > tol:
        return np.eye(surface.n, dtype=np.complex128)
    rng = np.random.default_rng(seed)
    n = surface.n
    for _ in range(max_tries):
        u = _random_unitary(rng, n)
        shear = np.eye(n, dtype=np.complex128)
        shear[0, 1:] = rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1)
        m = shear @ u
        z1 = m @ p.z
        w1 = np.linalg.solve(m.T, w)
        if min(np.abs(z1).min(), np.abs(w1).min()) <= 1e-8:
            continue
        if min(star_margins(z1, w1).values()) > tol:
            return m
    raise RepairFailed(f"no admissible transformation after {max_tries} attempts")
