"""Lift of S into the affine incidence quadric {z.w = 1} in C^4 (n = 2).

S embeds by p -> (z(p), w(p)); the image is a totally real 3-manifold inside
the complex 3-manifold I' = {z1 w1 + z2 w2 = 1}. The holomorphic fields

    SX = z2 d/dw1 - z1 d/dw2
    ST = w2 d/dz1 - w1 d/dz2
    SY = -z1 d/dz1 - z2 d/dz2 + w1 d/dw1 + w2 d/dw2

are tangent to I', and the intrinsic fields X, T, Upsilon push forward to
twice the tangential parts of SX, ST, SY along the lift (and their (1,0)
parts recover the holomorphic fields exactly).

Vectors of C^4 appear in two encodings: complexified tangent vectors as
complex 8-vectors over the real coordinate basis, and their d-zeta components
as complex 4-vectors. For a real tangent vector the 4-vector encoding is
faithful; for a holomorphic field value it is the coefficient vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotTotallyReal, ResidualTooLarge
from .fields import build_field
from .hypersurface import Surface, SurfacePoint, dual_map, j_matrix, make_chart, r_of

_J8 = j_matrix(4)

# coefficient matrices of the linear holomorphic fields (rows: z1,z2,w1,w2)
_AX = np.zeros((4, 4), dtype=np.complex128)
_AX[2, 1] = 1.0
_AX[3, 0] = -1.0
_AT = np.zeros((4, 4), dtype=np.complex128)
_AT[0, 3] = 1.0
_AT[1, 2] = -1.0
_AY = np.diag([-1.0, -1.0, 1.0, 1.0]).astype(np.complex128)

FIELD_MATRICES = {"X": _AX, "T": _AT, "Y": _AY}


@dataclass(frozen=True, eq=False)
class IncidencePoint:
    zw: np.ndarray       # (4,) complex: (z1, z2, w1, w2)
    residual: float      # |z1 w1 + z2 w2 - 1|


def incidence_residual(zw: np.ndarray) -> float:
    return float(abs(zw[0] * zw[2] + zw[1] * zw[3] - 1.0))


def lift(surface: Surface, p: SurfacePoint) -> IncidencePoint:
    """(z, w(z)) on the incidence quadric; the constraint holds by the
    normalization of the dual map."""
    if surface.n != 2:
        raise ValueError("the incidence lift is implemented for n = 2")
    w = dual_map(surface, p)
    zw = np.concatenate([p.z, w])
    res = incidence_residual(zw)
    if res > 1e-10 * (1.0 + float(np.sum(np.abs(zw) ** 2))):
        raise ResidualTooLarge(f"incidence constraint residual {res:.3e}")
    return IncidencePoint(zw, res)


def holomorphic_field_value(name: str, zw: np.ndarray) -> np.ndarray:
    """Coefficient 4-vector of SX / ST / SY at a point of C^4."""
    return FIELD_MATRICES[name] @ zw


def holomorphic_bracket_value(a: str, b: str, zw: np.ndarray) -> np.ndarray:
    """[A, B] evaluated at zw; for linear fields the bracket has matrix
    M_B M_A - M_A M_B."""
    ma, mb = FIELD_MATRICES[a], FIELD_MATRICES[b]
    return (mb @ ma - ma @ mb) @ zw


def _c8_from_holomorphic(a: np.ndarray) -> np.ndarray:
    """sum a_j d/dzeta_j as a complexified real-basis vector."""
    out = np.empty(8, dtype=np.complex128)
    out[0::2] = 0.5 * a
    out[1::2] = -0.5j * a
    return out


def _pack4(v8: np.ndarray) -> np.ndarray:
    """d-zeta components of a complexified vector."""
    return v8[0::2] + 1j * v8[1::2]


def gamma_tangent_basis(chart) -> np.ndarray:
    """Real (8, 3) basis of the tangent space of the lifted surface,
    from the chart differentials of (z, w)."""
    cols = []
    for i in range(chart.space.num_vars):
        amb4 = np.concatenate([chart.z_rows[:, i], chart.w_rows[:, i]])
        cols.append(r_of(amb4))
    return np.array(cols).T


def total_reality_angle(basis: np.ndarray) -> float:
    """Smallest principal angle between span(basis) and J span(basis)."""
    q1, _ = np.linalg.qr(basis)
    q2, _ = np.linalg.qr(_J8 @ basis)
    svals = np.linalg.svd(q1.T @ q2, compute_uv=False)
    return float(np.arccos(min(1.0, float(svals[0]))))


def tangential_part(base: IncidencePoint, tangent_basis: np.ndarray, v,
                    holomorphic: bool = False, angle_floor: float = 1e-6):
    """Tangential component of a vector along the lifted surface.

    `tangent_basis` must span the real 3-dimensional tangent space (rank 3).
    `v` is a complex 4-vector: with holomorphic=False it encodes a real
    tangent-type vector by its d-zeta components; with holomorphic=True it is
    the coefficient vector of a (1,0) field such as SX. Returns the d-zeta
    components of the tangential part (complex coefficients allowed).
    """
    basis = np.asarray(tangent_basis, dtype=float)
    if basis.shape[0] != 8:
        basis = basis.T
    if np.linalg.matrix_rank(basis, tol=1e-10) != 3:
        raise ValueError("tangent basis must have rank 3")
    angle = total_reality_angle(basis)
    if angle < angle_floor:
        raise NotTotallyReal(f"principal angle {angle:.3e} below {angle_floor:g}")
    v = np.asarray(v, dtype=np.complex128)
    if holomorphic:
        v8 = _c8_from_holomorphic(v)
    else:
        v8 = np.empty(8, dtype=np.complex128)
        v8[0::2] = v.real
        v8[1::2] = v.imag
    a = np.concatenate([basis, _J8 @ basis], axis=1).astype(np.complex128)
    x, *_ = np.linalg.lstsq(a, v8, rcond=None)
    res = float(np.linalg.norm(a @ x - v8))
    if res > 1e-8 * (1.0 + float(np.linalg.norm(v8))):
        raise ResidualTooLarge(
            f"vector is not tangent to the incidence quadric (residual {res:.3e})"
        )
    tang8 = basis.astype(np.complex128) @ x[:3]
    return _pack4(tang8)


@dataclass
class Section4Report:
    push_vs_tangential: dict   # field name -> |push - 2 * tangential part|
    type_identity: dict        # field name -> |(push)^{(1,0)} - holomorphic field|
    total_reality_angle: float

    @property
    def max_residual(self) -> float:
        return max(max(self.push_vs_tangential.values()),
                   max(self.type_identity.values()))


def check_section4(surface: Surface, p: SurfacePoint, order: int = 3) -> Section4Report:
    """Pushforward identities for X, T, Upsilon at one point (n = 2)."""
    chart = make_chart(surface, p, order=order)
    base = lift(surface, p)
    basis = gamma_tangent_basis(chart)
    angle = total_reality_angle(basis)

    names = {"X": "X", "T": "T", "Upsilon": "Y"}
    push_res = {}
    type_res = {}
    for kind, script in names.items():
        f = build_field(chart, kind)
        c = f.value()
        push8 = basis.astype(np.complex128) @ c
        push4 = _pack4(push8)
        script_val = holomorphic_field_value(script, base.zw)
        tang4 = tangential_part(base, basis, script_val, holomorphic=True)
        push_res[kind] = float(np.linalg.norm(push4 - 2.0 * tang4))
        part10 = 0.5 * (push8 - 1j * (_J8 @ push8))
        type_res[kind] = float(np.linalg.norm(_pack4(part10) - script_val))
    return Section4Report(push_res, type_res, angle)
