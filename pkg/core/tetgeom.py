"""
Per-tetrahedron metric geometry of a sphere packing.

Every function takes radii with a trailing axis of length 4 and any number
of leading batch axes; results keep the batch axes.
"""
import enum
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from config.settings import settings
from core.exceptions import AdmissibilityError, InvariantViolation, NumericDomainError

logger = logging.getLogger(__name__)


class Geometry(enum.Enum):
    EUCLIDEAN = "euclidean"
    HYPERBOLIC = "hyperbolic"

    def __str__(self) -> str:
        return self.value


# --- Combinatorics of a single tetrahedron ---

EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
EDGE_INDEX = {pair: n for n, pair in enumerate(EDGES)}
EDGE_INDEX.update({(j, i): n for (i, j), n in list(EDGE_INDEX.items())})

# OTHERS[mu] are the three vertices other than mu, ascending.
OTHERS = tuple(tuple(v for v in range(4) if v != mu) for mu in range(4))

_EDGE_I = np.array([i for i, _ in EDGES])
_EDGE_J = np.array([j for _, j in EDGES])

# Face angle [mu, k] sits at mu in the face that omits OTHERS[mu][k].
_ADJACENT_A = np.empty((4, 3), dtype=int)
_ADJACENT_B = np.empty((4, 3), dtype=int)
_OPPOSITE = np.empty((4, 3), dtype=int)
for _mu in range(4):
    for _k in range(3):
        _a, _b = (v for n, v in enumerate(OTHERS[_mu]) if n != _k)
        _ADJACENT_A[_mu, _k] = EDGE_INDEX[(_mu, _a)]
        _ADJACENT_B[_mu, _k] = EDGE_INDEX[(_mu, _b)]
        _OPPOSITE[_mu, _k] = EDGE_INDEX[(_a, _b)]

# Position of each edge's far endpoint in the OTHERS list of the near endpoint.
_SLOT_AT_I = np.array([OTHERS[i].index(j) for i, j in EDGES])
_SLOT_AT_J = np.array([OTHERS[j].index(i) for i, j in EDGES])


@dataclass(frozen=True)
class TetGeometry:
    radii: np.ndarray
    geometry: Geometry
    lengths: np.ndarray          # (..., 6) in EDGES order
    face_angles: np.ndarray      # (..., 4, 3)
    vertex_dihedrals: np.ndarray  # (..., 4, 3), edge (mu, OTHERS[mu][k]) seen from mu
    dihedral_angles: np.ndarray  # (..., 6)
    solid_angles: np.ndarray     # (..., 4)
    q_value: np.ndarray          # (...)


def as_radii(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape[-1:] != (4,):
        raise ValueError(f"expected a trailing axis of 4 radii, got shape {r.shape}")
    return r


def edge_lengths(r) -> np.ndarray:
    """l_{mu nu} = r_mu + r_nu, in EDGES order."""
    r = as_radii(r)
    return r[..., _EDGE_I] + r[..., _EDGE_J]


# --- Nondegeneracy quadratics ---

def _descartes_form(k: np.ndarray) -> np.ndarray:
    s = k.sum(axis=-1)
    return s * s - 2.0 * (k * k).sum(axis=-1)


def q_euclidean(r) -> np.ndarray:
    return _descartes_form(1.0 / as_radii(r))


def q_euclidean_grouped(r) -> np.ndarray:
    """Sum of 1/r_i (1/r_j + 1/r_k + 1/r_l - 1/r_i) over the four vertices."""
    k = 1.0 / as_radii(r)
    s = k.sum(axis=-1, keepdims=True)
    return (k * (s - 2.0 * k)).sum(axis=-1)


def q_euclidean_gradient(r) -> np.ndarray:
    r = as_radii(r)
    k = 1.0 / r
    s = k.sum(axis=-1, keepdims=True)
    return -2.0 / (r * r) * (s - 2.0 * k)


def q_hyperbolic(r) -> np.ndarray:
    return _descartes_form(1.0 / np.tanh(as_radii(r))) + 4.0


def q_value(r, geometry: Geometry) -> np.ndarray:
    if geometry is Geometry.EUCLIDEAN:
        return q_euclidean(r)
    return q_hyperbolic(r)


# --- Hyperbolic Gram matrix oracle ---

def gram_matrix(r) -> np.ndarray:
    """4x4 matrix of cosh l_{mu nu} with unit diagonal."""
    r = as_radii(r)
    gram = np.cosh(r[..., :, None] + r[..., None, :])
    idx = np.arange(4)
    gram[..., idx, idx] = 1.0
    return gram


def gram_minor_check(r) -> np.ndarray:
    """True where every principal minor of order >= 2 of the Lorentzian Gram matrix is negative.

    The vertex Gram matrix in the hyperboloid model is -gram_matrix(r), so a minor of
    order k is (-1)^k times the corresponding minor of the cosh matrix.
    """
    gram = gram_matrix(r)
    ok = np.ones(gram.shape[:-2], dtype=bool)
    for order in (2, 3, 4):
        for rows in itertools.combinations(range(4), order):
            rows = list(rows)
            minor = (-1.0) ** order * np.linalg.det(gram[..., rows, :][..., :, rows])
            ok &= minor < 0.0
    return ok


def _checked_cosine(cosine: np.ndarray, what: str) -> np.ndarray:
    tol = settings.CLAMP_TOLERANCE
    if not np.all(np.isfinite(cosine)):
        raise NumericDomainError(f"{what}: non-finite cosine")
    if np.any(np.abs(cosine) > 1.0 + tol):
        worst = float(np.max(np.abs(cosine)))
        raise NumericDomainError(f"{what}: cosine {worst!r} outside [-1, 1] beyond tolerance {tol}")
    return np.clip(cosine, -1.0, 1.0)


def gram_dihedral_angles(r) -> np.ndarray:
    """Hyperbolic dihedral angles in EDGES order from the inverse Gram matrix."""
    inverse = np.linalg.inv(gram_matrix(r))
    angles = []
    for i, j in EDGES:
        k, l = (v for v in range(4) if v not in (i, j))
        cosine = inverse[..., k, l] / np.sqrt(inverse[..., k, k] * inverse[..., l, l])
        angles.append(np.arccos(_checked_cosine(cosine, "Gram dihedral")))
    return np.stack(angles, axis=-1)


# --- Euclidean volume and areas ---

def cm_volume(r) -> np.ndarray:
    """Euclidean volume from the Cayley-Menger determinant, 288 V^2 = det CM."""
    r = as_radii(r)
    if np.any(q_euclidean(r) <= 0.0):
        raise AdmissibilityError("Cayley-Menger volume needs Q^E > 0")
    lengths = edge_lengths(r)
    cm = np.ones(r.shape[:-1] + (5, 5))
    cm[..., 0, 0] = 0.0
    idx = np.arange(1, 5)
    cm[..., idx, idx] = 0.0
    for n, (i, j) in enumerate(EDGES):
        cm[..., i + 1, j + 1] = cm[..., j + 1, i + 1] = lengths[..., n] ** 2
    det = np.linalg.det(cm)
    if np.any(det <= 0.0):
        raise InvariantViolation("Cayley-Menger determinant is not positive although Q^E > 0")
    return np.sqrt(det / 288.0)


def triangle_area(lengths) -> np.ndarray:
    """Heron's formula in the cancellation-free ordering a >= b >= c."""
    sides = -np.sort(-np.asarray(lengths, dtype=float), axis=-1)
    a, b, c = sides[..., 0], sides[..., 1], sides[..., 2]
    product = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    if np.any(product < 0.0):
        raise NumericDomainError("triangle inequality violated")
    return 0.25 * np.sqrt(product)


# --- Angles ---

def _excesses(a, b, c, what: str):
    """Semi-perimeter s and s - a, s - b, s - c, checked against the triangle inequality."""
    s = 0.5 * (a + b + c)
    sa, sb, sc = 0.5 * (b + c - a), 0.5 * (a + c - b), 0.5 * (a + b - c)
    worst = np.minimum(np.minimum(sa, sb), sc)
    if not np.all(np.isfinite(worst)):
        raise NumericDomainError(f"{what}: non-finite side")
    if np.any(worst < -settings.CLAMP_TOLERANCE * s):
        raise NumericDomainError(f"{what}: triangle inequality violated by {float(-np.min(worst))!r}")
    return s, np.maximum(sa, 0.0), np.maximum(sb, 0.0), np.maximum(sc, 0.0)


def _one_minus_exp(x):
    # 1 - e^{-2x}, so that sinh x = e^x (1 - e^{-2x}) / 2 never overflows
    return -np.expm1(-2.0 * x)


def triangle_angle(adjacent_a, adjacent_b, opposite, geometry: Geometry) -> np.ndarray:
    """
    Angle between sides `adjacent_a` and `adjacent_b` of a triangle.

    Half-angle tangent form, tan^2(g/2) = (s-a)(s-b) / (s(s-c)) and its sinh
    counterpart, accurate for angles near 0 and near pi. The hyperbolic ratio
    is evaluated as e^{c-a-b} times bounded factors.
    """
    a = np.asarray(adjacent_a, dtype=float)
    b = np.asarray(adjacent_b, dtype=float)
    c = np.asarray(opposite, dtype=float)
    s, sa, sb, sc = _excesses(a, b, c, "face angle")
    if geometry is Geometry.EUCLIDEAN:
        num, den = sa * sb, s * sc
    else:
        num = np.exp(c - a - b) * _one_minus_exp(sa) * _one_minus_exp(sb)
        den = _one_minus_exp(s) * _one_minus_exp(sc)
    return 2.0 * np.arctan2(np.sqrt(num), np.sqrt(den))


def face_angles(lengths, geometry: Geometry) -> np.ndarray:
    """The 12 face angles, shape (..., 4, 3); see _OPPOSITE for the layout."""
    lengths = np.asarray(lengths, dtype=float)
    return triangle_angle(
        lengths[..., _ADJACENT_A], lengths[..., _ADJACENT_B], lengths[..., _OPPOSITE], geometry
    )


def _link_excesses(theta: np.ndarray):
    # Vertex link is a spherical triangle with sides theta; angle k is opposite side k.
    s, sa, sb, sc = _excesses(theta[..., 0], theta[..., 1], theta[..., 2], "vertex link")
    # a link never exceeds a hemisphere; roundoff can push s just past pi
    return np.minimum(s, np.pi), np.stack([sa, sb, sc], axis=-1)


def _link_dihedrals(s: np.ndarray, rest: np.ndarray) -> np.ndarray:
    sin_rest = np.sin(rest)
    num = np.roll(sin_rest, -1, axis=-1) * np.roll(sin_rest, -2, axis=-1)
    den = np.sin(s)[..., None] * sin_rest
    return 2.0 * np.arctan2(np.sqrt(num), np.sqrt(den))


def _link_areas(s: np.ndarray, rest: np.ndarray) -> np.ndarray:
    """Spherical excess of each vertex link by L'Huilier's formula."""
    t = np.tan(0.5 * rest)
    # paired square roots keep the product clear of underflow for tiny links
    root = np.sqrt(np.tan(0.5 * s) * t[..., 0]) * np.sqrt(t[..., 1] * t[..., 2])
    return 4.0 * np.arctan(root)


def solid_angles(r, geometry: Geometry) -> TetGeometry:
    r = as_radii(r)
    q = q_value(r, geometry)
    if np.any(q <= 0.0):
        raise AdmissibilityError(f"degenerate tetrahedron: Q = {float(np.min(q))!r} <= 0")

    lengths = edge_lengths(r)
    theta = face_angles(lengths, geometry)
    s, rest = _link_excesses(theta)
    vertex_dihedrals = _link_dihedrals(s, rest)

    # Both endpoints see the same edge; average the two evaluations.
    at_i = vertex_dihedrals[..., _EDGE_I, _SLOT_AT_I]
    at_j = vertex_dihedrals[..., _EDGE_J, _SLOT_AT_J]
    dihedrals = 0.5 * (at_i + at_j)

    # alpha_mu is the area of the link, i.e. the dihedrals at mu summed minus pi
    alpha = _link_areas(s, rest)
    return TetGeometry(
        radii=r,
        geometry=geometry,
        lengths=lengths,
        face_angles=theta,
        vertex_dihedrals=vertex_dihedrals,
        dihedral_angles=dihedrals,
        solid_angles=alpha,
        q_value=q,
    )


# --- Angle Jacobian ---

def finite_difference_steps(r) -> np.ndarray:
    r = as_radii(r)
    return np.maximum(settings.FD_MIN_STEP, settings.FD_RELATIVE_STEP * r)


def symmetry_residual(matrix: np.ndarray) -> np.ndarray:
    return np.max(np.abs(matrix - np.swapaxes(matrix, -1, -2)), axis=(-2, -1))


def _stencil(r: np.ndarray, h: np.ndarray):
    # Row nu of the stencil perturbs r_nu.
    shift = h[..., :, None] * np.eye(4)
    return r[..., None, :] + shift, r[..., None, :] - shift


def _fitted_steps(r: np.ndarray, q: np.ndarray, geometry: Geometry) -> np.ndarray:
    """Halve the steps of each tetrahedron until Q moves by at most FD_STENCIL_Q_DRIFT * Q on its stencil."""
    h = finite_difference_steps(r)
    for _ in range(settings.FD_MAX_HALVINGS):
        plus, minus = _stencil(r, h)
        drift = np.maximum(
            np.abs(q_value(plus, geometry) - q[..., None]), np.abs(q_value(minus, geometry) - q[..., None])
        ).max(axis=-1)
        bad = np.any(minus <= 0.0, axis=(-2, -1)) | ~(drift <= settings.FD_STENCIL_Q_DRIFT * q)
        if not np.any(bad):
            return h
        logger.debug("Halving finite-difference steps for %d tetrahedra near the boundary", int(np.sum(bad)))
        h = np.where(bad[..., None], 0.5 * h, h)
    raise AdmissibilityError(
        f"finite-difference stencil cannot fit inside the admissible region after {settings.FD_MAX_HALVINGS} halvings"
    )


def tet_jacobian(r, geometry: Geometry, symmetrize: bool = True) -> np.ndarray:
    """
    J[mu, nu] = d alpha_mu / d r_nu by central differences.

    Steps shrink near the boundary of the admissible region so the stencil
    stays well inside it. The raw matrix must be symmetric to within
    JACOBIAN_SYMMETRY_TOLERANCE (relative to its largest entry); with
    `symmetrize` the result is (J + J^T)/2.
    """
    r = as_radii(r)
    q = q_value(r, geometry)
    if np.any(q <= 0.0):
        raise AdmissibilityError(f"degenerate tetrahedron: Q = {float(np.min(q))!r} <= 0")

    h = _fitted_steps(r, q, geometry)
    plus, minus = _stencil(r, h)
    delta = solid_angles(plus, geometry).solid_angles - solid_angles(minus, geometry).solid_angles
    jacobian = np.swapaxes(delta, -1, -2) / (2.0 * h[..., None, :])

    residual = symmetry_residual(jacobian)
    scale = np.maximum(1.0, np.max(np.abs(jacobian), axis=(-2, -1)))
    if np.any(residual > settings.JACOBIAN_SYMMETRY_TOLERANCE * scale):
        raise InvariantViolation(
            f"angle Jacobian asymmetric: residual {float(np.max(residual))!r}"
        )
    if not symmetrize:
        return jacobian
    return 0.5 * (jacobian + np.swapaxes(jacobian, -1, -2))
