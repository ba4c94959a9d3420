"""
Structure of the admissible region of a single tetrahedron.

R^4_{>0} splits into the admissible set (Q > 0) and four degenerate sets V_mu,
V_mu = {r : r_mu <= boundary function of the other three radii}. The boundary
function is the radius of the inner Soddy sphere tangent to three mutually
tangent spheres, in the Euclidean or the hyperbolic background.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.settings import settings
from core.exceptions import InvariantViolation, NoFiniteRootError
from core.tetgeom import OTHERS, Geometry, as_radii, q_value, solid_angles

logger = logging.getLogger(__name__)

ADMISSIBLE = -1


@dataclass(frozen=True)
class RegionLabel:
    degenerate_vertex: Optional[int] = None

    @property
    def is_admissible(self) -> bool:
        return self.degenerate_vertex is None

    @classmethod
    def from_code(cls, code: int) -> "RegionLabel":
        return cls(None if code == ADMISSIBLE else int(code))

    def __str__(self) -> str:
        if self.is_admissible:
            return "Admissible"
        return f"Degenerate({self.degenerate_vertex})"


@dataclass(frozen=True)
class SoddyCoefficients:
    """A x^2 + B x + C = 0 in x = r_i (Euclidean) or x = tanh r_i (hyperbolic)."""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    geometry: Geometry

    @property
    def discriminant(self) -> np.ndarray:
        return self.B * self.B - 4.0 * self.A * self.C

    def roots(self):
        """Textbook pair ((-B + sqrt D)/2A, (-B - sqrt D)/2A); undefined where A = 0."""
        root = np.sqrt(self.discriminant)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (-self.B + root) / (2.0 * self.A), (-self.B - root) / (2.0 * self.A)


def _triple(rj, rk, rl):
    return (np.asarray(rj, dtype=float), np.asarray(rk, dtype=float), np.asarray(rl, dtype=float))


def _coefficients(xj, xk, xl):
    pairs = xj * xk + xj * xl + xk * xl
    squares = (xj * xk) ** 2 + (xj * xl) ** 2 + (xk * xl) ** 2
    product = xj * xk * xl
    return pairs * pairs - 2.0 * squares, 2.0 * product * pairs, -product * product


def soddy_coefficients(rj, rk, rl, geometry: Geometry) -> SoddyCoefficients:
    rj, rk, rl = _triple(rj, rk, rl)
    if geometry is Geometry.EUCLIDEAN:
        a, b, c = _coefficients(rj, rk, rl)
    else:
        tj, tk, tl = np.tanh(rj), np.tanh(rk), np.tanh(rl)
        a, b, c = _coefficients(tj, tk, tl)
        a = a + 4.0 * (tj * tk * tl) ** 2
    return SoddyCoefficients(A=a, B=b, C=c, geometry=geometry)


def euclidean_discriminant(rj, rk, rl) -> np.ndarray:
    rj, rk, rl = _triple(rj, rk, rl)
    return 16.0 * (rj * rk * rl) ** 3 * (rj + rk + rl)


def _selected_root(coeffs: SoddyCoefficients, scale: np.ndarray) -> np.ndarray:
    # 2C/(-B - sqrt D) equals (-B + sqrt D)/2A without the cancellation near A = 0.
    a, b, c = np.broadcast_arrays(coeffs.A, coeffs.B, coeffs.C)
    root = 2.0 * c / (-b - np.sqrt(coeffs.discriminant))
    flat = np.abs(a) <= settings.BRANCH_EPSILON * scale ** 4
    return np.where(flat, -c / b, root)


def soddy_radius_euclidean(rj, rk, rl) -> np.ndarray:
    rj, rk, rl = _triple(rj, rk, rl)
    scale = np.maximum(np.maximum(rj, rk), rl)
    return _selected_root(soddy_coefficients(rj, rk, rl, Geometry.EUCLIDEAN), scale)


def soddy_radius_hyperbolic(rj, rk, rl) -> np.ndarray:
    rj, rk, rl = _triple(rj, rk, rl)
    scale = np.tanh(np.maximum(np.maximum(rj, rk), rl))
    t = _selected_root(soddy_coefficients(rj, rk, rl, Geometry.HYPERBOLIC), scale)
    if not np.all((t > 0.0) & (t < 1.0)):
        raise NoFiniteRootError(
            "tangent configuration has no finite critical sphere (tanh r_i outside (0, 1))"
        )
    return np.arctanh(t)


def boundary_radius(rj, rk, rl, geometry: Geometry) -> np.ndarray:
    if geometry is Geometry.EUCLIDEAN:
        return soddy_radius_euclidean(rj, rk, rl)
    return soddy_radius_hyperbolic(rj, rk, rl)


def boundary_radii(r, geometry: Geometry) -> np.ndarray:
    """For each vertex, the boundary function evaluated at the other three radii."""
    r = as_radii(r)
    return np.stack(
        [boundary_radius(*(r[..., v] for v in OTHERS[mu]), geometry) for mu in range(4)],
        axis=-1,
    )


def classify_many(r, geometry: Geometry) -> np.ndarray:
    """Label codes: ADMISSIBLE (-1) or the index of the degenerate vertex."""
    r = as_radii(r)
    flat = r.reshape(-1, 4)
    codes = np.full(flat.shape[0], ADMISSIBLE, dtype=int)
    degenerate = q_value(flat, geometry) <= 0.0
    if np.any(degenerate):
        inner = flat[degenerate]
        bounds = boundary_radii(inner, geometry)
        hits = inner <= bounds * (1.0 + settings.BOUNDARY_RELATIVE_TOLERANCE)
        counts = hits.sum(axis=-1)
        if np.any(counts != 1):
            first = int(np.flatnonzero(counts != 1)[0])
            raise InvariantViolation(
                f"degenerate radii {inner[first].tolist()} satisfy {int(counts[first])} "
                "V-conditions, expected exactly 1"
            )
        codes[degenerate] = np.argmax(hits, axis=-1)
    return codes.reshape(r.shape[:-1])


def classify(r, geometry: Geometry) -> RegionLabel:
    r = as_radii(r)
    if r.shape != (4,):
        raise ValueError("classify takes a single tetrahedron; use classify_many for batches")
    return RegionLabel.from_code(int(classify_many(r, geometry)))


def extended_solid_angles(r, geometry: Geometry) -> np.ndarray:
    """Solid angles on the admissible set, (2pi at mu, 0 elsewhere) on V_mu."""
    r = as_radii(r)
    flat = r.reshape(-1, 4)
    codes = classify_many(flat, geometry)
    alpha = np.zeros(flat.shape)
    admissible = codes == ADMISSIBLE
    if np.any(admissible):
        alpha[admissible] = solid_angles(flat[admissible], geometry).solid_angles
    rows = np.flatnonzero(~admissible)
    alpha[rows, codes[rows]] = 2.0 * np.pi
    return alpha.reshape(r.shape)
