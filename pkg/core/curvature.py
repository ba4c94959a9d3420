"""
Curvature of a sphere packing metric on a closed triangulated 3-manifold.

K_i = 4pi - (sum of solid angles at i over the tetrahedra containing i).
All global sums reduce per-tetrahedron values in stored tetrahedron order
with np.add.at, so results are reproducible bit for bit.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import linalg

from core.complex import Complex
from core.degeneracy import ADMISSIBLE, RegionLabel, classify_many, extended_solid_angles
from core.exceptions import AdmissibilityError, InvalidRadiiError, MeshFormatError, UnsupportedOperationError
from core.tetgeom import Geometry, symmetry_residual, tet_jacobian

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class PackingMetric:
    radii: np.ndarray
    geometry: Geometry

    def __post_init__(self):
        radii = np.array(self.radii, dtype=float)
        if radii.ndim != 1 or radii.size == 0:
            raise InvalidRadiiError(f"radii must be a non-empty vector, got shape {radii.shape}")
        if not np.all(np.isfinite(radii)) or np.any(radii <= 0.0):
            raise InvalidRadiiError("radii must be strictly positive finite numbers")
        radii.setflags(write=False)
        object.__setattr__(self, "radii", radii)

    def with_radii(self, radii) -> "PackingMetric":
        return PackingMetric(radii, self.geometry)


@dataclass(frozen=True)
class CurvatureVector:
    values: np.ndarray
    alpha: float
    extended: bool


@dataclass(frozen=True)
class CurvatureJacobian:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kernel_residual: Optional[float]
    symmetry_residual: float


def _check_pair(c: Complex, m: PackingMetric, require_closed: bool = True) -> None:
    if len(m.radii) != c.vertex_count:
        raise InvalidRadiiError(f"radii: expected {c.vertex_count} entries, got {len(m.radii)}")
    if require_closed and not c.is_closed:
        raise MeshFormatError("complex is not closed: some face is not shared by exactly two tetrahedra")


def tetrahedron_radii(c: Complex, m: PackingMetric) -> np.ndarray:
    return m.radii[c.tetrahedra]


def tetrahedron_labels(c: Complex, m: PackingMetric) -> List[RegionLabel]:
    _check_pair(c, m, require_closed=False)
    codes = classify_many(tetrahedron_radii(c, m), m.geometry)
    return [RegionLabel.from_code(int(code)) for code in codes]


def _require_admissible(c: Complex, m: PackingMetric) -> None:
    codes = classify_many(tetrahedron_radii(c, m), m.geometry)
    bad = np.flatnonzero(codes != ADMISSIBLE)
    if bad.size:
        n = int(bad[0])
        label = RegionLabel.from_code(int(codes[n]))
        raise AdmissibilityError(
            f"tetrahedron {n} {c.tetrahedra[n].tolist()} is {label}"
            + (f" ({bad.size} degenerate in total)" if bad.size > 1 else ""),
            tetrahedron=n,
            label=label,
        )


def _curvature_from_angles(c: Complex, angles: np.ndarray) -> np.ndarray:
    # angles (..., T, 4) -> curvatures (..., N); batched rows share one reduction
    batch = angles.shape[:-2]
    rows = angles.reshape(-1, *angles.shape[-2:])
    totals = np.zeros((len(rows), c.vertex_count))
    np.add.at(totals, (slice(None), c.tetrahedra), rows)
    return (FOUR_PI - totals).reshape(*batch, c.vertex_count)


def scalar_curvature(c: Complex, m: PackingMetric) -> CurvatureVector:
    _check_pair(c, m)
    _require_admissible(c, m)
    # Same evaluation as extended_curvature so the two agree exactly on admissible metrics.
    angles = extended_solid_angles(tetrahedron_radii(c, m), m.geometry)
    return CurvatureVector(values=_curvature_from_angles(c, angles), alpha=0.0, extended=False)


def extended_curvature(c: Complex, m: PackingMetric) -> CurvatureVector:
    """K~_i = 4pi - sum of extended solid angles; defined for every positive metric."""
    _check_pair(c, m)
    angles = extended_solid_angles(tetrahedron_radii(c, m), m.geometry)
    return CurvatureVector(values=_curvature_from_angles(c, angles), alpha=0.0, extended=True)


def extended_curvature_rows(c: Complex, radii: np.ndarray, geometry: Geometry) -> np.ndarray:
    """K~ for a stack of metrics, radii of shape (n, N); one vectorized pass over all tetrahedra."""
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 2 or radii.shape[1] != c.vertex_count:
        raise InvalidRadiiError(f"radii rows: expected shape (n, {c.vertex_count}), got {radii.shape}")
    if not np.all(np.isfinite(radii)) or np.any(radii <= 0.0):
        raise InvalidRadiiError("radii rows must be finite and positive")
    if not c.is_closed:
        raise MeshFormatError("complex is not closed: some face is not shared by exactly two tetrahedra")
    return _curvature_from_angles(c, extended_solid_angles(radii[:, c.tetrahedra], geometry))


def conformal_factor(radii, geometry: Geometry):
    """s_i and ds_i/dr_i: (r, 1) Euclidean, (tanh(r/2), sech^2(r/2)/2) hyperbolic."""
    radii = np.asarray(radii, dtype=float)
    if geometry is Geometry.EUCLIDEAN:
        return radii, np.ones_like(radii)
    half = 0.5 * radii
    return np.tanh(half), 0.5 / np.cosh(half) ** 2


def alpha_curvature(c: Complex, m: PackingMetric, alpha: float) -> CurvatureVector:
    k = scalar_curvature(c, m)
    if alpha == 0.0:
        return CurvatureVector(values=k.values, alpha=0.0, extended=False)
    s, _ = conformal_factor(m.radii, m.geometry)
    return CurvatureVector(values=k.values / s ** alpha, alpha=float(alpha), extended=False)


def total_action(c: Complex, m: PackingMetric) -> float:
    """S(r) = sum K_i r_i, Euclidean only."""
    if m.geometry is not Geometry.EUCLIDEAN:
        raise UnsupportedOperationError("total action needs the hyperbolic volume, which is not evaluated")
    k = scalar_curvature(c, m)
    return float(np.dot(k.values, m.radii))


def curvature_jacobian(c: Complex, m: PackingMetric) -> CurvatureJacobian:
    """Lambda = dK/dr assembled from the negated per-tetrahedron angle Jacobians."""
    _check_pair(c, m)
    _require_admissible(c, m)

    blocks = tet_jacobian(tetrahedron_radii(c, m), m.geometry, symmetrize=False)
    rows = np.broadcast_to(c.tetrahedra[:, :, None], blocks.shape)
    cols = np.broadcast_to(c.tetrahedra[:, None, :], blocks.shape)
    matrix = np.zeros((c.vertex_count, c.vertex_count))
    np.add.at(matrix, (rows, cols), -blocks)

    residual = float(symmetry_residual(matrix))
    matrix = 0.5 * (matrix + matrix.T)
    eigenvalues, eigenvectors = linalg.eigh(matrix)

    kernel_residual = None
    if m.geometry is Geometry.EUCLIDEAN:
        kernel_residual = float(np.max(np.abs(matrix @ m.radii)))
    logger.debug(
        "Lambda: symmetry residual %.3e, eigenvalues %s", residual, np.array2string(eigenvalues, precision=6)
    )
    return CurvatureJacobian(
        matrix=matrix,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        kernel_residual=kernel_residual,
        symmetry_residual=residual,
    )
