import sys
from pathlib import Path

import numpy as np
import pytest

# --- Setup Project Root ---
PROJECT_ROOT = Path(__file__).resolve().parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.append(str(PROJECT_ROOT))
# ---------------------------

from core.curvature import PackingMetric  # noqa: E402
from core.tetgeom import Geometry  # noqa: E402
from meshes.library import boundary_cross_polytope, boundary_simplex, single_tetrahedron  # noqa: E402

DATA_DIR = PROJECT_ROOT / "meshes" / "data"

# Admissible perturbation of the unit metric on the boundary of the 4-simplex.
PERTURBED_RADII = [1.0, 1.1, 0.9, 1.05, 0.95]


@pytest.fixture(scope="session")
def simplex():
    return boundary_simplex()


@pytest.fixture(scope="session")
def cross_polytope():
    return boundary_cross_polytope()


@pytest.fixture(scope="session")
def tetrahedron():
    return single_tetrahedron()


@pytest.fixture(scope="session")
def unit_euclidean():
    return PackingMetric(np.ones(5), Geometry.EUCLIDEAN)


@pytest.fixture(scope="session")
def unit_hyperbolic():
    return PackingMetric(np.ones(5), Geometry.HYPERBOLIC)


@pytest.fixture
def rng():
    return np.random.default_rng(20170917)
