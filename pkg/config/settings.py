from pydantic_settings import BaseSettings, SettingsConfigDict

TOOL_NAME = "spherepack"
TOOL_VERSION = "1.0.0"


class Settings(BaseSettings):
    # --- Geometry kernels ---
    # Relative slack on triangle inequalities and cosine ranges before it is an error
    CLAMP_TOLERANCE: float = 1e-9
    FD_RELATIVE_STEP: float = 1e-6
    FD_MIN_STEP: float = 1e-6
    # Steps are halved until Q changes by at most this fraction over the stencil
    FD_STENCIL_Q_DRIFT: float = 1e-4
    FD_MAX_HALVINGS: int = 40
    # Relative bound on |J - J^T| checked before a finite-difference Jacobian is symmetrized
    JACOBIAN_SYMMETRY_TOLERANCE: float = 1e-6

    # --- Degenerate sets ---
    BRANCH_EPSILON: float = 1e-12
    BOUNDARY_RELATIVE_TOLERANCE: float = 1e-9

    # --- Solver ---
    GRADIENT_TOLERANCE: float = 1e-9
    MAX_ITERATIONS: int = 500
    ARMIJO_C1: float = 1e-4
    BACKTRACK_FACTOR: float = 0.5
    MAX_BACKTRACKS: int = 60
    QUADRATURE_RELATIVE_TOLERANCE: float = 1e-10
    QUADRATURE_ABSOLUTE_TOLERANCE: float = 1e-14
    # Gauss-Legendre nodes per panel, panel count cap and narrowest panel refined
    QUADRATURE_ORDER: int = 10
    QUADRATURE_LIMIT: int = 500
    QUADRATURE_MIN_WIDTH: float = 1e-13
    # Error estimate above which a quadrature warning becomes a QuadratureError
    QUADRATURE_ACCEPT_TOLERANCE: float = 1e-9
    # Relative slack on the sufficient-decrease test, absorbs quadrature roundoff
    DESCENT_SLACK: float = 1e-13

    # --- Certificates and experiments ---
    SPECTRAL_ZERO_TOLERANCE: float = 1e-7
    KERNEL_COSINE_TOLERANCE: float = 1e-8
    RIGIDITY_DISTANCE_TOLERANCE: float = 1e-5
    SAMPLE_LOW: float = 0.5
    SAMPLE_HIGH: float = 2.0
    SAMPLE_MAX_ATTEMPTS: int = 10_000
    DEFAULT_SEED: int = 20170917
    DEFAULT_TRIALS: int = 20

    # --- Selftest sample counts ---
    SELFTEST_DESCARTES_SAMPLES: int = 1_000
    SELFTEST_DISCRIMINANT_SAMPLES: int = 10_000
    SELFTEST_PARTITION_SAMPLES: int = 100_000
    SELFTEST_TET_SAMPLES: int = 100
    SELFTEST_METRIC_SAMPLES: int = 50
    SELFTEST_SEGMENT_SAMPLES: int = 100
    SELFTEST_GRADIENT_POINTS: int = 20
    SELFTEST_TRIALS: int = 20

    LOG_LEVEL: str = "WARNING"

    # Allow extra keys in the .env so the file can be shared with other tools
    # without raising validation errors.
    model_config = SettingsConfigDict(env_file=".env", env_prefix="SPHEREPACK_", extra="allow")


# Imported everywhere as `from config.settings import settings`
settings = Settings()
