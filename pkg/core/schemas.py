import enum
import math
from typing import Annotated, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import settings

# --- Input documents ---

Tetrahedron = Annotated[List[int], Field(min_length=4, max_length=4)]
PositiveRadius = Annotated[float, Field(gt=0, allow_inf_nan=False)]
FiniteValue = Annotated[float, Field(allow_inf_nan=False)]


class MeshDocument(BaseModel):
    """`{"vertices": N, "tetrahedra": [[i, j, k, l], ...]}` with 0-based indices."""
    vertices: int = Field(gt=0)
    tetrahedra: List[Tetrahedron] = Field(min_length=1)

    @model_validator(mode="after")
    def check_indices(self) -> "MeshDocument":
        seen = set()
        for n, tet in enumerate(self.tetrahedra):
            for v in tet:
                if v < 0 or v >= self.vertices:
                    raise ValueError(
                        f"tetrahedra.{n}: index {v} out of range for {self.vertices} vertices"
                    )
            if len(set(tet)) != 4:
                duplicate = next(v for v in tet if tet.count(v) > 1)
                raise ValueError(f"tetrahedra.{n}: duplicate vertex {duplicate}")
            seen.update(tet)
        missing = sorted(set(range(self.vertices)) - seen)
        if missing:
            raise ValueError(f"vertices: vertex {missing[0]} appears in no tetrahedron")
        return self


class RadiiDocument(BaseModel):
    """`{"radii": [r_0, ..., r_{N-1}]}`, every entry strictly positive."""
    radii: List[PositiveRadius] = Field(min_length=1)


class TargetDocument(BaseModel):
    """`{"target": [...], "alpha": a}`; alpha is optional and only informative."""
    target: List[FiniteValue] = Field(min_length=1)
    alpha: Optional[FiniteValue] = None


# --- Report header ---

class ReportHeader(BaseModel):
    """Everything needed to reproduce a report from its own header."""
    tool: str
    version: str
    command: str
    geometry: Optional[str] = None
    alpha: Optional[float] = None
    seed: Optional[int] = None
    inputs: dict[str, str] = Field(default_factory=dict)


class Report(BaseModel):
    """Envelope written by every subcommand: the header plus the command's own fields."""
    model_config = ConfigDict(extra="allow")

    header: ReportHeader


class ErrorReport(BaseModel):
    """Structured body written when a domain error ends a command."""
    error: str
    message: str
    tetrahedron: Optional[int] = None
    label: Optional[str] = None


# --- Complex validation ---

class OffendingFace(BaseModel):
    face: Tuple[int, int, int]
    count: int


class MeshCounts(BaseModel):
    vertices: int
    edges: int
    faces: int
    tetrahedra: int


class ValidationReport(BaseModel):
    is_closed: bool
    is_connected: bool
    offending_faces: List[OffendingFace]
    counts: MeshCounts
    euler_characteristic: int

    @model_validator(mode="after")
    def closed_iff_no_offenders(self) -> "ValidationReport":
        if self.is_closed != (not self.offending_faces):
            raise ValueError("is_closed must hold exactly when no face is offending")
        return self


# --- Curvature and classification reports ---

class CurvatureReport(BaseModel):
    geometry: str
    alpha: float
    extended: bool
    admissible: bool
    K: List[float]
    R_alpha: List[float]
    total_action: Optional[float] = None
    eigenvalues: Optional[List[float]] = None
    kernel_residual: Optional[float] = None
    symmetry_residual: Optional[float] = None


class TetrahedronEntry(BaseModel):
    index: int
    vertices: Tuple[int, int, int, int]
    label: str
    q_value: float


class AdmissibilityReport(BaseModel):
    geometry: str
    admissible: bool
    degenerate_count: int
    tetrahedra: List[TetrahedronEntry]


class ClassifyReport(BaseModel):
    geometry: str
    radii: List[float]
    label: str
    q_value: float
    boundary_radii: List[float]


class BoundaryReport(BaseModel):
    geometry: str
    radii: List[float]
    value: float
    A: float
    B: float
    C: float
    discriminant: float
    branch: str


# --- Solver ---

class Normalization(str, enum.Enum):
    AUTO = "auto"
    SUM_SQUARES_FIXED = "sum_squares_fixed"
    NONE = "none"


class SolveOutcome(str, enum.Enum):
    CONVERGED = "converged"
    EXTENDED_CRITICAL_POINT = "extended_critical_point"
    ITERATION_LIMIT = "iteration_limit"
    LINE_SEARCH_STALLED = "line_search_stalled"


class SolveOptions(BaseModel):
    max_iterations: int = Field(default=500, gt=0)
    gradient_tolerance: float = Field(default=1e-9, gt=0)
    normalization: Normalization = Normalization.AUTO
    initial_radii: Optional[List[PositiveRadius]] = None
    armijo_c1: float = Field(default=1e-4, gt=0, lt=1)
    backtrack_factor: float = Field(default=0.5, gt=0, lt=1)
    max_backtracks: int = Field(default=60, gt=0)
    rng_seed: int = 0

    @classmethod
    def from_settings(cls, **overrides) -> "SolveOptions":
        values = dict(
            max_iterations=settings.MAX_ITERATIONS,
            gradient_tolerance=settings.GRADIENT_TOLERANCE,
            armijo_c1=settings.ARMIJO_C1,
            backtrack_factor=settings.BACKTRACK_FACTOR,
            max_backtracks=settings.MAX_BACKTRACKS,
            rng_seed=settings.DEFAULT_SEED,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class TrajectoryPoint(BaseModel):
    iteration: int
    gradient_norm: float
    potential: float
    step: str


class SolveResult(BaseModel):
    radii: List[float]
    converged: bool
    outcome: SolveOutcome
    final_gradient_norm: float
    iterations: int
    trajectory: List[TrajectoryPoint]
    options: SolveOptions

    @field_validator("final_gradient_norm")
    @classmethod
    def finite_norm(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("final gradient norm must be finite")
        return value


class CertificateStatus(str, enum.Enum):
    PSD_KERNEL_ALONG_R = "psd_kernel_along_r"
    POSITIVE_DEFINITE = "positive_definite"
    NOT_CERTIFIED = "not_certified"


class RigidityCertificate(BaseModel):
    geometry: str
    alpha: float
    eigenvalues: List[float]
    alpha_r_nonpositive: bool
    alpha_r_vanishes: bool
    hypothesis_holds: bool
    zero_eigenvalues: int
    kernel_cosine: Optional[float] = None
    status: CertificateStatus
    certified: bool


class TrialRecord(BaseModel):
    index: int
    converged: bool
    outcome: SolveOutcome
    iterations: int
    final_gradient_norm: float
    initial_radii: List[float]
    radii: List[float]
    distance_to_truth: float
    trajectory: Optional[List[TrajectoryPoint]] = None


class ExperimentReport(BaseModel):
    geometry: str
    alpha: float
    trials: int
    seed: int
    gauge: bool
    ground_truth: List[float]
    target: List[float]
    max_pairwise_distance: float
    all_converged: bool
    verdict: str
    note: Optional[str] = None
    records: List[TrialRecord]


# --- Selftest ---

class SuiteResult(BaseModel):
    name: str
    passed: bool
    detail: str


class SelftestReport(BaseModel):
    passed: bool
    suites: List[SuiteResult]
