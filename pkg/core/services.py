# core/services.py
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from config.settings import TOOL_NAME, TOOL_VERSION, settings
from core.complex import validate_closed
from core.curvature import (
    PackingMetric,
    alpha_curvature,
    curvature_jacobian,
    tetrahedron_labels,
    tetrahedron_radii,
    total_action,
)
from core.degeneracy import boundary_radii, boundary_radius, classify, soddy_coefficients
from core.exceptions import InvalidRadiiError, InvariantViolation, PackingError
from core.schemas import (
    AdmissibilityReport,
    BoundaryReport,
    ClassifyReport,
    CurvatureReport,
    ErrorReport,
    Report,
    ReportHeader,
    SolveOptions,
    TetrahedronEntry,
)
from core.selftest import run_selftest
from core.solver import PrescribedTarget, alpha_target, rigidity_certificate, rigidity_experiment, solve_prescribed
from core.tetgeom import Geometry, q_value
from meshes.loader import load_mesh, load_radii, load_target

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_DOMAIN_FAILURE = 2


@dataclass
class CommandOutcome:
    """A report body plus the exit code it implies."""
    body: BaseModel
    exit_code: int = EXIT_OK
    inputs: Dict[str, str] = field(default_factory=dict)
    # alpha actually used, when it can come from an input document
    alpha: Optional[float] = None


def make_header(command: str, geometry: Optional[Geometry] = None, alpha: Optional[float] = None,
                seed: Optional[int] = None, inputs: Optional[Dict[str, str]] = None) -> ReportHeader:
    return ReportHeader(
        tool=TOOL_NAME,
        version=TOOL_VERSION,
        command=command,
        geometry=geometry.value if geometry is not None else None,
        alpha=alpha,
        seed=seed,
        inputs=inputs or {},
    )


def render_report(header: ReportHeader, body: BaseModel) -> str:
    return Report(header=header, **body.model_dump(mode="json")).model_dump_json(indent=2)


def error_body(error: PackingError) -> ErrorReport:
    label = getattr(error, "label", None)
    return ErrorReport(
        error=type(error).__name__,
        message=str(error),
        tetrahedron=getattr(error, "tetrahedron", None),
        label=str(label) if label is not None else None,
    )


def _floats(values) -> list:
    return [float(v) for v in np.asarray(values).ravel()]


# --- Mesh and metric reports ---

def validate_mesh(mesh_path) -> CommandOutcome:
    mesh, digest = load_mesh(mesh_path)
    report = validate_closed(mesh)
    if not report.is_closed:
        logger.warning("%s is not closed: %d offending faces", mesh_path, len(report.offending_faces))
    code = EXIT_OK if report.is_closed else EXIT_DOMAIN_FAILURE
    return CommandOutcome(report, code, {"mesh": digest})


def curvature_report(mesh_path, radii_path, geometry: Geometry, alpha: float) -> CommandOutcome:
    mesh, mesh_digest = load_mesh(mesh_path)
    radii, radii_digest = load_radii(radii_path, mesh.vertex_count)
    m = PackingMetric(radii, geometry)

    # 1. Curvature, which fails loudly on inadmissible tetrahedra
    r_alpha = alpha_curvature(mesh, m, alpha)
    k = alpha_curvature(mesh, m, 0.0)

    # 2. Jacobian and its spectrum; too close to the boundary the difference quotient is unreliable
    try:
        jac = curvature_jacobian(mesh, m)
    except InvariantViolation as exc:
        logger.warning("Curvature Jacobian omitted from the report: %s", exc)
        jac = None

    body = CurvatureReport(
        geometry=geometry.value,
        alpha=alpha,
        extended=False,
        admissible=True,
        K=_floats(k.values),
        R_alpha=_floats(r_alpha.values),
        total_action=total_action(mesh, m) if geometry is Geometry.EUCLIDEAN else None,
        eigenvalues=_floats(jac.eigenvalues) if jac is not None else None,
        kernel_residual=jac.kernel_residual if jac is not None else None,
        symmetry_residual=jac.symmetry_residual if jac is not None else None,
    )
    return CommandOutcome(body, EXIT_OK, {"mesh": mesh_digest, "radii": radii_digest})


def admissibility_report(mesh_path, radii_path, geometry: Geometry) -> CommandOutcome:
    mesh, mesh_digest = load_mesh(mesh_path)
    radii, radii_digest = load_radii(radii_path, mesh.vertex_count)
    m = PackingMetric(radii, geometry)
    labels = tetrahedron_labels(mesh, m)
    q = q_value(tetrahedron_radii(mesh, m), geometry)
    entries = [
        TetrahedronEntry(index=n, vertices=tuple(mesh.tetrahedra[n].tolist()), label=str(label), q_value=float(q[n]))
        for n, label in enumerate(labels)
    ]
    degenerate = sum(not label.is_admissible for label in labels)
    body = AdmissibilityReport(
        geometry=geometry.value,
        admissible=degenerate == 0,
        degenerate_count=degenerate,
        tetrahedra=entries,
    )
    code = EXIT_OK if degenerate == 0 else EXIT_DOMAIN_FAILURE
    return CommandOutcome(body, code, {"mesh": mesh_digest, "radii": radii_digest})


# --- Single tetrahedron reports ---

def _positive(values: Sequence[float], count: int):
    r = np.asarray(values, dtype=float)
    if r.shape != (count,) or not np.all(np.isfinite(r)) or np.any(r <= 0.0):
        raise InvalidRadiiError(f"expected {count} strictly positive radii, got {list(values)}")
    return r


def classify_report(values: Sequence[float], geometry: Geometry) -> CommandOutcome:
    r = _positive(values, 4)
    body = ClassifyReport(
        geometry=geometry.value,
        radii=_floats(r),
        label=str(classify(r, geometry)),
        q_value=float(q_value(r, geometry)),
        boundary_radii=_floats(boundary_radii(r, geometry)),
    )
    return CommandOutcome(body, EXIT_OK, {"radii": " ".join(repr(float(v)) for v in r)})


def boundary_report(values: Sequence[float], geometry: Geometry) -> CommandOutcome:
    rj, rk, rl = _positive(values, 3)
    coeffs = soddy_coefficients(rj, rk, rl, geometry)
    scale = max(rj, rk, rl) if geometry is Geometry.EUCLIDEAN else float(np.tanh(max(rj, rk, rl)))
    flat = abs(float(coeffs.A)) <= settings.BRANCH_EPSILON * scale ** 4
    body = BoundaryReport(
        geometry=geometry.value,
        radii=[float(rj), float(rk), float(rl)],
        value=float(boundary_radius(rj, rk, rl, geometry)),
        A=float(coeffs.A),
        B=float(coeffs.B),
        C=float(coeffs.C),
        discriminant=float(coeffs.discriminant),
        branch="linear" if flat else ("quadratic_A_positive" if coeffs.A > 0 else "quadratic_A_negative"),
    )
    return CommandOutcome(body, EXIT_OK, {"radii": " ".join(repr(float(v)) for v in (rj, rk, rl))})


# --- Solver reports ---

def _resolve_alpha(flag: Optional[float], document_alpha: Optional[float]) -> float:
    if flag is not None:
        if document_alpha is not None and document_alpha != flag:
            logger.warning("--alpha %s overrides alpha %s from the target document", flag, document_alpha)
        return float(flag)
    return float(document_alpha) if document_alpha is not None else 0.0


def solve_report(mesh_path, target_path, geometry: Geometry, alpha: Optional[float], init_path=None,
                 tol: Optional[float] = None, seed: Optional[int] = None) -> CommandOutcome:
    mesh, mesh_digest = load_mesh(mesh_path)
    document, target_digest = load_target(target_path, mesh.vertex_count)
    inputs = {"mesh": mesh_digest, "target": target_digest}

    initial = None
    if init_path is not None:
        radii, inputs["init"] = load_radii(init_path, mesh.vertex_count)
        initial = radii.tolist()

    alpha = _resolve_alpha(alpha, document.alpha)
    target = PrescribedTarget(document.target, alpha, geometry)
    opts = SolveOptions.from_settings(initial_radii=initial, gradient_tolerance=tol, rng_seed=seed)
    result = solve_prescribed(mesh, target, opts)
    return CommandOutcome(result, EXIT_OK if result.converged else EXIT_DOMAIN_FAILURE, inputs, alpha)


def rigidity_report(mesh_path, radii_path, geometry: Geometry, alpha: Optional[float],
                    target_path=None) -> CommandOutcome:
    mesh, mesh_digest = load_mesh(mesh_path)
    radii, radii_digest = load_radii(radii_path, mesh.vertex_count)
    inputs = {"mesh": mesh_digest, "radii": radii_digest}
    m = PackingMetric(radii, geometry)

    if target_path is None:
        # Default target: the metric's own alpha-curvature.
        target = alpha_target(mesh, m, alpha or 0.0)
    else:
        document, inputs["target"] = load_target(target_path, mesh.vertex_count)
        target = PrescribedTarget(document.target, _resolve_alpha(alpha, document.alpha), geometry)

    certificate = rigidity_certificate(mesh, m, target)
    return CommandOutcome(certificate, EXIT_OK if certificate.certified else EXIT_DOMAIN_FAILURE, inputs, target.alpha)


def experiment_report(mesh_path, geometry: Geometry, alpha: float, trials: int, seed: int,
                      progress: bool = False) -> CommandOutcome:
    mesh, mesh_digest = load_mesh(mesh_path)
    report = rigidity_experiment(mesh, geometry, alpha, trials, seed, progress=progress)
    if report.verdict != "PASS":
        logger.warning("rigidity experiment failed: %s", report.note or "recovered metrics disagree")
    return CommandOutcome(report, EXIT_OK if report.verdict == "PASS" else EXIT_DOMAIN_FAILURE, {"mesh": mesh_digest})


def selftest_report(seed: int, on_result=None) -> CommandOutcome:
    report = run_selftest(seed, on_result=on_result)
    return CommandOutcome(report, EXIT_OK if report.passed else EXIT_DOMAIN_FAILURE)

