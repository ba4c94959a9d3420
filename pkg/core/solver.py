"""
Extended Ricci potential, prescribed curvature solver and rigidity checks.

The potential F~ is never evaluated in closed form. Its gradient is
K~_i - Rbar_i s_i^alpha, which is continuous on all of R^N_{>0}, and F~ is
recovered as a line integral of that gradient. Because the 1-form is
closed, the integral depends only on the endpoints.
"""
import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np
from rich.progress import track
from scipy import linalg, special
from scipy.spatial.distance import pdist

from config.log import stderr_console
from config.settings import settings
from core.complex import Complex
from core.curvature import (
    PackingMetric,
    alpha_curvature,
    conformal_factor,
    curvature_jacobian,
    extended_curvature,
    extended_curvature_rows,
    tetrahedron_radii,
)
from core.degeneracy import ADMISSIBLE, classify_many
from core.exceptions import (
    AdmissibilityError,
    InvalidRadiiError,
    InvariantViolation,
    MeshFormatError,
    NumericDomainError,
    QuadratureError,
)
from core.schemas import (
    CertificateStatus,
    ExperimentReport,
    Normalization,
    RigidityCertificate,
    SolveOptions,
    SolveOutcome,
    SolveResult,
    TrajectoryPoint,
    TrialRecord,
)
from core.tetgeom import Geometry

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PrescribedTarget:
    target: np.ndarray
    alpha: float
    geometry: Geometry

    def __post_init__(self):
        target = np.array(self.target, dtype=float)
        if target.ndim != 1 or not np.all(np.isfinite(target)):
            raise InvalidRadiiError("target must be a vector of finite numbers")
        target.setflags(write=False)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def alpha_r_nonpositive(self) -> bool:
        return bool(np.all(self.alpha * self.target <= 0.0))

    @property
    def alpha_r_vanishes(self) -> bool:
        return bool(np.all(self.alpha * self.target == 0.0))

    @property
    def has_scale_gauge(self) -> bool:
        """Euclidean with alpha*Rbar == 0: F~ is invariant along r -> lambda r up to a linear term."""
        return self.geometry is Geometry.EUCLIDEAN and self.alpha_r_vanishes


def _prescribed_term(t: PrescribedTarget, radii: np.ndarray) -> np.ndarray:
    if t.alpha == 0.0:
        return np.array(t.target)
    s, _ = conformal_factor(radii, t.geometry)
    return t.target * s ** t.alpha


def _metric(c: Complex, radii, t: PrescribedTarget) -> PackingMetric:
    m = PackingMetric(radii, t.geometry)
    if len(t.target) != c.vertex_count:
        raise InvalidRadiiError(f"target: expected {c.vertex_count} entries, got {len(t.target)}")
    return m


def is_admissible(c: Complex, m: PackingMetric) -> bool:
    return bool(np.all(classify_many(tetrahedron_radii(c, m), m.geometry) == ADMISSIBLE))


# --- Potential ---

def potential_gradient(c: Complex, m: PackingMetric, t: PrescribedTarget) -> np.ndarray:
    """K~_i - Rbar_i s_i^alpha; defined at every positive metric."""
    m = _metric(c, m.radii, t)
    return extended_curvature(c, m).values - _prescribed_term(t, m.radii)


def potential_increment(c: Complex, start, end, t: PrescribedTarget) -> float:
    """F~(end) - F~(start) as the line integral of the gradient along the segment."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    _metric(c, start, t)
    _metric(c, end, t)
    delta = end - start
    if not np.any(delta):
        return 0.0

    def integrand(theta: np.ndarray) -> np.ndarray:
        points = start + np.multiply.outer(theta, delta)
        gradients = extended_curvature_rows(c, points, t.geometry) - _prescribed_term(t, points)
        return gradients @ delta

    value, error, panels, converged = _adaptive_gauss_legendre(integrand)
    if not np.isfinite(value):
        raise NumericDomainError("potential integrand is not finite along the segment")
    if not converged:
        if error > settings.QUADRATURE_ACCEPT_TOLERANCE * max(1.0, abs(value)):
            raise QuadratureError(
                f"line integral did not converge: value {value!r}, error estimate {error!r}, {panels} panels"
            )
        logger.debug("quadrature stopped at %d panels, error estimate %.2e accepted", panels, error)
    return value


# --- Quadrature ---

_GL_NODES, _GL_WEIGHTS = special.roots_legendre(settings.QUADRATURE_ORDER)


def _panel_sums(f, bounds: np.ndarray) -> np.ndarray:
    """Gauss-Legendre value on each panel of `bounds` (k, 2) from a single call of f."""
    centre = 0.5 * (bounds[:, 0] + bounds[:, 1])
    half = 0.5 * (bounds[:, 1] - bounds[:, 0])
    nodes = centre[:, None] + half[:, None] * _GL_NODES
    values = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
    return half * (values @ _GL_WEIGHTS)


def _adaptive_gauss_legendre(f):
    """
    Integral of a vectorized f over [0, 1].

    Every panel carries the values of its two halves; the gap between their
    sum and the single-panel value is its error estimate. The panel with the
    largest estimate is bisected until the total estimate falls within
    QUADRATURE_ABSOLUTE_TOLERANCE or QUADRATURE_RELATIVE_TOLERANCE of the
    value, or QUADRATURE_LIMIT panels are in use. Kinks of the extended
    gradient at the degenerate sets are resolved by this bisection.

    Returns (value, error estimate, panel count, converged).
    """
    whole, left, right = _panel_sums(f, np.array([[0.0, 1.0], [0.0, 0.5], [0.5, 1.0]]))
    heap = [(-abs(left + right - whole), 0.0, 1.0, left, right)]
    frozen = []

    def totals():
        panels = heap + frozen
        return math.fsum(p[3] + p[4] for p in panels), math.fsum(-p[0] for p in panels)

    value, error = totals()
    while heap:
        tolerance = max(settings.QUADRATURE_ABSOLUTE_TOLERANCE, settings.QUADRATURE_RELATIVE_TOLERANCE * abs(value))
        if error <= tolerance:
            return value, error, len(heap) + len(frozen), True
        if len(heap) + len(frozen) >= settings.QUADRATURE_LIMIT:
            return value, error, len(heap) + len(frozen), False
        panel = heapq.heappop(heap)
        _, a, b, left, right = panel
        if b - a < settings.QUADRATURE_MIN_WIDTH:
            frozen.append(panel)
            continue
        mid = 0.5 * (a + b)
        q1, q3 = 0.5 * (a + mid), 0.5 * (mid + b)
        quarters = _panel_sums(f, np.array([[a, q1], [q1, mid], [mid, q3], [q3, b]]))
        heapq.heappush(heap, (-abs(quarters[0] + quarters[1] - left), a, mid, quarters[0], quarters[1]))
        heapq.heappush(heap, (-abs(quarters[2] + quarters[3] - right), mid, b, quarters[2], quarters[3]))
        value, error = totals()
    # only unrefinable panels remain
    return value, error, len(frozen), error <= settings.QUADRATURE_ACCEPT_TOLERANCE * max(1.0, abs(value))


def potential_value(c: Complex, m: PackingMetric, t: PrescribedTarget, reference: PackingMetric) -> float:
    """F~(m) normalized by F~(reference) = 0."""
    if not is_admissible(c, reference):
        raise AdmissibilityError("reference metric for the potential must be admissible")
    return potential_increment(c, reference.radii, m.radii, t)


def potential_hessian(c: Complex, m: PackingMetric, t: PrescribedTarget) -> np.ndarray:
    """Hess F = Lambda - diag(d/dr_i [Rbar_i s_i^alpha]); admissible metrics only."""
    m = _metric(c, m.radii, t)
    lam = curvature_jacobian(c, m).matrix
    if t.alpha == 0.0:
        return lam
    s, ds = conformal_factor(m.radii, t.geometry)
    return lam - np.diag(t.alpha * t.target * s ** (t.alpha - 1.0) * ds)


# --- Solver ---

def _resolve_normalization(t: PrescribedTarget, opts: SolveOptions) -> bool:
    if opts.normalization is Normalization.AUTO:
        return t.has_scale_gauge
    return opts.normalization is Normalization.SUM_SQUARES_FIXED


def _project_out(vector: np.ndarray, direction: np.ndarray) -> np.ndarray:
    unit = direction / np.linalg.norm(direction)
    return vector - np.dot(vector, unit) * unit


def _newton_direction(c: Complex, x: np.ndarray, g: np.ndarray, t: PrescribedTarget):
    try:
        hessian = potential_hessian(c, PackingMetric(x, t.geometry), t)
    except (AdmissibilityError, InvariantViolation) as exc:
        # iterate too close to the boundary for a reliable Hessian
        logger.info("Hessian unavailable (%s); falling back to the gradient direction", exc)
        return None
    try:
        if t.has_scale_gauge:
            # Lambda has kernel span{r}; solve on the orthogonal complement.
            basis = linalg.null_space(x[None, :])
            reduced = basis.T @ hessian @ basis
            y = linalg.cho_solve(linalg.cho_factor(reduced), -(basis.T @ g))
            direction = basis @ y
        else:
            direction = linalg.cho_solve(linalg.cho_factor(hessian), -g)
    except linalg.LinAlgError:
        logger.info("Hessian not positive definite; falling back to the gradient direction")
        return None
    if not np.all(np.isfinite(direction)) or np.dot(g, direction) >= 0.0:
        return None
    return direction


def _gradient_direction(x: np.ndarray, g: np.ndarray, t: PrescribedTarget) -> np.ndarray:
    if t.has_scale_gauge:
        return -_project_out(g, x)
    return -g


def _line_search(c, x, g, direction, t, opts, potential, normalize, radius_norm, newton):
    """Backtracking on F~ with the Armijo test; returns (point, increment) or None."""
    slope = float(np.dot(g, direction))
    step = 1.0
    for _ in range(opts.max_backtracks):
        trial = x + step * direction
        if np.all(trial > 0.0):
            if normalize:
                trial = trial * (radius_norm / np.linalg.norm(trial))
            if not newton or is_admissible(c, PackingMetric(trial, t.geometry)):
                increment = potential_increment(c, x, trial, t)
                slack = settings.DESCENT_SLACK * max(1.0, abs(potential))
                if increment <= opts.armijo_c1 * step * slope + slack:
                    return trial, increment
        step *= opts.backtrack_factor
    return None


def solve_prescribed(c: Complex, t: PrescribedTarget, opts: SolveOptions) -> SolveResult:
    """Minimize F~ by damped Newton inside the admissible region, gradient descent elsewhere."""
    if opts.initial_radii is not None:
        x = np.array(opts.initial_radii, dtype=float)
    else:
        x = np.ones(c.vertex_count)
    _metric(c, x, t)
    if not c.is_closed:
        raise MeshFormatError("complex is not closed: some face is not shared by exactly two tetrahedra")

    normalize = _resolve_normalization(t, opts)
    radius_norm = float(np.linalg.norm(x))
    potential = 0.0
    trajectory = []
    outcome = SolveOutcome.ITERATION_LIMIT
    step_kind = "initial"

    iteration = 0
    while True:
        g = potential_gradient(c, PackingMetric(x, t.geometry), t)
        if not np.all(np.isfinite(g)):
            raise NumericDomainError(f"non-finite gradient at iteration {iteration}")
        grad_norm = float(np.max(np.abs(g)))
        trajectory.append(
            TrajectoryPoint(iteration=iteration, gradient_norm=grad_norm, potential=potential, step=step_kind)
        )
        logger.debug("iteration %d: |grad| = %.3e, F = %.12e (%s)", iteration, grad_norm, potential, step_kind)

        if grad_norm <= opts.gradient_tolerance:
            outcome = SolveOutcome.CONVERGED
            break
        if iteration >= opts.max_iterations:
            break

        accepted = None
        admissible = is_admissible(c, PackingMetric(x, t.geometry))
        if admissible:
            direction = _newton_direction(c, x, g, t)
            if direction is not None:
                accepted = _line_search(c, x, g, direction, t, opts, potential, normalize, radius_norm, True)
                step_kind = "newton"
                if accepted is None:
                    logger.info("Newton line search failed at iteration %d; trying gradient", iteration)
        if accepted is None:
            direction = _gradient_direction(x, g, t)
            accepted = _line_search(c, x, g, direction, t, opts, potential, normalize, radius_norm, False)
            step_kind = "gradient"
        if accepted is None:
            logger.warning("line search stalled at iteration %d (|grad| = %.3e)", iteration, grad_norm)
            outcome = SolveOutcome.LINE_SEARCH_STALLED
            break

        x, increment = accepted
        potential += increment
        iteration += 1

    if outcome is SolveOutcome.CONVERGED and not is_admissible(c, PackingMetric(x, t.geometry)):
        outcome = SolveOutcome.EXTENDED_CRITICAL_POINT
    converged = outcome is SolveOutcome.CONVERGED
    logger.info("solve finished: %s after %d iterations, |grad| = %.3e", outcome.value, iteration, grad_norm)
    return SolveResult(
        radii=x.tolist(),
        converged=converged,
        outcome=outcome,
        final_gradient_norm=grad_norm,
        iterations=iteration,
        trajectory=trajectory,
        options=opts,
    )


# --- Targets, sampling, certificates ---

def alpha_target(c: Complex, m: PackingMetric, alpha: float) -> PrescribedTarget:
    """The alpha-curvature of `m` as a prescribed target."""
    return PrescribedTarget(alpha_curvature(c, m, alpha).values, alpha, m.geometry)


def sample_admissible_metric(c: Complex, geometry: Geometry, rng: np.random.Generator) -> PackingMetric:
    """Log-uniform radii in [SAMPLE_LOW, SAMPLE_HIGH], rejection-sampled to admissibility."""
    low, high = np.log(settings.SAMPLE_LOW), np.log(settings.SAMPLE_HIGH)
    for _ in range(settings.SAMPLE_MAX_ATTEMPTS):
        m = PackingMetric(np.exp(rng.uniform(low, high, c.vertex_count)), geometry)
        if is_admissible(c, m):
            return m
    raise AdmissibilityError(f"no admissible metric found in {settings.SAMPLE_MAX_ATTEMPTS} attempts")


def rigidity_certificate(c: Complex, m: PackingMetric, t: PrescribedTarget) -> RigidityCertificate:
    hessian = potential_hessian(c, m, t)
    eigenvalues, eigenvectors = linalg.eigh(hessian)
    zero = np.abs(eigenvalues) <= settings.SPECTRAL_ZERO_TOLERANCE

    kernel_cosine = None
    status = CertificateStatus.NOT_CERTIFIED
    if t.has_scale_gauge:
        if zero.sum() == 1:
            kernel = eigenvectors[:, int(np.argmax(zero))]
            kernel_cosine = float(abs(np.dot(kernel, m.radii)) / np.linalg.norm(m.radii))
            rest_positive = np.all(eigenvalues[~zero] > settings.SPECTRAL_ZERO_TOLERANCE)
            if rest_positive and kernel_cosine >= 1.0 - settings.KERNEL_COSINE_TOLERANCE:
                status = CertificateStatus.PSD_KERNEL_ALONG_R
    elif np.all(eigenvalues > settings.SPECTRAL_ZERO_TOLERANCE):
        status = CertificateStatus.POSITIVE_DEFINITE

    return RigidityCertificate(
        geometry=t.geometry.value,
        alpha=t.alpha,
        eigenvalues=eigenvalues.tolist(),
        alpha_r_nonpositive=t.alpha_r_nonpositive,
        alpha_r_vanishes=t.alpha_r_vanishes,
        hypothesis_holds=t.alpha_r_nonpositive,
        zero_eigenvalues=int(zero.sum()),
        kernel_cosine=kernel_cosine,
        status=status,
        certified=status is not CertificateStatus.NOT_CERTIFIED,
    )


def _comparable(radii: np.ndarray, gauge: bool) -> np.ndarray:
    return radii / np.linalg.norm(radii) if gauge else radii


def rigidity_experiment(
    c: Complex, geometry: Geometry, alpha: float, trials: int, seed: int, progress: bool = False
) -> ExperimentReport:
    """Recover a sampled metric from its own curvature starting at `trials` random metrics."""
    rng = np.random.default_rng(seed)
    truth = sample_admissible_metric(c, geometry, rng)
    target = alpha_target(c, truth, alpha)
    gauge = target.has_scale_gauge
    reference = _comparable(truth.radii, gauge)

    records = []
    for index in track(
        range(trials), description="Solving trials...", console=stderr_console, disable=not progress
    ):
        start = sample_admissible_metric(c, geometry, rng)
        opts = SolveOptions.from_settings(initial_radii=start.radii.tolist(), rng_seed=seed)
        result = solve_prescribed(c, target, opts)
        recovered = np.array(result.radii)
        records.append(
            TrialRecord(
                index=index,
                converged=result.converged,
                outcome=result.outcome,
                iterations=result.iterations,
                final_gradient_norm=result.final_gradient_norm,
                initial_radii=start.radii.tolist(),
                radii=result.radii,
                distance_to_truth=float(np.linalg.norm(_comparable(recovered, gauge) - reference)),
                trajectory=None if result.converged else result.trajectory,
            )
        )
        logger.info("trial %d: %s in %d iterations", index, result.outcome.value, result.iterations)

    recovered = np.array([_comparable(np.array(r.radii), gauge) for r in records])
    max_distance = float(pdist(recovered).max()) if len(records) > 1 else 0.0
    all_converged = all(r.converged for r in records)
    passed = all_converged and max_distance <= settings.RIGIDITY_DISTANCE_TOLERANCE
    note = None if all_converged else "target possibly non-admissible: some trials did not converge"
    return ExperimentReport(
        geometry=geometry.value,
        alpha=float(alpha),
        trials=trials,
        seed=seed,
        gauge=gauge,
        ground_truth=truth.radii.tolist(),
        target=target.target.tolist(),
        max_pairwise_distance=max_distance,
        all_converged=all_converged,
        verdict="PASS" if passed else "FAIL",
        note=note,
        records=records,
    )
