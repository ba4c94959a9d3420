"""
Acceptance suites runnable from the command line.

Each suite returns (passed, detail). Suites are isolated: an exception in
one is recorded as a failure of that suite and the rest still run.
"""
import logging
import time
from typing import Callable, Optional

import numpy as np

from config.settings import settings
from core import tetgeom
from core.curvature import PackingMetric, curvature_jacobian, scalar_curvature
from core.degeneracy import (
    classify_many,
    euclidean_discriminant,
    soddy_coefficients,
    soddy_radius_euclidean,
    soddy_radius_hyperbolic,
)
from core.schemas import SelftestReport, SuiteResult
from core.solver import (
    PrescribedTarget,
    potential_gradient,
    potential_increment,
    rigidity_experiment,
    sample_admissible_metric,
)
from core.tetgeom import Geometry
from meshes.library import boundary_simplex

logger = logging.getLogger(__name__)

REGULAR_SOLID_ANGLE = 3.0 * np.arccos(1.0 / 3.0) - np.pi
REGULAR_CURVATURE = 8.0 * np.pi - 12.0 * np.arccos(1.0 / 3.0)


def _log_uniform(rng, low, high, size):
    return np.exp(rng.uniform(np.log(low), np.log(high), size))


def _uniform_open_closed(rng, high, size):
    # (0, high] rather than numpy's [0, high)
    return high - rng.uniform(0.0, high, size)


def _admissible_tets(rng, geometry, count):
    found = []
    while len(found) < count:
        r = _log_uniform(rng, settings.SAMPLE_LOW, settings.SAMPLE_HIGH, (count, 4))
        found.extend(r[tetgeom.q_value(r, geometry) > 0.0])
    return np.array(found[:count])


# --- Suites ---

def descartes_identities(rng):
    n = settings.SELFTEST_DESCARTES_SAMPLES
    triples = _log_uniform(rng, 0.1, 10.0, (n, 3))
    worst = {}
    for geometry, bound, tolerance in (
        (Geometry.EUCLIDEAN, soddy_radius_euclidean, 1e-9),
        (Geometry.HYPERBOLIC, soddy_radius_hyperbolic, 1e-7),
    ):
        inner = bound(triples[:, 0], triples[:, 1], triples[:, 2])
        r = np.column_stack([inner, triples])
        k = 1.0 / r if geometry is Geometry.EUCLIDEAN else 1.0 / np.tanh(r)
        residual = np.abs(tetgeom.q_value(r, geometry)) / k.sum(axis=-1) ** 2
        worst[geometry] = (float(residual.max()), tolerance)
    passed = all(value <= tol for value, tol in worst.values())
    detail = ", ".join(f"{g.value} {v:.2e}" for g, (v, _) in worst.items())
    return passed, f"max relative residual: {detail}"


def soddy_boundary(rng):
    checks = []
    f111 = float(soddy_radius_euclidean(1.0, 1.0, 1.0))
    checks.append(abs(f111 - (2.0 / np.sqrt(3.0) - 1.0)) <= 1e-12)
    checks.append(abs(float(soddy_radius_euclidean(1.0, 4.0, 4.0)) - 1.0 / 3.0) <= 1e-12)

    triples = _log_uniform(rng, 0.1, 10.0, (settings.SELFTEST_DISCRIMINANT_SAMPLES, 3))
    coeffs = soddy_coefficients(*triples.T, Geometry.EUCLIDEAN)
    closed = euclidean_discriminant(*triples.T)
    disc_error = float(np.max(np.abs(coeffs.discriminant - closed) / closed))
    checks.append(disc_error <= 1e-10)

    # A < 0 exactly when 1/sqrt(r_j) exceeds 1/sqrt(r_k) + 1/sqrt(r_l).
    n = settings.SELFTEST_DISCRIMINANT_SAMPLES
    rk, rl = _log_uniform(rng, 1.0, 30.0, (2, n))
    ceiling = 1.0 / (1.0 / np.sqrt(rk) + 1.0 / np.sqrt(rl)) ** 2
    rj = ceiling * rng.uniform(0.01, 0.99, n)
    coeffs = soddy_coefficients(rj, rk, rl, Geometry.EUCLIDEAN)
    kept, rejected = coeffs.roots()
    smallest = np.minimum(np.minimum(rj, rk), rl)
    violations = int(np.sum(~((coeffs.A < 0) & (kept > 0) & (rejected > 0) & (rejected > smallest))))
    checks.append(violations == 0)
    return all(checks), f"discriminant error {disc_error:.2e}, rejected-root violations {violations}/{n}"


def partition(rng):
    n = settings.SELFTEST_PARTITION_SAMPLES
    counts = {}
    for geometry in Geometry:
        codes = classify_many(_uniform_open_closed(rng, 10.0, (n, 4)), geometry)
        counts[geometry] = np.bincount(codes + 1, minlength=5)
    passed = all(int(c.sum()) == n for c in counts.values())
    detail = "; ".join(f"{g.value} {c.tolist()}" for g, c in counts.items())
    return passed, f"[admissible, V0..V3] {detail}"


def degenerate_limits(rng):
    f = float(soddy_radius_euclidean(1.0, 1.0, 1.0))
    offsets = 10.0 ** -np.arange(2, 11)
    radii = np.column_stack([f + offsets, np.ones((len(offsets), 3))])
    geom = tetgeom.solid_angles(radii, Geometry.EUCLIDEAN)
    alpha = geom.solid_angles
    near = geom.dihedral_angles[:, [0, 1, 2]]
    far = geom.dihedral_angles[:, [3, 4, 5]]
    monotone = (
        np.all(np.diff(alpha[:, 0]) > 0)
        and np.all(np.diff(alpha[:, 1:], axis=0) < 0)
        and np.all(np.diff(near, axis=0) > 0)
        and np.all(np.diff(far, axis=0) < 0)
    )
    final = (
        alpha[-1, 0] >= 2 * np.pi - 1e-3
        and np.all(alpha[-1, 1:] <= 1e-3)
        and np.all(near[-1] >= np.pi - 1e-3)
        and np.all(far[-1] <= 1e-3)
    )
    return bool(monotone and final), f"gap 2pi - alpha_0 = {2 * np.pi - alpha[-1, 0]:.2e} at offset 1e-10"


def single_tet_concavity(rng):
    n = settings.SELFTEST_TET_SAMPLES
    problems = []
    for geometry in Geometry:
        r = _admissible_tets(rng, geometry, n)
        raw = tetgeom.tet_jacobian(r, geometry, symmetrize=False)
        asym = float(np.max(tetgeom.symmetry_residual(raw)))
        jac = 0.5 * (raw + np.swapaxes(raw, -1, -2))
        eig = np.linalg.eigvalsh(jac)
        if asym > 1e-7:
            problems.append(f"{geometry.value} asymmetry {asym:.2e}")
        if geometry is Geometry.EUCLIDEAN:
            kernel = float(np.max(np.abs(np.einsum("nij,nj->ni", jac, r))))
            if kernel > 1e-7 or np.any(eig[:, :3] >= -1e-10):
                problems.append(f"euclidean kernel {kernel:.2e}")
        elif np.any(eig >= -1e-10):
            problems.append("hyperbolic eigenvalue not negative")
    return not problems, "; ".join(problems) or f"{n} tetrahedra per geometry"


def lambda_certificate(rng):
    mesh = boundary_simplex()
    problems = 0
    worst_cosine = 1.0
    for geometry in Geometry:
        for _ in range(settings.SELFTEST_METRIC_SAMPLES):
            m = sample_admissible_metric(mesh, geometry, rng)
            jac = curvature_jacobian(mesh, m)
            eig = jac.eigenvalues
            zero = np.abs(eig) <= settings.SPECTRAL_ZERO_TOLERANCE
            ok = jac.symmetry_residual <= 1e-7
            if geometry is Geometry.EUCLIDEAN:
                cosine = abs(float(jac.eigenvectors[:, 0] @ m.radii)) / np.linalg.norm(m.radii)
                worst_cosine = min(worst_cosine, cosine)
                ok = ok and zero.sum() == 1 and zero[0] and np.all(eig[1:] > 0) and cosine >= 1 - 1e-8
            else:
                ok = ok and np.all(eig > 0)
            problems += not ok
    return problems == 0, f"{problems} failing metrics, worst kernel cosine {worst_cosine:.12f}"


def _crushed_metric(mesh, rng):
    m = sample_admissible_metric(mesh, Geometry.EUCLIDEAN, rng)
    radii = np.array(m.radii)
    radii[rng.integers(mesh.vertex_count)] *= 0.01
    return radii


def potential_convexity(rng):
    mesh = boundary_simplex()
    truth = sample_admissible_metric(mesh, Geometry.EUCLIDEAN, rng)
    target = PrescribedTarget(scalar_curvature(mesh, truth).values, 0.0, Geometry.EUCLIDEAN)

    worst_gap = np.inf
    for _ in range(settings.SELFTEST_SEGMENT_SAMPLES):
        a, b = _log_uniform(rng, 0.05, 2.0, (2, mesh.vertex_count))
        for theta in (0.25, 0.5, 0.75):
            mid = theta * a + (1 - theta) * b
            # theta F(a) + (1-theta) F(b) - F(mid), by path independence
            gap = theta * potential_increment(mesh, mid, a, target) + (1 - theta) * potential_increment(
                mesh, mid, b, target
            )
            worst_gap = min(worst_gap, gap)

    worst_fd = 0.0
    points = [np.array(sample_admissible_metric(mesh, Geometry.EUCLIDEAN, rng).radii) for _ in range(10)]
    points += [_crushed_metric(mesh, rng) for _ in range(settings.SELFTEST_GRADIENT_POINTS - 10)]
    for x in points:
        grad = potential_gradient(mesh, PackingMetric(x, Geometry.EUCLIDEAN), target)
        for i in range(mesh.vertex_count):
            h = 1e-4 * x[i]
            lo, hi = x.copy(), x.copy()
            lo[i] -= h
            hi[i] += h
            fd = potential_increment(mesh, lo, hi, target) / (2 * h)
            worst_fd = max(worst_fd, abs(fd - grad[i]))
    passed = worst_gap >= -1e-8 and worst_fd <= 1e-5
    return passed, f"min convexity gap {worst_gap:.2e}, max gradient mismatch {worst_fd:.2e}"


def global_rigidity(rng, seed):
    mesh = boundary_simplex()
    verdicts = []
    for geometry, alpha in ((Geometry.EUCLIDEAN, 0.0), (Geometry.HYPERBOLIC, 0.0), (Geometry.EUCLIDEAN, -2.0)):
        report = rigidity_experiment(mesh, geometry, alpha, settings.SELFTEST_TRIALS, seed)
        verdicts.append((geometry.value, alpha, report.verdict, report.max_pairwise_distance))
    passed = all(v[2] == "PASS" for v in verdicts)
    return passed, "; ".join(f"{g} alpha={a:g}: {v} ({d:.1e})" for g, a, v, d in verdicts)


def reference_values(rng):
    alpha = tetgeom.solid_angles([1.0, 1.0, 1.0, 1.0], Geometry.EUCLIDEAN).solid_angles
    k = scalar_curvature(boundary_simplex(), PackingMetric(np.ones(5), Geometry.EUCLIDEAN)).values
    angle_error = float(np.max(np.abs(alpha - REGULAR_SOLID_ANGLE)))
    curvature_error = float(np.max(np.abs(k - REGULAR_CURVATURE)))
    passed = angle_error <= 1e-12 and curvature_error <= 1e-9
    return passed, f"solid angle error {angle_error:.1e}, curvature error {curvature_error:.1e}"


def determinism(rng, seed):
    mesh = boundary_simplex()
    first = rigidity_experiment(mesh, Geometry.EUCLIDEAN, 0.0, 3, seed).model_dump_json()
    second = rigidity_experiment(mesh, Geometry.EUCLIDEAN, 0.0, 3, seed).model_dump_json()
    samples = _uniform_open_closed(np.random.default_rng(seed), 10.0, (1000, 4))
    same_codes = np.array_equal(
        classify_many(samples, Geometry.HYPERBOLIC), classify_many(samples.copy(), Geometry.HYPERBOLIC)
    )
    return first == second and same_codes, "repeated experiment reports byte-identical" if first == second else "reports differ"


SUITES = (
    ("descartes_identities", descartes_identities),
    ("soddy_boundary", soddy_boundary),
    ("partition", partition),
    ("degenerate_limits", degenerate_limits),
    ("single_tet_concavity", single_tet_concavity),
    ("lambda_certificate", lambda_certificate),
    ("potential_convexity", potential_convexity),
    ("global_rigidity", global_rigidity),
    ("reference_values", reference_values),
    ("determinism", determinism),
)

_SEEDED = {"global_rigidity", "determinism"}


def run_selftest(seed: int, on_result: Optional[Callable[[SuiteResult, float], None]] = None) -> SelftestReport:
    results = []
    for index, (name, suite) in enumerate(SUITES):
        # Every suite gets its own stream so results do not depend on suite order.
        rng = np.random.default_rng([seed, index])
        started = time.perf_counter()
        try:
            passed, detail = suite(rng, seed) if name in _SEEDED else suite(rng)
        except Exception as e:
            logger.exception("suite %s raised", name)
            passed, detail = False, f"{type(e).__name__}: {e}"
        result = SuiteResult(name=name, passed=bool(passed), detail=detail)
        results.append(result)
        if on_result is not None:
            on_result(result, time.perf_counter() - started)
    return SelftestReport(passed=all(r.passed for r in results), suites=results)
