import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from conftest import PERTURBED_RADII
from core import solver
from core.curvature import PackingMetric, extended_curvature, scalar_curvature
from core.exceptions import AdmissibilityError, InvariantViolation, MeshFormatError
from core.schemas import CertificateStatus, Normalization, SolveOptions, SolveOutcome
from core.solver import (
    PrescribedTarget,
    alpha_target,
    is_admissible,
    potential_gradient,
    potential_hessian,
    potential_increment,
    potential_value,
    rigidity_certificate,
    rigidity_experiment,
    sample_admissible_metric,
    solve_prescribed,
)
from core.tetgeom import Geometry

REGULAR_CURVATURE = 8.0 * np.pi - 12.0 * np.arccos(1.0 / 3.0)


def _unit(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x)


@pytest.fixture(scope="module")
def truth_euclidean():
    return PackingMetric(PERTURBED_RADII, Geometry.EUCLIDEAN)


@pytest.fixture(scope="module")
def truth_hyperbolic():
    return PackingMetric(PERTURBED_RADII, Geometry.HYPERBOLIC)


class TestPrescribedTarget:
    def test_flags(self):
        t = PrescribedTarget([1.0, 2.0], -2.0, Geometry.EUCLIDEAN)
        assert t.alpha_r_nonpositive and not t.alpha_r_vanishes and not t.has_scale_gauge

        t = PrescribedTarget([1.0, 2.0], 0.0, Geometry.EUCLIDEAN)
        assert t.alpha_r_vanishes and t.has_scale_gauge

        t = PrescribedTarget([1.0, 2.0], 0.0, Geometry.HYPERBOLIC)
        assert t.alpha_r_vanishes and not t.has_scale_gauge

        assert not PrescribedTarget([1.0, -2.0], 1.0, Geometry.EUCLIDEAN).alpha_r_nonpositive

    def test_alpha_target_round_trip(self, simplex, truth_euclidean):
        t = alpha_target(simplex, truth_euclidean, -2.0)
        k = scalar_curvature(simplex, truth_euclidean).values
        assert_allclose(t.target, k * truth_euclidean.radii ** 2, rtol=1e-14)
        assert t.alpha_r_nonpositive


class TestPotential:
    def test_gradient_vanishes_at_solution(self, simplex, truth_hyperbolic):
        t = alpha_target(simplex, truth_hyperbolic, 0.0)
        assert np.max(np.abs(potential_gradient(simplex, truth_hyperbolic, t))) <= 1e-12

    def test_gradient_with_zero_target(self, simplex, unit_euclidean):
        t = PrescribedTarget(np.zeros(5), 0.0, Geometry.EUCLIDEAN)
        assert_allclose(potential_gradient(simplex, unit_euclidean, t), 10.3612284, atol=1e-7)

    def test_gradient_at_crushed_vertex(self, simplex):
        target = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        t = PrescribedTarget(target, 0.0, Geometry.EUCLIDEAN)
        g = potential_gradient(simplex, PackingMetric([1e-3, 1, 1, 1, 1], Geometry.EUCLIDEAN), t)
        assert np.all(np.isfinite(g))
        assert_allclose(g[0], -4 * np.pi - target[0], rtol=1e-14)

    def test_value_at_reference_is_zero(self, simplex, truth_euclidean):
        t = alpha_target(simplex, truth_euclidean, 0.0)
        assert potential_value(simplex, truth_euclidean, t, truth_euclidean) == 0.0

    def test_reference_must_be_admissible(self, simplex, unit_euclidean):
        t = PrescribedTarget(np.zeros(5), 0.0, Geometry.EUCLIDEAN)
        crushed = PackingMetric([1e-3, 1, 1, 1, 1], Geometry.EUCLIDEAN)
        with pytest.raises(AdmissibilityError):
            potential_value(simplex, unit_euclidean, t, crushed)

    def test_increment_is_path_additive(self, simplex, truth_euclidean):
        t = alpha_target(simplex, truth_euclidean, 0.0)
        a, b, c = np.ones(5), np.array([0.8, 1.2, 1.0, 0.9, 1.1]), np.array([0.05, 1.0, 1.3, 0.7, 1.0])
        direct = potential_increment(simplex, a, c, t)
        via_b = potential_increment(simplex, a, b, t) + potential_increment(simplex, b, c, t)
        assert abs(direct - via_b) <= 1e-8

    def test_convexity_across_boundary(self, simplex, truth_euclidean, rng):
        t = alpha_target(simplex, truth_euclidean, 0.0)
        for _ in range(5):
            a, b = np.exp(rng.uniform(np.log(0.05), np.log(2.0), (2, 5)))
            for theta in (0.25, 0.5, 0.75):
                mid = theta * a + (1 - theta) * b
                gap = theta * potential_increment(simplex, mid, a, t) + (1 - theta) * potential_increment(
                    simplex, mid, b, t
                )
                assert gap >= -1e-8

    def test_kink_is_resolved_with_few_batched_calls(self, simplex, truth_euclidean, monkeypatch):
        calls = []
        original = solver.extended_curvature_rows

        def counting(c, radii, geometry):
            calls.append(len(radii))
            return original(c, radii, geometry)

        monkeypatch.setattr(solver, "extended_curvature_rows", counting)
        t = alpha_target(simplex, truth_euclidean, 0.0)
        start, end = np.ones(5), np.array([0.05, 1.0, 1.0, 1.0, 1.0])
        value = potential_increment(simplex, start, end, t)
        # the segment leaves the admissible region where vertex 0 is crushed
        assert not is_admissible(simplex, PackingMetric(end, Geometry.EUCLIDEAN))
        assert len(calls) <= 100
        split = potential_increment(simplex, start, 0.5 * (start + end), t) + potential_increment(
            simplex, 0.5 * (start + end), end, t
        )
        assert abs(value - split) <= 1e-8

    def test_gradient_matches_quadrature(self, simplex, truth_euclidean, rng):
        t = alpha_target(simplex, truth_euclidean, 0.0)
        admissible = sample_admissible_metric(simplex, Geometry.EUCLIDEAN, rng).radii
        crushed = np.array(admissible)
        crushed[2] *= 0.01
        for x in (np.array(admissible), crushed):
            g = potential_gradient(simplex, PackingMetric(x, Geometry.EUCLIDEAN), t)
            for i in range(5):
                h = 1e-4 * x[i] * np.eye(5)[i]
                fd = potential_increment(simplex, x - h, x + h, t) / (2 * h[i])
                assert abs(fd - g[i]) <= 1e-5

    def test_hessian_matches_gradient_differences(self, simplex, truth_euclidean):
        t = alpha_target(simplex, truth_euclidean, -2.0)
        x = np.array(truth_euclidean.radii)
        hessian = potential_hessian(simplex, truth_euclidean, t)
        for j in range(5):
            h = 1e-6 * np.eye(5)[j]
            up = potential_gradient(simplex, PackingMetric(x + h, Geometry.EUCLIDEAN), t)
            down = potential_gradient(simplex, PackingMetric(x - h, Geometry.EUCLIDEAN), t)
            assert_allclose(hessian[:, j], (up - down) / 2e-6, atol=1e-5)


class TestSolvePrescribed:
    def test_euclidean_recovers_up_to_scale(self, simplex, truth_euclidean):
        t = alpha_target(simplex, truth_euclidean, 0.0)
        result = solve_prescribed(simplex, t, SolveOptions.from_settings())
        assert result.converged and result.outcome is SolveOutcome.CONVERGED
        assert result.final_gradient_norm <= 1e-9
        assert_allclose(_unit(result.radii), _unit(truth_euclidean.radii), rtol=1e-6)
        # the gauge keeps the norm of the initial metric
        assert_allclose(np.linalg.norm(result.radii), np.sqrt(5.0), rtol=1e-12)

    def test_hyperbolic_recovers_exactly(self, simplex, truth_hyperbolic):
        t = alpha_target(simplex, truth_hyperbolic, 0.0)
        result = solve_prescribed(simplex, t, SolveOptions.from_settings())
        assert result.converged
        assert_allclose(result.radii, truth_hyperbolic.radii, rtol=1e-6)

    def test_negative_alpha_recovers_exactly(self, simplex, truth_euclidean):
        t = alpha_target(simplex, truth_euclidean, -2.0)
        result = solve_prescribed(simplex, t, SolveOptions.from_settings())
        assert result.converged
        assert_allclose(result.radii, truth_euclidean.radii, rtol=1e-6)

    def test_trajectory_descends(self, simplex, truth_euclidean):
        t = alpha_target(simplex, truth_euclidean, -2.0)
        result = solve_prescribed(simplex, t, SolveOptions.from_settings(initial_radii=[0.6, 1.7, 0.9, 1.2, 0.5]))
        potentials = [p.potential for p in result.trajectory]
        assert result.trajectory[0].iteration == 0 and result.trajectory[0].potential == 0.0
        for before, after in zip(potentials, potentials[1:]):
            assert after <= before + 1e-12 * max(1.0, abs(before))
        assert all(r > 0 for r in result.radii)

    @pytest.mark.parametrize("scale", [0.5, 2.0])
    def test_scale_gauge(self, simplex, truth_euclidean, scale):
        t = alpha_target(simplex, truth_euclidean, 0.0)
        start = np.array([1.2, 0.8, 1.0, 1.1, 0.9])
        base = solve_prescribed(simplex, t, SolveOptions.from_settings(initial_radii=start.tolist()))
        moved = solve_prescribed(simplex, t, SolveOptions.from_settings(initial_radii=(scale * start).tolist()))
        assert np.linalg.norm(_unit(base.radii) - _unit(moved.radii)) <= 1e-7

    def test_deterministic(self, simplex, truth_hyperbolic):
        t = alpha_target(simplex, truth_hyperbolic, 0.0)
        opts = SolveOptions.from_settings(initial_radii=[1.5, 0.7, 1.0, 1.9, 0.6])
        assert solve_prescribed(simplex, t, opts).model_dump_json() == solve_prescribed(simplex, t, opts).model_dump_json()

    def test_iteration_limit(self, simplex, truth_hyperbolic):
        t = alpha_target(simplex, truth_hyperbolic, 0.0)
        result = solve_prescribed(simplex, t, SolveOptions.from_settings(max_iterations=1))
        assert not result.converged
        assert result.outcome is SolveOutcome.ITERATION_LIMIT
        assert result.iterations == 1 and len(result.trajectory) == 2

    def test_extended_critical_point(self, simplex):
        crushed = PackingMetric([1e-3, 1, 1, 1, 1], Geometry.EUCLIDEAN)
        t = PrescribedTarget(extended_curvature(simplex, crushed).values, 0.0, Geometry.EUCLIDEAN)
        result = solve_prescribed(simplex, t, SolveOptions.from_settings(initial_radii=crushed.radii.tolist()))
        assert result.outcome is SolveOutcome.EXTENDED_CRITICAL_POINT
        assert not result.converged

    def test_explicit_normalization(self, simplex, truth_hyperbolic):
        t = alpha_target(simplex, truth_hyperbolic, 0.0)
        opts = SolveOptions.from_settings(
            normalization=Normalization.SUM_SQUARES_FIXED, initial_radii=[2.0] * 5, max_iterations=3
        )
        result = solve_prescribed(simplex, t, opts)
        assert_allclose(np.linalg.norm(result.radii), np.sqrt(20.0), rtol=1e-12)

    def test_start_next_to_boundary(self, simplex, truth_euclidean):
        t = alpha_target(simplex, truth_euclidean, 0.0)
        start = [2.0 / np.sqrt(3.0) - 1.0 + 1e-8, 1.0, 1.0, 1.0, 1.0]
        result = solve_prescribed(simplex, t, SolveOptions.from_settings(initial_radii=start))
        assert result.converged
        assert_allclose(_unit(result.radii), _unit(truth_euclidean.radii), rtol=1e-6)

    def test_unreliable_hessian_falls_back_to_gradient(self, simplex, truth_hyperbolic, monkeypatch):
        calls = []
        original = solver.potential_hessian

        def flaky(c, m, t):
            calls.append(1)
            if len(calls) == 1:
                raise InvariantViolation("angle Jacobian asymmetric")
            return original(c, m, t)

        monkeypatch.setattr(solver, "potential_hessian", flaky)
        t = alpha_target(simplex, truth_hyperbolic, 0.0)
        result = solve_prescribed(simplex, t, SolveOptions.from_settings())
        assert len(calls) > 1
        assert result.converged
        assert_allclose(result.radii, truth_hyperbolic.radii, rtol=1e-6)

    def test_open_complex_is_rejected(self, tetrahedron):
        t = PrescribedTarget(np.zeros(4), 0.0, Geometry.EUCLIDEAN)
        with pytest.raises(MeshFormatError):
            solve_prescribed(tetrahedron, t, SolveOptions.from_settings())

    def test_options_are_validated(self):
        with pytest.raises(ValidationError):
            SolveOptions(armijo_c1=1.5)
        with pytest.raises(ValidationError):
            SolveOptions(initial_radii=[1.0, -1.0])


class TestRigidityCertificate:
    def test_euclidean_gauge(self, simplex, unit_euclidean):
        cert = rigidity_certificate(simplex, unit_euclidean, alpha_target(simplex, unit_euclidean, 0.0))
        assert cert.status is CertificateStatus.PSD_KERNEL_ALONG_R
        assert cert.zero_eigenvalues == 1
        assert cert.kernel_cosine >= 1 - 1e-8

    def test_euclidean_negative_alpha(self, simplex, unit_euclidean):
        cert = rigidity_certificate(simplex, unit_euclidean, alpha_target(simplex, unit_euclidean, -2.0))
        assert cert.status is CertificateStatus.POSITIVE_DEFINITE
        assert all(v > 0 for v in cert.eigenvalues)
        assert cert.hypothesis_holds

    def test_hyperbolic(self, simplex, unit_hyperbolic):
        cert = rigidity_certificate(simplex, unit_hyperbolic, alpha_target(simplex, unit_hyperbolic, 0.0))
        assert cert.status is CertificateStatus.POSITIVE_DEFINITE and cert.certified

    def test_hypothesis_flag_for_positive_alpha(self, simplex, unit_euclidean):
        cert = rigidity_certificate(simplex, unit_euclidean, alpha_target(simplex, unit_euclidean, 1.0))
        assert not cert.hypothesis_holds

    def test_requires_admissible_metric(self, simplex):
        crushed = PackingMetric([1e-3, 1, 1, 1, 1], Geometry.EUCLIDEAN)
        t = PrescribedTarget(np.zeros(5), 0.0, Geometry.EUCLIDEAN)
        with pytest.raises(AdmissibilityError):
            rigidity_certificate(simplex, crushed, t)


class TestRigidityExperiment:
    @pytest.mark.parametrize(
        "geometry, alpha, gauge",
        [(Geometry.EUCLIDEAN, 0.0, True), (Geometry.HYPERBOLIC, 0.0, False), (Geometry.EUCLIDEAN, -2.0, False)],
    )
    def test_passes_on_boundary_simplex(self, simplex, geometry, alpha, gauge):
        report = rigidity_experiment(simplex, geometry, alpha, trials=3, seed=11)
        assert report.verdict == "PASS", report.note
        assert report.gauge is gauge
        assert report.max_pairwise_distance <= 1e-5
        assert [r.index for r in report.records] == [0, 1, 2]
        assert all(r.trajectory is None for r in report.records)

    def test_sampled_metrics_are_admissible(self, cross_polytope, rng):
        for geometry in Geometry:
            m = sample_admissible_metric(cross_polytope, geometry, rng)
            assert is_admissible(cross_polytope, m)
            assert np.all((m.radii >= 0.5) & (m.radii <= 2.0))
