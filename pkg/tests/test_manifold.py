import math

import numpy as np
import pytest

from wasserstat.errors import ConfigurationError, DegenerateMetricError, DomainError
from wasserstat.expfam import family_from_angle, k3_graph, softmax_model
from wasserstat.flow import fpe_trajectory
from wasserstat.ground_metric import Distribution, laplacian_pinv
from wasserstat.manifold import (
    StatisticalModel,
    christoffel_symbols,
    coordinate_hessians,
    fisher_rao_metric,
    jacobian,
    kl_divergence,
    kl_gradient,
    metric_derivatives,
    probabilities,
    relative_fisher_information,
    simplex_chart_model,
    validate_differentials,
    wasserstein_metric,
)

from conftest import strip_fast_path


class TestJacobian:
    def test_softmax_closed_form(self, expfam_model):
        theta = np.array([0.4])
        p = probabilities(expfam_model, theta)
        c = expfam_model.softmax_stat
        expect = p * (c - p @ c)
        np.testing.assert_allclose(jacobian(expfam_model, theta)[:, 0], expect,
                                   atol=1e-14)

    def test_columns_sum_to_zero(self, expfam_model, chart3):
        for model, theta in [(expfam_model, [0.3]), (chart3, [0.2, 0.3])]:
            J = jacobian(model, np.asarray(theta))
            np.testing.assert_allclose(J.sum(axis=0), 0.0, atol=1e-12)

    def test_fd_matches_analytic_on_grid(self, expfam_model):
        fd_model = strip_fast_path(expfam_model)
        fd_model.jacobian_fn = None
        for theta in np.linspace(-0.9, 0.9, 7):
            J = jacobian(expfam_model, [theta])
            Jfd = jacobian(fd_model, [theta])
            assert np.abs(J - Jfd).max() <= 1e-5 * max(np.abs(J).max(), 1.0)

    def test_outside_domain_raises(self, expfam_model):
        with pytest.raises(DomainError):
            jacobian(expfam_model, [1.5])

    def test_validate_differentials_catches_bad_jacobian(self, expfam_model):
        import copy

        bad = copy.copy(expfam_model)
        bad.jacobian_fn = lambda theta: 2.0 * expfam_model.jacobian_fn(theta)
        with pytest.raises(ConfigurationError, match="Jacobian"):
            validate_differentials(bad)
        validate_differentials(expfam_model)  # the honest one passes


class TestWassersteinMetric:
    def test_chart_pullback_equals_tangent_form(self, chart3, k3_unit):
        rng = np.random.default_rng(5)
        for _ in range(20):
            theta = rng.uniform(0.1, 0.4, size=2)
            a = rng.normal(size=2)
            G = wasserstein_metric(chart3, k3_unit, theta).matrix
            sigma = np.array([a[0], a[1], -a.sum()])
            Li = laplacian_pinv(k3_unit, np.append(theta, 1 - theta.sum()))
            assert abs(a @ G @ a - sigma @ Li @ sigma) < 1e-10

    def test_positive_scalar_for_family(self, k3_unit):
        model = family_from_angle(0.0).to_model()
        G = wasserstein_metric(model, k3_unit, [0.0]).matrix
        assert G.shape == (1, 1) and G[0, 0] > 0
        # uniform p: L^+ acts as 1/3 on the sum-zero subspace
        np.testing.assert_allclose(G[0, 0], (1.0 / 3.0) * (1.0 / 9.0), atol=1e-14)

    def test_two_pinv_routes_agree(self, k3_unit):
        model = family_from_angle(1.2).to_model()
        theta = np.array([0.6])
        G = wasserstein_metric(model, k3_unit, theta).matrix
        J = jacobian(model, theta)
        Li = laplacian_pinv(k3_unit, probabilities(model, theta))
        np.testing.assert_allclose(G, J.T @ Li @ J, atol=1e-12)

    def test_weight_scaling_inverts(self):
        model = family_from_angle(0.9).to_model()
        theta = np.array([0.25])
        base = wasserstein_metric(model, k3_graph((0.5, 0.3, 0.2)), theta).matrix
        scaled = wasserstein_metric(model, k3_graph((1.5, 0.9, 0.6)), theta).matrix
        np.testing.assert_allclose(scaled, base / 3.0, atol=1e-10)

    def test_rank_deficiency_raises(self, k3_unit):
        flat = StatisticalModel(
            dim=1, theta_min=[-1.0], theta_max=[1.0],
            map=lambda theta: np.array([0.2, 0.3, 0.5]),
            jacobian_fn=lambda theta: np.zeros((3, 1)))
        with pytest.raises(DegenerateMetricError):
            wasserstein_metric(flat, k3_unit, [0.0])


class TestFisherRao:
    def test_variance_at_origin(self):
        # unit-norm statistic under the uniform distribution: Var = 1/3
        for phi in (0.0, 0.7, 2.1):
            model = family_from_angle(phi).to_model()
            G = fisher_rao_metric(model, [0.0]).matrix
            np.testing.assert_allclose(G[0, 0], 1.0 / 3.0, atol=1e-12)

    def test_log_form_identity(self, expfam_model):
        theta = np.array([0.55])
        p = probabilities(expfam_model, theta)
        J = jacobian(expfam_model, theta)
        dlog = J / p[:, None]
        expect = np.einsum("ia,ib,i->ab", dlog, dlog, p)
        np.testing.assert_allclose(fisher_rao_metric(expfam_model, theta).matrix,
                                   expect, atol=1e-10)

    def test_chart_brute_force(self, chart3):
        theta = np.array([0.2, 0.35])
        p = probabilities(chart3, theta)
        J = jacobian(chart3, theta)
        brute = sum(np.outer(J[i], J[i]) / p[i] for i in range(3))
        np.testing.assert_allclose(fisher_rao_metric(chart3, theta).matrix,
                                   brute, atol=1e-12)


class TestKL:
    def test_identity_is_zero(self):
        p = Distribution([0.2, 0.5, 0.3])
        assert kl_divergence(p, p) == 0.0

    def test_uniform_reference_entropy_form(self):
        p = np.array([0.2, 0.5, 0.3])
        expect = float(p @ np.log(p)) + math.log(3.0)
        assert abs(kl_divergence(p, np.full(3, 1 / 3)) - expect) < 1e-14

    def test_hand_value(self):
        p = np.array([0.5, 0.25, 0.25])
        expect = math.log(3.0) - 1.5 * math.log(2.0)
        assert abs(kl_divergence(p, np.full(3, 1 / 3)) - expect) < 1e-14
        assert abs(expect - 0.0589) < 1e-4

    def test_nonnegative(self):
        rng = np.random.default_rng(37)
        for _ in range(50):
            p = rng.dirichlet(np.ones(4)) + 0.01
            q = rng.dirichlet(np.ones(4)) + 0.01
            assert kl_divergence(p / p.sum(), q / q.sum()) >= 0.0


class TestKLGradient:
    def test_zero_at_reference(self, expfam_model, q_uniform3):
        theta = np.array([0.3])
        p = probabilities(expfam_model, theta)
        np.testing.assert_allclose(kl_gradient(expfam_model, theta, p), 0.0,
                                   atol=1e-14)
        np.testing.assert_allclose(
            kl_gradient(expfam_model, [0.0], q_uniform3), 0.0, atol=1e-14)

    def test_matches_finite_differences(self, q_uniform3):
        rng = np.random.default_rng(41)
        for phi in (0.3, 1.5):
            model = family_from_angle(phi).to_model()
            for _ in range(5):
                theta = rng.uniform(-0.9, 0.9, size=1)
                grad = kl_gradient(model, theta, q_uniform3)
                eps = 1e-5
                fd = (kl_divergence(model.map(theta + eps), q_uniform3)
                      - kl_divergence(model.map(theta - eps), q_uniform3)) / (2 * eps)
                assert abs(grad[0] - fd) <= 1e-6


class TestCoordinateHessians:
    def test_affine_model_is_zero(self, chart3):
        H = coordinate_hessians(chart3, [0.2, 0.3])
        np.testing.assert_allclose(H, 0.0, atol=1e-14)

    def test_stack_sums_to_zero(self, expfam_model):
        H = coordinate_hessians(expfam_model, [0.6])
        np.testing.assert_allclose(H.sum(axis=0), 0.0, atol=1e-12)

    def test_fd_matches_softmax_second_derivative(self, expfam_model):
        fd_model = strip_fast_path(expfam_model)
        fd_model.second_diff_fn = None
        for theta in ([-0.5], [0.0], [0.7]):
            H = coordinate_hessians(expfam_model, theta)
            Hfd = coordinate_hessians(fd_model, theta)
            assert np.abs(H - Hfd).max() < 1e-4


class TestChristoffel:
    def test_symmetric_in_lower_indices(self, chart3, k3_unit):
        gamma = christoffel_symbols(chart3, k3_unit, [0.2, 0.3])
        np.testing.assert_array_equal(gamma, gamma.transpose(0, 2, 1))

    def test_constant_metric_gives_zero(self):
        # two-state chart: the mobility of the single edge is identically 1,
        # so the metric does not depend on theta at all
        model = simplex_chart_model(2)
        from wasserstat.ground_metric import Graph

        g2 = Graph(2, [(0, 1)], [1.0])
        dG = metric_derivatives(model, g2, [0.4])
        np.testing.assert_allclose(dG, 0.0, atol=1e-9)
        gamma = christoffel_symbols(model, g2, [0.4])
        np.testing.assert_allclose(gamma, 0.0, atol=1e-8)

    def test_stencil_margin_violation(self, expfam_model, k3_unit):
        with pytest.raises(DomainError, match="stencil"):
            christoffel_symbols(expfam_model, k3_unit, [1.0])


class TestRelativeFisherInformation:
    def test_zero_at_reference(self, expfam_model, k3_unit):
        theta = np.array([0.4])
        p = probabilities(expfam_model, theta)
        assert relative_fisher_information(expfam_model, k3_unit, theta, p) < 1e-24

    def test_definition_identity(self, expfam_model, k3_unit, q_uniform3):
        theta = np.array([0.65])
        g = kl_gradient(expfam_model, theta, q_uniform3)
        G = wasserstein_metric(expfam_model, k3_unit, theta).matrix
        expect = float(g @ np.linalg.solve(G, g))
        got = relative_fisher_information(expfam_model, k3_unit, theta, q_uniform3)
        assert abs(got - expect) < 1e-10 * max(1.0, expect)
        assert got >= 0.0

    def test_equals_kl_dissipation_along_flow(self, expfam_model, k3_unit,
                                              q_uniform3):
        # -d/dt KL along the flow equals the information functional
        theta0 = np.array([0.5])
        h = 1e-4
        traj = fpe_trajectory(expfam_model, k3_unit, theta0, q_uniform3,
                              h, 20 * h, method="rk4")
        k = 10
        dkl_dt = (traj.kls[k + 1] - traj.kls[k - 1]) / (2 * h)
        info = relative_fisher_information(expfam_model, k3_unit,
                                           traj.thetas[k], q_uniform3)
        assert abs(-dkl_dt - info) < 1e-4
