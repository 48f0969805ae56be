import numpy as np
import pytest

from wasserstat.curvature import ricci_lower_bound
from wasserstat.errors import (
    BoundaryStallError,
    ConfigurationError,
    DegenerateRateError,
)
from wasserstat.expfam import family_from_angle, k3_graph, softmax_model
from wasserstat.flow import (
    convergence_rate,
    fit_decay_rate,
    fpe_step,
    fpe_trajectory,
    initial_grid,
    second_difference_rates,
)
from wasserstat.manifold import kl_divergence, relative_fisher_information

from conftest import strip_fast_path


class TestFpeStep:
    def test_fixed_point(self, expfam_model, k3_unit, q_uniform3):
        theta = fpe_step(expfam_model, k3_unit, [0.0], q_uniform3, 1e-3)
        np.testing.assert_allclose(theta, 0.0, atol=1e-15)

    def test_steps_toward_minimizer(self, expfam_model, k3_unit, q_uniform3):
        # KL to the uniform measure decreases away from 0 in both directions
        up = fpe_step(expfam_model, k3_unit, [0.6], q_uniform3, 1e-3)
        down = fpe_step(expfam_model, k3_unit, [-0.6], q_uniform3, 1e-3)
        assert 0.0 < up[0] < 0.6
        assert -0.6 < down[0] < 0.0

    def test_richardson_halving(self, expfam_model, k3_unit, q_uniform3):
        # |step(h) - 2 x step(h/2)| is the local truncation gap: O(h^2)
        theta0 = [0.5]

        def gap(h):
            one = fpe_step(expfam_model, k3_unit, theta0, q_uniform3, h)
            half = fpe_step(expfam_model, k3_unit,
                            fpe_step(expfam_model, k3_unit, theta0, q_uniform3, h / 2),
                            q_uniform3, h / 2)
            return np.abs(one - half).max()

        g1, g2 = gap(1e-2), gap(5e-3)
        assert g2 < 0.35 * g1  # quarters when h halves, up to higher order

    def test_invalid_h(self, expfam_model, k3_unit, q_uniform3):
        with pytest.raises(ConfigurationError):
            fpe_step(expfam_model, k3_unit, [0.1], q_uniform3, -1e-3)


class TestTrajectory:
    def test_constant_from_minimizer(self, expfam_model, k3_unit, q_uniform3):
        traj = fpe_trajectory(expfam_model, k3_unit, [0.0], q_uniform3,
                              1e-3, 0.05)
        assert traj.terminal == "converged"
        np.testing.assert_allclose(traj.thetas, 0.0, atol=1e-14)

    def test_kl_monotone_nonincreasing(self, expfam_model, k3_unit, q_uniform3):
        traj = fpe_trajectory(expfam_model, k3_unit, [0.9], q_uniform3,
                              1e-3, 0.5)
        assert np.all(np.diff(traj.kls) <= 1e-10)

    def test_deterministic(self, expfam_model, k3_unit, q_uniform3):
        a = fpe_trajectory(expfam_model, k3_unit, [0.7], q_uniform3, 1e-3, 0.2)
        b = fpe_trajectory(expfam_model, k3_unit, [0.7], q_uniform3, 1e-3, 0.2)
        assert np.array_equal(a.thetas, b.thetas)
        assert np.array_equal(a.kls, b.kls)

    def test_kernel_matches_generic(self, expfam_model, k3_unit, q_uniform3):
        generic = strip_fast_path(expfam_model)
        a = fpe_trajectory(expfam_model, k3_unit, [0.7], q_uniform3, 1e-3, 0.1)
        b = fpe_trajectory(generic, k3_unit, [0.7], q_uniform3, 1e-3, 0.1)
        np.testing.assert_allclose(a.thetas, b.thetas, atol=1e-12)
        np.testing.assert_allclose(a.kls, b.kls, atol=1e-12)

    def test_time_grid(self, expfam_model, k3_unit, q_uniform3):
        traj = fpe_trajectory(expfam_model, k3_unit, [0.5], q_uniform3,
                              1e-3, 0.02)
        np.testing.assert_allclose(np.diff(traj.t), 1e-3)
        assert traj.terminal == "max-steps"

    def test_exponential_decay_bound(self, k3_unit, q_uniform3):
        model = family_from_angle(0.4).to_model()
        kappa = ricci_lower_bound(model, k3_unit, q_uniform3).kappa
        assert kappa > 0
        for theta0 in (-0.95, 0.35, 0.8):
            traj = fpe_trajectory(model, k3_unit, [theta0], q_uniform3,
                                  1e-3, 0.3)
            bound = np.exp(-2 * kappa * traj.t) * traj.kls[0]
            assert np.all(traj.kls <= bound + 1e-6)

    def test_boundary_stall_attaches_partial(self, k3_unit):
        # reference concentrated far outside the domain box: the flow runs
        # into the boundary and cannot advance
        fam = family_from_angle(0.0, -0.5, 0.5)
        model = fam.to_model()
        q = np.exp(3.0 * fam.c)
        q /= q.sum()
        with pytest.raises(BoundaryStallError) as err:
            fpe_trajectory(model, k3_unit, [0.3], q, 1e-4, 5.0)
        partial = err.value.trajectory
        assert partial is not None
        assert partial.terminal == "boundary-hit"
        assert partial.thetas[-1, 0] > 0.45  # crept up to the edge first
        assert np.all(partial.thetas[:, 0] <= 0.5)
        generic = strip_fast_path(model)
        with pytest.raises(BoundaryStallError):
            fpe_trajectory(generic, k3_unit, [0.3], q, 1e-4, 5.0)

    def test_csv_export(self, tmp_path, expfam_model, k3_unit, q_uniform3):
        traj = fpe_trajectory(expfam_model, k3_unit, [0.5], q_uniform3,
                              1e-3, 0.01)
        out = tmp_path / "traj.csv"
        traj.to_csv(out)
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "t,theta_1,kl"
        assert len(lines) == len(traj.t) + 1
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[2]) == traj.kls[0]


class TestConvergenceRate:
    def test_synthetic_exponential_recovers_rate(self):
        # closed form: every per-step ratio of A exp(-2 r t) + C is tanh(r h)/h
        r, h = 1.7, 1e-3
        t = h * np.arange(400)
        kls = 0.3 * np.exp(-2 * r * t) + 0.05
        rates = second_difference_rates(kls, h)
        np.testing.assert_allclose(rates, np.tanh(r * h) / h, rtol=1e-10)
        assert abs(rates.min() - r) < 1e-6 * r
        # and the rate tightens as h -> 0
        for h2 in (1e-2, 1e-3, 1e-4):
            kls2 = np.exp(-2 * r * h2 * np.arange(10))
            err = abs(second_difference_rates(kls2, h2).min() - r)
            assert err < 0.4 * r * (r * h2) ** 2 + 1e-12

    def test_min_over_initials_and_argmin(self, expfam_model, k3_unit,
                                          q_uniform3):
        initials = [[-0.9], [0.2], [0.9]]
        rate = convergence_rate(expfam_model, k3_unit, q_uniform3, initials,
                                1e-3, 0.05)
        assert rate.K == np.nanmin(rate.ratios)
        idx = int(np.nanargmin(rate.ratios))
        np.testing.assert_array_equal(rate.argmin_initial, initials[idx])

    def test_permutation_invariant(self, expfam_model, k3_unit, q_uniform3):
        initials = np.array([[-0.9], [0.2], [0.9], [0.5]])
        a = convergence_rate(expfam_model, k3_unit, q_uniform3, initials,
                             1e-3, 0.05)
        b = convergence_rate(expfam_model, k3_unit, q_uniform3, initials[::-1],
                             1e-3, 0.05)
        assert a.K == b.K

    def test_equilibrium_initial_skipped(self, expfam_model, k3_unit,
                                         q_uniform3):
        rate = convergence_rate(expfam_model, k3_unit, q_uniform3,
                                [[0.0], [0.5]], 1e-3, 0.05)
        assert rate.skipped == [0]
        assert np.isnan(rate.ratios[0])

    def test_all_equilibrium_degenerate(self, expfam_model, k3_unit,
                                        q_uniform3):
        with pytest.raises(DegenerateRateError):
            convergence_rate(expfam_model, k3_unit, q_uniform3, [[0.0]],
                             1e-3, 0.05)

    def test_T_must_be_multiple_of_h(self, expfam_model, k3_unit, q_uniform3):
        with pytest.raises(ConfigurationError, match="multiple"):
            convergence_rate(expfam_model, k3_unit, q_uniform3, [[0.5]],
                             1e-3, 0.0105)

    def test_initial_grid_shape(self, expfam_model, chart3):
        g1 = initial_grid(expfam_model, 10)
        assert g1.shape == (10, 1)
        assert g1[0, 0] == -1.0 and g1[-1, 0] == 1.0
        g2 = initial_grid(chart3, 4)
        assert g2.shape == (16, 2)


class TestDissipationIdentity:
    def test_kl_drop_matches_information(self, expfam_model, k3_unit,
                                         q_uniform3):
        theta0 = np.array([0.6])
        info = relative_fisher_information(expfam_model, k3_unit, theta0,
                                           q_uniform3)
        kl0 = kl_divergence(expfam_model.map(theta0), q_uniform3)

        def drop_rate(h):
            theta1 = fpe_step(expfam_model, k3_unit, theta0, q_uniform3, h)
            return (kl0 - kl_divergence(expfam_model.map(theta1), q_uniform3)) / h

        h = 1e-3
        err_h = abs(drop_rate(h) - info)
        err_half = abs(drop_rate(h / 2) - info)
        assert err_half < 0.75 * err_h  # first-order error shrinks with h
        # Richardson extrapolation cancels the O(h) term
        assert abs(2 * drop_rate(h / 2) - drop_rate(h) - info) < 0.05 * err_h


class TestFitDecayRate:
    def test_recovers_synthetic_rate(self):
        t = 1e-3 * np.arange(20000)
        kls = 0.2 * np.exp(-3.4 * t)
        rate = fit_decay_rate(t, kls, 0.0, lower=1e-10, upper=1e-4)
        assert abs(rate - 3.4) < 1e-6

    def test_window_too_small(self):
        with pytest.raises(ConfigurationError):
            fit_decay_rate(np.array([0.0, 1.0]), np.array([1.0, 1.0]), 0.0)
