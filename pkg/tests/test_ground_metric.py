import json

import numpy as np
import pytest

from wasserstat.errors import ConfigurationError, NumericalDegeneracyError
from wasserstat.ground_metric import (
    Distribution,
    Graph,
    incidence_matrix,
    laplacian,
    laplacian_pinv,
    mobility_matrix,
    mobility_vector,
    volume_form,
)

from conftest import random_connected_graph, random_interior_distribution


class TestGraph:
    def test_rejects_disconnected(self):
        with pytest.raises(ConfigurationError, match="connected"):
            Graph(4, [(0, 1), (2, 3)], [1.0, 1.0])

    def test_zero_weight_edge_is_absent(self):
        g = Graph(3, [(0, 1), (1, 2), (0, 2)], [0.5, 0.5, 0.0])
        assert g.n_edges == 2
        assert (2, 0) not in g.edges

    def test_zero_weight_disconnects(self):
        with pytest.raises(ConfigurationError, match="connected"):
            Graph(3, [(0, 1), (1, 2), (0, 2)], [1.0, 0.0, 0.0])

    def test_rejects_negative_weight(self):
        with pytest.raises(ConfigurationError, match="negative"):
            Graph(2, [(0, 1)], [-1.0])

    def test_rejects_self_loop_and_duplicates(self):
        with pytest.raises(ConfigurationError, match="self-loop"):
            Graph(2, [(1, 1)], [1.0])
        with pytest.raises(ConfigurationError, match="duplicate"):
            Graph(2, [(0, 1), (1, 0)], [1.0, 2.0])

    def test_json_round_trip_is_one_based(self):
        g = Graph(3, [(0, 1), (1, 2)], [1.5, 0.25])
        obj = json.loads(g.to_json())
        assert obj["n"] == 3
        assert sorted(obj["edges"]) == [[2, 1, 1.5], [3, 2, 0.25]]
        g2 = Graph.from_json(g.to_json())
        assert g2.edges == g.edges
        np.testing.assert_array_equal(g2.weights, g.weights)


class TestDistribution:
    def test_requires_normalization(self):
        with pytest.raises(ConfigurationError, match="sum"):
            Distribution([0.5, 0.6])

    def test_requires_interior(self):
        with pytest.raises(ConfigurationError, match="interior"):
            Distribution([1.0 - 1e-16, 1e-16])

    def test_uniform(self):
        assert np.allclose(Distribution.uniform(4).p, 0.25)


class TestVolumeForm:
    def test_complete_symmetric(self, k3_unit):
        np.testing.assert_allclose(volume_form(k3_unit), 1.0 / 3.0)

    def test_path_graph(self, path3):
        # degree weights (1, 2, 1) over total 4
        np.testing.assert_allclose(volume_form(path3), [0.25, 0.5, 0.25])

    def test_missing_edge_triple(self):
        g = Graph(3, [(0, 1), (1, 2), (0, 2)], [0.5, 0.5, 0.0])
        np.testing.assert_allclose(volume_form(g), [0.25, 0.5, 0.25])

    def test_sums_to_one_random(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            g = random_connected_graph(rng, int(rng.integers(2, 9)))
            assert abs(volume_form(g).sum() - 1.0) < 1e-14


class TestIncidence:
    def test_single_edge_weight_four(self):
        g = Graph(2, [(1, 0)], [4.0])
        D = incidence_matrix(g)
        # +sqrt(w) in the higher-index column, -sqrt(w) in the lower
        np.testing.assert_allclose(D, [[-2.0, 2.0]])

    def test_k3_unit_rows(self, k3_unit):
        D = incidence_matrix(k3_unit)
        assert D.shape == (3, 3)
        for row in D:
            assert sorted(row.tolist()) == [-1.0, 0.0, 1.0]

    def test_zero_weight_edge_has_no_row(self):
        g = Graph(3, [(0, 1), (1, 2), (0, 2)], [1.0, 1.0, 0.0])
        assert incidence_matrix(g).shape == (2, 3)


class TestMobility:
    def test_k3_uniform_is_identity(self, k3_unit):
        np.testing.assert_allclose(
            mobility_matrix(k3_unit, Distribution.uniform(3)), np.eye(3))

    def test_path_hand_value(self, path3):
        np.testing.assert_allclose(
            mobility_vector(path3, Distribution([0.25, 0.5, 0.25])), [1.0, 1.0])

    def test_uniform_entries_equal(self, k3_unit):
        mob = mobility_vector(k3_unit, Distribution.uniform(3))
        assert np.ptp(mob) == 0.0

    def test_formula_entrywise(self):
        rng = np.random.default_rng(3)
        g = random_connected_graph(rng, 5)
        p = random_interior_distribution(rng, 5)
        d = volume_form(g)
        hi, lo = g.edge_arrays()
        expect = 0.5 * (p[hi] / d[hi] + p[lo] / d[lo])
        np.testing.assert_allclose(mobility_vector(g, p), expect)
        assert mobility_vector(g, p).min() > 0


class TestLaplacian:
    def test_k3_uniform_matrix(self, k3_unit):
        L = laplacian(k3_unit, Distribution.uniform(3))
        np.testing.assert_allclose(L, [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]],
                                   atol=1e-14)

    def test_annihilates_constants(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(2, 9))
            g = random_connected_graph(rng, n)
            p = random_interior_distribution(rng, n)
            np.testing.assert_allclose(laplacian(g, p) @ np.ones(n), 0.0,
                                       atol=1e-13)

    def test_quadratic_form_edge_sum(self):
        rng = np.random.default_rng(13)
        g = random_connected_graph(rng, 6)
        p = random_interior_distribution(rng, 6)
        phi = rng.normal(size=6)
        d = volume_form(g)
        expect = sum(
            w * (phi[i] - phi[j]) ** 2 * 0.5 * (p[i] / d[i] + p[j] / d[j])
            for (i, j), w in zip(g.edges, g.weights))
        assert abs(phi @ laplacian(g, p) @ phi - expect) < 1e-12

    def test_linear_in_p(self):
        rng = np.random.default_rng(17)
        g = random_connected_graph(rng, 5)
        p1 = random_interior_distribution(rng, 5)
        p2 = random_interior_distribution(rng, 5)
        for alpha in (0.0, 0.3, 1.0):
            mix = alpha * p1 + (1 - alpha) * p2
            np.testing.assert_allclose(
                laplacian(g, mix),
                alpha * laplacian(g, p1) + (1 - alpha) * laplacian(g, p2),
                atol=1e-13)

    def test_kernel_dimension_one(self):
        rng = np.random.default_rng(19)
        for _ in range(10):
            n = int(rng.integers(2, 9))
            g = random_connected_graph(rng, n)
            p = random_interior_distribution(rng, n)
            eigs = np.linalg.eigvalsh(laplacian(g, p))
            assert abs(eigs[0]) < 1e-12
            assert eigs[1] > 1e-10


class TestLaplacianPinv:
    def test_moore_penrose_identities(self, k3_unit):
        p = Distribution.uniform(3)
        L = laplacian(k3_unit, p)
        Li = laplacian_pinv(k3_unit, p)
        assert np.abs(L @ Li @ L - L).max() < 1e-10
        assert np.abs(Li @ L @ Li - Li).max() < 1e-10
        assert np.abs(L @ Li - (L @ Li).T).max() < 1e-10
        assert np.abs(Li @ L - (Li @ L).T).max() < 1e-10
        np.testing.assert_allclose(Li @ np.ones(3), 0.0, atol=1e-12)
        np.testing.assert_allclose(Li, Li.T)

    def test_projector_onto_sum_zero(self):
        rng = np.random.default_rng(23)
        g = random_connected_graph(rng, 6)
        p = random_interior_distribution(rng, 6)
        proj = laplacian_pinv(g, p) @ laplacian(g, p)
        expect = np.eye(6) - np.ones((6, 6)) / 6.0
        np.testing.assert_allclose(proj, expect, atol=1e-10)

    def test_inverts_on_tangents(self):
        rng = np.random.default_rng(29)
        g = random_connected_graph(rng, 7)
        p = random_interior_distribution(rng, 7)
        sigma = rng.normal(size=7)
        sigma -= sigma.mean()
        L = laplacian(g, p)
        np.testing.assert_allclose(L @ (laplacian_pinv(g, p) @ sigma), sigma,
                                   atol=1e-11)
        # cross-check with a direct solve on the sum-zero complement
        x = np.linalg.lstsq(L, sigma, rcond=None)[0]
        np.testing.assert_allclose(laplacian_pinv(g, p) @ sigma,
                                   x - x.mean(), atol=1e-10)

    def test_near_singular_raises(self):
        # a bridge of weight ~1e-30 makes the second eigenvalue collapse
        g = Graph(4, [(0, 1), (2, 3), (1, 2)], [1.0, 1.0, 1e-30])
        p = Distribution.uniform(4)
        with pytest.raises(NumericalDegeneracyError):
            laplacian_pinv(g, p)

    def test_spectral_path_large_n(self):
        rng = np.random.default_rng(31)
        n = 80  # beyond the direct-solve cutoff
        g = random_connected_graph(rng, n)
        p = random_interior_distribution(rng, n)
        L = laplacian(g, p)
        Li = laplacian_pinv(g, p)
        assert np.abs(L @ Li @ L - L).max() < 1e-9
