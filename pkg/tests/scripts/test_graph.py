"""
Tests for graph topologies and consensus matrices
"""

import numpy as np
import pytest

from adc_dgd.core.graph import (
    Graph, averaging_matrix, build_path, build_ring, build_star, explicit_matrix, from_edges,
    metropolis_matrix, spectral_beta,
)
from adc_dgd.utils.error_handling import MatrixValidationError, TopologyError

STAR4 = np.array([
    [0.25, 0.25, 0.25, 0.25],
    [0.25, 0.75, 0.0, 0.0],
    [0.25, 0.0, 0.75, 0.0],
    [0.25, 0.0, 0.0, 0.75],
])


class TestTopologies:
    """Test cases for graph builders"""

    def test_ring_edges(self):
        """ring(5) is the 5-cycle"""
        g = build_ring(5)
        assert g.edges == frozenset({(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)})

    def test_ring_triangle(self):
        assert len(build_ring(3).edges) == 3

    def test_ring_too_small(self):
        with pytest.raises(TopologyError):
            build_ring(2)

    def test_star_hub_is_node_zero(self):
        g = build_star(4)
        assert g.edges == frozenset({(0, 1), (0, 2), (0, 3)})
        assert g.degree(0) == 3
        assert g.neighbors(0) == [1, 2, 3]

    def test_star_two_nodes(self):
        assert build_star(2).edges == frozenset({(0, 1)})

    def test_star_too_small(self):
        with pytest.raises(TopologyError):
            build_star(1)

    def test_disconnected_rejected(self):
        with pytest.raises(TopologyError):
            from_edges(4, [(0, 1), (2, 3)])

    def test_self_loop_rejected(self):
        with pytest.raises(TopologyError):
            from_edges(3, [(0, 1), (1, 1), (1, 2)])

    def test_duplicate_edge_rejected(self):
        with pytest.raises(TopologyError):
            from_edges(3, [(0, 1), (1, 0), (1, 2)])

    def test_out_of_range_node(self):
        with pytest.raises(TopologyError):
            Graph(n=2, edges=frozenset({(0, 2)}))

    def test_networkx_view(self):
        g = build_ring(6).to_networkx()
        assert g.number_of_nodes() == 6
        assert g.number_of_edges() == 6


class TestMetropolis:
    """Test cases for Metropolis weights"""

    def test_star4_weights_exact(self):
        """Quarters are exact in binary floating point"""
        w = metropolis_matrix(build_star(4))
        assert np.array_equal(w.entries, STAR4)

    def test_ring3_all_thirds(self):
        w = metropolis_matrix(build_ring(3))
        assert np.allclose(w.entries, 1.0 / 3.0, atol=1e-15)

    def test_two_node_path(self):
        w = metropolis_matrix(build_path(2))
        assert np.array_equal(w.entries, np.full((2, 2), 0.5))

    @pytest.mark.parametrize("builder,n", [(build_ring, 7), (build_star, 6), (build_path, 5)])
    def test_doubly_stochastic(self, builder, n):
        w = metropolis_matrix(builder(n))
        ones = np.ones(n)
        assert np.allclose(w.entries @ ones, ones, atol=1e-12)
        assert np.allclose(ones @ w.entries, ones, atol=1e-12)
        assert np.array_equal(w.entries, w.entries.T)

    def test_entries_are_read_only(self):
        w = metropolis_matrix(build_ring(4))
        with pytest.raises(ValueError):
            w.entries[0, 0] = 1.0


class TestExplicitMatrix:
    """Test cases for explicit matrix validation"""

    def setup_method(self):
        self.star = build_star(4)

    def test_star4_accepted(self):
        w = explicit_matrix(STAR4, self.star)
        assert w.beta == pytest.approx(0.75, abs=1e-12)

    def test_row_sums_rejected(self):
        bad = STAR4 * 0.9
        with pytest.raises(MatrixValidationError) as exc:
            explicit_matrix(bad, self.star)
        assert "doubly stochastic" in str(exc.value)

    def test_non_edge_entry_rejected(self):
        bad = STAR4.copy()
        bad[1, 2] = bad[2, 1] = 0.1
        bad[1, 1] -= 0.1
        bad[2, 2] -= 0.1
        with pytest.raises(MatrixValidationError) as exc:
            explicit_matrix(bad, self.star)
        assert "sparsity" in str(exc.value)
        assert "(1, 2)" in str(exc.value)

    def test_asymmetric_rejected(self):
        bad = STAR4.copy()
        bad[0, 1], bad[0, 2] = 0.3, 0.2
        bad[1, 0], bad[1, 1] = 0.2, 0.8
        with pytest.raises(MatrixValidationError) as exc:
            explicit_matrix(bad, self.star)
        assert "symmetric" in str(exc.value)

    def test_negative_rejected(self):
        g = build_path(2)
        with pytest.raises(MatrixValidationError) as exc:
            explicit_matrix([[1.5, -0.5], [-0.5, 1.5]], g)
        assert "non-negative" in str(exc.value)

    def test_eigenvalue_minus_one_rejected(self):
        """Zero diagonal on a 2-path has eigenvalue -1"""
        with pytest.raises(MatrixValidationError) as exc:
            explicit_matrix([[0.0, 1.0], [1.0, 0.0]], build_path(2))
        assert "eigenvalues" in str(exc.value)

    def test_wrong_shape(self):
        with pytest.raises(MatrixValidationError):
            explicit_matrix(np.eye(3), self.star)


class TestSpectrum:
    """Test cases for the spectral quantity beta"""

    def test_star4_eigenvalues(self):
        w = metropolis_matrix(build_star(4))
        assert np.allclose(w.eigenvalues, [1.0, 0.75, 0.75, 0.0], atol=1e-12)
        assert spectral_beta(w) == pytest.approx(0.75, abs=1e-12)
        assert w.lambda_n == pytest.approx(0.0, abs=1e-12)

    def test_averaging_beta_zero(self):
        assert spectral_beta(averaging_matrix(2)) == pytest.approx(0.0, abs=1e-12)

    def test_ring5_beta(self):
        expected = max(abs(1 / 3 + 2 / 3 * np.cos(2 * np.pi * k / 5)) for k in range(1, 5))
        w = metropolis_matrix(build_ring(5))
        assert spectral_beta(w) == pytest.approx(expected, abs=1e-12)
        assert spectral_beta(w) == pytest.approx(0.5393, abs=1e-4)

    def test_eigenvalues_descending(self):
        w = metropolis_matrix(build_ring(8))
        assert np.all(np.diff(w.eigenvalues) <= 1e-15)

    @pytest.mark.parametrize("builder,n", [(build_ring, 6), (build_star, 5)])
    def test_power_iteration_contracts(self, builder, n):
        """||W^k x - mean|| <= beta^k ||x - mean||"""
        w = metropolis_matrix(builder(n))
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = rng.standard_normal((n, 1))
            dev0 = np.linalg.norm(x - x.mean())
            y = x
            for k in range(1, 30):
                y = w.entries @ y
                assert np.linalg.norm(y - x.mean()) <= w.beta ** k * dev0 + 1e-12
