"""Operator algebra: index mapping, L, L*, validation, p-Dirichlet energy."""

import numpy as np
import pytest

from graphclean.operators import (
    WeightVector,
    adjacency_from_weights,
    adjoint_of,
    dominant_eigenvalue,
    laplacian_from_weights,
    node_count_for_pairs,
    p_dirichlet_energy,
    pair_count,
    pair_index,
    pair_nodes,
    validate_laplacian,
)
from graphclean.rng import SplitMix64


def enumerate_pairs(n):
    """Oracle: the canonical column-major pair enumeration, 1-based."""
    pairs = []
    for j in range(1, n):
        for i in range(j + 1, n + 1):
            pairs.append((i, j))
    return pairs


def adjoint_oracle(Y):
    """Oracle: the four-term sum evaluated pair by pair."""
    n = Y.shape[0]
    out = np.empty(pair_count(n))
    for k, (i, j) in enumerate(enumerate_pairs(n)):
        out[k] = Y[i - 1, i - 1] - Y[i - 1, j - 1] - Y[j - 1, i - 1] + Y[j - 1, j - 1]
    return out


def random_instance(rng, n):
    w = np.array([rng.uniform() for _ in range(pair_count(n))])
    Y = np.array([[rng.uniform() - 0.5 for _ in range(n)] for _ in range(n)])
    return w, Y


class TestPairIndex:
    def test_first_pair(self):
        assert pair_index(2, 1, 4) == 1

    def test_last_pair(self):
        assert pair_index(4, 3, 4) == 6
        assert pair_index(4, 3, 4) == pair_count(4)

    def test_mid_pair_matches_enumeration_oracle(self):
        # (3,2) is the 4th pair in the column-major enumeration of n=4
        pairs = enumerate_pairs(4)
        assert pairs.index((3, 2)) + 1 == 4
        assert pair_index(3, 2, 4) == 4

    @pytest.mark.parametrize("n", range(2, 13))
    def test_bijection(self, n):
        seen = [pair_index(i, j, n) for (i, j) in enumerate_pairs(n)]
        assert sorted(seen) == list(range(1, pair_count(n) + 1))

    @pytest.mark.parametrize("n", [3, 7])
    def test_pair_nodes_inverts(self, n):
        for k in range(1, pair_count(n) + 1):
            i, j = pair_nodes(k, n)
            assert pair_index(i, j, n) == k

    def test_pair_nodes_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            pair_nodes(0, 4)
        with pytest.raises(ValueError):
            pair_nodes(7, 4)

    @pytest.mark.parametrize("i,j", [(1, 1), (2, 2), (1, 2), (5, 1), (2, 0)])
    def test_rejects_bad_indices(self, i, j):
        with pytest.raises(ValueError):
            pair_index(i, j, 4)

    def test_node_count_inverse(self):
        for n in range(2, 40):
            assert node_count_for_pairs(pair_count(n)) == n
        with pytest.raises(ValueError):
            node_count_for_pairs(2)


class TestLaplacianFromWeights:
    def test_path_graph(self):
        expected = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
        np.testing.assert_array_equal(laplacian_from_weights([1.0, 0.0, 1.0]), expected)

    def test_empty_graph(self):
        np.testing.assert_array_equal(laplacian_from_weights([0.0, 0.0, 0.0]),
                                      np.zeros((3, 3)))

    def test_complete_graph(self):
        expected = np.array([[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])
        np.testing.assert_array_equal(laplacian_from_weights([1.0, 1.0, 1.0]), expected)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            laplacian_from_weights([1.0, 2.0])


class TestAdjoint:
    def test_identity(self):
        np.testing.assert_array_equal(adjoint_of(np.eye(3)), [2.0, 2.0, 2.0])

    def test_single_edge_laplacian(self):
        # frozen from the four-term oracle: pairs (2,1), (3,1), (3,2)
        Y = laplacian_from_weights([1.0, 0.0, 0.0])
        np.testing.assert_array_equal(adjoint_oracle(Y), [4.0, 1.0, 1.0])
        np.testing.assert_array_equal(adjoint_of(Y), [4.0, 1.0, 1.0])

    def test_matches_oracle_random(self):
        rng = SplitMix64(11)
        for _ in range(20):
            n = 3 + rng.bounded(10)
            _, Y = random_instance(rng, n)
            np.testing.assert_allclose(adjoint_of(Y), adjoint_oracle(Y), rtol=1e-12)

    def test_adjoint_identity_random(self):
        rng = SplitMix64(23)
        for _ in range(200):
            n = 3 + rng.bounded(10)
            w, Y = random_instance(rng, n)
            lhs = float(np.sum(laplacian_from_weights(w) * Y))
            rhs = float(w @ adjoint_of(Y))
            assert abs(lhs - rhs) <= 1e-9 * (1.0 + abs(lhs))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            adjoint_of(np.zeros((2, 3)))


class TestAdjacency:
    def test_path_graph(self):
        expected = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        np.testing.assert_array_equal(adjacency_from_weights([1.0, 0.0, 1.0]), expected)

    def test_two_node_empty(self):
        np.testing.assert_array_equal(adjacency_from_weights([0.0]), np.zeros((2, 2)))

    def test_laplacian_diagonal_is_degree(self):
        rng = SplitMix64(3)
        w = np.array([rng.uniform() for _ in range(pair_count(6))])
        L = laplacian_from_weights(w)
        W = adjacency_from_weights(w)
        np.testing.assert_allclose(np.diag(L), W.sum(axis=1), rtol=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            adjacency_from_weights([1.0, -0.5, 0.0])


class TestValidateLaplacian:
    def test_path_graph_passes(self):
        check = validate_laplacian(laplacian_from_weights([1.0, 0.0, 1.0]), 1e-9)
        assert check.ok

    def test_positive_offdiagonal_fails(self):
        M = laplacian_from_weights([1.0, 0.0, 1.0])
        M = M.copy()
        M[0, 1] = 1.0
        M[1, 0] = 1.0
        check = validate_laplacian(M, 1e-9)
        assert not check.offdiag_signs_ok
        assert check.max_positive_offdiag == 1.0

    def test_random_weight_laplacians_pass(self):
        rng = SplitMix64(5)
        for _ in range(25):
            n = 3 + rng.bounded(10)
            w = np.array([rng.uniform() for _ in range(pair_count(n))])
            check = validate_laplacian(laplacian_from_weights(w), 1e-9)
            assert check.ok, check

    def test_asymmetry_and_row_sums_flagged(self):
        M = np.array([[1.0, -1.0], [-0.5, 1.0]])
        check = validate_laplacian(M, 1e-9)
        assert not check.symmetric
        assert not check.row_sums_ok

    def test_negative_definite_flagged(self):
        check = validate_laplacian(-np.eye(3), 1e-9)
        assert not check.psd_ok
        assert check.min_eigenvalue < -0.5


class TestPDirichletEnergy:
    def test_path_quadratic(self):
        assert p_dirichlet_energy([1.0, 0.0, 1.0], [0.0, 1.0, 3.0], 2.0) == 5.0

    def test_path_absolute(self):
        assert p_dirichlet_energy([1.0, 0.0, 1.0], [0.0, 1.0, 3.0], 1.0) == 3.0

    def test_constant_signal_is_zero(self):
        rng = SplitMix64(9)
        w = np.array([rng.uniform() for _ in range(pair_count(5))])
        assert p_dirichlet_energy(w, np.full(5, 2.5), 3.0) == 0.0

    def test_quadratic_form_identity(self):
        rng = SplitMix64(13)
        for _ in range(30):
            n = 3 + rng.bounded(10)
            w = np.array([rng.uniform() for _ in range(pair_count(n))])
            f = np.array([rng.uniform() - 0.5 for _ in range(n)])
            energy = p_dirichlet_energy(w, f, 2.0)
            quad = float(f @ laplacian_from_weights(w) @ f)
            assert abs(energy - quad) <= 1e-9 * (1.0 + abs(quad))

    def test_rejects_p_below_one(self):
        with pytest.raises(ValueError):
            p_dirichlet_energy([1.0], [0.0, 1.0], 0.5)


class TestOperatorNorm:
    @pytest.mark.parametrize("n", range(3, 13))
    def test_composed_map_bounded_by_2n(self, n):
        matvec = lambda v: adjoint_of(laplacian_from_weights(v))
        lam = dominant_eigenvalue(matvec, dim=pair_count(n), iters=500)
        assert lam <= 2 * n * (1 + 1e-9)
        # the constant weight vector attains the bound, so the estimate is tight
        assert lam >= 2 * n * (1 - 1e-6)


class TestWeightVector:
    def test_validates_length(self):
        with pytest.raises(ValueError):
            WeightVector(n=4, values=np.ones(5))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            WeightVector(n=3, values=np.array([1.0, -1.0, 0.0]))

    def test_immutable_and_counts_edges(self):
        wv = WeightVector(n=3, values=np.array([1.0, 0.0, 2.0]))
        assert wv.edge_count == 2
        with pytest.raises(ValueError):
            wv.values[0] = 5.0
