"""Stage 1 solver: distances, coefficients, gradient oracle, descent, KKT."""

import numpy as np
import pytest

from graphclean.denoise import (
    DenoiseConfig,
    DenoiseDivergence,
    denoise,
    gradient,
    initial_weights,
    linear_coefficient,
    objective,
    pairwise_p_distances,
)
from graphclean.operators import laplacian_from_weights, pair_count
from graphclean.rng import SplitMix64


def finite_difference_gradient(w, phi_n, d_p, alpha, beta):
    """Oracle: central differences of the objective, h scaled per coordinate."""
    grad = np.empty_like(w)
    for k in range(w.size):
        h = 1e-6 * (1.0 + abs(w[k]))
        plus = w.copy()
        plus[k] += h
        minus = w.copy()
        minus[k] -= h
        grad[k] = (objective(plus, phi_n, d_p, alpha, beta)
                   - objective(minus, phi_n, d_p, alpha, beta)) / (2 * h)
    return grad


def random_problem(rng, n, beta_max=1.5):
    """A noisy Laplacian plus feature distances, scaled like the SBM runs."""
    m = pair_count(n)
    w_clean = np.array([rng.uniform() if rng.uniform() < 0.4 else 0.0 for _ in range(m)])
    noise = np.array([rng.uniform() if rng.uniform() < 0.1 else 0.0 for _ in range(m)])
    phi_n = laplacian_from_weights(w_clean + noise)
    d_p = np.array([2.0 * rng.uniform() for _ in range(m)])
    alpha = 0.5 + rng.uniform()
    beta = beta_max * rng.uniform()
    return phi_n, d_p, alpha, beta


class TestPairwisePDistances:
    X = np.array([[0.0, 0.0], [1.0, 2.0], [1.0, 0.0]])

    def test_euclidean_squared(self):
        np.testing.assert_allclose(pairwise_p_distances(self.X, 2.0), [5.0, 1.0, 4.0])

    def test_manhattan(self):
        np.testing.assert_allclose(pairwise_p_distances(self.X, 1.0), [3.0, 1.0, 2.0])

    def test_duplicate_rows_give_zero(self):
        X = np.array([[1.5, -2.0], [1.5, -2.0], [0.0, 0.0]])
        assert pairwise_p_distances(X, 2.0)[0] == 0.0

    def test_distinct_rows_give_positive(self):
        rng = SplitMix64(71)
        X = np.array([[rng.uniform() for _ in range(4)] for _ in range(8)])
        for p in (1.0, 2.0, 2.5):
            assert np.all(pairwise_p_distances(X, p) > 0.0)

    def test_general_p(self):
        d = pairwise_p_distances(self.X, 3.0)
        np.testing.assert_allclose(d, [1 + 8, 1, 8])

    def test_rejects_p_below_one(self):
        with pytest.raises(ValueError):
            pairwise_p_distances(self.X, 0.9)


class TestLinearCoefficient:
    def test_fidelity_only(self):
        phi_n = laplacian_from_weights([1.0, 0.0, 0.0])
        c = linear_coefficient(phi_n, np.zeros(3), alpha=1.0, beta=0.0)
        np.testing.assert_allclose(c, [8.0, 2.0, 2.0])

    def test_distance_only(self):
        c = linear_coefficient(np.zeros((3, 3)), np.ones(3), alpha=1.0, beta=2.0)
        np.testing.assert_allclose(c, [-2.0, -2.0, -2.0])

    def test_linearity_in_alpha_beta(self):
        rng = SplitMix64(1)
        phi_n = laplacian_from_weights([rng.uniform() for _ in range(6)])
        d_p = np.array([rng.uniform() for _ in range(6)])
        summed = (linear_coefficient(phi_n, d_p, 0.7, 0.2)
                  + linear_coefficient(phi_n, d_p, 0.3, 1.1))
        combined = linear_coefficient(phi_n, d_p, 1.0, 1.3)
        np.testing.assert_allclose(summed, combined, rtol=1e-12)


class TestObjective:
    def test_zero_weights(self):
        phi_n = laplacian_from_weights([1.0, 1.0, 0.0])
        expected = 2.0 * float(np.sum(phi_n * phi_n))
        assert objective(np.zeros(3), phi_n, np.zeros(3), 2.0, 0.5) == expected

    def test_exact_fit_is_zero(self):
        w = np.array([0.3, 0.0, 1.2])
        phi_n = laplacian_from_weights(w)
        assert objective(w, phi_n, np.zeros(3), 1.0, 0.0) == 0.0

    def test_path_graph_value_from_brute_force(self):
        # ||L([1,0,1])||_F^2 summed entry by entry is 10; plus beta * <w, 1> = 2
        w = np.array([1.0, 0.0, 1.0])
        L = laplacian_from_weights(w)
        frob = sum(L[i, j] ** 2 for i in range(3) for j in range(3))
        assert frob == 10.0
        assert objective(w, np.zeros((3, 3)), np.ones(3), 1.0, 1.0) == 12.0


class TestGradient:
    def test_stationary_at_exact_fit(self):
        w0 = np.array([0.5, 1.5, 0.0, 0.2, 0.0, 0.7])
        phi_n = laplacian_from_weights(w0)
        c = linear_coefficient(phi_n, np.zeros(6), alpha=1.3, beta=0.0)
        np.testing.assert_allclose(gradient(w0, phi_n, c, 1.3), np.zeros(6),
                                   atol=1e-12)

    def test_pure_distance_term(self):
        d_p = np.array([1.0, 2.0, 3.0])
        c = linear_coefficient(np.zeros((3, 3)), d_p, alpha=1.0, beta=1.0)
        np.testing.assert_allclose(gradient(np.zeros(3), np.zeros((3, 3)), c, 1.0), d_p)

    def test_matches_finite_differences(self):
        rng = SplitMix64(17)
        for _ in range(50):
            n = 3 + rng.bounded(8)
            phi_n, d_p, alpha, beta = random_problem(rng, n)
            w = np.array([rng.uniform() for _ in range(pair_count(n))])
            c = linear_coefficient(phi_n, d_p, alpha, beta)
            analytic = gradient(w, phi_n, c, alpha)
            numeric = finite_difference_gradient(w, phi_n, d_p, alpha, beta)
            err = np.max(np.abs(analytic - numeric))
            assert err <= 1e-5 * (1.0 + np.max(np.abs(numeric)))


class TestDenoise:
    def test_exact_recovery_beta_zero(self):
        rng = SplitMix64(29)
        for _ in range(5):
            n = 5 + rng.bounded(26)
            w_true = np.array([rng.uniform() if rng.uniform() < 0.3 else 0.0
                               for _ in range(pair_count(n))])
            phi_n = laplacian_from_weights(w_true)
            config = DenoiseConfig(alpha=1.0, beta=0.0, max_iters=2000)
            result = denoise(phi_n, np.zeros((n, 2)), config,
                             w0=np.zeros(pair_count(n)))
            residual = np.linalg.norm(laplacian_from_weights(result.weights) - phi_n)
            assert residual <= 1e-6 * np.linalg.norm(phi_n)

    def test_default_init_reads_off_perturbed_laplacian(self):
        w = np.array([0.4, 0.0, 2.0])
        phi_n = laplacian_from_weights(w)
        np.testing.assert_allclose(initial_weights(phi_n), w)

    def test_zero_solution_when_distance_term_dominates(self):
        rng = SplitMix64(31)
        n = 6
        w = np.array([rng.uniform() for _ in range(pair_count(n))])
        phi_n = laplacian_from_weights(w)
        from graphclean.operators import adjoint_of
        beta = 2.0 * float(adjoint_of(phi_n).max()) + 1.0
        d_p = np.ones(pair_count(n))
        config = DenoiseConfig(alpha=1.0, beta=beta, max_iters=5000, tol=1e-14)
        result = denoise(phi_n, np.zeros((n, 2)), config, d_p=d_p)
        np.testing.assert_array_equal(result.weights.values, np.zeros(pair_count(n)))
        # KKT at the origin: the gradient must be non-negative
        c = linear_coefficient(phi_n, d_p, 1.0, beta)
        grad0 = gradient(np.zeros(pair_count(n)), phi_n, c, 1.0)
        assert np.all(grad0 >= 0.0)

    def test_descent_and_feasibility(self):
        rng = SplitMix64(37)
        iterates = []
        for _ in range(5):
            n = 4 + rng.bounded(12)
            phi_n, d_p, alpha, beta = random_problem(rng, n)
            config = DenoiseConfig(alpha=alpha, beta=beta, max_iters=300)
            result = denoise(phi_n, np.zeros((n, 2)), config, d_p=d_p,
                             callback=lambda t, w, f: iterates.append(w.min()))
            trace = result.objective_trace
            assert np.all(np.diff(trace) <= 1e-10)
        assert min(iterates) >= 0.0

    def test_kkt_at_convergence(self):
        rng = SplitMix64(41)
        for _ in range(5):
            n = 5 + rng.bounded(20)
            phi_n, d_p, alpha, beta = random_problem(rng, n)
            config = DenoiseConfig(alpha=alpha, beta=beta, max_iters=100000,
                                   tol=1e-12)
            result = denoise(phi_n, np.zeros((n, 2)), config, d_p=d_p)
            assert result.converged
            w = result.weights.values
            c = linear_coefficient(phi_n, d_p, alpha, beta)
            g = gradient(w, phi_n, c, alpha)
            slack = 1e-4 * (1.0 + np.max(np.abs(c)))
            active = w > 1e-8
            assert np.all(np.abs(g[active]) <= slack)
            assert np.all(g[~active] >= -slack)

    def test_scale_consistency(self):
        rng = SplitMix64(43)
        n = 8
        phi_n, d_p, alpha, beta = random_problem(rng, n)
        kwargs = dict(max_iters=50000, tol=1e-13)
        a = denoise(phi_n, np.zeros((n, 2)),
                    DenoiseConfig(alpha=alpha, beta=beta, **kwargs), d_p=d_p)
        b = denoise(phi_n, np.zeros((n, 2)),
                    DenoiseConfig(alpha=2 * alpha, beta=2 * beta, **kwargs), d_p=d_p)
        np.testing.assert_allclose(a.weights.values, b.weights.values, atol=1e-6)

    def test_restrict_support_pins_absent_pairs(self):
        rng = SplitMix64(47)
        n = 10
        w = np.array([rng.uniform() if rng.uniform() < 0.3 else 0.0
                      for _ in range(pair_count(n))])
        phi_n = laplacian_from_weights(w)
        d_p = np.array([rng.uniform() for _ in range(pair_count(n))])
        config = DenoiseConfig(alpha=1.0, beta=0.5, max_iters=500,
                               restrict_support=True)
        result = denoise(phi_n, np.zeros((n, 2)), config, d_p=d_p)
        assert np.all(result.weights.values[w == 0.0] == 0.0)

    def test_rejects_non_symmetric(self):
        M = np.array([[1.0, -1.0], [0.5, 1.0]])
        with pytest.raises(ValueError, match="not symmetric"):
            denoise(M, np.zeros((2, 2)), DenoiseConfig())

    def test_divergence_reports_iteration(self):
        w = np.array([1.0, 0.0, 1.0])
        phi_n = laplacian_from_weights(w) * 1e150
        config = DenoiseConfig(alpha=1.0, beta=0.0, max_iters=5000,
                               step_mode="fixed", step_size=1e12)
        # starting far from the huge-scale optimum overflows in one step
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(DenoiseDivergence, match="iteration"):
                denoise(phi_n, np.zeros((3, 2)), config, w0=np.zeros(3))

    def test_fixed_step_mode_runs(self):
        w = np.array([1.0, 0.0, 1.0])
        phi_n = laplacian_from_weights(w)
        config = DenoiseConfig(alpha=1.0, beta=0.0, max_iters=50,
                               step_mode="fixed", step_size=1e-3)
        result = denoise(phi_n, np.zeros((3, 2)), config)
        assert result.iterations_run <= 50

    def test_json_serialization_keys(self):
        w = np.array([1.0, 0.0, 1.0])
        phi_n = laplacian_from_weights(w)
        result = denoise(phi_n, np.zeros((3, 2)), DenoiseConfig(max_iters=5))
        payload = result.to_json_dict()
        assert set(payload) == {"iterations", "converged", "objective_trace", "config"}
        assert isinstance(payload["objective_trace"], list)


class TestDenoiseConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            DenoiseConfig(alpha=0.0)
        with pytest.raises(ValueError):
            DenoiseConfig(beta=-0.1)
        with pytest.raises(ValueError):
            DenoiseConfig(p=0.5)
        with pytest.raises(ValueError):
            DenoiseConfig(step_mode="adam")
