import numpy as np
import pytest
from scipy.optimize import minimize

from helpers import masked_matrix, observed_matrix
from pcplod.data import BELOW_LOD, MISSING, OBSERVED
from pcplod.errors import ConfigError
from pcplod.prox import (
    FeasibleSet,
    effective_rank,
    lod_distance,
    project_feasible,
    project_rank_nonneg,
    prox_distance,
    soft_threshold,
    truncated_svd,
)


def svdvals_by_eigh(M):
    """Independent singular values via the eigendecomposition of M^T M."""
    M = np.asarray(M, dtype=float)
    w = np.linalg.eigvalsh(M.T @ M)
    return np.sqrt(np.maximum(w, 0.0))[::-1]


class TestTruncatedSvd:
    def test_diagonal(self):
        U, s, V = truncated_svd(np.diag([3.0, 2.0, 1.0]), 2)
        assert np.allclose(s, [3.0, 2.0])

    def test_rank_one_exact(self):
        u = np.array([1.0, 2.0, 3.0])[:, None]
        v = np.array([2.0, 0.5])[None, :]
        M = u @ v
        U, s, V = truncated_svd(M, 1)
        assert np.allclose((U * s) @ V.T, M, atol=1e-10)

    def test_residual_matches_full_svd_oracle(self):
        rng = np.random.default_rng(42)
        M = rng.standard_normal((8, 5))
        U, s, V = truncated_svd(M, 3)
        resid = np.linalg.norm(M - (U * s) @ V.T)
        sv = svdvals_by_eigh(M)
        assert resid == pytest.approx(np.sqrt(sv[3] ** 2 + sv[4] ** 2), abs=1e-8)

    def test_orthonormal_factors(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((10, 6))
        U, s, V = truncated_svd(M, 4)
        assert np.allclose(U.T @ U, np.eye(4), atol=1e-10)
        assert np.allclose(V.T @ V, np.eye(4), atol=1e-10)
        assert np.all(np.diff(s) <= 0) and np.all(s >= 0)

    def test_rank_bound_validated(self):
        with pytest.raises(ConfigError):
            truncated_svd(np.eye(3), 4)


class TestSoftThreshold:
    @pytest.mark.parametrize(
        "x,tau,expected", [(3.0, 1.0, 2.0), (-0.5, 1.0, 0.0), (0.0, 7.0, 0.0)]
    )
    def test_scalar_cases(self, x, tau, expected):
        assert soft_threshold(np.array([[x]]), tau)[0, 0] == expected

    def test_zero_tau_is_identity(self):
        rng = np.random.default_rng(1)
        M = rng.standard_normal((5, 5))
        assert np.array_equal(soft_threshold(M, 0.0), M)

    def test_shrinks_magnitudes(self):
        rng = np.random.default_rng(2)
        M = rng.standard_normal((6, 4))
        out = soft_threshold(M, 0.3)
        assert np.all(np.abs(out) <= np.abs(M) + 1e-15)

    def test_negative_tau_rejected(self):
        with pytest.raises(ConfigError):
            soft_threshold(np.eye(2), -1.0)


class TestProjectRankNonneg:
    def test_feasible_point_unchanged(self):
        u = np.array([1.0, 0.5, 2.0])[:, None]
        v = np.array([0.2, 1.0, 0.0, 3.0])[None, :]
        M = u @ v
        assert np.allclose(project_rank_nonneg(M, 1), M, atol=1e-10)

    def test_identity_feasible_at_full_rank(self):
        assert np.allclose(project_rank_nonneg(np.eye(2), 2), np.eye(2), atol=1e-12)

    def test_output_nonnegative_exactly(self):
        rng = np.random.default_rng(3)
        M = rng.standard_normal((7, 5))
        out = project_rank_nonneg(M, 2)
        assert (out >= 0).all()

    def test_against_grid_oracle(self):
        # exhaustive search over rank-1 non-negative sigma * u v^T
        M = np.array([[1.0, -1.0], [-1.0, 1.0]])
        thetas = np.linspace(0.0, np.pi / 2, 721)
        best = np.inf
        norm2 = (M**2).sum()
        for t1 in thetas:
            u = np.array([np.cos(t1), np.sin(t1)])
            for t2 in thetas:
                v = np.array([np.cos(t2), np.sin(t2)])
                sigma = max(u @ M @ v, 0.0)
                best = min(best, norm2 - sigma**2)
        oracle = np.sqrt(best)
        out = project_rank_nonneg(M, 1, passes=10)
        ours = np.linalg.norm(out - M)
        assert abs(ours - oracle) <= 0.05 * oracle
        assert (out >= 0).all()


def feasible_case():
    values = [[1.0, 2.0], [0.5, 3.0]]
    status = [[OBSERVED, BELOW_LOD], [MISSING, OBSERVED]]
    delta = [[0.0, 2.0], [0.0, 0.0]]
    return masked_matrix(values, status, delta)


class TestProjectFeasible:
    def test_observed_entries_pinned(self):
        X = observed_matrix([[2.0]])
        C = FeasibleSet.from_masked(X)
        assert project_feasible(np.array([[5.0]]), C)[0, 0] == 2.0

    def test_censored_inside_interval_untouched(self):
        X = masked_matrix([[0.0]], [[BELOW_LOD]], [[2.0]])
        C = FeasibleSet.from_masked(X)
        assert project_feasible(np.array([[1.5]]), C)[0, 0] == 1.5

    def test_censored_below_zero_clamped(self):
        X = masked_matrix([[0.0]], [[BELOW_LOD]], [[2.0]])
        C = FeasibleSet.from_masked(X)
        assert project_feasible(np.array([[-0.5]]), C)[0, 0] == 0.0

    def test_idempotent_and_nonexpansive(self):
        rng = np.random.default_rng(7)
        X = feasible_case()
        C = FeasibleSet.from_masked(X)
        for _ in range(200):
            y1 = rng.standard_normal((2, 2)) * 3
            y2 = rng.standard_normal((2, 2)) * 3
            p1, p2 = project_feasible(y1, C), project_feasible(y2, C)
            assert np.array_equal(project_feasible(p1, C), p1)
            assert np.linalg.norm(p1 - p2) <= np.linalg.norm(y1 - y2) + 1e-12


class TestLodDistance:
    def test_all_observed_is_frobenius(self):
        X = observed_matrix([[1.0, 1.0]])
        C = FeasibleSet.from_masked(X)
        Y = X.values + np.array([[3.0, 4.0]])
        assert lod_distance(Y, C) == pytest.approx(5.0, abs=1e-12)

    def test_censored_overshoot(self):
        X = masked_matrix([[0.0]], [[BELOW_LOD]], [[2.0]])
        C = FeasibleSet.from_masked(X)
        assert lod_distance(np.array([[3.0]]), C) == pytest.approx(1.0, abs=1e-12)

    def test_mixed_hand_case(self):
        # observed residual 1, censored inside interval, censored at -2, missing
        values = [[1.0, 0.0], [0.0, 0.0]]
        status = [[OBSERVED, BELOW_LOD], [BELOW_LOD, MISSING]]
        delta = [[0.0, 2.0], [2.0, 0.0]]
        X = masked_matrix(values, status, delta)
        C = FeasibleSet.from_masked(X)
        Y = np.array([[2.0, 1.5], [-2.0, 7.0]])
        assert lod_distance(Y, C) == pytest.approx(np.sqrt(5.0), abs=1e-12)

    def test_zero_iff_fixed_point(self):
        rng = np.random.default_rng(11)
        X = feasible_case()
        C = FeasibleSet.from_masked(X)
        for _ in range(100):
            Y = rng.standard_normal((2, 2)) * 2
            P = project_feasible(Y, C)
            assert lod_distance(P, C) == pytest.approx(0.0, abs=1e-12)
            if lod_distance(Y, C) == 0.0:
                assert np.array_equal(P, Y)

    def test_frobenius_reduction_random(self):
        rng = np.random.default_rng(13)
        X = observed_matrix(rng.random((6, 4)))
        C = FeasibleSet.from_masked(X)
        Y = rng.standard_normal((6, 4))
        assert lod_distance(Y, C) == pytest.approx(
            np.linalg.norm(Y - X.values), abs=1e-12
        )


class TestProxDistance:
    def test_fixed_point_when_feasible(self):
        X = feasible_case()
        C = FeasibleSet.from_masked(X)
        Y = project_feasible(np.full((2, 2), 0.7), C)
        assert np.array_equal(prox_distance(Y, C, 2.0), Y)

    def test_scalar_case_moves_by_t(self):
        X = observed_matrix([[0.0]])
        C = FeasibleSet.from_masked(X)
        assert prox_distance(np.array([[5.0]]), C, 2.0)[0, 0] == pytest.approx(3.0)

    def test_matches_first_order_oracle(self):
        rng = np.random.default_rng(17)
        values = rng.random((4, 4))
        status = rng.integers(0, 3, (4, 4))
        status[0, 0] = OBSERVED  # keep at least one of each flavor plausible
        delta = np.where(status == BELOW_LOD, rng.random((4, 4)) + 0.5, 0.0)
        X = masked_matrix(values, status, delta)
        C = FeasibleSet.from_masked(X)
        Y = rng.standard_normal((4, 4)) * 3
        t = 1.7

        def objective_and_grad(z):
            Z = z.reshape(4, 4)
            P = project_feasible(Z, C)
            d = np.linalg.norm(Z - P)
            val = t * d + 0.5 * np.sum((Z - Y) ** 2)
            grad = (Z - Y) + (t * (Z - P) / d if d > 0 else 0.0)
            return val, grad.ravel()

        res = minimize(objective_and_grad, Y.ravel(), jac=True, method="L-BFGS-B",
                       options={"maxiter": 2000, "ftol": 1e-18, "gtol": 1e-12})
        ours = prox_distance(Y, C, t)
        assert np.allclose(ours, res.x.reshape(4, 4), atol=1e-6)

    def test_stationarity_condition(self):
        rng = np.random.default_rng(19)
        X = feasible_case()
        C = FeasibleSet.from_masked(X)
        for _ in range(50):
            Y = rng.standard_normal((2, 2)) * 5
            t = 0.5
            Z = prox_distance(Y, C, t)
            d = lod_distance(Z, C)
            if d > 1e-9:  # smooth case: t*(Z - P)/d + (Z - Y) = 0
                resid = t * (Z - project_feasible(Z, C)) / d + (Z - Y)
                assert np.linalg.norm(resid) <= 1e-8
            else:  # at the set: Y - Z lies within the t-ball
                assert np.linalg.norm(Y - Z) <= t + 1e-8

    def test_step_must_be_positive(self):
        C = FeasibleSet.from_masked(feasible_case())
        with pytest.raises(ConfigError):
            prox_distance(np.zeros((2, 2)), C, 0.0)


class TestEffectiveRank:
    def test_exact_low_rank(self):
        rng = np.random.default_rng(23)
        M = rng.random((9, 4)) @ rng.random((4, 7))
        assert effective_rank(M) == 4

    def test_zero_matrix(self):
        assert effective_rank(np.zeros((3, 3))) == 0
