import numpy as np
import pytest
import scipy.sparse as sps
from numpy.testing import assert_allclose

from polyelast.errors import (
    InfeasibleConstraintsError,
    NotSPDError,
    RankDeficiencyError,
    SolverError,
)
from polyelast.linalg import (
    TripletMatrix,
    constrained_least_squares,
    solve_general,
    solve_spd,
    symmetrize,
)


class TestTripletMatrix:
    def test_duplicates_summed(self):
        t = TripletMatrix((2, 2))
        t.add(0, 0, 1.0)
        t.add(0, 0, 2.5)
        t.add(1, 0, -1.0)
        m = t.tocsr()
        assert_allclose(m.toarray(), [[3.5, 0.0], [-1.0, 0.0]])
        assert m.nnz == 2

    def test_non_finite_rejected(self):
        t = TripletMatrix((1, 1))
        t.add(0, 0, np.inf)
        with pytest.raises(SolverError):
            t.tocsr()

    def test_symmetrize_is_exact(self):
        rng = np.random.default_rng(0)
        a = sps.csr_matrix(rng.standard_normal((6, 6)))
        s = symmetrize(a)
        assert (abs(s - s.T)).max() == 0.0


class TestSolveSPD:
    def test_identity(self):
        a = sps.identity(4, format="csr")
        assert_allclose(solve_spd(a, np.arange(4.0)), np.arange(4.0))

    def test_known_2x2(self):
        a = sps.csr_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
        x = solve_spd(a, np.array([1.0, 2.0]))
        assert_allclose(x, np.linalg.solve(a.toarray(), [1.0, 2.0]))

    def test_random_spd_matches_dense_oracle(self):
        rng = np.random.default_rng(3)
        b = rng.standard_normal((50, 50))
        a = b @ b.T + 50 * np.eye(50)
        rhs = rng.standard_normal(50)
        x = solve_spd(sps.csr_matrix(a), rhs)
        assert_allclose(x, np.linalg.solve(a, rhs), rtol=1e-9)

    def test_indefinite_detected(self):
        a = sps.csr_matrix(np.diag([1.0, -1.0]))
        with pytest.raises(NotSPDError):
            solve_spd(a, np.ones(2))

    def test_asymmetric_detected(self):
        a = sps.csr_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
        with pytest.raises(NotSPDError):
            solve_spd(a, np.ones(2))


class TestSolveGeneral:
    def test_identity(self):
        assert_allclose(solve_general(sps.identity(3, format="csr"), np.ones(3)),
                        np.ones(3))

    def test_permuted_diagonal(self):
        a = sps.csr_matrix(np.array([[0.0, 2.0], [3.0, 0.0]]))
        assert_allclose(solve_general(a, np.array([2.0, 3.0])), [1.0, 1.0])

    def test_random_matches_dense_oracle(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((50, 50)) + 10 * np.eye(50)
        rhs = rng.standard_normal(50)
        assert_allclose(solve_general(sps.csr_matrix(a), rhs),
                        np.linalg.solve(a, rhs), rtol=1e-9)

    def test_singular_reports_rank(self):
        a = sps.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
        with pytest.raises(SolverError, match="rank"):
            solve_general(a, np.ones(2))


class TestConstrainedLeastSquares:
    def test_unconstrained_reduces_to_normal_equations(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((8, 4))
        b = rng.standard_normal((8, 2))
        m = constrained_least_squares(a, b, np.zeros((0, 4)), np.zeros((0, 2)))
        oracle = np.linalg.solve(a.T @ a, a.T @ b)
        assert_allclose(m.matrix, oracle, rtol=1e-10, atol=1e-12)

    def test_single_constraint_lagrange_oracle(self):
        # min (v0 - p)^2 + (v1 - 2p)^2  s.t.  v0 + v1 = p
        # Lagrange by hand: v = (p(1 - t), 2p - p t) ... solve directly:
        # stationarity: v0 - p = -l/2, v1 - 2p = -l/2, v0+v1 = p
        # => 2v0 ... closed form: v0 = p - l/2, v1 = 2p - l/2,
        #    sum = 3p - l = p => l = 2p => v = (0, p)
        a = np.eye(2)
        b = np.array([[1.0], [2.0]])
        c = np.array([[1.0, 1.0]])
        d = np.array([[1.0]])
        m = constrained_least_squares(a, b, c, d)
        assert_allclose(m.matrix, [[0.0], [1.0]], atol=1e-12)

    def test_zero_objective_full_rank_constraints(self):
        rng = np.random.default_rng(6)
        c = rng.standard_normal((3, 3))
        d = rng.standard_normal((3, 2))
        m = constrained_least_squares(np.zeros((0, 3)), np.zeros((0, 2)), c, d)
        assert_allclose(c @ m.matrix, d, atol=1e-10)

    def test_infeasible_constraints_detected(self):
        c = np.array([[1.0, 0.0], [1.0, 0.0]])
        d = np.array([[1.0], [2.0]])  # x = 1 and x = 2 simultaneously
        with pytest.raises(InfeasibleConstraintsError):
            constrained_least_squares(np.eye(2), np.zeros((2, 1)), c, d)

    def test_rank_deficiency_detected(self):
        # objective blind to v1, no constraint on it either
        a = np.array([[1.0, 0.0]])
        with pytest.raises(RankDeficiencyError):
            constrained_least_squares(a, np.zeros((1, 1)),
                                      np.zeros((0, 2)), np.zeros((0, 1)))

    def test_consistent_redundant_constraints_are_fine(self):
        c = np.array([[1.0, 0.0], [2.0, 0.0]])
        d = np.array([[1.0], [2.0]])
        m = constrained_least_squares(np.array([[0.0, 1.0]]), np.zeros((1, 1)), c, d)
        assert_allclose(m.matrix[0], [1.0], atol=1e-12)

    def test_kkt_residual_reported(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((6, 4))
        b = rng.standard_normal((6, 3))
        c = rng.standard_normal((2, 4))
        d = rng.standard_normal((2, 3))
        m = constrained_least_squares(a, b, c, d)
        assert m.kkt_residual <= 1e-9 * max(np.abs(a).max(), np.abs(b).max()) * 10
        assert_allclose(c @ m.matrix, d, atol=1e-10)
