"""Sparse construction helpers and the linear solvers shared by both
discretizations, plus the dense constrained least-squares kernel used by the
vertex-local stress problems.

All rank and residual tolerances are relative to the problem scale; nothing
here uses absolute cutoffs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import InfeasibleConstraintsError, NotSPDError, RankDeficiencyError, SolverError

RESIDUAL_RTOL = 1e-10
RANK_RTOL = 1e-10


class TripletMatrix:
    """Deterministic triplet accumulator finalized into CSR (duplicates summed)."""

    def __init__(self, shape):
        self.shape = shape
        self.rows = []
        self.cols = []
        self.vals = []

    def add(self, i, j, v):
        self.rows.append(i)
        self.cols.append(j)
        self.vals.append(v)

    def add_block(self, rows, cols, block):
        block = np.asarray(block)
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                v = block[a, b]
                if v != 0.0:
                    self.add(i, j, v)

    def tocsr(self):
        m = sps.coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=self.shape
        ).tocsr()
        m.sum_duplicates()
        if not np.all(np.isfinite(m.data)):
            raise SolverError("assembled matrix contains non-finite entries")
        return m


def symmetrize(matrix: sps.spmatrix) -> sps.csr_matrix:
    """Return (A + A^T) / 2, which is exactly symmetric entry-by-entry."""
    return (matrix + matrix.T).tocsr() * 0.5


def _check_residual(matrix, x, b):
    r = matrix @ x - b
    scale = float(np.linalg.norm(b))
    resid = float(np.linalg.norm(r))
    if scale > 0.0 and resid > RESIDUAL_RTOL * scale:
        raise SolverError(
            f"solve residual {resid:.3e} exceeds {RESIDUAL_RTOL:.0e} * |b| = "
            f"{RESIDUAL_RTOL * scale:.3e}"
        )
    return resid


def solve_spd(matrix: sps.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric positive definite system by sparse factorization.

    The factorization runs in symmetric mode without row pivoting, so a
    non-positive pivot identifies a matrix that is not SPD.
    """
    a = sps.csc_matrix(matrix)
    asym = abs(a - a.T).max() if a.nnz else 0.0
    scale = abs(a).max() if a.nnz else 0.0
    if scale == 0.0 or asym > 1e-12 * scale:
        raise NotSPDError("matrix is not symmetric")
    try:
        lu = spla.splu(
            a,
            diag_pivot_thresh=0.0,
            permc_spec="MMD_AT_PLUS_A",
            options=dict(SymmetricMode=True),
        )
    except RuntimeError as exc:
        raise NotSPDError(f"factorization failed: {exc}") from exc
    if np.any(lu.U.diagonal() <= 0.0):
        raise NotSPDError("non-positive pivot: matrix is not positive definite")
    x = lu.solve(np.asarray(rhs, dtype=float))
    _check_residual(a, x, rhs)
    return x


def solve_general(matrix: sps.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Solve a general square sparse system by LU with partial pivoting."""
    a = sps.csc_matrix(matrix)
    if a.shape[0] != a.shape[1]:
        raise SolverError("matrix must be square")
    try:
        lu = spla.splu(a)
    except RuntimeError as exc:
        rank = ""
        if a.shape[0] <= 2000:
            rank = f" (rank estimate {np.linalg.matrix_rank(a.toarray())} of {a.shape[0]})"
        raise SolverError(f"singular matrix{rank}: {exc}") from exc
    u = np.abs(lu.U.diagonal())
    if u.min() <= RANK_RTOL * u.max():
        rank = int(np.sum(u > RANK_RTOL * u.max()))
        raise SolverError(
            f"matrix singular to tolerance (rank estimate {rank} of {a.shape[0]})"
        )
    x = lu.solve(np.asarray(rhs, dtype=float))
    _check_residual(a, x, rhs)
    return x


class AffineMinimizer:
    """Linear map from problem parameters to the constrained LS minimizer.

    Represents v(p) = M p for the problem

        min_v |A v - B p|^2   subject to   C v = D p,

    where p collects the right-hand-side parameters.  Build via
    constrained_least_squares.
    """

    def __init__(self, matrix):
        self.matrix = matrix

    def __call__(self, params):
        return self.matrix @ params


def constrained_least_squares(objective_a, objective_b, constraints_c,
                              constraints_d) -> AffineMinimizer:
    """Solve min |A v - B p|^2 s.t. C v = D p for all parameter vectors p.

    Uses the nullspace method: an orthogonal factorization of C splits v into
    a minimum-norm particular solution plus a free component in the nullspace
    of C, where the reduced unconstrained problem is solved.  Raises
    InfeasibleConstraintsError when some parameter makes the constraints
    inconsistent, and RankDeficiencyError when the minimizer is not unique to
    the rank tolerance.
    """
    a = np.atleast_2d(np.asarray(objective_a, dtype=float))
    nv = a.shape[1]
    b = np.asarray(objective_b, dtype=float)
    c = np.atleast_2d(np.asarray(constraints_c, dtype=float))
    d = np.asarray(constraints_d, dtype=float)
    if c.shape[0] == 0:
        c = c.reshape(0, nv)
        d = d.reshape(0, b.shape[1])
    if c.shape[0] > nv:
        raise InfeasibleConstraintsError(
            f"more constraint rows ({c.shape[0]}) than unknowns ({nv})"
        )

    if c.shape[0] > 0:
        u, s, vt = np.linalg.svd(c, full_matrices=True)
        tol = RANK_RTOL * (s[0] if len(s) else 0.0)
        rank = int(np.sum(s > tol))
        if rank < c.shape[0]:
            # D must map into the range of C, otherwise some p is infeasible.
            leftover = d - u[:, :rank] @ (u[:, :rank].T @ d)
            dscale = max(np.abs(d).max(initial=0.0), np.abs(c).max(initial=0.0))
            if np.abs(leftover).max(initial=0.0) > 1e-10 * max(dscale, 1e-300):
                bad = np.flatnonzero(np.abs(leftover).max(axis=1) > 1e-10 * dscale)
                raise InfeasibleConstraintsError(
                    "inconsistent constraint rows", rows=bad.tolist()
                )
        # minimum-norm particular solution: v_p = C^+ D p
        pinv = vt[:rank].T @ (u[:, :rank].T / s[:rank, None])
        vp = pinv @ d
        z = vt[rank:].T  # orthonormal nullspace basis
    else:
        vp = np.zeros((nv, d.shape[1] if d.ndim == 2 else b.shape[1]))
        z = np.eye(nv)

    if z.shape[1] > 0:
        az = a @ z
        rhs = b - a @ vp
        uz, sz, vzt = np.linalg.svd(az, full_matrices=False)
        tolz = RANK_RTOL * (sz[0] if len(sz) else 0.0)
        rankz = int(np.sum(sz > tolz))
        if rankz < z.shape[1]:
            raise RankDeficiencyError(
                f"minimizer not unique: reduced rank {rankz} < {z.shape[1]}"
            )
        y = vzt.T @ ((uz.T @ rhs) / sz[:, None])
        m = vp + z @ y
    else:
        m = vp

    # Post-hoc KKT validation: constraints hold and the residual is orthogonal
    # to the feasible directions, both relative to the problem scale.
    scale = max(
        np.abs(a).max(initial=0.0) * max(np.abs(m).max(initial=0.0), 1.0),
        np.abs(b).max(initial=0.0),
        np.abs(c).max(initial=0.0) * max(np.abs(m).max(initial=0.0), 1.0),
        np.abs(d).max(initial=0.0),
        1e-300,
    )
    kkt = 0.0
    if c.shape[0] > 0:
        kkt = np.abs(c @ m - d).max(initial=0.0)
    if z.shape[1] > 0:
        kkt = max(kkt, np.abs(z.T @ (a.T @ (a @ m - b))).max(initial=0.0) / max(
            np.abs(a).max(initial=0.0), 1e-300))
    if kkt > 1e-9 * scale:
        raise SolverError(f"KKT residual {kkt:.3e} exceeds tolerance for scale {scale:.3e}")
    minimizer = AffineMinimizer(m)
    minimizer.kkt_residual = float(kkt)
    return minimizer
