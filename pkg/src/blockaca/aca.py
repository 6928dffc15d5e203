"""Adaptive cross approximation of a single admissible matrix block.

A block A_ts is grown one cross at a time. A pivot row i_r fixes the
residual row v~_r = A_{i_r,s} - sum_l (u_l)_{i_r} v_l; its largest entry
names the pivot column j_r, the row is scaled so (v_r)_{j_r} = 1, and
u_r is the matching residual column A_{t,j_r} - sum_l (v_l)_{j_r} u_l.
The used-row set Z grows by exactly one row per iteration whether or not
the cross is accepted, so a block of m rows is processed in at most m
iterations. After r accepted crosses the approximation is
S_r = sum_l u_l v_l^T; its squared Frobenius norm is maintained
incrementally and u_r, v~_r are exactly a column and a row of the
remainder A_ts - S_{r-1}.

A block stops in one of three terminal states: `converged` — the last
cross satisfied |u_r|_2 |v_r|_2 <= eps(1-beta)/(1+eps) |S_r|_F, or a
pivot row vanished while at least one cross is in place (the candidate
cross is zero, so the approximation already interpolates the row);
`exhausted` — every row was consumed, so all rows of the remainder are
interpolated or vanished and S_r reproduces the block to machine
precision; `densified` — the rank passed half the minimal block
dimension, where the factors stop being cheaper than the block itself.
A pivot row that vanishes before any cross is accepted only rules the
row out; an all-zero block therefore ends exhausted with S = 0.
"""

import math

import numpy as np

__all__ = [
    "AcaBlockState",
    "DenseOracle",
    "aca_advance",
    "stopping_factor",
    "low_rank_eval",
    "apply_partial",
    "partial_frobenius_sq",
]


class AcaBlockState:
    """Resumable cross state of one block: factors, pivots, used rows."""

    __slots__ = ("rows", "cols", "us", "vs", "used", "n_used",
                 "row_pivots", "col_pivots", "frob_sq", "entry_scale",
                 "status")

    def __init__(self, rows, cols):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.ndim != 1 or cols.ndim != 1 or not len(rows) or not len(cols):
            raise ValueError("block index sets must be nonempty 1-d arrays")
        self.rows = rows
        self.cols = cols
        self.us = []
        self.vs = []
        self.used = np.zeros(len(rows), dtype=bool)
        self.n_used = 0
        self.row_pivots = []
        self.col_pivots = []
        self.frob_sq = 0.0
        self.entry_scale = 0.0
        self.status = "active"

    @property
    def rank(self):
        return len(self.us)

    @property
    def shape(self):
        return (len(self.rows), len(self.cols))

    @property
    def frobenius(self):
        """|S_r|_F from the incrementally maintained square."""
        return math.sqrt(max(self.frob_sq, 0.0))

    def used_rows(self):
        """Local indices of the used-row set Z, ascending."""
        return np.flatnonzero(self.used)


class DenseOracle:
    """Entry oracle over an in-memory matrix (tests and dense fallbacks)."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise ValueError("matrix must be 2-d")

    @property
    def n(self):
        return self.matrix.shape[0]

    def row(self, i, cols=None):
        if cols is None:
            return self.matrix[i].copy()
        return self.matrix[i, cols]

    def col(self, j, rows=None):
        if rows is None:
            return self.matrix[:, j].copy()
        return self.matrix[rows, j]


def stopping_factor(tol, beta):
    """The cross-size threshold coefficient eps(1-beta)/(1+eps)."""
    return tol * (1.0 - beta) / (1.0 + tol)


def _next_pivot_row(state):
    # First pivot is the smallest row; afterwards the unused row where the
    # last accepted column factor is largest, ties to the smallest index.
    unused = ~state.used
    if not state.us:
        return int(np.flatnonzero(unused)[0])
    score = np.where(unused, np.abs(state.us[-1]), -1.0)
    return int(np.argmax(score))


def aca_advance(state, oracle, steps, tol, beta, densify_ratio=0.5,
                vanish_rtol=1e-14):
    """Run up to `steps` accepted cross steps; mutates and returns `state`.

    `oracle` serves original entries by global index: oracle.row(i, cols)
    and oracle.col(j, rows) return 1-d arrays the caller owns. Rows that
    vanish (max-norm <= vanish_rtol times the largest entry drawn so far)
    consume a pivot row without counting against `steps`.
    """
    if state.status != "active":
        raise ValueError(f"cannot advance a block with status {state.status!r}")
    if steps <= 0:
        raise ValueError("steps must be positive")
    if tol < 0.0:
        raise ValueError("tol must be nonnegative")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    nt, ns = state.shape
    threshold = stopping_factor(tol, beta)
    accepted = 0
    while accepted < steps and state.status == "active":
        i_loc = _next_pivot_row(state)
        state.used[i_loc] = True
        state.n_used += 1
        resid = np.array(oracle.row(int(state.rows[i_loc]), state.cols),
                         dtype=float)
        state.entry_scale = max(state.entry_scale, float(np.abs(resid).max()))
        for u, v in zip(state.us, state.vs):
            resid -= u[i_loc] * v
        if np.abs(resid).max() <= vanish_rtol * state.entry_scale:
            if state.n_used == nt:
                state.status = "exhausted"
            elif state.us:
                state.status = "converged"
            continue
        j_loc = int(np.argmax(np.abs(resid)))
        v_new = resid / resid[j_loc]
        u_new = np.array(oracle.col(int(state.cols[j_loc]), state.rows),
                         dtype=float)
        state.entry_scale = max(state.entry_scale, float(np.abs(u_new).max()))
        for u, v in zip(state.us, state.vs):
            u_new -= v[j_loc] * u
        cross = 0.0
        for u, v in zip(state.us, state.vs):
            cross += (u @ u_new) * (v @ v_new)
        uu = float(u_new @ u_new)
        vv = float(v_new @ v_new)
        state.frob_sq += 2.0 * cross + uu * vv
        state.us.append(u_new)
        state.vs.append(v_new)
        state.row_pivots.append(i_loc)
        state.col_pivots.append(j_loc)
        accepted += 1
        if state.n_used == nt:
            state.status = "exhausted"
        elif math.sqrt(uu * vv) <= threshold * state.frobenius:
            state.status = "converged"
        elif state.rank > densify_ratio * min(nt, ns):
            state.status = "densified"
    return state


def low_rank_eval(state):
    """Materialize S_r = sum_l u_l v_l^T (small blocks only)."""
    nt, ns = state.shape
    if nt * ns > 1_000_000:
        raise ValueError("block too large to materialize")
    if not state.us:
        return np.zeros((nt, ns))
    return np.stack(state.us, axis=1) @ np.stack(state.vs, axis=0)


def apply_partial(state, x, from_rank, to_rank):
    """Apply sum_{l=from_rank+1}^{to_rank} u_l (v_l^T x) to a local vector."""
    if not 0 <= from_rank <= to_rank <= state.rank:
        raise ValueError("factor range out of bounds")
    x = np.asarray(x, dtype=float)
    if x.shape != (len(state.cols),):
        raise ValueError("vector length does not match the column set")
    out = np.zeros(len(state.rows))
    for l in range(from_rank, to_rank):
        out += state.us[l] * (state.vs[l] @ x)
    return out


def partial_frobenius_sq(state, from_rank, to_rank):
    """Exact squared Frobenius norm of sum_{l=from_rank+1}^{to_rank} u_l v_l^T.

    Uses the factor Gramians: |UV^T|_F^2 = sum_{l,m} (u_l.u_m)(v_l.v_m).
    """
    if not 0 <= from_rank <= to_rank <= state.rank:
        raise ValueError("factor range out of bounds")
    if from_rank == to_rank:
        return 0.0
    u_mat = np.stack(state.us[from_rank:to_rank], axis=1)
    v_mat = np.stack(state.vs[from_rank:to_rank], axis=1)
    return float(np.sum((u_mat.T @ u_mat) * (v_mat.T @ v_mat)))
