"""Hierarchical matrix over a block partition with a shared factor store.

One AcaBlockState per admissible block realizes two nested approximations
at once: the first base_ranks[b] factors form the working matrix A_k, the
full factor list forms the look-ahead matrix Ahat_k, and their difference
W_k = A_k - Ahat_k lives in the factor range (base, rank]. Non-admissible
blocks are exact dense payloads computed entry by entry. An admissible
block whose rank passes half its minimal dimension (status `densified`)
is completed exactly as well: its dense payload is assembled (the entries
enter the oracle counter), it contributes zero to W_k, and it is excluded
from further refinement; its factor list is kept only for rank
bookkeeping. Terminal blocks of any kind have base rank equal to full
rank, so only active blocks carry a look-ahead gap of exactly n_ahead.

Matvecs run through per-version cached sparse operators: a global sparse
matrix D holding all dense payloads and global factor matrices U, V with
one column per cross, split into the base range and the look-ahead range.
Everything is sequential and deterministic: the same state produces
bit-identical matvecs.
"""

import threading
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import sparse

from .aca import AcaBlockState, aca_advance, apply_partial, partial_frobenius_sq

__all__ = [
    "CountingOracle",
    "HMatrixState",
    "MATVEC_MODES",
    "RANK_TOL_FLOOR",
]

MATVEC_MODES = ("Ak", "Ahat", "Wk")

# Tolerance used when a block is advanced to a prescribed rank (initial
# build and marked refinement): only machine-precision crosses stop early,
# the accuracy decision belongs to the outer loop.
RANK_TOL_FLOOR = 1e-14


class CountingOracle:
    """Wraps an entry oracle, counting entries served and time spent."""

    def __init__(self, op):
        self.op = op
        self.entries_served = 0
        self.seconds = 0.0
        self._lock = threading.Lock()

    def _account(self, count, seconds):
        with self._lock:
            self.entries_served += count
            self.seconds += seconds

    @property
    def n(self):
        return self.op.n

    def row(self, i, cols=None):
        t0 = time.perf_counter()
        out = self.op.row(i, cols)
        self._account(len(out), time.perf_counter() - t0)
        return out

    def col(self, j, rows=None):
        t0 = time.perf_counter()
        out = self.op.col(j, rows)
        self._account(len(out), time.perf_counter() - t0)
        return out

    def submatrix(self, rows, cols):
        """Exact dense block, one oracle entry per (i, j) pair."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        t0 = time.perf_counter()
        if hasattr(self.op, "entries"):
            flat = self.op.entries(np.repeat(rows, len(cols)),
                                   np.tile(cols, len(rows)))
            out = np.asarray(flat, dtype=float).reshape(len(rows), len(cols))
        else:
            out = np.stack([np.asarray(self.op.row(int(i), cols), dtype=float)
                            for i in rows])
        self._account(out.size, time.perf_counter() - t0)
        return out


class HMatrixState:
    """Rank-split hierarchical store of the pair (A_k, Ahat_k).

    Constructed in one of two ways: with r0=None every admissible block is
    cross-approximated until terminal at the block tolerance `tol` (the
    plain ACA pipeline; A_k = Ahat_k); with an integer r0 every block gets
    r0 + n_ahead accepted crosses at the rank floor tolerance, base rank
    r0 (the adaptive pipeline's start). Dense blocks are always exact.
    """

    def __init__(self, partition, oracle, n_ahead, tol, beta, r0=None,
                 densify_ratio=0.5, workers=1):
        if not isinstance(oracle, CountingOracle):
            oracle = CountingOracle(oracle)
        if n_ahead < 1:
            raise ValueError("n_ahead must be a positive integer")
        if r0 is not None and r0 < 1:
            raise ValueError("r0 must be a positive integer when given")
        if workers < 1:
            raise ValueError("workers must be a positive integer")
        self.partition = partition
        self.oracle = oracle
        self.n = partition.n
        self.n_ahead = int(n_ahead)
        self.tol = float(tol)
        self.beta = float(beta)
        self.densify_ratio = float(densify_ratio)
        self.adm_states = [AcaBlockState(blk.rows, blk.cols)
                           for blk in partition.admissible_blocks]
        self.adm_dense = [None] * len(self.adm_states)
        self.base_ranks = [0] * len(self.adm_states)
        self._version = 0
        self._ops = None

        def build_block(bid):
            if r0 is None:
                self._advance(bid, steps=None, tol=self.tol)
                self.base_ranks[bid] = self.adm_states[bid].rank
            else:
                self._advance(bid, steps=r0 + self.n_ahead, tol=RANK_TOL_FLOOR)
                st = self.adm_states[bid]
                self.base_ranks[bid] = r0 if st.status == "active" else st.rank

        # Blocks are independent and each writes only its own slots, so a
        # pool changes scheduling, never values; workers=1 stays sequential.
        if workers == 1:
            self.dense_data = [oracle.submatrix(blk.rows, blk.cols)
                               for blk in partition.dense_blocks]
            for bid in range(len(self.adm_states)):
                build_block(bid)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                self.dense_data = list(pool.map(
                    lambda blk: oracle.submatrix(blk.rows, blk.cols),
                    partition.dense_blocks))
                list(pool.map(build_block, range(len(self.adm_states))))
        self._version += 1

    def _advance(self, bid, steps, tol):
        st = self.adm_states[bid]
        aca_advance(st, self.oracle, steps=10**9 if steps is None else steps,
                    tol=tol, beta=self.beta, densify_ratio=self.densify_ratio)
        if st.status == "densified":
            self.adm_dense[bid] = self.oracle.submatrix(st.rows, st.cols)

    def refine_blocks(self, block_ids):
        """Advance each given active block by n_ahead accepted crosses.

        The old full rank becomes the new base rank, so A_{k+1} on a
        refined block equals the previous Ahat_k; blocks that go terminal
        close their look-ahead gap instead.
        """
        for bid in block_ids:
            st = self.adm_states[bid]
            if st.status != "active":
                raise ValueError("cannot refine a terminal block")
            old_rank = st.rank
            self._advance(bid, steps=self.n_ahead, tol=RANK_TOL_FLOOR)
            self.base_ranks[bid] = old_rank if st.status == "active" else st.rank
        self._version += 1

    def active_blocks(self):
        """Ids of admissible blocks that can still be refined."""
        return [bid for bid, st in enumerate(self.adm_states)
                if st.status == "active"]

    def status_counts(self):
        counts = {}
        for st in self.adm_states:
            counts[st.status] = counts.get(st.status, 0) + 1
        return counts

    def _operators(self):
        if self._ops is not None and self._ops[0] == self._version:
            return self._ops[1:]
        n = self.n
        di, dj, dv = [], [], []
        for blk, data in zip(self.partition.dense_blocks, self.dense_data):
            di.append(np.repeat(blk.rows, len(blk.cols)))
            dj.append(np.tile(blk.cols, len(blk.rows)))
            dv.append(data.ravel())
        for st, payload in zip(self.adm_states, self.adm_dense):
            if payload is None:
                continue
            di.append(np.repeat(st.rows, len(st.cols)))
            dj.append(np.tile(st.cols, len(st.rows)))
            dv.append(payload.ravel())
        if di:
            dense_op = sparse.csr_matrix(
                (np.concatenate(dv), (np.concatenate(di), np.concatenate(dj))),
                shape=(n, n))
        else:
            dense_op = sparse.csr_matrix((n, n))
        groups = {name: {"ui": [], "uv": [], "vi": [], "vv": [], "cols": 0}
                  for name in ("base", "look")}
        for bid, st in enumerate(self.adm_states):
            if self.adm_dense[bid] is not None:
                continue
            base = self.base_ranks[bid]
            for l in range(st.rank):
                g = groups["base"] if l < base else groups["look"]
                g["ui"].append(st.rows)
                g["uv"].append(st.us[l])
                g["vi"].append(st.cols)
                g["vv"].append(st.vs[l])
                g["cols"] += 1

        def factor_matrix(indices, values, ncols):
            if not indices:
                return sparse.csr_matrix((n, 0))
            col_ids = np.concatenate([np.full(len(ix), c, dtype=np.int64)
                                      for c, ix in enumerate(indices)])
            return sparse.csr_matrix(
                (np.concatenate(values), (np.concatenate(indices), col_ids)),
                shape=(n, ncols))

        built = []
        for name in ("base", "look"):
            g = groups[name]
            built.append(factor_matrix(g["ui"], g["uv"], g["cols"]))
            built.append(factor_matrix(g["vi"], g["vv"], g["cols"]))
        self._ops = (self._version, dense_op, *built)
        return self._ops[1:]

    def matvec(self, x, mode):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError("vector length does not match the matrix")
        if mode not in MATVEC_MODES:
            raise ValueError(f"unknown matvec mode {mode!r}")
        dense_op, u_base, v_base, u_look, v_look = self._operators()
        if mode == "Wk":
            return -(u_look @ (v_look.T @ x))
        y = dense_op @ x + u_base @ (v_base.T @ x)
        if mode == "Ahat":
            y = y + u_look @ (v_look.T @ x)
        return y

    def estimator_contributions(self, x):
        """Per-admissible-block |(W_k)_ts x_s|_2 and their root square sum."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError("vector length does not match the matrix")
        vals = np.zeros(len(self.adm_states))
        for bid, st in enumerate(self.adm_states):
            base = self.base_ranks[bid]
            if self.adm_dense[bid] is not None or base == st.rank:
                continue
            w = apply_partial(st, x[st.cols], base, st.rank)
            vals[bid] = np.linalg.norm(w)
        return vals, float(np.linalg.norm(vals))

    def storage_stats(self):
        """Payload bytes, compression vs the dense matrix, ranks, entries."""
        dense_bytes = sum(8 * data.size for data in self.dense_data)
        factor_bytes = 0
        n_densified = 0
        for bid, st in enumerate(self.adm_states):
            if self.adm_dense[bid] is not None:
                dense_bytes += 8 * self.adm_dense[bid].size
                n_densified += 1
            else:
                factor_bytes += 8 * st.rank * (len(st.rows) + len(st.cols))
        total = dense_bytes + factor_bytes
        n_adm = len(self.adm_states)
        return {
            "bytes": total,
            "compression_pct": 100.0 * total / (8.0 * self.n * self.n),
            "avg_rank_base": (float(np.mean(self.base_ranks)) if n_adm else 0.0),
            "avg_rank_ahead": (float(np.mean([st.rank for st in self.adm_states]))
                               if n_adm else 0.0),
            "entries_computed": self.oracle.entries_served,
            "n_densified": n_densified,
        }

    def frobenius_norm(self, mode):
        """Exact blockwise Frobenius norm of A_k, Ahat_k or W_k."""
        if mode not in MATVEC_MODES:
            raise ValueError(f"unknown matvec mode {mode!r}")
        total = 0.0
        if mode != "Wk":
            for data in self.dense_data:
                total += float(np.sum(data * data))
        for bid, st in enumerate(self.adm_states):
            payload = self.adm_dense[bid]
            if payload is not None:
                if mode != "Wk":
                    total += float(np.sum(payload * payload))
                continue
            base = self.base_ranks[bid]
            if mode == "Ak":
                total += partial_frobenius_sq(st, 0, base)
            elif mode == "Ahat":
                total += partial_frobenius_sq(st, 0, st.rank)
            else:
                total += partial_frobenius_sq(st, base, st.rank)
        return float(np.sqrt(total))
