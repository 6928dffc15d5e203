"""Block-adaptive cross approximation: solve-estimate-mark-refine loop.

Each outer iteration k solves A_k x_k = b by warm-started CG, computes the
per-block estimator contributions |(W_k)_ts (x_k)_s|_2 with total eta_k,
stops once eta_k <= tol, and otherwise refines a minimal-cardinality
marked set carrying at least a theta-fraction of the squared estimator.
Refined blocks shift their base rank to the previous look-ahead rank, so
A_{k+1} equals Ahat_k on marked blocks and A_k elsewhere.

Solver coupling: iteration 0 solves at the target tolerance itself (it
supplies the first estimator value); iteration k >= 1 starts at
max(alpha * eta_{k-1}, tol)/4, and whenever the CG exit residual delta_k
exceeds alpha * |W_k x_k|_2 the tolerance is halved and CG resumes, so
the reliability bound's hypothesis delta_k <= alpha |W_k x_k|_2 holds on
exit (bounded number of halvings; moot when W_k = 0, where A_k is exact).

The trace records, per iteration, the estimator-reduction quantities: on
row k+1, z_prev is z_k = sum_{marked} |(Ahat_k - Ahat_{k+1}) x_{k+1}|^2 +
(1 + 1/eps) sum_{unmarked} |W_k (x_{k+1} - x_k)|^2 with
eps = theta^2 / (2 (1 - theta^2)), the two parts separately, and the gap
of the exact identity eta_{k+1}^2 = sum_{marked} |(Ahat_k - Ahat_{k+1})
x_{k+1}|^2 + sum_{unmarked} |W_k x_{k+1}|^2, which cross-checks the
bookkeeping. When a dense matrix is supplied (small problems), rows also
carry the true residual and the errors of A_k and Ahat_k at x_k.
"""

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from .aca import apply_partial
from .clustering import partition_stats
from .hmatrix import CountingOracle, HMatrixState
from .solver import cg_solve

__all__ = [
    "BacaParams",
    "BacaTrace",
    "mark_doerfler",
    "baca_solve",
    "diagnostics",
]


@dataclass
class BacaParams:
    """Knobs of the adaptive loop; tol is the stopping threshold on eta."""

    tol: float
    theta: float = 0.9
    alpha: float = 100.0
    n_ahead: int = 2
    r0: int = 3
    max_outer: int = 100
    beta: float = 0.8
    densify_ratio: float = 0.5
    cg_max_iter: int = 20000
    max_tightenings: int = 20

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        if self.n_ahead < 1 or self.r0 < 1:
            raise ValueError("n_ahead and r0 must be positive integers")
        if self.max_outer < 0:
            raise ValueError("max_outer must be nonnegative")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")


class BacaTrace:
    """Append-only per-outer-iteration record of the adaptive loop."""

    COLUMNS = ("k", "eta", "delta", "wk_norm", "abs_tol", "tightenings",
               "cg_iterations", "n_marked", "n_active", "n_densified",
               "entries_computed", "storage_bytes", "wall_seconds",
               "coupling_ok", "z_prev", "z_marked_prev", "z_unmarked_prev",
               "eta_decomp_gap", "true_residual", "ak_error", "ahat_error")

    def __init__(self, params):
        self.params = params
        self.rows = []
        self.converged = False
        self.curvature = False

    def append(self, row):
        unknown = set(row) - set(self.COLUMNS)
        if unknown:
            raise ValueError(f"unknown trace fields {sorted(unknown)}")
        self.rows.append(dict(row))

    def column(self, name):
        if name not in self.COLUMNS:
            raise ValueError(f"unknown trace column {name!r}")
        return [row.get(name) for row in self.rows]

    def to_csv(self, path):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(self.COLUMNS)
            for row in self.rows:
                record = []
                for name in self.COLUMNS:
                    value = row.get(name)
                    if value is None:
                        record.append("")
                    elif isinstance(value, bool):
                        record.append(int(value))
                    elif isinstance(value, float):
                        record.append(repr(value))
                    else:
                        record.append(value)
                writer.writerow(record)


def mark_doerfler(contributions, theta):
    """Minimal block set whose squared sum reaches theta^2 of the total.

    Sorting the squared contributions descending (ties to the smaller
    block id) and taking the shortest sufficient prefix is minimal: any
    smaller set is dominated by the same-size prefix, which is short of
    the threshold. Returns ascending block ids; empty when all
    contributions vanish.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    sq = np.square(np.asarray(contributions, dtype=float))
    total = float(sq.sum())
    if total <= 0.0:
        return np.array([], dtype=np.int64)
    order = np.argsort(-sq, kind="stable")
    prefix_sums = np.cumsum(sq[order])
    count = int(np.searchsorted(prefix_sums, theta * theta * total, "left")) + 1
    return np.sort(order[:min(count, len(order))])


def _drift_terms(hmatrix, pending, x_new, x_prev):
    """Estimator-reduction sums at x_{k+1} for the last refinement.

    Returns (marked drift, unmarked W_k at the solution increment,
    unmarked W_k at x_{k+1}, marked drift restricted to blocks still
    active). The restricted drift feeds the exact decomposition of
    eta_{k+1}^2: a marked block that finished during refinement (exact
    completion or converged) contributes zero to eta_{k+1} but a positive
    drift term, so the full-drift decomposition only bounds eta_{k+1}^2
    from above.
    """
    marked = {bid for bid, _ in pending}
    drift = 0.0
    drift_active = 0.0
    for bid, old_rank in pending:
        state = hmatrix.adm_states[bid]
        xs = x_new[state.cols]
        if hmatrix.adm_dense[bid] is not None:
            diff = hmatrix.adm_dense[bid] @ xs - apply_partial(state, xs, 0, old_rank)
        else:
            diff = apply_partial(state, xs, old_rank, state.rank)
        term = float(diff @ diff)
        drift += term
        if hmatrix.adm_dense[bid] is None and hmatrix.base_ranks[bid] < state.rank:
            drift_active += term
    dx = x_new - x_prev
    w_increment = 0.0
    w_new = 0.0
    for bid, state in enumerate(hmatrix.adm_states):
        if bid in marked or hmatrix.adm_dense[bid] is not None:
            continue
        base = hmatrix.base_ranks[bid]
        if base == state.rank:
            continue
        w = apply_partial(state, dx[state.cols], base, state.rank)
        w_increment += float(w @ w)
        w = apply_partial(state, x_new[state.cols], base, state.rank)
        w_new += float(w @ w)
    return drift, w_increment, w_new, drift_active


def baca_solve(oracle, b, partition, params, dense_matrix=None, workers=1):
    """Run the adaptive loop; returns (x, HMatrixState, BacaTrace)."""
    b = np.asarray(b, dtype=float)
    if b.shape != (partition.n,):
        raise ValueError("right-hand side length does not match the partition")
    started = time.perf_counter()
    if not isinstance(oracle, CountingOracle):
        oracle = CountingOracle(oracle)
    hmatrix = HMatrixState(partition, oracle, n_ahead=params.n_ahead,
                           tol=params.tol, beta=params.beta, r0=params.r0,
                           densify_ratio=params.densify_ratio, workers=workers)
    trace = BacaTrace(params)
    operator = lambda v: hmatrix.matvec(v, "Ak")
    eps_red = 0.5 * params.theta ** 2 / (1.0 - params.theta ** 2)
    x = np.zeros_like(b)
    eta_prev = None
    pending = None
    x_prev = None
    for k in range(params.max_outer + 1):
        if k == 0:
            abs_tol = params.tol
        else:
            abs_tol = max(params.alpha * eta_prev, params.tol) / 4.0
        outcome = cg_solve(operator, b, x0=x, abs_tol=abs_tol,
                           max_iter=params.cg_max_iter)
        x = outcome.x
        delta = outcome.residual_norm
        cg_iterations = outcome.iterations
        trace.curvature = trace.curvature or outcome.curvature_failure
        contributions, eta = hmatrix.estimator_contributions(x)
        wk_norm = float(np.linalg.norm(hmatrix.matvec(x, "Wk")))
        tightenings = 0
        while (wk_norm > 0.0 and delta > params.alpha * wk_norm
               and tightenings < params.max_tightenings):
            abs_tol /= 2.0
            outcome = cg_solve(operator, b, x0=x, abs_tol=abs_tol,
                               max_iter=params.cg_max_iter)
            x = outcome.x
            delta = outcome.residual_norm
            cg_iterations += outcome.iterations
            trace.curvature = trace.curvature or outcome.curvature_failure
            contributions, eta = hmatrix.estimator_contributions(x)
            wk_norm = float(np.linalg.norm(hmatrix.matvec(x, "Wk")))
            tightenings += 1
        storage = hmatrix.storage_stats()
        row = {
            "k": k,
            "eta": eta,
            "delta": delta,
            "wk_norm": wk_norm,
            "abs_tol": abs_tol,
            "tightenings": tightenings,
            "cg_iterations": cg_iterations,
            "n_active": len(hmatrix.active_blocks()),
            "n_densified": storage["n_densified"],
            "entries_computed": storage["entries_computed"],
            "storage_bytes": storage["bytes"],
            "wall_seconds": time.perf_counter() - started,
            "coupling_ok": wk_norm == 0.0 or delta <= params.alpha * wk_norm,
        }
        if pending is not None:
            drift, w_increment, w_new, drift_active = _drift_terms(
                hmatrix, pending, x, x_prev)
            row["z_marked_prev"] = drift
            row["z_unmarked_prev"] = w_increment
            row["z_prev"] = drift + (1.0 + 1.0 / eps_red) * w_increment
            row["eta_decomp_gap"] = abs(eta * eta - (drift_active + w_new))
        if dense_matrix is not None:
            exact = dense_matrix @ x
            row["true_residual"] = float(np.linalg.norm(b - exact))
            row["ak_error"] = float(np.linalg.norm(hmatrix.matvec(x, "Ak") - exact))
            row["ahat_error"] = float(np.linalg.norm(hmatrix.matvec(x, "Ahat") - exact))
        if eta <= params.tol or k == params.max_outer:
            row["n_marked"] = 0
            trace.append(row)
            trace.converged = eta <= params.tol
            break
        marked = mark_doerfler(contributions, params.theta)
        row["n_marked"] = len(marked)
        trace.append(row)
        pending = [(int(bid), hmatrix.adm_states[bid].rank) for bid in marked]
        x_prev = x.copy()
        hmatrix.refine_blocks([int(bid) for bid in marked])
        eta_prev = eta
    return x, hmatrix, trace


def diagnostics(hmatrix, x, b, trace, dense_matrix=None):
    """Per-iteration checks of the reliability, reduction and lower bounds.

    Returns a report of the ratio series and booleans; ratios involving a
    zero denominator are left out of the series (a terminal state has both
    sides zero).
    """
    stats = partition_stats(hmatrix.partition)
    bound = math.sqrt(stats["sparsity_constant"] * stats["depth"])
    theta = trace.params.theta
    q = 1.0 - 0.5 * theta ** 2
    reliability = []
    reliability_ok = True
    for row in trace.rows:
        lhs, eta = row["wk_norm"], row["eta"]
        if eta > 0.0:
            reliability.append(lhs / (bound * eta))
        elif lhs > 0.0:
            reliability_ok = False
        reliability_ok = reliability_ok and lhs <= bound * eta + 1e-12 * (1.0 + eta)
    reduction_checks = []
    for prev, row in zip(trace.rows, trace.rows[1:]):
        if row.get("z_prev") is None:
            continue
        lhs = row["eta"] ** 2
        rhs = q * prev["eta"] ** 2 + row["z_prev"]
        reduction_checks.append(lhs <= rhs + 1e-12 * (1.0 + rhs))
    report = {
        "reliability_bound": bound,
        "reliability_ratios": reliability,
        "reliability_ok": reliability_ok,
        "q": q,
        "reduction_ok": all(reduction_checks) if reduction_checks else True,
        "reduction_checks": reduction_checks,
        "final_residual": float(np.linalg.norm(b - hmatrix.matvec(x, "Ak"))),
        "converged": trace.converged,
        "curvature": trace.curvature,
    }
    if dense_matrix is not None:
        exact = dense_matrix @ x
        report["true_residual"] = float(np.linalg.norm(b - exact))
        efficiency = []
        saturation = []
        for row in trace.rows:
            if row.get("true_residual") is None:
                continue
            if row["wk_norm"] > 0.0:
                efficiency.append(row["true_residual"] / row["wk_norm"])
            if row.get("ak_error"):
                saturation.append(row["ahat_error"] / row["ak_error"])
        report["efficiency_ratios"] = efficiency
        report["saturation_ratios"] = saturation
    return report
