"""Conjugate gradients with an absolute tolerance and warm starts.

The operator is any callable x -> A x for a symmetric positive definite
A. The stopping test and the reported residual use the true residual
b - A x, never the recurrence residual: candidate convergence is verified
against the true residual, and every `restart_every` steps the recurrence
is restarted from it. A further call with the previous solution and a
smaller tolerance resumes the iteration. Non-positive curvature p^T A p
is reported as a flag (the operator is not SPD), not raised.
"""

import math
from typing import NamedTuple

import numpy as np

__all__ = ["CgOutcome", "cg_solve"]


class CgOutcome(NamedTuple):
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    curvature_failure: bool


def cg_solve(op, b, x0=None, abs_tol=1e-8, max_iter=10000, restart_every=50):
    """Solve op(x) = b to |b - op(x)|_2 <= abs_tol, warm-started at x0."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ValueError("right-hand side must be a vector")
    if abs_tol <= 0.0:
        raise ValueError("abs_tol must be positive")
    if max_iter < 1 or restart_every < 1:
        raise ValueError("iteration limits must be positive")
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if x.shape != b.shape:
        raise ValueError("x0 length does not match b")
    r = b - op(x)
    if np.linalg.norm(r) <= abs_tol:
        return CgOutcome(x, float(np.linalg.norm(r)), 0, True, False)
    p = r.copy()
    rs = float(r @ r)
    iterations = 0
    converged = False
    curvature = False
    for it in range(1, max_iter + 1):
        ap = op(p)
        pap = float(p @ ap)
        if pap <= 0.0:
            curvature = True
            break
        step = rs / pap
        x += step * p
        iterations = it
        if it % restart_every == 0:
            r = b - op(x)
            rs = float(r @ r)
            if math.sqrt(rs) <= abs_tol:
                converged = True
                break
            p = r.copy()
            continue
        r -= step * ap
        rs_new = float(r @ r)
        if math.sqrt(rs_new) <= abs_tol:
            r = b - op(x)
            rs_new = float(r @ r)
            if math.sqrt(rs_new) <= abs_tol:
                converged = True
                break
            p = r.copy()
            rs = rs_new
            continue
        p = r + (rs_new / rs) * p
        rs = rs_new
    residual = float(np.linalg.norm(b - op(x)))
    return CgOutcome(x, residual, iterations, converged or residual <= abs_tol,
                     curvature)
