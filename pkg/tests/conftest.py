"""Shared fixtures: meshes, operators, partitions, and the study runs.

Everything heavy is session-scoped; the studies double as data sources
for the module tests and the acceptance criteria, so each expensive
build happens exactly once per session. Study fixtures record their own
wall time (single-threaded) so the runtime-budget checks can read it.
"""

from time import perf_counter

import numpy as np
import pytest

from blockaca.baca import BacaParams, baca_solve
from blockaca.bem_kernel import (
    DirichletProblem,
    LaplaceSLP,
    assemble_dense,
    assemble_rhs,
    relative_l2_error,
)
from blockaca.clustering import build_cluster_tree, build_partition
from blockaca.hmatrix import CountingOracle, HMatrixState
from blockaca.mesh import TriMesh, generate_icosphere
from blockaca.solver import cg_solve

# Singularity locations p_i = (x_i, 0, 0) of the four model problems.
POSITIONS = {
    1: (10.0, 0.0, 0.0),
    2: (1.5, 0.0, 0.0),
    3: (1.1, 0.0, 0.0),
    4: (1.05, 0.0, 0.0),
}

# Adaptive-run settings per position: (i, start rank r0, target eps).
FOUR_ROWS = ((1, 6, 1e-8), (2, 4, 5e-6), (3, 3, 1e-4), (4, 2, 5e-4))

THETA_VALUES = (0.6, 0.7, 0.9)


def fan_mesh(n=10):
    """Open fan of n triangles around the origin; small and not closed,
    for partition corner cases that only need indices and coordinates."""
    ang = np.linspace(0.0, np.pi / 2, n + 1)
    verts = np.vstack([[0.0, 0.0, 0.0],
                       np.c_[np.cos(ang), np.sin(ang), np.zeros(n + 1)]])
    tris = np.array([[0, i + 1, i + 2] for i in range(n)])
    return TriMesh(verts, tris, validate=False)


@pytest.fixture(scope="session")
def mesh320():
    return generate_icosphere(2)


@pytest.fixture(scope="session")
def mesh1280():
    return generate_icosphere(3)


@pytest.fixture(scope="session")
def op320(mesh320):
    return LaplaceSLP(mesh320)


@pytest.fixture(scope="session")
def op1280(mesh1280):
    return LaplaceSLP(mesh1280)


@pytest.fixture(scope="session")
def part320(mesh320):
    return build_partition(build_cluster_tree(mesh320, 15), 0.8)


@pytest.fixture(scope="session")
def part1280(mesh1280):
    return build_partition(build_cluster_tree(mesh1280, 15), 0.8)


@pytest.fixture(scope="session")
def dense320(op320):
    return assemble_dense(op320)


@pytest.fixture(scope="session")
def b320_p1(mesh320, op320):
    prob = DirichletProblem(mesh320, POSITIONS[1])
    return prob, assemble_rhs(prob, op320)


@pytest.fixture(scope="session")
def probs1280(mesh1280, op1280):
    t0 = perf_counter()
    by_position = {}
    for i, point in POSITIONS.items():
        prob = DirichletProblem(mesh1280, point)
        by_position[i] = (prob, assemble_rhs(prob, op1280))
    return {"by_position": by_position, "seconds": perf_counter() - t0}


@pytest.fixture(scope="session")
def aca1280(op1280, part1280):
    """Plain ACA pipeline matrix at N = 1280, block tolerance 1e-6."""
    t0 = perf_counter()
    h = HMatrixState(part1280, CountingOracle(op1280),
                     n_ahead=2, tol=1e-6, beta=0.8)
    seconds = perf_counter() - t0
    return {"hmatrix": h, "storage": h.storage_stats(), "seconds": seconds}


@pytest.fixture(scope="session")
def four_positions(op1280, part1280, aca1280, probs1280):
    """The four-positions study at N = 1280: one shared ACA matrix solved
    per position, one adaptive run per position with its own (r0, eps)."""
    h_aca = aca1280["hmatrix"]
    t0 = perf_counter()
    aca_runs = {}
    baca_runs = {}
    for i, r0, eps in FOUR_ROWS:
        prob, b = probs1280["by_position"][i]
        out = cg_solve(lambda v: h_aca.matvec(v, "Ahat"), b, abs_tol=1e-8)
        aca_runs[i] = {
            "x": out.x,
            "cg_iterations": out.iterations,
            "converged": out.converged,
            "e_h": relative_l2_error(out.x, prob),
        }
        params = BacaParams(tol=eps, theta=0.9, alpha=100.0,
                            n_ahead=2, r0=r0)
        x, hm, trace = baca_solve(op1280, b, part1280, params)
        baca_runs[i] = {
            "x": x,
            "hmatrix": hm,
            "trace": trace,
            "storage": hm.storage_stats(),
            "e_h": relative_l2_error(x, prob),
        }
    seconds = perf_counter() - t0
    return {
        "aca": aca_runs,
        "aca_storage": aca1280["storage"],
        "baca": baca_runs,
        "partition": part1280,
        "seconds": seconds,
        "total_seconds": seconds + aca1280["seconds"] + probs1280["seconds"],
    }


@pytest.fixture(scope="session")
def theta_runs(mesh320, op320, part320, dense320, mesh1280, op1280, part1280):
    """Adaptive runs at p_3 for three marking parameters and two sizes;
    the N = 320 runs carry the dense matrix for true-residual columns."""
    cases = {}
    t_start = perf_counter()
    for n, mesh, op, part, dense in (
            (320, mesh320, op320, part320, dense320),
            (1280, mesh1280, op1280, part1280, None)):
        prob = DirichletProblem(mesh, POSITIONS[3])
        b = assemble_rhs(prob, op)
        for theta in THETA_VALUES:
            params = BacaParams(tol=1e-7, theta=theta, alpha=0.5,
                                n_ahead=3, r0=4)
            t0 = perf_counter()
            x, hm, trace = baca_solve(op, b, part, params,
                                      dense_matrix=dense)
            cases[(n, theta)] = {
                "x": x,
                "b": b,
                "hmatrix": hm,
                "trace": trace,
                "partition": part,
                "seconds": perf_counter() - t0,
            }
    return {"cases": cases, "seconds": perf_counter() - t_start}


@pytest.fixture(scope="session")
def scaling_runs(mesh1280, op1280, part1280):
    """The same adaptive configuration at N = 1280 and N = 5120; seconds
    cover the solve call only (discretisation setup is shared work)."""
    runs = {}
    t_start = perf_counter()
    for n in (1280, 5120):
        if n == 1280:
            mesh, op, part = mesh1280, op1280, part1280
        else:
            mesh = generate_icosphere(4)
            op = LaplaceSLP(mesh)
            part = build_partition(build_cluster_tree(mesh, 15), 0.8)
        prob = DirichletProblem(mesh, POSITIONS[1])
        b = assemble_rhs(prob, op)
        params = BacaParams(tol=5e-8, theta=0.9, alpha=100.0,
                            n_ahead=2, r0=6)
        t0 = perf_counter()
        x, hm, trace = baca_solve(op, b, part, params)
        runs[n] = {
            "x": x,
            "trace": trace,
            "hmatrix": hm,
            "partition": part,
            "seconds": perf_counter() - t0,
        }
    return {"runs": runs, "seconds": perf_counter() - t_start}


@pytest.fixture(scope="session")
def exhausted320(op320, part320):
    """Every admissible block driven to a terminal state at tolerance 0:
    the whole matrix is reproduced to machine precision."""
    return HMatrixState(part320, op320, n_ahead=1, tol=0.0, beta=0.8)
