"""Benchmark runner: config files, pipeline runs, CSV artifacts, renders.

A run is described by a flat key=value config (RunConfig) and produces
four artifacts in the output directory: results.csv (one row with the
headline numbers), trace.csv (one row per outer iteration; single row for
the non-adaptive pipelines), blocks.svg (the block partition with ranks)
and mesh.off (the geometry actually used). Pipelines: `dense` assembles
and solves the full matrix (reference path, small N only), `aca`
approximates every admissible block to eps_aca and then solves, `baca`
runs the adaptive solve-estimate-mark-refine loop to eps_baca.

Wall time is reported as assembly (geometry, quadrature setup, right-hand
side, partition, and for dense/aca the matrix build) and solve (the CG
run, or for baca the whole adaptive loop including its refinements),
plus their sum. Numeric results are deterministic for a fixed config and
any worker count; the timing columns are physical measurements and vary
between runs.

The SVG layout orders indices by the depth-first leaf traversal of the
cluster tree, so every partition block is an axis-aligned rectangle and
the rectangles tile the N x N square exactly. Blocks stored entry-wise
are red: the non-admissible leaves and admissible blocks that were
completed densely after their rank passed the densification cutoff.
Remaining admissible blocks are green and labeled with the stored rank.
"""

import csv
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .baca import BacaParams, BacaTrace, baca_solve
from .bem_kernel import (DirichletProblem, LaplaceSLP, assemble_dense,
                         assemble_rhs, relative_l2_error)
from .clustering import BlockPartition, build_cluster_tree, build_partition
from .hmatrix import CountingOracle, HMatrixState
from .mesh import generate_icosphere, load_off, map_to_ellipsoid, refine_region, save_off
from .solver import cg_solve

__all__ = [
    "RunConfig",
    "run",
    "compare",
    "render_partition_svg",
    "RESULT_COLUMNS",
]

GEOMETRIES = ("icosphere", "ellipsoid", "off")
PIPELINES = ("aca", "baca", "dense")
RENDER_GUARD = 100_000

RESULT_COLUMNS = ("N", "e_h", "residual", "storage_mb", "compression_pct",
                  "avg_rank_base", "avg_rank_ahead", "entries_computed",
                  "cg_iterations", "outer_iterations", "wall_seconds",
                  "wall_assembly_seconds", "wall_solve_seconds")


@dataclass
class RunConfig:
    """Flat, fully typed description of one experiment."""

    geometry: str = "icosphere"
    level: int = 3
    semiaxes: str = "1,1,3"
    refine_band: float = 0.0
    refine_rounds: int = 0
    off_path: str = ""
    p: str = "10,0,0"
    pipeline: str = "baca"
    b_min: int = 15
    beta: float = 0.8
    eps_aca: float = 1e-6
    eps_baca: float = 1e-4
    theta: float = 0.9
    alpha: float = 100.0
    n_ahead: int = 2
    r0: int = 3
    cg_tol: float = 1e-8
    cg_max_iter: int = 20000
    outer_points: int = 7
    near_depth: int = 3
    rhs_points: int = 7
    out_dir: str = "out"
    workers: int = 1
    seed: int = 0  # reserved; no randomness in the pipelines yet

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")
        if self.pipeline not in PIPELINES:
            raise ValueError(f"pipeline must be one of {PIPELINES}")
        if self.geometry == "off" and not self.off_path:
            raise ValueError("geometry=off requires off_path")
        if self.level < 0 or self.refine_rounds < 0:
            raise ValueError("level and refine_rounds must be nonnegative")
        if self.b_min < 1:
            raise ValueError("b_min must be a positive integer")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if min(self.eps_aca, self.eps_baca, self.cg_tol) <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.alpha < 0.0 or self.refine_band < 0.0:
            raise ValueError("alpha and refine_band must be nonnegative")
        if min(self.n_ahead, self.r0, self.cg_max_iter, self.workers) < 1:
            raise ValueError("n_ahead, r0, cg_max_iter, workers must be >= 1")
        if min(self.outer_points, self.rhs_points) < 1 or self.near_depth < 0:
            raise ValueError("quadrature settings out of range")
        self.point()
        self.axes()

    def point(self):
        return _parse_triple(self.p, "p")

    def axes(self):
        return _parse_triple(self.semiaxes, "semiaxes")

    @classmethod
    def from_text(cls, text):
        """Parse `key=value` lines; '#' starts a comment, blanks ignored."""
        values = {}
        names = {f.name: f.type for f in fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in names:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ValueError(f"line {lineno}: duplicate key {key!r}")
            values[key] = _coerce(key, names[key], value)
        return cls(**values)

    @classmethod
    def from_file(cls, path):
        return cls.from_text(Path(path).read_text())

    def to_text(self):
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name}={_format_value(value)}")
        return "\n".join(lines) + "\n"


def _parse_triple(text, name):
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise ValueError(f"{name} must have three components, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ValueError(f"{name} must be three numbers, got {text!r}") from None


def _coerce(key, ftype, value):
    if ftype is int or ftype == "int":
        try:
            return int(value)
        except ValueError:
            raise ValueError(f"{key} must be an integer, got {value!r}") from None
    if ftype is float or ftype == "float":
        try:
            return float(value)
        except ValueError:
            raise ValueError(f"{key} must be a number, got {value!r}") from None
    return str(value)


def _format_value(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def build_mesh(config):
    """Geometry per the config; ellipsoids may over-refine a |z| band."""
    if config.geometry == "icosphere":
        return generate_icosphere(config.level)
    if config.geometry == "off":
        return load_off(config.off_path)
    mesh = map_to_ellipsoid(generate_icosphere(config.level), config.axes())
    if config.refine_rounds > 0:
        band = config.refine_band
        mesh = refine_region(mesh, lambda c: abs(c[2]) < band,
                             rounds=config.refine_rounds)
    return mesh


def run(config):
    """Execute one pipeline; writes the artifact set, returns the row."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    mesh = build_mesh(config)
    save_off(mesh, out / "mesh.off")
    op = LaplaceSLP(mesh, outer_points=config.outer_points,
                    near_depth=config.near_depth)
    oracle = CountingOracle(op)
    prob = DirichletProblem(mesh, config.point())
    b = assemble_rhs(prob, op, inner_points=config.rhs_points)
    tree = build_cluster_tree(mesh, config.b_min)
    partition = build_partition(tree, config.beta)
    n = partition.n

    trace = None
    hmatrix = None
    if config.pipeline == "dense":
        matrix = assemble_dense(op)
        assembly_seconds = time.perf_counter() - t0
        t1 = time.perf_counter()
        outcome = cg_solve(lambda v: matrix @ v, b, abs_tol=config.cg_tol,
                           max_iter=config.cg_max_iter)
        solve_seconds = time.perf_counter() - t1
        x = outcome.x
        row = {
            "residual": outcome.residual_norm,
            "storage_mb": 8.0 * n * n / 2 ** 20,
            "compression_pct": 100.0,
            "avg_rank_base": None,
            "avg_rank_ahead": None,
            "entries_computed": n * n,
            "cg_iterations": outcome.iterations,
            "outer_iterations": 0,
        }
    elif config.pipeline == "aca":
        hmatrix = HMatrixState(partition, oracle, n_ahead=config.n_ahead,
                               tol=config.eps_aca, beta=config.beta,
                               workers=config.workers)
        assembly_seconds = time.perf_counter() - t0
        t1 = time.perf_counter()
        outcome = cg_solve(lambda v: hmatrix.matvec(v, "Ahat"), b,
                           abs_tol=config.cg_tol, max_iter=config.cg_max_iter)
        solve_seconds = time.perf_counter() - t1
        x = outcome.x
        stats = hmatrix.storage_stats()
        row = {
            "residual": outcome.residual_norm,
            "storage_mb": stats["bytes"] / 2 ** 20,
            "compression_pct": stats["compression_pct"],
            "avg_rank_base": stats["avg_rank_base"],
            "avg_rank_ahead": stats["avg_rank_ahead"],
            "entries_computed": stats["entries_computed"],
            "cg_iterations": outcome.iterations,
            "outer_iterations": 0,
        }
    else:
        params = BacaParams(tol=config.eps_baca, theta=config.theta,
                            alpha=config.alpha, n_ahead=config.n_ahead,
                            r0=config.r0, beta=config.beta,
                            cg_max_iter=config.cg_max_iter)
        assembly_seconds = time.perf_counter() - t0
        t1 = time.perf_counter()
        x, hmatrix, trace = baca_solve(oracle, b, partition, params,
                                       workers=config.workers)
        solve_seconds = time.perf_counter() - t1
        stats = hmatrix.storage_stats()
        last = trace.rows[-1]
        row = {
            "residual": last["delta"],
            "storage_mb": stats["bytes"] / 2 ** 20,
            "compression_pct": stats["compression_pct"],
            "avg_rank_base": stats["avg_rank_base"],
            "avg_rank_ahead": stats["avg_rank_ahead"],
            "entries_computed": stats["entries_computed"],
            "cg_iterations": sum(r["cg_iterations"] for r in trace.rows),
            "outer_iterations": len(trace.rows),
        }

    row["N"] = n
    row["e_h"] = relative_l2_error(x, prob)
    row["wall_assembly_seconds"] = assembly_seconds
    row["wall_solve_seconds"] = solve_seconds
    row["wall_seconds"] = assembly_seconds + solve_seconds

    _write_results(out / "results.csv", row)
    if trace is not None:
        trace.to_csv(out / "trace.csv")
    else:
        _write_single_trace(out / "trace.csv", row)
    render_partition_svg(hmatrix if hmatrix is not None else partition,
                         out / "blocks.svg")
    return row


def _write_results(path, row):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RESULT_COLUMNS)
        writer.writerow([_csv_cell(row[name]) for name in RESULT_COLUMNS])


def _write_single_trace(path, row):
    """One-line trace for the non-adaptive pipelines, same schema."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(BacaTrace.COLUMNS)
        line = {name: "" for name in BacaTrace.COLUMNS}
        line.update(k=0, delta=_csv_cell(row["residual"]),
                    cg_iterations=row["cg_iterations"],
                    entries_computed=row["entries_computed"],
                    storage_bytes=int(row["storage_mb"] * 2 ** 20),
                    wall_seconds=_csv_cell(row["wall_seconds"]))
        writer.writerow([line[name] for name in BacaTrace.COLUMNS])


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def read_results(path):
    """The single data row of a results.csv, numbers parsed."""
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    if len(rows) != 1:
        raise ValueError(f"{path}: expected exactly one data row")
    out = {}
    for key, text in rows[0].items():
        if text == "" or text is None:
            out[key] = None
        elif key in ("N", "entries_computed", "cg_iterations", "outer_iterations"):
            out[key] = int(text)
        else:
            out[key] = float(text)
    return out


def compare(path_a, path_b):
    """Headline ratios a/b of two runs on the same problem size."""
    a = read_results(path_a)
    b = read_results(path_b)
    if a["N"] != b["N"]:
        raise ValueError(f"mismatched runs: N={a['N']} vs N={b['N']}")
    return {
        "N": a["N"],
        "time_ratio": a["wall_seconds"] / b["wall_seconds"],
        "storage_ratio": a["storage_mb"] / b["storage_mb"],
        "entries_ratio": a["entries_computed"] / b["entries_computed"],
        "cg_iterations_ratio": a["cg_iterations"] / b["cg_iterations"],
    }


def _leaf_order(tree):
    pos = np.empty(tree.n, dtype=np.int64)
    counter = 0

    def walk(node):
        nonlocal counter
        if node.is_leaf:
            pos[node.indices] = np.arange(counter, counter + node.size)
            counter += node.size
        else:
            for child in node.children:
                walk(child)

    walk(tree.root)
    return pos


def render_partition_svg(source, path):
    """Write the block picture: red = stored entry-wise, green = low rank.

    `source` is an HMatrixState (admissible blocks labeled with their
    stored rank; densely completed ones drawn red like the non-admissible
    leaves) or a bare BlockPartition (no approximation yet: every block is
    entry-wise, so all red). Indices are laid out in cluster-tree leaf
    order, which makes each block one rectangle and tiles the square.
    """
    if isinstance(source, BlockPartition):
        partition, hmatrix = source, None
    else:
        partition, hmatrix = source.partition, source
    n = partition.n
    if n > RENDER_GUARD:
        raise ValueError(f"render guarded to N <= {RENDER_GUARD}")
    if partition.tree is None:
        raise ValueError("partition carries no cluster tree for the layout")
    pos = _leaf_order(partition.tree)
    adm_ids = {id(blk): bid
               for bid, blk in enumerate(partition.admissible_blocks)}
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" '
             f'viewBox="0 0 {n} {n}" shape-rendering="crispEdges">']
    for blk in partition.blocks:
        y = int(pos[blk.rows].min())
        x = int(pos[blk.cols].min())
        h, w = blk.shape
        label = None
        if blk.admissible and hmatrix is not None:
            bid = adm_ids[id(blk)]
            if hmatrix.adm_dense[bid] is None:
                label = hmatrix.adm_states[bid].rank
        color = "#2e8b57" if label is not None else "#c0392b"
        parts.append(f'<rect x="{x}" y="{y}" width="{w}" height="{h}" '
                     f'fill="{color}" stroke="#ffffff" stroke-width="0.2"/>')
        if label is not None:
            size = max(2, min(w, h) // 2)
            parts.append(f'<text x="{x + w / 2:g}" y="{y + h / 2:g}" '
                         f'font-size="{size}" text-anchor="middle" '
                         f'dominant-baseline="central" '
                         f'fill="#ffffff">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
    return path
