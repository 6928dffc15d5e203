"""Command-line front end for the benchmark runner.

Subcommands: `mesh` (write the geometry as OFF), `run` (execute a
pipeline and drop its artifact set), `compare` (headline ratios of two
results.csv files), `render` (block picture only). Every RunConfig field
is mirrored as a flag; `--config FILE` loads a key=value file first and
flags override it. Exit codes: 0 success, 2 invalid configuration or
arguments, 1 runtime failure.
"""

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .baca import BacaParams, baca_solve
from .bem_kernel import DirichletProblem, LaplaceSLP, assemble_rhs
from .clustering import build_cluster_tree, build_partition
from .experiments import (RESULT_COLUMNS, RunConfig, build_mesh, compare,
                          render_partition_svg, run)
from .hmatrix import CountingOracle, HMatrixState
from .mesh import save_off

__all__ = ["main"]


def _config_from_args(args):
    if args.config:
        config = RunConfig.from_file(args.config)
    else:
        config = RunConfig()
    values = {f.name: getattr(config, f.name) for f in fields(RunConfig)}
    overrides = {}
    for f in fields(RunConfig):
        given = getattr(args, f.name)
        if given is not None:
            overrides[f.name] = type(values[f.name])(given)
    values.update(overrides)
    return RunConfig(**values)


def _add_config_flags(parser):
    parser.add_argument("--config", metavar="FILE",
                        help="key=value config file; flags override it")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest=f.name, default=None, metavar="V",
                            help=f"override {f.name}")


def _cmd_mesh(args):
    config = _config_from_args(args)
    mesh = build_mesh(config)
    path = Path(args.out) if args.out else Path(config.out_dir) / "mesh.off"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_off(mesh, path)
    print(f"panels={len(mesh.triangles)} vertices={len(mesh.vertices)} "
          f"path={path}")
    return 0


def _cmd_run(args):
    config = _config_from_args(args)
    row = run(config)
    for name in RESULT_COLUMNS:
        value = row[name]
        print(f"{name}={'' if value is None else value}")
    return 0


def _cmd_compare(args):
    ratios = compare(_results_path(args.a), _results_path(args.b))
    for name, value in ratios.items():
        print(f"{name}={value}")
    return 0


def _results_path(arg):
    path = Path(arg)
    return path / "results.csv" if path.is_dir() else path


def _cmd_render(args):
    """Build only as much approximation as the pipeline needs, then draw."""
    config = _config_from_args(args)
    mesh = build_mesh(config)
    op = LaplaceSLP(mesh, outer_points=config.outer_points,
                    near_depth=config.near_depth)
    partition = build_partition(build_cluster_tree(mesh, config.b_min),
                                config.beta)
    if config.pipeline == "dense":
        source = partition
    elif config.pipeline == "aca":
        source = HMatrixState(partition, CountingOracle(op),
                              n_ahead=config.n_ahead, tol=config.eps_aca,
                              beta=config.beta, workers=config.workers)
    else:
        prob = DirichletProblem(mesh, config.point())
        b = assemble_rhs(prob, op, inner_points=config.rhs_points)
        params = BacaParams(tol=config.eps_baca, theta=config.theta,
                            alpha=config.alpha, n_ahead=config.n_ahead,
                            r0=config.r0, beta=config.beta,
                            cg_max_iter=config.cg_max_iter)
        _, source, _ = baca_solve(op, b, partition, params,
                                  workers=config.workers)
    out = Path(args.out) if args.out else Path(config.out_dir) / "blocks.svg"
    out.parent.mkdir(parents=True, exist_ok=True)
    render_partition_svg(source, out)
    print(f"path={out}")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="blockaca",
        description="Hierarchical cross approximation benchmark runner.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_mesh = sub.add_parser("mesh", help="generate the geometry, write OFF")
    _add_config_flags(p_mesh)
    p_mesh.add_argument("--out", default=None, help="output OFF path")
    p_mesh.set_defaults(func=_cmd_mesh)

    p_run = sub.add_parser("run", help="run a pipeline, write artifacts")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="ratios of two results.csv")
    p_cmp.add_argument("a", help="results.csv (or run directory)")
    p_cmp.add_argument("b", help="results.csv (or run directory)")
    p_cmp.set_defaults(func=_cmd_compare)

    p_render = sub.add_parser("render", help="draw the block partition")
    _add_config_flags(p_render)
    p_render.add_argument("--out", default=None, help="output SVG path")
    p_render.set_defaults(func=_cmd_render)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # I/O and solver failures
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
