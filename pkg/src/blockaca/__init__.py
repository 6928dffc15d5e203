"""Hierarchical cross approximation of boundary-integral operators.

Builds hierarchical block approximations of the Laplace single-layer
Galerkin matrix on closed triangle meshes, either block-by-block to a
fixed accuracy or adaptively driven by a solve-estimate-mark-refine loop
that only invests rank where the current residual estimator asks for it.
"""

__version__ = "0.1.0"

from .mesh import TriMesh, generate_icosphere, load_off, map_to_ellipsoid, refine_region, save_off
from .clustering import build_cluster_tree, build_partition, is_admissible, partition_stats
from .bem_kernel import DirichletProblem, LaplaceSLP, assemble_dense, assemble_rhs, relative_l2_error
from .aca import AcaBlockState, DenseOracle, aca_advance, apply_partial, low_rank_eval
from .hmatrix import HMatrixState
from .solver import CgOutcome, cg_solve
from .baca import BacaParams, BacaTrace, baca_solve, diagnostics, mark_doerfler
from .experiments import RunConfig, compare, render_partition_svg, run

__all__ = [
    "TriMesh", "generate_icosphere", "map_to_ellipsoid", "refine_region", "load_off", "save_off",
    "build_cluster_tree", "is_admissible", "build_partition", "partition_stats",
    "LaplaceSLP", "DirichletProblem", "assemble_rhs", "assemble_dense", "relative_l2_error",
    "AcaBlockState", "DenseOracle", "aca_advance", "low_rank_eval", "apply_partial",
    "HMatrixState",
    "cg_solve", "CgOutcome",
    "mark_doerfler", "baca_solve", "diagnostics", "BacaParams", "BacaTrace",
    "RunConfig", "run", "compare", "render_partition_svg",
    "__version__",
]
