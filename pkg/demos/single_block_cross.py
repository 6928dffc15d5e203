"""Cross-approximate one admissible kernel block, step by step.

Each accepted cross adds a rank-one term built from one row and one
column of the block. The estimated Frobenius norm of the skipped part
falls geometrically, and the true error follows it.
"""

import numpy as np

from blockaca.aca import AcaBlockState, aca_advance, low_rank_eval
from blockaca.bem_kernel import LaplaceSLP
from blockaca.clustering import build_cluster_tree, build_partition
from blockaca.mesh import generate_icosphere

mesh = generate_icosphere(3)
op = LaplaceSLP(mesh)
partition = build_partition(build_cluster_tree(mesh, 15), 0.8)

block = max(partition.admissible_blocks, key=lambda b: min(b.shape))
rows, cols = block.rows, block.cols
print(f"largest admissible block: {block.shape[0]} x {block.shape[1]}")

dense = op.entries(np.repeat(rows, len(cols)),
                   np.tile(cols, len(rows))).reshape(block.shape)
norm = np.linalg.norm(dense)

state = AcaBlockState(rows, cols)
print(f"{'rank':>4} {'cross norm':>12} {'true rel error':>15}")
while state.status == "active":
    aca_advance(state, op, steps=1, tol=1e-6, beta=0.8, densify_ratio=1.0)
    cross = np.linalg.norm(state.us[-1]) * np.linalg.norm(state.vs[-1])
    err = np.linalg.norm(dense - low_rank_eval(state)) / norm
    print(f"{state.rank:4d} {cross:12.3e} {err:15.3e}")

entries_stored = state.rank * sum(block.shape)
print(f"status={state.status}: rank {state.rank} stores {entries_stored} "
      f"numbers instead of {block.shape[0] * block.shape[1]}")
