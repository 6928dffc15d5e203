"""Build the geometry, cluster it, and look at the block structure.

A subdivided icosahedron is split into a binary cluster tree by
coordinate bisection; pairs of clusters whose bounding boxes are well
separated become low-rank blocks, the rest stay entry-wise. The picture
lands in demo_out/partition/blocks.svg.
"""

from pathlib import Path

from blockaca.clustering import build_cluster_tree, build_partition, partition_stats
from blockaca.experiments import render_partition_svg
from blockaca.mesh import generate_icosphere, panel_geometry

out = Path("demo_out/partition")
out.mkdir(parents=True, exist_ok=True)

mesh = generate_icosphere(2)
geometry = panel_geometry(mesh)
print(f"mesh: {len(mesh.triangles)} panels, {len(mesh.vertices)} vertices, "
      f"surface area {geometry.areas.sum():.4f}")

for b_min in (15, 30, 60):
    tree = build_cluster_tree(mesh, b_min)
    partition = build_partition(tree, 0.8)
    stats = partition_stats(partition)
    adm_area = sum(t * s for t, s in
                   (blk.shape for blk in partition.admissible_blocks))
    print(f"b_min={b_min:3d}: depth={stats['depth']} "
          f"sparsity={stats['sparsity_constant']} "
          f"admissible={stats['n_admissible']} dense={stats['n_dense']} "
          f"low-rank area {100 * adm_area / partition.n ** 2:.1f}%")

tree = build_cluster_tree(mesh, 15)
partition = build_partition(tree, 0.8)
path = render_partition_svg(partition, out / "blocks.svg")
print(f"wrote {path} (all blocks red: nothing approximated yet)")
