"""Geometric cluster trees and admissible block partitions.

Index i stands for panel i of the mesh; the support of a cluster is the
union of its panels. A block (t, s) is admissible when
min(diam X_t, diam X_s) < beta * dist(X_t, X_s). The test runs in two
stages: the cheap bounding-box version first — sufficient, since boxes
enclose the supports — then exact support geometry: the diameter of a
panel union is attained at vertices, so it equals the max pairwise
vertex distance, and the distance is the min pairwise vertex distance.
The exact stage matters on closed surfaces: boxes of patches on opposite
sides of a sphere overlap, and a cap's box diagonal is ~sqrt(2) times
its true diameter, so the box test alone admits (almost) nothing.
"""

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "ClusterNode",
    "ClusterTree",
    "Block",
    "BlockPartition",
    "build_cluster_tree",
    "is_admissible",
    "support_distance",
    "build_partition",
    "partition_stats",
]


class ClusterNode:
    """A node of the cluster tree: sorted index set, support box, children."""

    __slots__ = ("indices", "vertex_ids", "box_lo", "box_hi", "level", "children",
                 "_diameter")

    def __init__(self, indices, vertex_ids, box_lo, box_hi, level):
        self.indices = indices
        self.vertex_ids = vertex_ids
        self.box_lo = box_lo
        self.box_hi = box_hi
        self.level = level
        self.children = ()
        self._diameter = None

    @property
    def is_leaf(self):
        return not self.children

    @property
    def size(self):
        return len(self.indices)

    @property
    def box_diameter(self):
        return float(np.linalg.norm(self.box_hi - self.box_lo))


class ClusterTree:
    """Binary geometric bisection tree over the panel index set."""

    def __init__(self, root, b_min, points):
        self.root = root
        self.b_min = b_min
        self.points = points  # mesh vertex coordinates, for support distances

    @property
    def n(self):
        return self.root.size

    @property
    def depth(self):
        """Number of levels (a lone root counts as 1)."""
        def walk(node):
            return 1 + (max(walk(c) for c in node.children) if node.children else 0)
        return walk(self.root)

    def leaves(self):
        out = []
        def walk(node):
            if node.is_leaf:
                out.append(node)
            else:
                for c in node.children:
                    walk(c)
        walk(self.root)
        return out


def build_cluster_tree(mesh, b_min):
    """Bisect at the centroid median along the longest support-box axis.

    Children sizes differ by at most one; coordinate ties are broken by
    index order, so the tree is a deterministic function of the mesh.
    """
    if b_min < 1:
        raise ValueError("b_min must be a positive integer")
    corners = mesh.corners()
    panel_lo = corners.min(axis=1)
    panel_hi = corners.max(axis=1)
    centroids = corners.mean(axis=1)
    n = len(corners)
    if n < 1:
        raise ValueError("mesh has no panels")

    def build(indices, level):
        node = ClusterNode(
            indices,
            np.unique(mesh.triangles[indices]),
            panel_lo[indices].min(axis=0),
            panel_hi[indices].max(axis=0),
            level,
        )
        if len(indices) > b_min:
            axis = int(np.argmax(node.box_hi - node.box_lo))
            order = np.argsort(centroids[indices, axis], kind="stable")
            mid = (len(indices) + 1) // 2
            left = np.sort(indices[order[:mid]])
            right = np.sort(indices[order[mid:]])
            node.children = (build(left, level + 1), build(right, level + 1))
        return node

    return ClusterTree(build(np.arange(n, dtype=np.int64), 0), b_min, mesh.vertices)


def _box_distance(lo_a, hi_a, lo_b, hi_b):
    gap = np.maximum(0.0, np.maximum(lo_b - hi_a, lo_a - hi_b))
    return float(np.linalg.norm(gap))


def is_admissible(box_t, box_s, beta):
    """min(diam, diam) < beta * dist on axis-aligned boxes (lo, hi) pairs."""
    lo_t, hi_t = box_t
    lo_s, hi_s = box_s
    diam_t = np.linalg.norm(np.asarray(hi_t) - np.asarray(lo_t))
    diam_s = np.linalg.norm(np.asarray(hi_s) - np.asarray(lo_s))
    dist = _box_distance(np.asarray(lo_t), np.asarray(hi_t), np.asarray(lo_s), np.asarray(hi_s))
    return bool(min(diam_t, diam_s) < beta * dist)


def support_distance(tree, t, s):
    """Minimum distance between the support vertex sets of two clusters."""
    if np.intersect1d(t.vertex_ids, s.vertex_ids, assume_unique=True).size:
        return 0.0
    pt = tree.points[t.vertex_ids]
    ps = tree.points[s.vertex_ids]
    return float(cdist(pt, ps).min())


def support_diameter(tree, node):
    """Exact diameter of the cluster support (max pairwise vertex distance);
    cached on the node."""
    if node._diameter is None:
        pts = tree.points[node.vertex_ids]
        node._diameter = float(cdist(pts, pts).max())
    return node._diameter


class Block:
    """One leaf of the block recursion: a row cluster x column cluster pair."""

    __slots__ = ("row_cluster", "col_cluster", "admissible", "level")

    def __init__(self, row_cluster, col_cluster, admissible, level):
        self.row_cluster = row_cluster
        self.col_cluster = col_cluster
        self.admissible = admissible
        self.level = level

    @property
    def rows(self):
        return self.row_cluster.indices

    @property
    def cols(self):
        return self.col_cluster.indices

    @property
    def shape(self):
        return (self.row_cluster.size, self.col_cluster.size)


class BlockPartition:
    """Disjoint cover of I x I by admissible and non-admissible blocks."""

    def __init__(self, blocks, beta, n, tree=None):
        self.blocks = blocks
        self.beta = beta
        self.n = n
        self.tree = tree  # cluster tree, kept for index-order layouts
        self.depth = 1 + max(b.level for b in blocks)
        self.sparsity_constant = self._sparsity()

    def _sparsity(self):
        row_counts = {}
        col_counts = {}
        for b in self.blocks:
            row_counts[id(b.row_cluster)] = row_counts.get(id(b.row_cluster), 0) + 1
            col_counts[id(b.col_cluster)] = col_counts.get(id(b.col_cluster), 0) + 1
        return max(max(row_counts.values()), max(col_counts.values()))

    @property
    def admissible_blocks(self):
        return [b for b in self.blocks if b.admissible]

    @property
    def dense_blocks(self):
        return [b for b in self.blocks if not b.admissible]


def build_partition(tree, beta):
    """Descend row and column trees concurrently until blocks are admissible
    or both clusters are leaves; a lone leaf keeps pairing with the other
    side's children."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    blocks = []

    def admissible(t, s):
        if is_admissible((t.box_lo, t.box_hi), (s.box_lo, s.box_hi), beta):
            return True
        diam = min(support_diameter(tree, t), support_diameter(tree, s))
        return diam < beta * support_distance(tree, t, s)

    def descend(t, s, level):
        if admissible(t, s):
            blocks.append(Block(t, s, True, level))
            return
        if t.is_leaf and s.is_leaf:
            blocks.append(Block(t, s, False, level))
            return
        t_kids = t.children if not t.is_leaf else (t,)
        s_kids = s.children if not s.is_leaf else (s,)
        for tc in t_kids:
            for sc in s_kids:
                descend(tc, sc, level + 1)

    descend(tree.root, tree.root, 0)
    return BlockPartition(blocks, beta, tree.n, tree)


def partition_stats(partition):
    """Exact block counts plus the depth and sparsity constants."""
    n_adm = sum(1 for b in partition.blocks if b.admissible)
    return {
        "depth": partition.depth,
        "sparsity_constant": partition.sparsity_constant,
        "n_admissible": n_adm,
        "n_dense": len(partition.blocks) - n_adm,
    }
