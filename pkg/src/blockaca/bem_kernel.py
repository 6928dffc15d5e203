"""Galerkin boundary elements for the interior Laplace Dirichlet problem.

Piecewise-constant elements on a closed triangle mesh. The single-layer
matrix entry a_ij integrates the kernel 1/(4 pi |x - y|) over the panel
pair (i, j): the inner integral is the closed-form potential of a constant
density on a flat triangle, the outer one a fixed Gauss rule, so no case
is singular. The right-hand side carries (1/2 I + K) g with K the double
layer; the near field of K is handled by recursive panel subdivision.
"""

import numpy as np
from scipy.spatial import cKDTree

from . import quadrature
from .mesh import panel_geometry

__all__ = [
    "LaplaceSLP",
    "DirichletProblem",
    "assemble_dense",
    "assemble_rhs",
    "relative_l2_error",
]

FOUR_PI = 4.0 * np.pi

DENSE_GUARD = 4096
ENTRY_CHUNK = 200_000


class LaplaceSLP:
    """Entry oracle for the single-layer Galerkin matrix.

    The panel with the smaller index always supplies the outer Gauss rule
    and the other one the analytic inner potential, so entries(i, j) and
    entries(j, i) are the same floating-point computation — the matrix is
    exactly symmetric as stored.
    """

    def __init__(self, mesh, outer_points=7, near_depth=3):
        self.mesh = mesh
        self.geometry = panel_geometry(mesh)
        self.corners = mesh.corners()
        self.outer_bary, self.outer_weights = quadrature.rule_by_points(outer_points)
        self.outer_nodes = quadrature.physical_points(self.corners, self.outer_bary)
        self.near_depth = near_depth

    @property
    def n(self):
        return len(self.corners)

    def entries(self, rows, cols):
        """Paired entries a[rows[k], cols[k]] as a vector."""
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        cols = np.atleast_1d(np.asarray(cols, dtype=np.int64))
        if rows.shape != cols.shape:
            raise ValueError("rows and cols must pair up")
        outer = np.minimum(rows, cols)
        inner = np.maximum(rows, cols)
        out = np.empty(len(outer))
        for lo in range(0, len(outer), ENTRY_CHUNK):
            sl = slice(lo, lo + ENTRY_CHUNK)
            x = self.outer_nodes[outer[sl]]                # (k, Q, 3)
            tri = self.corners[inner[sl]][:, None, :, :]   # (k, 1, 3, 3)
            pot = quadrature.triangle_newton_potential(tri, x)
            out[sl] = self.geometry.areas[outer[sl]] * (pot @ self.outer_weights) / FOUR_PI
        return out

    def entry(self, i, j):
        return float(self.entries([i], [j])[0])

    def row(self, i, cols=None):
        if cols is None:
            cols = np.arange(self.n)
        cols = np.asarray(cols, dtype=np.int64)
        return self.entries(np.full(len(cols), i, dtype=np.int64), cols)

    def col(self, j, rows=None):
        if rows is None:
            rows = np.arange(self.n)
        rows = np.asarray(rows, dtype=np.int64)
        return self.entries(rows, np.full(len(rows), j, dtype=np.int64))


def assemble_dense(op):
    """All entries as a full symmetric matrix; reference path for tests."""
    n = op.n
    if n > DENSE_GUARD:
        raise ValueError(f"dense assembly limited to N <= {DENSE_GUARD}")
    a = np.empty((n, n))
    ii, jj = np.triu_indices(n)
    vals = op.entries(ii, jj)
    a[ii, jj] = vals
    a[jj, ii] = vals
    return a


class DirichletProblem:
    """Dirichlet data g = trace of u(x) = 1/(4 pi |x - p|), p outside.

    The constructor verifies p lies strictly outside via the winding
    number of the closed surface around p.
    """

    def __init__(self, mesh, point):
        self.mesh = mesh
        self.point = np.asarray(point, dtype=float)
        if self.point.shape != (3,):
            raise ValueError("point must be a 3-vector")
        winding = float(np.sum(quadrature.solid_angle(mesh.corners(), self.point))) / FOUR_PI
        if abs(winding) > 0.25:
            raise ValueError(
                f"singularity point {tuple(self.point)} must lie outside the surface "
                f"(winding number {winding:.3f})"
            )

    def dirichlet_trace(self, points):
        """g(x) = 1/(4 pi |x - p|)."""
        r = np.linalg.norm(np.asarray(points, dtype=float) - self.point, axis=-1)
        return 1.0 / (FOUR_PI * r)

    def exact_neumann(self, points, normals):
        """Normal derivative of u: -n.(x - p) / (4 pi |x - p|^3)."""
        d = np.asarray(points, dtype=float) - self.point
        r = np.linalg.norm(d, axis=-1)
        return -np.sum(np.asarray(normals, dtype=float) * d, axis=-1) / (FOUR_PI * r**3)

    def neumann_panel_means(self, degree=6):
        """Panel averages of the exact Neumann trace (Gauss rule per panel)."""
        geo = panel_geometry(self.mesh)
        bary, w = quadrature.rule_by_degree(degree)
        nodes = quadrature.physical_points(self.mesh.corners(), bary)
        vals = self.exact_neumann(nodes, geo.normals[:, None, :])
        return vals @ w


def _double_layer_sum(x, x_panel, nodes, strength, normals, exclude_same_panel):
    """Sum_j sum_q strength[j,q] * n_j.(x - y_jq) / (4 pi |x - y_jq|^3).

    x: (k, 3) evaluation points, x_panel: (k,) panel each x lives on,
    nodes: (m, q, 3) quadrature nodes of the panels summed over,
    strength: (m, q) area * weight * g values, normals: (m, 3).
    exclude_same_panel: either None or (m,) panel ids to match against
    x_panel — the own-panel term is exactly zero (coplanar) and is
    removed rather than evaluated, which would divide 0 by 0.
    """
    d = x[:, None, None, :] - nodes[None, :, :, :]
    r2 = np.einsum("kjqd,kjqd->kjq", d, d)
    num = np.einsum("jd,kjqd->kjq", normals, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = num / (FOUR_PI * r2 * np.sqrt(r2))
    if exclude_same_panel is not None:
        kern[x_panel[:, None] == exclude_same_panel[None, :], :] = 0.0
    return np.einsum("kjq,jq->k", kern, strength)


def assemble_rhs(prob, op, inner_points=7):
    """Galerkin right-hand side b_i = integral over panel i of (g/2 + Kg).

    The double-layer field Kg is evaluated at the outer Gauss nodes by a
    full panel-wise sweep with `inner_points` per panel; panels whose
    centroid lies within twice their diameter of the evaluation point are
    re-done with 4**near_depth flat sub-panels. A panel's own contribution
    is exactly zero (the kernel vanishes on its plane) and is skipped.
    """
    mesh = prob.mesh
    geo = op.geometry
    n = op.n
    corners = op.corners
    x_all = op.outer_nodes.reshape(-1, 3)
    x_panel = np.repeat(np.arange(n, dtype=np.int64), len(op.outer_weights))

    bary, w = quadrature.rule_by_points(inner_points)
    nodes = quadrature.physical_points(corners, bary)          # (n, q, 3)
    strength = geo.areas[:, None] * w[None, :] * prob.dirichlet_trace(nodes)

    kfield = np.empty(len(x_all))
    chunk = max(1, int(2e6 / (n * len(w))))  # ~50 MB of transient pair data
    for lo in range(0, len(x_all), chunk):
        sl = slice(lo, lo + chunk)
        kfield[sl] = _double_layer_sum(
            x_all[sl], x_panel[sl], nodes, strength, geo.normals,
            exclude_same_panel=np.arange(n, dtype=np.int64),
        )

    # near-field corrections: subtract the coarse term, add the refined one
    sub = quadrature.subdivide_triangles(corners, op.near_depth)   # (n, 4^d, 3, 3)
    sub_nodes = quadrature.physical_points(sub, bary).reshape(n, -1, 3)
    sub_strength = (
        (geo.areas[:, None] / sub.shape[1]) * np.tile(w, sub.shape[1])[None, :]
        * prob.dirichlet_trace(sub_nodes)
    )

    xtree = cKDTree(x_all)
    hits = xtree.query_ball_point(geo.centroids, 2.0 * geo.diameters)
    px = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits])
    pj = np.repeat(np.arange(n, dtype=np.int64), [len(h) for h in hits])
    keep = x_panel[px] != pj
    px, pj = px[keep], pj[keep]
    order = np.lexsort((pj, px))
    px, pj = px[order], pj[order]

    pair_chunk = max(1, int(2e6 / sub_nodes.shape[1]))
    for lo in range(0, len(px), pair_chunk):
        sl = slice(lo, lo + pair_chunk)
        xs, js = px[sl], pj[sl]
        refined = _per_pair_double_layer(x_all[xs], sub_nodes[js], sub_strength[js], geo.normals[js])
        coarse = _per_pair_double_layer(x_all[xs], nodes[js], strength[js], geo.normals[js])
        np.add.at(kfield, xs, refined - coarse)

    g_outer = prob.dirichlet_trace(x_all)
    integrand = (0.5 * g_outer + kfield).reshape(n, -1)
    return geo.areas * (integrand @ op.outer_weights)


def _per_pair_double_layer(x, nodes, strength, normals):
    """Like _double_layer_sum but with one dedicated panel per point.

    x: (k, 3), nodes: (k, q, 3), strength: (k, q), normals: (k, 3).
    """
    d = x[:, None, :] - nodes
    r2 = np.einsum("kqd,kqd->kq", d, d)
    num = np.einsum("kd,kqd->kq", normals, d)
    kern = num / (FOUR_PI * r2 * np.sqrt(r2))
    return np.einsum("kq,kq->k", kern, strength)


def relative_l2_error(psi_h, prob, degree=6):
    """Relative L2 distance of a panel-wise constant vector to the exact
    Neumann trace."""
    psi_h = np.asarray(psi_h, dtype=float)
    geo = panel_geometry(prob.mesh)
    if len(psi_h) != len(geo.areas):
        raise ValueError("coefficient vector length must match panel count")
    bary, w = quadrature.rule_by_degree(degree)
    nodes = quadrature.physical_points(prob.mesh.corners(), bary)
    exact = prob.exact_neumann(nodes, geo.normals[:, None, :])
    num = geo.areas @ (((psi_h[:, None] - exact) ** 2) @ w)
    den = geo.areas @ ((exact**2) @ w)
    return float(np.sqrt(num / den))
