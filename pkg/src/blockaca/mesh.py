"""Closed triangle surface meshes.

Provides the icosphere family, affine mapping onto ellipsoids, local
red/green refinement with re-projection onto the tagged surface, panel
geometry, and ASCII OFF input/output.
"""

import numpy as np

__all__ = [
    "TriMesh",
    "PanelGeometry",
    "generate_icosphere",
    "map_to_ellipsoid",
    "refine_region",
    "panel_geometry",
    "signed_volume",
    "check_closed",
    "load_off",
    "save_off",
]

MAX_ICOSPHERE_LEVEL = 7
MAX_REFINE_ROUNDS = 6

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array([
    [-1, _GOLDEN, 0], [1, _GOLDEN, 0], [-1, -_GOLDEN, 0], [1, -_GOLDEN, 0],
    [0, -1, _GOLDEN], [0, 1, _GOLDEN], [0, -1, -_GOLDEN], [0, 1, -_GOLDEN],
    [_GOLDEN, 0, -1], [_GOLDEN, 0, 1], [-_GOLDEN, 0, -1], [-_GOLDEN, 0, 1],
], dtype=float)

_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=np.int64)


class TriMesh:
    """Oriented triangle surface mesh.

    vertices: (V, 3) float array. triangles: (T, 3) integer array; each row
    lists a triangle counter-clockwise as seen from outside, so the cross
    product of its edges points outward. `surface` optionally tags the
    analytic surface the vertices lie on, so refinement can re-project new
    points: ("sphere", radius) or ("ellipsoid", (a, b, c)).
    """

    def __init__(self, vertices, triangles, surface=None, validate=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.surface = surface
        if validate:
            self._check()

    def _check(self):
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be a (V, 3) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must be a (T, 3) array")
        if self.triangles.size:
            if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
                raise ValueError("triangle index out of range")
            corners = self.vertices[self.triangles]
            cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
            areas = 0.5 * np.linalg.norm(cross, axis=1)
            edges = corners - np.roll(corners, 1, axis=1)
            longest_sq = np.max(np.sum(edges * edges, axis=2), axis=1)
            if np.any(areas <= 1e-14 * longest_sq):
                raise ValueError("degenerate triangle in mesh")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def corners(self):
        """(T, 3, 3) array of triangle vertex coordinates."""
        return self.vertices[self.triangles]

    def __eq__(self, other):
        if not isinstance(other, TriMesh):
            return NotImplemented
        return (
            self.vertices.shape == other.vertices.shape
            and self.triangles.shape == other.triangles.shape
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and self.surface == other.surface
        )


class PanelGeometry:
    """Per-panel geometric data: areas, centroids, unit normals, edge frames.

    Edge frame arrays have shape (T, 3, ...): edge k of panel t runs from
    corner k to corner k+1; `edge_tangents` are unit tangents, `edge_normals`
    the in-plane outward edge normals, `edge_lengths` the lengths.
    """

    def __init__(self, areas, centroids, normals, edge_tangents, edge_normals, edge_lengths):
        self.areas = areas
        self.centroids = centroids
        self.normals = normals
        self.edge_tangents = edge_tangents
        self.edge_normals = edge_normals
        self.edge_lengths = edge_lengths

    @property
    def diameters(self):
        """Longest edge per panel."""
        return self.edge_lengths.max(axis=1)


def panel_geometry(mesh):
    """Compute PanelGeometry for every panel; rejects degenerate triangles."""
    corners = mesh.corners()
    cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    two_areas = np.linalg.norm(cross, axis=1)
    edges = np.roll(corners, -1, axis=1) - corners  # edge k: corner k -> k+1
    lengths = np.linalg.norm(edges, axis=2)
    if np.any(two_areas <= 1e-14 * lengths.max(axis=1) ** 2):
        raise ValueError("degenerate triangle")
    normals = cross / two_areas[:, None]
    tangents = edges / lengths[:, :, None]
    edge_normals = np.cross(tangents, normals[:, None, :])
    return PanelGeometry(
        areas=0.5 * two_areas,
        centroids=corners.mean(axis=1),
        normals=normals,
        edge_tangents=tangents,
        edge_normals=edge_normals,
        edge_lengths=lengths,
    )


def signed_volume(mesh):
    """Volume enclosed by the mesh; positive for outward orientation."""
    corners = mesh.corners()
    return float(np.sum(np.linalg.det(corners)) / 6.0)


def _edge_incidence(triangles):
    """Map undirected edge -> list of (triangle, directed as stored?)."""
    inc = {}
    for t, (a, b, c) in enumerate(triangles):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            inc.setdefault(key, []).append((t, u < v))
    return inc


def check_closed(mesh):
    """Raise ValueError unless every edge joins exactly two opposed triangles."""
    for (u, v), hits in _edge_incidence(mesh.triangles).items():
        if len(hits) != 2:
            raise ValueError(f"edge ({u}, {v}) lies on {len(hits)} triangles")
        if hits[0][1] == hits[1][1]:
            raise ValueError(f"edge ({u}, {v}) traversed twice in the same direction")


def _project(points, surface):
    if surface is None:
        return points
    kind = surface[0]
    if kind == "sphere":
        radius = float(surface[1])
        return points * (radius / np.linalg.norm(points, axis=-1))[..., None]
    if kind == "ellipsoid":
        axes = np.asarray(surface[1], dtype=float)
        unit = points / axes
        unit /= np.linalg.norm(unit, axis=-1)[..., None]
        return unit * axes
    raise ValueError(f"unknown surface tag {kind!r}")


def generate_icosphere(level, radius=1.0):
    """Icosahedron subdivided `level` times and projected onto the sphere.

    Produces 20 * 4**level triangles on 10 * 4**level + 2 vertices.
    """
    if not 0 <= level <= MAX_ICOSPHERE_LEVEL:
        raise ValueError(f"icosphere level must be in [0, {MAX_ICOSPHERE_LEVEL}]")
    if radius <= 0:
        raise ValueError("radius must be positive")
    surface = ("sphere", float(radius))
    verts = _project(_ICO_VERTS.copy(), surface)
    faces = _ICO_FACES.copy()
    for _ in range(level):
        verts, faces = _subdivide_all(verts, faces, surface)
    return TriMesh(verts, faces, surface=surface)


def _subdivide_all(verts, faces, surface):
    verts = list(verts)
    midpoint = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        idx = midpoint.get(key)
        if idx is None:
            point = 0.5 * (np.asarray(verts[a]) + np.asarray(verts[b]))
            verts.append(_project(point, surface))
            idx = len(verts) - 1
            midpoint[key] = idx
        return idx

    out = np.empty((4 * len(faces), 3), dtype=np.int64)
    for k, (a, b, c) in enumerate(faces):
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out[4 * k:4 * k + 4] = [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return np.asarray(verts), out


def map_to_ellipsoid(mesh, semiaxes):
    """Scale a unit-sphere mesh onto the ellipsoid with the given semiaxes."""
    axes = np.asarray(semiaxes, dtype=float)
    if axes.shape != (3,) or np.any(axes <= 0):
        raise ValueError("semiaxes must be three positive numbers")
    radii = np.linalg.norm(mesh.vertices, axis=1)
    if np.max(np.abs(radii - 1.0)) > 1e-9:
        raise ValueError("map_to_ellipsoid expects vertices on the unit sphere")
    return TriMesh(
        mesh.vertices * axes,
        mesh.triangles.copy(),
        surface=("ellipsoid", tuple(float(a) for a in axes)),
    )


def refine_region(mesh, predicate, rounds=1):
    """Refine every panel whose centroid satisfies the predicate.

    Per round, marked panels are 1->4 split. Neighbours with two hanging
    midpoints are promoted to full splits; neighbours with one are bisected
    through it, so the result is conforming and closed. New vertices are
    re-projected onto the tagged surface.
    """
    if not 0 <= rounds <= MAX_REFINE_ROUNDS:
        raise ValueError(f"rounds must be in [0, {MAX_REFINE_ROUNDS}]")
    for _ in range(rounds):
        mesh = _refine_once(mesh, predicate)
    return mesh


def _refine_once(mesh, predicate):
    tris = mesh.triangles
    centroids = mesh.corners().mean(axis=1)
    marked = np.fromiter((bool(predicate(c)) for c in centroids), dtype=bool, count=len(tris))
    if not marked.any():
        return mesh

    def edge_keys(t):
        a, b, c = tris[t]
        return ((min(a, b), max(a, b)), (min(b, c), max(b, c)), (min(c, a), max(c, a)))

    split = set()
    for t in np.flatnonzero(marked):
        split.update(edge_keys(t))
    # closure: promote any triangle with two split edges to a full split
    changed = True
    while changed:
        changed = False
        for t in np.flatnonzero(~marked):
            if sum(k in split for k in edge_keys(t)) >= 2:
                marked[t] = True
                split.update(edge_keys(t))
                changed = True

    verts = list(mesh.vertices)
    mid_index = {}
    for key in sorted(split):
        point = 0.5 * (mesh.vertices[key[0]] + mesh.vertices[key[1]])
        verts.append(_project(point, mesh.surface))
        mid_index[key] = len(verts) - 1

    new_tris = []
    for t, (a, b, c) in enumerate(tris):
        if marked[t]:
            ab = mid_index[(min(a, b), max(a, b))]
            bc = mid_index[(min(b, c), max(b, c))]
            ca = mid_index[(min(c, a), max(c, a))]
            new_tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        else:
            hanging = [k for k in edge_keys(t) if k in split]
            if not hanging:
                new_tris.append((a, b, c))
                continue
            # exactly one hanging midpoint: bisect through it
            key = hanging[0]
            m = mid_index[key]
            for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
                if key == (min(u, v), max(u, v)):
                    new_tris += [(u, m, w), (m, v, w)]
                    break
    out = TriMesh(np.asarray(verts), np.asarray(new_tris, dtype=np.int64), surface=mesh.surface)
    check_closed(out)
    return out


def save_off(mesh, path):
    """Write ASCII OFF with 17 significant digits; keeps the surface tag
    in a comment line that standard readers skip."""
    lines = ["OFF"]
    if mesh.surface is not None:
        kind = mesh.surface[0]
        params = mesh.surface[1]
        if kind == "sphere":
            lines.append(f"# surface sphere {params:.17g}")
        else:
            a, b, c = params
            lines.append(f"# surface ellipsoid {a:.17g} {b:.17g} {c:.17g}")
    lines.append(f"{mesh.n_vertices} {mesh.n_triangles} 0")
    for x, y, z in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g} {z:.17g}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_off(path):
    """Read an ASCII OFF triangle mesh written by save_off or compatible."""
    surface = None
    tokens = []
    with open(path) as f:
        for line in f:
            stripped = line.strip()
            if stripped.startswith("#"):
                fields = stripped[1:].split()
                if len(fields) >= 2 and fields[0] == "surface":
                    if fields[1] == "sphere" and len(fields) == 3:
                        surface = ("sphere", float(fields[2]))
                    elif fields[1] == "ellipsoid" and len(fields) == 5:
                        surface = ("ellipsoid", tuple(float(v) for v in fields[2:5]))
                continue
            if stripped:
                tokens.append(stripped)
    if not tokens or tokens[0] != "OFF":
        raise ValueError("not an OFF file: missing OFF header")
    try:
        nv, nt, _ = (int(v) for v in tokens[1].split())
    except (IndexError, ValueError) as exc:
        raise ValueError("malformed OFF counts line") from exc
    if len(tokens) != 2 + nv + nt:
        raise ValueError("OFF file has wrong number of records")
    verts = np.empty((nv, 3))
    for i in range(nv):
        fields = tokens[2 + i].split()
        if len(fields) != 3:
            raise ValueError(f"vertex line {i} must have 3 coordinates")
        verts[i] = [float(v) for v in fields]
    tris = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        fields = tokens[2 + nv + i].split()
        if len(fields) != 4 or fields[0] != "3":
            raise ValueError(f"face line {i} is not a triangle")
        tris[i] = [int(v) for v in fields[1:]]
    if nt and (tris.min() < 0 or tris.max() >= nv):
        raise ValueError("face index out of range")
    return TriMesh(verts, tris, surface=surface)
