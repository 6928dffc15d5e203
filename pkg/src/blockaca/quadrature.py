"""Gauss rules on triangles and closed-form panel potentials.

Rules are stored in barycentric coordinates with weights normalized to sum
to one; physical weights are obtained by multiplying with the panel area.
The closed-form routines evaluate the Newton potential of a unit density
over a flat triangle and the signed solid angle it subtends.
"""

import numpy as np

__all__ = [
    "rule_by_degree",
    "rule_by_points",
    "collapsed_rule",
    "physical_points",
    "subdivide_triangles",
    "triangle_newton_potential",
    "solid_angle",
]


def _dot(a, b):
    return np.sum(a * b, axis=-1)


# centroid rule, exact for degree 1
_DEG1 = (np.array([[1.0, 1.0, 1.0]]) / 3.0, np.array([1.0]))

# three-point rule, exact for degree 2
_DEG2 = (
    np.array([
        [2 / 3, 1 / 6, 1 / 6],
        [1 / 6, 2 / 3, 1 / 6],
        [1 / 6, 1 / 6, 2 / 3],
    ]),
    np.full(3, 1 / 3),
)

# classic seven-point rule, exact for degree 5
_A1 = (6.0 + np.sqrt(15.0)) / 21.0
_A2 = (6.0 - np.sqrt(15.0)) / 21.0
_W1 = (155.0 + np.sqrt(15.0)) / 1200.0
_W2 = (155.0 - np.sqrt(15.0)) / 1200.0
_DEG5 = (
    np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [1 - 2 * _A1, _A1, _A1],
        [_A1, 1 - 2 * _A1, _A1],
        [_A1, _A1, 1 - 2 * _A1],
        [1 - 2 * _A2, _A2, _A2],
        [_A2, 1 - 2 * _A2, _A2],
        [_A2, _A2, 1 - 2 * _A2],
    ]),
    np.array([9 / 40, _W1, _W1, _W1, _W2, _W2, _W2]),
)


def collapsed_rule(n):
    """Tensor Gauss-Legendre rule collapsed onto the triangle.

    n x n points, exact for total degree 2n - 2. Weights sum to one.
    """
    if n < 1:
        raise ValueError("collapsed rule needs n >= 1")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    uu, vv = np.meshgrid(u, u, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    lam2 = uu
    lam3 = vv * (1.0 - uu)
    lam1 = 1.0 - lam2 - lam3
    bary = np.stack([lam1, lam2, lam3], axis=-1).reshape(-1, 3)
    wts = (2.0 * wu * wv * (1.0 - uu)).reshape(-1)
    return bary, wts


def rule_by_degree(degree):
    """Smallest stored rule exact for the requested polynomial degree."""
    if degree <= 1:
        return _DEG1
    if degree <= 2:
        return _DEG2
    if degree <= 5:
        return _DEG5
    return collapsed_rule((degree + 3) // 2)


def rule_by_points(points):
    """Rule with the requested point count (1, 3, 7, or n*n collapsed)."""
    if points == 1:
        return _DEG1
    if points == 3:
        return _DEG2
    if points == 7:
        return _DEG5
    n = int(np.ceil(np.sqrt(points)))
    return collapsed_rule(n)


def physical_points(tri, bary):
    """Map barycentric rule points onto triangles.

    tri: (..., 3, 3) vertex array, bary: (Q, 3). Returns (..., Q, 3).
    """
    return np.einsum("qk,...kd->...qd", bary, tri)


def subdivide_triangles(tri, depth):
    """Uniform 1->4 midpoint subdivision, repeated `depth` times.

    tri: (..., 3, 3). Returns (..., 4**depth, 3, 3) flat sub-triangles.
    No projection is applied; this serves quadrature on a fixed panel.
    """
    tri = np.asarray(tri, dtype=float)
    lead = tri.shape[:-2]
    out = tri.reshape(lead + (1, 3, 3))
    for _ in range(depth):
        v0, v1, v2 = out[..., 0, :], out[..., 1, :], out[..., 2, :]
        m01 = 0.5 * (v0 + v1)
        m12 = 0.5 * (v1 + v2)
        m20 = 0.5 * (v2 + v0)
        children = np.stack([
            np.stack([v0, m01, m20], axis=-2),
            np.stack([m01, v1, m12], axis=-2),
            np.stack([m20, m12, v2], axis=-2),
            np.stack([m01, m12, m20], axis=-2),
        ], axis=-3)
        out = children.reshape(lead + (-1, 3, 3))
    return out


def solid_angle(tri, x):
    """Signed solid angle subtended by a triangle at x.

    tri: (..., 3, 3), x: (..., 3), broadcast over leading axes. Negative
    when x lies on the side the triangle normal points into.
    """
    tri = np.asarray(tri, dtype=float)
    x = np.asarray(x, dtype=float)
    r = tri - x[..., None, :]
    r0, r1, r2 = r[..., 0, :], r[..., 1, :], r[..., 2, :]
    n0 = np.linalg.norm(r0, axis=-1)
    n1 = np.linalg.norm(r1, axis=-1)
    n2 = np.linalg.norm(r2, axis=-1)
    num = _dot(r0, np.cross(r1, r2))
    den = n0 * n1 * n2 + _dot(r0, r1) * n2 + _dot(r1, r2) * n0 + _dot(r2, r0) * n1
    return 2.0 * np.arctan2(num, den)


def triangle_newton_potential(tri, x):
    """Integral of 1 / |x - y| over a flat triangle, in closed form.

    tri: (..., 3, 3) vertices, x: (..., 3) evaluation points; the leading
    axes broadcast. The edge terms use the cancellation-free form of the
    line-potential logarithm, so the value stays finite and accurate for
    x anywhere, including on the panel itself.
    """
    tri = np.asarray(tri, dtype=float)
    x = np.asarray(x, dtype=float)
    v0, v1, v2 = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    nvec = np.cross(v1 - v0, v2 - v0)
    two_area = np.linalg.norm(nvec, axis=-1)
    nhat = nvec / two_area[..., None]
    h = _dot(x - v0, nhat)
    rho = x - h[..., None] * nhat

    shape = np.broadcast_shapes(tri.shape[:-2], x.shape[:-1])
    acc = np.zeros(shape)
    for a, b in ((v0, v1), (v1, v2), (v2, v0)):
        e = b - a
        elen = np.linalg.norm(e, axis=-1)
        shat = e / elen[..., None]
        mhat = np.cross(shat, nhat)  # in-plane outward edge normal
        t0 = _dot(a - rho, mhat)
        lm = _dot(a - rho, shat)
        lp = _dot(b - rho, shat)
        rm = np.linalg.norm(x - a, axis=-1)
        rp = np.linalg.norm(x - b, axis=-1)
        # (rp + lp)(rp - lp) = t0^2 + h^2 at both endpoints; pick the
        # quotient free of cancellation.
        with np.errstate(divide="ignore", invalid="ignore"):
            logterm = np.where(
                lp + lm > 0,
                np.log((rp + lp) / (rm + lm)),
                np.log((rm - lm) / (rp - lp)),
            )
            dsq = t0 * t0 + h * h
            scale = elen * elen + rm * rm + rp * rp
            term = np.where(dsq > 1e-30 * scale, t0 * logterm, 0.0)
        acc = acc + term
    return acc + h * solid_angle(tri, x)
