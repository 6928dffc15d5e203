"""Triangle quadrature rules, solid angles, and the panel potential."""

import math

import numpy as np
import pytest

from blockaca.mesh import generate_icosphere
from blockaca.quadrature import (
    collapsed_rule,
    physical_points,
    rule_by_degree,
    rule_by_points,
    solid_angle,
    subdivide_triangles,
    triangle_newton_potential,
)

# Reference triangle (0,0), (1,0), (0,1) embedded in the plane z = 0.
REF_TRI = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def exact_monomial_integral(a, b):
    """Integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!."""
    return (math.factorial(a) * math.factorial(b)
            / math.factorial(a + b + 2))


def quad_monomial_integral(rule, a, b):
    bary, wts = rule
    pts = physical_points(REF_TRI, bary)
    vals = pts[:, 0] ** a * pts[:, 1] ** b
    return 0.5 * float(wts @ vals)  # reference area is 1/2


def test_weights_sum_to_one():
    for rule in (rule_by_degree(1), rule_by_degree(2), rule_by_degree(5),
                 collapsed_rule(4), collapsed_rule(6)):
        assert rule[1].sum() == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(rule[0].sum(axis=1), 1.0, atol=1e-14)


@pytest.mark.parametrize("degree", [1, 2, 5, 6, 9, 10])
def test_rule_degree_exactness(degree):
    rule = rule_by_degree(degree)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = quad_monomial_integral(rule, a, b)
            assert got == pytest.approx(exact_monomial_integral(a, b),
                                        rel=1e-12, abs=1e-15)


def test_collapsed_rule_shape_and_degree():
    bary, wts = collapsed_rule(5)
    assert bary.shape == (25, 3)
    assert wts.shape == (25,)
    # n-point Gauss in each direction integrates degree 2n-2 exactly.
    for a in range(9):
        got = quad_monomial_integral((bary, wts), a, 8 - a)
        assert got == pytest.approx(exact_monomial_integral(a, 8 - a),
                                    rel=1e-12)


def test_rule_by_points_selection():
    assert rule_by_points(1)[0].shape == (1, 3)
    assert rule_by_points(3)[0].shape == (3, 3)
    assert rule_by_points(7)[0].shape == (7, 3)
    assert rule_by_points(36)[0].shape == (36, 3)
    assert rule_by_points(10)[0].shape == (16, 3)  # next square up


def test_physical_points_affine_map():
    tri = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 10.0]])
    bary = np.array([[0.2, 0.3, 0.5], [1.0, 0.0, 0.0]])
    pts = physical_points(tri, bary)
    np.testing.assert_allclose(pts[0], bary[0] @ tri, rtol=1e-15)
    np.testing.assert_allclose(pts[1], tri[0], rtol=1e-15)


def test_physical_points_batched():
    tris = np.stack([REF_TRI, REF_TRI + 1.0])
    bary = rule_by_degree(2)[0]
    pts = physical_points(tris, bary)
    assert pts.shape == (2, 3, 3)
    np.testing.assert_allclose(pts[1] - pts[0], 1.0, rtol=1e-15)


def test_subdivide_preserves_area_and_count():
    mesh = generate_icosphere(1)
    tris = mesh.corners()

    def total_area(t):
        cross = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1).sum()

    for depth in (1, 2):
        sub = subdivide_triangles(tris, depth)
        assert sub.shape == (len(tris), 4 ** depth, 3, 3)
        assert total_area(sub.reshape(-1, 3, 3)) == pytest.approx(
            total_area(tris), rel=1e-12)


def test_solid_angle_closed_surface():
    # Interior point sees the whole sphere of directions; exterior sees none.
    mesh = generate_icosphere(1)
    inside = sum(solid_angle(tri, np.array([0.1, -0.05, 0.2]))
                 for tri in mesh.corners())
    outside = sum(solid_angle(tri, np.array([3.0, 0.0, 0.0]))
                  for tri in mesh.corners())
    assert inside == pytest.approx(4.0 * math.pi, abs=1e-12)
    assert outside == pytest.approx(0.0, abs=1e-12)


def brute_force_potential(tri, x, depth=6):
    """Quadrature oracle for the panel potential, regular points only."""
    sub = subdivide_triangles(tri[None, :, :], depth).reshape(-1, 3, 3)
    bary, wts = rule_by_degree(5)
    pts = physical_points(sub, bary)
    cross = np.cross(sub[:, 1] - sub[:, 0], sub[:, 2] - sub[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    inv = 1.0 / np.linalg.norm(pts - x, axis=-1)
    return float(np.sum(areas[:, None] * wts[None, :] * inv))


def test_newton_potential_matches_quadrature_oracle():
    rng = np.random.default_rng(7)
    for _ in range(5):
        tri = rng.normal(size=(3, 3))
        x = tri.mean(axis=0) + rng.normal(size=3)
        got = triangle_newton_potential(tri, x)
        want = brute_force_potential(tri, x)
        assert got == pytest.approx(want, rel=1e-8)


def test_newton_potential_additive_under_subdivision():
    # The closed form must agree with the sum over the four children,
    # including at singular evaluation points on the panel itself.
    rng = np.random.default_rng(11)
    tri = rng.normal(size=(3, 3))
    children = subdivide_triangles(tri[None, :, :], 1).reshape(-1, 3, 3)
    for x in (tri.mean(axis=0), tri[0], 0.5 * (tri[0] + tri[1])):
        whole = triangle_newton_potential(tri, x)
        parts = sum(triangle_newton_potential(c, x) for c in children)
        assert whole > 0.0
        assert whole == pytest.approx(parts, rel=1e-12)


def test_newton_potential_far_field():
    tri = REF_TRI
    x = np.array([120.0, 35.0, 80.0])
    r = np.linalg.norm(x - tri.mean(axis=0))
    assert triangle_newton_potential(tri, x) == pytest.approx(0.5 / r,
                                                              rel=1e-4)
