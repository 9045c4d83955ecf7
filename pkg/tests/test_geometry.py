"""Domain classification, projection, normals, and certificate checks."""

import math

import numpy as np
import pytest

from reflectsde.errors import (DimensionMismatch, NotOnBoundary,
                               ProjectionOutOfRange)
from reflectsde.geometry import (BOUNDARY, DELTA_UNLIMITED, INTERIOR, OUTSIDE,
                                 Ball, Box, ConvexPolyhedron, Domain,
                                 DomainConstants, ExteriorOfBall, HalfSpace,
                                 default_boundary_tol)


def test_half_space_classification():
    dom = HalfSpace([1.0, 0.0], 0.0)
    assert dom.contains([0.5, 3.0]) == INTERIOR
    assert dom.contains([0.0, -2.0]) == BOUNDARY
    assert dom.contains([-0.5, 1.0]) == OUTSIDE


def test_half_space_projection_formula():
    dom = HalfSpace([1.0, 1.0], 1.0)
    # inward normal normalized to unit length, offset rescaled with it
    np.testing.assert_allclose(dom.normal, np.array([1.0, 1.0]) / math.sqrt(2.0))
    p = dom.project([-1.0, -1.0])
    # nearest point on {x + y = sqrt(2)} from (-1, -1)
    expected = np.array([-1.0, -1.0]) + (1.0 + math.sqrt(2.0)) * dom.normal
    np.testing.assert_allclose(p, expected, atol=1e-14)
    inside = np.array([3.0, 3.0])
    np.testing.assert_array_equal(dom.project(inside), inside)


def test_ball_projection_is_radial():
    dom = Ball([1.0, 2.0], 2.0)
    p = dom.project([1.0, 7.0])
    np.testing.assert_allclose(p, [1.0, 4.0], atol=1e-14)
    assert dom.contains(p) == BOUNDARY
    assert dom.distance_outside([1.0, 7.0]) == pytest.approx(3.0)
    assert dom.distance_outside([1.0, 2.5]) == 0.0


def test_box_with_infinite_bounds():
    half_line = Box([0.0], [math.inf])
    assert half_line.contains([0.0]) == BOUNDARY
    assert half_line.contains([5.0]) == INTERIOR
    assert half_line.contains([-0.1]) == OUTSIDE
    np.testing.assert_allclose(half_line.project([-2.0]), [0.0])

    strip = Box([0.0, -math.inf], [1.0, math.inf])
    np.testing.assert_allclose(strip.project([4.0, 9.0]), [1.0, 9.0])
    # inside margin is the exact boundary distance
    assert strip._signed_distance(np.array([0.25, 100.0])) == pytest.approx(0.25)


def test_box_corner_normal_averages_active_faces():
    dom = Box([0.0, 0.0], [1.0, 1.0])
    n = dom.normal_cone_vector([0.0, 0.0])
    np.testing.assert_allclose(n, np.array([1.0, 1.0]) / math.sqrt(2.0))
    n = dom.normal_cone_vector([1.0, 0.5])
    np.testing.assert_allclose(n, [-1.0, 0.0])
    with pytest.raises(NotOnBoundary):
        dom.normal_cone_vector([0.5, 0.5])


def test_convex_polyhedron_dykstra_matches_quadrant_clip():
    quadrant = ConvexPolyhedron(np.eye(2), [0.0, 0.0])
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = rng.uniform(-3.0, 3.0, 2)
        np.testing.assert_allclose(quadrant.project(x), np.maximum(x, 0.0),
                                   atol=1e-9)


def test_convex_polyhedron_projection_optimality():
    # wedge between x >= 0 and x + y >= 0 in the plane
    dom = ConvexPolyhedron([[1.0, 0.0], [1.0, 1.0]], [0.0, 0.0])
    rng = np.random.default_rng(11)
    for _ in range(25):
        x = rng.uniform(-4.0, 4.0, 2)
        p = dom.project(x)
        assert np.min(dom.normals @ p - dom.offsets) >= -1e-9
        # no feasible sample may be closer than the projection
        for _ in range(40):
            q = rng.uniform(-4.0, 4.0, 2)
            if np.min(dom.normals @ q - dom.offsets) >= 0.0:
                assert np.linalg.norm(x - p) <= np.linalg.norm(x - q) + 1e-9


def test_triangle_projection_hits_vertex():
    # triangle with vertices (0,0), (1,0), (0,1)
    dom = ConvexPolyhedron(
        [[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]],
        [0.0, 0.0, -1.0],
    )
    p = dom.project([-2.0, -2.0])
    np.testing.assert_allclose(p, [0.0, 0.0], atol=1e-9)
    p = dom.project([2.0, 2.0])
    np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-9)


def test_exterior_of_ball_projection_and_reach():
    dom = ExteriorOfBall([0.0, 0.0], 1.0)
    assert dom.contains([2.0, 0.0]) == INTERIOR
    assert dom.contains([1.0, 0.0]) == BOUNDARY
    assert dom.contains([0.3, 0.0]) == OUTSIDE
    np.testing.assert_allclose(dom.project([0.5, 0.0]), [1.0, 0.0])
    with pytest.raises(ProjectionOutOfRange):
        dom.project([0.0, 0.0])
    c = dom.constants()
    assert c.rho0 == 1.0
    assert c.beta == pytest.approx(math.sqrt(2.0))
    assert c.delta == pytest.approx(0.5)


def test_convex_constants_are_unlimited():
    for dom in (HalfSpace([1.0], 0.0), Ball([0.0], 1.0),
                Box([0.0], [1.0]), ConvexPolyhedron([[1.0]], [0.0])):
        c = dom.constants()
        assert math.isinf(c.rho0)
        assert c.beta == 1.0
        assert c.delta == DELTA_UNLIMITED


def test_domain_constants_validation():
    with pytest.raises(ValueError):
        DomainConstants(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        DomainConstants(1.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        DomainConstants(1.0, 1.0, 0.0)


def test_normal_inequality_convex_accepts_infinite_radius():
    dom = Ball([0.0, 0.0], 1.0)
    x = np.array([1.0, 0.0])
    n = dom.normal_cone_vector(x)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.0, 1.0, (200, 2))
    samples = [p for p in pts if dom.contains(p) != OUTSIDE]
    assert dom.verify_normal_inequality(x, n, math.inf, samples)


def test_normal_inequality_exterior_needs_finite_radius():
    """The frozen counterexample: across the deleted ball the linear term
    is -2 while the quadratic correction is 4/(2r), so any r > 1 fails."""
    dom = ExteriorOfBall([0.0, 0.0], 1.0)
    x = np.array([1.0, 0.0])
    n = dom.normal_cone_vector(x)
    np.testing.assert_allclose(n, [1.0, 0.0])
    far_side = [np.array([-1.0, 0.0])]
    assert dom.verify_normal_inequality(x, n, 1.0, far_side)
    assert not dom.verify_normal_inequality(x, n, 2.0, far_side)
    assert not dom.verify_normal_inequality(x, n, math.inf, far_side)


def test_projection_direction_is_normal_at_projected_point():
    rng = np.random.default_rng(19)
    dom = Ball([0.0, 0.0, 0.0], 1.5)
    for _ in range(20):
        x = rng.normal(0.0, 3.0, 3)
        if dom.contains(x) != OUTSIDE:
            continue
        p = dom.project(x)
        n = (p - x) / np.linalg.norm(p - x)
        np.testing.assert_allclose(n, dom.normal_cone_vector(p), atol=1e-9)


def test_boundary_count_vectorized():
    dom = HalfSpace([1.0], 0.0)
    pts = np.array([[0.0], [1e-12], [0.5], [-0.2]])
    assert dom.boundary_count(pts) == 2


def test_spec_round_trip_all_kinds():
    domains = [
        HalfSpace([0.0, 2.0], 1.0),
        Ball([1.0, -1.0], 0.75),
        Box([0.0, -math.inf], [2.0, math.inf]),
        ConvexPolyhedron([[1.0, 0.0], [0.0, 1.0]], [0.0, -1.0]),
        ExteriorOfBall([0.5, 0.5], 2.0),
    ]
    rng = np.random.default_rng(23)
    for dom in domains:
        clone = Domain.from_spec(dom.spec())
        assert clone.kind == dom.kind
        for _ in range(10):
            x = rng.uniform(-3.0, 3.0, dom.dimension)
            assert clone.contains(x) == dom.contains(x)
            try:
                np.testing.assert_allclose(clone.project(x), dom.project(x),
                                           atol=1e-9)
            except ProjectionOutOfRange:
                pass


def test_unknown_spec_kind_rejected():
    with pytest.raises(ValueError):
        Domain.from_spec({"kind": "pentagon"})


def test_dimension_checks():
    dom = Ball([0.0, 0.0], 1.0)
    with pytest.raises(DimensionMismatch):
        dom.contains([1.0])
    with pytest.raises(DimensionMismatch):
        dom.boundary_count(np.zeros((3, 3)))


def test_boundary_tol_scales_with_magnitude():
    assert default_boundary_tol([0.0]) == pytest.approx(1e-10)
    assert default_boundary_tol([1e6, 0.0]) == pytest.approx(1e-10 * (1.0 + 1e6))
