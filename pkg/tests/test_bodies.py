import json
import math
from fractions import Fraction

import numpy as np
import pytest

from maxlab.bodies import (AxisBox, Ball, CrossPolytope, LinearImage,
                           VPolytope, body_from_dict, body_from_json,
                           body_to_json, random_symmetric_polytope,
                           unit_ball_volume)
from maxlab.errors import (DegenerateBodyError, GeometryError,
                           SingularMatrixError)

CUBE_VERTS = [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
              for sz in (-1, 1)]


def test_volumes():
    assert Ball(3, 1).volume() == pytest.approx(4 * math.pi / 3, rel=1e-14)
    assert Ball(2, 2).volume() == pytest.approx(4 * math.pi, rel=1e-14)
    assert AxisBox([1, 1, 1]).volume() == pytest.approx(8.0)
    assert AxisBox([0.5, 2]).volume() == pytest.approx(4.0)
    assert CrossPolytope(3, 1).volume() == pytest.approx(4.0 / 3.0)
    assert CrossPolytope(2, 1).volume() == pytest.approx(2.0)
    assert VPolytope(CUBE_VERTS).volume() == pytest.approx(8.0, rel=1e-12)


def test_unit_ball_volume_values():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_gauges():
    ball = Ball(2, 2.0)
    assert ball.gauge(np.array([0.0, 2.0])) == pytest.approx(1.0)
    box = AxisBox([1, 2])
    assert box.gauge(np.array([[0.5, 1.0], [1.0, 0.0]])) == \
        pytest.approx([0.5, 1.0])
    cross = CrossPolytope(2, 1.0)
    assert cross.gauge(np.array([0.5, 0.5])) == pytest.approx(1.0)
    octa = VPolytope([[1, 0], [-1, 0], [0, 1], [0, -1]])
    assert octa.gauge(np.array([1.0, 0.0])) == pytest.approx(1.0, abs=1e-12)
    assert octa.gauge(np.array([0.25, 0.25])) == pytest.approx(0.5, abs=1e-12)


def test_gauge_rejects_wrong_point_dimension():
    # without the check Ball would quietly take a 2-d norm of 3-d data
    bodies = [Ball(3, 1.0), AxisBox([1, 1, 1]), CrossPolytope(3, 1.0),
              AxisBox([1, 1, 1]).linear_map(np.eye(3) + 0.1)]
    for body in bodies:
        with pytest.raises(GeometryError):
            body.gauge(np.zeros((4, 2)))
    with pytest.raises(GeometryError):
        VPolytope([[1, 0], [-1, 0], [0, 1], [0, -1]]).gauge(np.zeros((4, 3)))
    with pytest.raises(GeometryError):
        Ball(2, 1.0).gauge(np.array(0.5))


def test_radii_and_extents():
    cross = CrossPolytope(3, 2.0)
    assert cross.inradius() == pytest.approx(2.0 / math.sqrt(3))
    assert cross.support_radius() == pytest.approx(2.0)
    assert cross.extent(1) == pytest.approx(2.0)
    box = AxisBox([1, 3])
    assert box.inradius() == pytest.approx(1.0)
    assert box.support_radius() == pytest.approx(math.sqrt(10))
    assert box.extent(1) == pytest.approx(3.0)


def test_contains():
    ball = Ball(3, 1)
    assert ball.contains(np.zeros(3))
    assert ball.contains(np.array([1.0, 0.0, 0.0]))
    assert not ball.contains(np.array([1.0 + 1e-9, 0.0, 0.0]))


def test_degenerate_bodies_rejected():
    with pytest.raises(DegenerateBodyError):
        Ball(2, 0)
    with pytest.raises(DegenerateBodyError):
        AxisBox([1, -1])
    with pytest.raises(DegenerateBodyError):
        CrossPolytope(2, Fraction(0))
    with pytest.raises(GeometryError):
        Ball(4, 1)  # dimensions above 3 unsupported
    with pytest.raises(GeometryError):
        Ball(0, 1)


def test_vpolytope_requires_central_symmetry():
    with pytest.raises(GeometryError):
        VPolytope([[1, 0], [0, 1], [-1, 0]])


def test_vpolytope_needs_dimension_two_or_three():
    with pytest.raises(GeometryError):
        VPolytope([[1], [-1]])


def test_linear_image_volume_and_gauge():
    base = AxisBox([1, 1])
    rot = [[0, -1], [1, 0]]
    img = base.linear_map(rot)
    # a rotation of a box stays a box only for axis permutations; the
    # general path must still report the right volume
    assert img.volume() == pytest.approx(4.0, rel=1e-12)
    shear = base.linear_map([[1, 1], [0, 1]])
    assert shear.volume() == pytest.approx(4.0, rel=1e-12)
    assert shear.gauge(np.array([2.0, 1.0])) == pytest.approx(1.0,
                                                              abs=1e-12)


def test_linear_map_simplifications():
    stretched = AxisBox([1, 1]).linear_map([[2, 0], [0, 3]])
    assert isinstance(stretched, AxisBox)
    assert stretched.volume() == pytest.approx(24.0)

    permuted = CrossPolytope(2, 1).linear_map([[0, 1], [-1, 0]])
    assert isinstance(permuted, CrossPolytope)

    scaled_ball = Ball(2, 1).linear_map([[0, 2], [-2, 0]])
    assert isinstance(scaled_ball, Ball)
    assert scaled_ball.radius == pytest.approx(2.0)

    moved = VPolytope([[1, 0], [-1, 0], [0, 1], [0, -1]]) \
        .linear_map([[1, 1], [0, 1]])
    assert isinstance(moved, VPolytope)
    assert moved.volume() == pytest.approx(2.0, rel=1e-12)


def test_linear_image_collapse():
    body = Ball(2, 1).linear_map([[1, 1], [0, 1]])
    twice = body.linear_map([[2, 0], [0, 2]])
    # composing linear maps must not nest wrappers
    assert not isinstance(getattr(twice, "base", None), LinearImage)
    assert twice.volume() == pytest.approx(4 * math.pi, rel=1e-12)


def test_singular_and_ill_conditioned_maps_rejected():
    with pytest.raises(SingularMatrixError):
        AxisBox([1, 1]).linear_map([[1, 1], [1, 1]])
    # near-singular shear exceeds the condition cap; a huge diagonal
    # stretch is fine because it simplifies to an exact box
    with pytest.raises(GeometryError):
        Ball(2, 1).linear_map([[1, 1], [1, 1 + 2e-9]])
    assert isinstance(AxisBox([1, 1]).linear_map([[1e9, 0], [0, 1e-9]]),
                      AxisBox)


@pytest.mark.parametrize("body", [
    Ball(3, Fraction(3, 2)),
    AxisBox([1, Fraction(1, 3), 2]),
    CrossPolytope(2, Fraction(5, 4)),
    VPolytope([[1, 0], [-1, 0], [Fraction(1, 3), 1],
               [Fraction(-1, 3), -1]]),
    AxisBox([1, 1]).linear_map([[1, 1], [0, 1]]),
])
def test_json_roundtrip(body):
    text = body_to_json(body)
    back = body_from_json(text)
    assert type(back) is type(body)
    assert back.dim == body.dim
    assert back.volume() == pytest.approx(body.volume(), rel=1e-12)
    pts = np.random.default_rng(0).normal(size=(16, body.dim))
    assert np.allclose(back.gauge(pts), body.gauge(pts), rtol=1e-12)


def test_json_tags():
    assert json.loads(body_to_json(AxisBox([1, 1])))["type"] == "box"
    assert json.loads(body_to_json(CrossPolytope(2, 1)))["type"] == "cross"
    d = json.loads(body_to_json(VPolytope([[1, 0], [-1, 0], [0, 1],
                                           [0, -1]])))
    assert d["type"] == "vpolytope"
    # vertex coordinates serialize as strings so rationals survive
    assert all(isinstance(c, str) for row in d["vertices"] for c in row)
    nested = json.loads(body_to_json(Ball(2, 1).linear_map([[1, 1],
                                                            [0, 1]])))
    assert nested["type"] == "linear_image"
    assert nested["base"]["type"] == "ball"


def test_json_rational_vertices_exact():
    body = VPolytope([[Fraction(1, 3), 0], [Fraction(-1, 3), 0],
                      [0, 1], [0, -1]])
    back = body_from_json(body_to_json(body))
    assert back.vertices_exact == body.vertices_exact


def test_body_from_dict_rejects_unknown():
    with pytest.raises((GeometryError, KeyError, ValueError)):
        body_from_dict({"type": "pentagon", "dim": 2})


def test_random_symmetric_polytope():
    rng = np.random.default_rng(42)
    body = random_symmetric_polytope(3, 10, rng)
    assert isinstance(body, VPolytope)
    verts = body.vertices
    # symmetric vertex set: for each v, -v is present
    for v in verts:
        assert np.min(np.linalg.norm(verts + v, axis=1)) < 1e-12
    assert body.volume() > 0

    again = random_symmetric_polytope(3, 10, np.random.default_rng(42))
    assert np.allclose(again.vertices, verts)
