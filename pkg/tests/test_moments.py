import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from maxlab.bodies import (AxisBox, Ball, CrossPolytope, VPolytope,
                           random_symmetric_polytope)
from maxlab.errors import (GeometryError, IsotropyError,
                           SingularMatrixError)
from maxlab.maxop import richardson_limit
from maxlab.moments import (certify, green_coeffs, green_coeffs_exact,
                            isotropize, isotropy_error, laplacian_defect,
                            moment_tensor, moment_tensor_exact,
                            normalizing_matrix, obstruction,
                            quasi_uniform_rotations, rotation_scan,
                            second_moment_matrix)
from maxlab.symtensor import multiplicity, sorted_indices

CUBE = AxisBox([1, 1, 1])
CUBE_Q = -0.04669985318342866     # -7 * 2^(4/5) * 3^(2/5) / 405
CROSS_Q = 0.05528018428321519     # 15^(2/5) * 2^(3/5) / 81


# ---------------------------------------------------------------------------
# moment tensors
# ---------------------------------------------------------------------------

def test_cube_second_moments_exact():
    t = moment_tensor_exact(CUBE, 2)
    assert t.get((0, 0)) == Fraction(8, 3)
    assert t.get((1, 1)) == Fraction(8, 3)
    assert t.get((0, 1)) == 0


def test_box_moment_formula():
    # integral of x^a y^b over [-hx,hx]*[-hy,hy] separates per axis
    t = moment_tensor_exact(AxisBox([Fraction(1, 2), 2]), 4)
    want = (Fraction(2) * Fraction(1, 2) ** 5 / 5) * (Fraction(2) * 2)
    assert t.get((0, 0, 0, 0)) == want
    mixed = (Fraction(2) * Fraction(1, 2) ** 3 / 3) * (Fraction(2) * 8 / 3)
    assert t.get((0, 0, 1, 1)) == mixed


def test_cube_sixth_moment():
    t = moment_tensor_exact(CUBE, 6)
    assert t.get((0,) * 6) == Fraction(8, 7)  # (2/7) * 2 * 2
    assert t.get((0, 0, 0, 0, 1, 1)) == Fraction(8, 5) * Fraction(1, 3)


def test_cross_polytope_moments():
    # 2^d a^(k+d) prod(alpha!) / (k+d)!
    t = moment_tensor_exact(CrossPolytope(3, 1), 2)
    assert t.get((0, 0)) == Fraction(8 * 2, math.factorial(5))
    t4 = moment_tensor_exact(CrossPolytope(3, 1), 4)
    assert t4.get((0, 0, 0, 0)) == Fraction(8 * 24, math.factorial(7))
    assert t4.get((0, 0, 1, 1)) == Fraction(8 * 4, math.factorial(7))


def test_ball_moments():
    t = moment_tensor_exact(Ball(3, 1), 2)
    assert t.get((0, 0)) == sp.Rational(4, 15) * sp.pi
    f = moment_tensor(Ball(3, 1), 2)
    assert f.get((0, 0)) == pytest.approx(4 * math.pi / 15, rel=1e-14)
    # odd moments vanish
    assert f.get((0, 1)) == 0.0
    t4 = moment_tensor(Ball(3, 2), 4)
    # integral of x1^4 over B(0,r): |B| r^4 * 3/((d+2)(d+4)) with d=3
    want = (4 * math.pi / 3) * 2 ** 3 * 16 * 3.0 / (5 * 7)
    assert t4.get((0, 0, 0, 0)) == pytest.approx(want, rel=1e-12)


def test_vpolytope_cube_matches_axisbox():
    verts = [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
             for sz in (-1, 1)]
    tv = moment_tensor_exact(VPolytope(verts), 4)
    tb = moment_tensor_exact(CUBE, 4)
    for idx in sorted_indices(3, 4):
        assert tv.get(idx) == tb.get(idx)


def test_moment_order_validation():
    for bad in (0, 1, 3, 5, 8):
        with pytest.raises(ValueError):
            moment_tensor(CUBE, bad)
        with pytest.raises(ValueError):
            moment_tensor_exact(CUBE, bad)


def test_pushforward_law_matches_exact_fan():
    # an exact vertex-polytope image is an independent route to the
    # moments of A K; it must agree with the tensor pushforward
    verts = [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
             for sz in (-1, 1)]
    mat = np.array([[1.0, 0.25, 0.0],
                    [0.0, 1.5, -0.5],
                    [0.25, 0.0, 1.0]])
    mapped = VPolytope(verts).linear_map(mat)
    assert isinstance(mapped, VPolytope)
    for order in (2, 4):
        direct = moment_tensor(mapped, order)
        pushed = moment_tensor(CUBE, order).pushforward(
            mat, abs(np.linalg.det(mat)))
        for idx in sorted_indices(3, order):
            assert direct.get(idx) == pytest.approx(pushed.get(idx),
                                                    rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------------------
# isotropic normalization
# ---------------------------------------------------------------------------

def test_isotropize_cube_scale():
    result = isotropize(CUBE)
    assert isinstance(result.body, AxisBox)
    s = (3.0 / 8.0) ** 0.2
    assert result.body.half_widths[0] == pytest.approx(s, rel=1e-13)
    assert result.error_after < 1e-12
    m2 = second_moment_matrix(result.body)
    assert np.allclose(m2, np.eye(3), atol=1e-12)


def test_isotropize_random_polytopes():
    rng = np.random.default_rng(11)
    for dim in (2, 3):
        for _ in range(5):
            body = random_symmetric_polytope(dim, 8, rng)
            result = isotropize(body)
            t = moment_tensor(result.body, 2)
            m = np.zeros((dim, dim))
            for i in range(dim):
                for j in range(dim):
                    m[i, j] = t.get(tuple(sorted((i, j))))
            assert np.max(np.abs(m - np.eye(dim))) < 1e-8


def test_isotropy_error_and_normalizing_matrix():
    assert isotropy_error(isotropize(Ball(3, 1)).body) < 1e-12
    assert isotropy_error(CUBE) == pytest.approx(8 / 3 - 1, rel=1e-12)
    with pytest.raises(SingularMatrixError):
        normalizing_matrix(AxisBox([1, 1e-9]))


# ---------------------------------------------------------------------------
# harmonic derivative coefficients
# ---------------------------------------------------------------------------

def test_green_coeffs_frozen_values():
    g = green_coeffs_exact(3, (3, 0, 0), 4)
    assert g.get((0, 0, 0, 0)) == Fraction(8, 81)
    assert g.get((1, 1, 1, 1)) == Fraction(1, 27)
    assert g.get((0, 0, 1, 1)) == Fraction(-4, 81)
    assert g.get((1, 1, 2, 2)) == Fraction(1, 81)
    # odd in the off-axis coordinates
    assert g.get((0, 0, 0, 1)) == 0
    assert g.get((0, 1, 2, 2)) == 0


def _central_fourth(fn, point, idx, h):
    def rec(x, remaining):
        if not remaining:
            return fn(x)
        e = np.zeros(len(x))
        e[remaining[0]] = h
        return (rec(x + e, remaining[1:])
                - rec(x - e, remaining[1:])) / (2.0 * h)

    return rec(np.asarray(point, dtype=float), list(idx))


@pytest.mark.parametrize("dim,point", [
    (3, (3.0, 0.0, 0.0)),
    (3, (1.5, -2.0, 0.5)),
    (4, (2.0, 1.0, -1.0, 0.5)),
])
def test_green_coeffs_match_finite_differences(dim, point):
    def seed(x):
        return float(np.linalg.norm(x) ** (2 - dim))

    g = green_coeffs(dim, point, 4)
    steps = [0.08, 0.04, 0.02]
    for idx in sorted_indices(dim, 4):
        fds = [_central_fourth(seed, point, idx, h) for h in steps]
        fd = richardson_limit(steps, fds)
        got = g.get(idx)
        assert got == pytest.approx(fd, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("dim", [3, 4])
@pytest.mark.parametrize("order", [4, 6])
def test_trace_contractions_vanish(dim, order):
    rng = np.random.default_rng(dim * order)
    for _ in range(3):
        point = rng.normal(size=dim)
        point /= np.linalg.norm(point) / 2.5
        assert laplacian_defect(dim, point, order) < 1e-12


def test_green_coeffs_validation():
    with pytest.raises(GeometryError):
        green_coeffs(3, (0.0, 0.0, 0.0), 4)
    with pytest.raises(ValueError):
        green_coeffs(3, (3.0, 0.0, 0.0), 5)
    with pytest.raises(ValueError):
        green_coeffs(3, (3.0, 0.0, 0.0), 8)
    with pytest.raises(GeometryError):
        green_coeffs(2, (3.0, 0.0), 4)


# ---------------------------------------------------------------------------
# defect certificates
# ---------------------------------------------------------------------------

def test_obstruction_cube_and_cross():
    iso_cube = isotropize(CUBE).body
    assert obstruction(iso_cube, 4, np.array([3.0, 0.0, 0.0])) == \
        pytest.approx(CUBE_Q, rel=1e-12)
    iso_cross = isotropize(CrossPolytope(3, 1)).body
    assert obstruction(iso_cross, 4, np.array([3.0, 0.0, 0.0])) == \
        pytest.approx(CROSS_Q, rel=1e-12)


def test_obstruction_ball_vanishes():
    iso_ball = isotropize(Ball(3, 1)).body
    for order in (4, 6):
        assert abs(obstruction(iso_ball, order,
                               np.array([3.0, 0.0, 0.0]))) < 1e-9


def test_obstruction_requires_isotropy_and_dim():
    with pytest.raises(IsotropyError):
        obstruction(CUBE, 4, np.array([3.0, 0.0, 0.0]))
    with pytest.raises(GeometryError):
        obstruction(AxisBox([1, 1]).linear_map(np.eye(2)), 4,
                    np.array([3.0, 0.0]))


def test_certify_cube_exact():
    report = certify(CUBE)
    assert report["arithmetic"] == "exact"
    assert report["is_obstructed"] is True
    assert report["Q"] == pytest.approx(CUBE_Q, rel=1e-12)
    q = sp.sympify(report["Q_exact"])
    want = sp.Rational(-7, 405) * 2 ** sp.Rational(4, 5) \
        * 3 ** sp.Rational(2, 5)
    assert sp.simplify(q - want) == 0


def test_certify_cross_exact_nonzero():
    report = certify(CrossPolytope(3, 1))
    assert report["arithmetic"] == "exact"
    assert report["is_obstructed"] is True
    assert report["Q"] == pytest.approx(CROSS_Q, rel=1e-12)


def test_certify_ball_null():
    for order in (4, 6):
        report = certify(Ball(3, 2), order=order)
        assert report["arithmetic"] == "exact"
        assert report["Q"] == 0.0
        assert report["is_obstructed"] is False


def test_certify_float_path():
    rot = quasi_uniform_rotations(1, dim=3, seed=9)[0]
    body = CUBE.linear_map(rot)
    report = certify(body)
    assert report["arithmetic"] == "float"
    assert report["is_obstructed"] is True
    # certifying the rotated cube at the default point equals evaluating
    # the isotropic cube at the back-rotated point
    want = obstruction(isotropize(CUBE).body, 4,
                       rot.T @ np.array([3.0, 0.0, 0.0]))
    assert report["Q"] == pytest.approx(want, rel=1e-6)


def test_certify_rejects_low_dim():
    with pytest.raises(GeometryError):
        certify(AxisBox([1, 1]))


# ---------------------------------------------------------------------------
# rotation scans
# ---------------------------------------------------------------------------

def test_quasi_uniform_rotations_orthogonal():
    mats = quasi_uniform_rotations(12, dim=3, seed=1)
    assert mats.shape == (12, 3, 3)
    for mat in mats:
        assert np.allclose(mat @ mat.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(mat) == pytest.approx(1.0, abs=1e-12)
    again = quasi_uniform_rotations(12, dim=3, seed=1)
    assert np.array_equal(mats, again)


def test_rotation_identity():
    # evaluating on the rotated body equals evaluating the original body
    # at the back-rotated point
    iso_cube = isotropize(CUBE).body
    point = np.array([2.0, 1.0, -1.5])
    for rot in quasi_uniform_rotations(4, dim=3, seed=3):
        lhs = obstruction(iso_cube.linear_map(rot), 4, point)
        rhs = obstruction(iso_cube, 4, rot.T @ point)
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_rotation_scan_validates_orthogonality():
    iso_cube = isotropize(CUBE).body
    with pytest.raises(GeometryError):
        rotation_scan(iso_cube, 4, [np.eye(3) * 1.001])


def test_rotation_average_trend():
    # spherical averaging of the defect tends to zero as the rotation
    # set refines (harmonic mean-value behavior); factor-8 refinements
    # keep the quasi-random quadrature wobble below the decay
    iso_cube = isotropize(CUBE).body
    avgs = []
    for n in (8, 64, 512):
        mats = quasi_uniform_rotations(n, dim=3, seed=5)
        report = rotation_scan(iso_cube, 4, mats)
        avgs.append(abs(report["average"]))
    assert avgs[1] < avgs[0]
    assert avgs[2] < avgs[1]
