"""Grid fields: norms, level sets, stencils, comparison, serialization."""

import io
import json

import numpy as np
import pytest

from maxlab.bodies import AxisBox, Ball
from maxlab.errors import FieldGeometryError
from maxlab.fields import (
    ScalarField,
    check_domination,
    discrete_laplacian,
    dominates,
    field_from_function,
    indicator_field,
    lp_norm,
    load_field,
    save_field,
    slice_csv,
    superlevel_measure,
    tent_field,
    two_bump_field,
)

SEG = AxisBox([1.0])


def line_field(fn, lo=-2.0, hi=2.0, h=1.0e-3):
    n = int(round((hi - lo) / h))
    return field_from_function(lambda p: fn(p[..., 0]), [lo], h, (n,))


# ---------------------------------------------------------------------------
# construction and geometry
# ---------------------------------------------------------------------------

def test_field_validation():
    with pytest.raises(FieldGeometryError):
        ScalarField([0.0, 0.0], 0.1, np.zeros(5))  # origin dim mismatch
    with pytest.raises(FieldGeometryError):
        ScalarField([0.0], 0.1, np.zeros(1))  # single cell
    with pytest.raises(FieldGeometryError):
        ScalarField([0.0], -0.1, np.zeros(5))
    with pytest.raises(FieldGeometryError):
        ScalarField([0.0], 0.1, np.array([1.0, np.nan, 0.0]))


def test_cell_centers():
    f = ScalarField([1.0], 0.5, np.zeros(4))
    assert np.allclose(f.centers(0), [1.25, 1.75, 2.25, 2.75])
    assert f.cell_volume() == 0.5


def test_points_shape_and_copy():
    f = ScalarField([0.0, 0.0], 0.25, np.zeros((3, 5)))
    pts = f.points()
    assert pts.shape == (3, 5, 2)
    assert np.isclose(pts[0, 0, 0], 0.125)
    g = f.copy()
    g.values[0, 0] = 7.0
    assert f.values[0, 0] == 0.0
    assert f.same_grid(g)


def test_sampler_shape_check():
    with pytest.raises(FieldGeometryError):
        field_from_function(lambda p: np.zeros(3), [0.0], 0.1, (5,))


def test_preset_fields():
    ind = indicator_field(Ball(2, 1.0), (-2, -2), 0.01, (400, 400))
    assert set(np.unique(ind.values)) <= {0.0, 1.0}
    area = float(ind.values.sum()) * ind.cell_volume()
    assert abs(area - np.pi) < 0.01

    tent = tent_field(SEG, [-2.0], 1.0e-3, (4000,))
    assert tent.values.max() == pytest.approx(1.0, abs=1.0e-3)
    assert tent.values.min() == 0.0

    bump = two_bump_field(SEG, [-4.0], 1.0e-3, (8000,),
                          centers=[[-2.0], [2.0]], lam=0.5)
    single = tent_field(AxisBox([0.5]), [-4.0], 1.0e-3, (8000,))
    # away from overlap the sum reduces to shifted copies of one tent
    assert bump.values.max() == pytest.approx(single.values.max(), abs=1e-12)
    with pytest.raises(FieldGeometryError):
        two_bump_field(SEG, [-4.0], 1.0e-3, (8000,), centers=[[0.0]])


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def test_lp_norm_unit_mass():
    f = ScalarField([0.0], 1.0e-3, np.ones(1000))
    assert lp_norm(f, 2.0) == pytest.approx(1.0, abs=1.0e-3)


def test_lp_norm_interval_indicator():
    f = indicator_field(SEG, [-2.0], 1.0e-3, (4000,))
    assert lp_norm(f, 2.0) == pytest.approx(np.sqrt(2.0), abs=1.0e-3)


def test_lp_norm_linear_ramp():
    f = line_field(lambda x: x, lo=0.0, hi=1.0)
    assert lp_norm(f, 2.0) == pytest.approx(1.0 / np.sqrt(3.0), abs=1.0e-3)


def test_lp_norm_homogeneous():
    rng = np.random.default_rng(11)
    f = ScalarField([0.0, 0.0], 0.125, rng.random((17, 23)))
    scaled = ScalarField(f.origin, f.spacing, 3.7 * f.values)
    for p in (1.5, 2.0, 4.0):
        assert lp_norm(scaled, p) == pytest.approx(3.7 * lp_norm(f, p),
                                                   rel=1.0e-12)


def test_lp_norm_rejects_bad_exponent():
    f = ScalarField([0.0], 0.1, np.ones(4))
    for p in (1.0, 0.5, -2.0, np.inf, np.nan):
        with pytest.raises(ValueError):
            lp_norm(f, p)


# ---------------------------------------------------------------------------
# superlevel measures and the layer-cake identity
# ---------------------------------------------------------------------------

def test_superlevel_indicator():
    f = indicator_field(SEG, [-2.0], 1.0e-3, (4000,))
    assert superlevel_measure(f, 0.5) == pytest.approx(2.0, abs=2.0e-3)
    assert superlevel_measure(f, 1.5) == 0.0


def test_superlevel_tent():
    f = tent_field(SEG, [-2.0], 1.0e-3, (4000,))
    assert superlevel_measure(f, 0.5) == pytest.approx(1.0, abs=2.0e-3)


def test_superlevel_monotone_and_vector():
    rng = np.random.default_rng(3)
    f = ScalarField([0.0], 0.01, rng.random(500))
    mus = np.linspace(0.05, 1.2, 40)
    meas = superlevel_measure(f, mus)
    assert meas.shape == (40,)
    assert np.all(np.diff(meas) <= 0.0)
    with pytest.raises(ValueError):
        superlevel_measure(f, 0.0)
    with pytest.raises(ValueError):
        superlevel_measure(f, -0.3)


def layer_cake(field, p):
    """p * integral of mu^(p-1) |{f >= mu}| over the sorted value set.

    Integrates the superlevel measure against d(mu^p) by trapezoid, which
    handles plateau values (indicators) exactly.
    """
    vals = np.unique(field.values)
    vals = vals[vals > 0.0]
    mus = np.concatenate([[0.0], vals])
    meas = np.empty_like(mus)
    meas[0] = superlevel_measure(field, min(vals) / 2.0)
    meas[1:] = superlevel_measure(field, vals)
    return float(np.trapezoid(meas, mus ** p))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_layer_cake_consistency(p):
    ind = indicator_field(SEG, [-2.0], 1.0e-3, (4000,))
    tent = tent_field(SEG, [-2.0], 1.0e-3, (4000,))
    for f in (ind, tent):
        assert layer_cake(f, p) == pytest.approx(lp_norm(f, p) ** p, rel=0.01)


# ---------------------------------------------------------------------------
# discrete Laplacian
# ---------------------------------------------------------------------------

def test_laplacian_constant():
    f = ScalarField([0.0, 0.0], 0.1, np.full((9, 9), 4.2))
    lap, mask = discrete_laplacian(f)
    assert np.all(lap.values[mask] == 0.0)
    assert not mask[0, 3] and not mask[3, 0] and not mask[-1, -1]
    assert mask[4, 4]


def test_laplacian_quadratic():
    f = field_from_function(lambda p: p[..., 0] ** 2, [-1.0, -1.0],
                            0.05, (40, 40))
    lap, mask = discrete_laplacian(f)
    assert np.allclose(lap.values[mask], 2.0, atol=1.0e-9)


def test_laplacian_linear_exact():
    f = field_from_function(lambda p: 3.0 * p[..., 0] - p[..., 1], [0.0, 0.0],
                            0.1, (12, 12))
    lap, mask = discrete_laplacian(f)
    assert np.max(np.abs(lap.values[mask])) < 1.0e-12


def test_laplacian_harmonic_annulus_quadratic_bias():
    # 1/|x| is harmonic away from the origin in d=3; the stencil residue
    # on a sampled annulus must shrink like spacing^2
    def run(h):
        n = int(round(1.0 / h))
        f = field_from_function(
            lambda p: 1.0 / np.linalg.norm(p, axis=-1),
            [1.0, 1.0, 1.0], h, (n, n, n))
        lap, mask = discrete_laplacian(f)
        return float(np.max(np.abs(lap.values[mask])))

    coarse, fine = run(0.05), run(0.025)
    assert coarse / fine == pytest.approx(4.0, rel=0.2)
    assert fine < 1.0 * 0.025 ** 2


# ---------------------------------------------------------------------------
# domination
# ---------------------------------------------------------------------------

def test_dominates_reflexive():
    f = indicator_field(SEG, [-2.0], 0.01, (400,))
    rep = dominates(f, f)
    assert rep.ok and rep.worst_margin == 0.0


def test_dominates_halved_indicator():
    f = indicator_field(SEG, [-2.0], 0.01, (400,))
    g = ScalarField(f.origin, f.spacing, 0.5 * f.values)
    assert dominates(f, g).ok


def test_dominates_worst_cell_report():
    f = ScalarField([0.0], 0.5, np.zeros(6))
    g = ScalarField([0.0], 0.5, np.zeros(6))
    g.values[3] = 0.25
    rep = dominates(f, g)
    assert not rep.ok
    assert rep.worst_margin == pytest.approx(-0.25)
    assert rep.worst_point == (1.75,)
    assert rep.field_value == 0.0 and rep.reference_value == 0.25
    assert dominates(f, g, tol=0.3).ok
    assert "FAILS" in rep.summary()


def test_dominates_geometry_mismatch():
    f = ScalarField([0.0], 0.5, np.zeros(6))
    g = ScalarField([0.1], 0.5, np.zeros(6))
    with pytest.raises(FieldGeometryError):
        dominates(f, g)


def test_check_domination_callable_region_and_factor():
    f = field_from_function(lambda p: 1.0 / (1.0 + np.abs(p[..., 0])),
                            [-3.0], 0.01, (600,))
    rep = check_domination(
        f,
        lambda p: 1.0 / (2.0 + 2.0 * np.abs(p[..., 0])),
        region=lambda p: np.abs(p[..., 0]) <= 2.0,
        factor=1.5)
    assert rep.ok
    assert rep.worst_ratio >= 1.5
    with pytest.raises(FieldGeometryError):
        check_domination(f, np.zeros(7))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    f = ScalarField([-1.0, 2.0], 0.125, rng.random((7, 9)))
    path = tmp_path / "field.f64"
    save_field(f, path)
    header = json.loads((tmp_path / "field.f64.json").read_text())
    assert header["format"] == "scalar-field-v1"
    assert header["shape"] == [7, 9]
    g = load_field(path)
    assert g.same_grid(f)
    np.testing.assert_array_equal(g.values, f.values)


def test_load_missing_or_foreign_header(tmp_path):
    path = tmp_path / "field.f64"
    path.write_bytes(b"\x00" * 16)
    with pytest.raises(FieldGeometryError):
        load_field(path)
    (tmp_path / "field.f64.json").write_text('{"format": "other"}')
    with pytest.raises(FieldGeometryError):
        load_field(path)


def test_slice_csv_line(tmp_path):
    f = ScalarField([0.0, 0.0], 0.5, np.arange(12.0).reshape(3, 4))
    out = tmp_path / "line.csv"
    slice_csv(f, out, axes=0, fixed=(1,))
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x0,value"
    got = [tuple(map(float, ln.split(","))) for ln in lines[1:]]
    assert got == [(0.25, 1.0), (0.75, 5.0), (1.25, 9.0)]


def test_slice_csv_plane_axis_order():
    f = ScalarField([0.0, 0.0, 0.0], 1.0, np.arange(24.0).reshape(2, 3, 4))
    buf_a, buf_b = io.StringIO(), io.StringIO()
    slice_csv(f, buf_a, axes=(0, 2), fixed=(1,))
    slice_csv(f, buf_b, axes=(2, 0), fixed=(1,))
    rows_a = buf_a.getvalue().strip().splitlines()
    rows_b = buf_b.getvalue().strip().splitlines()
    assert rows_a[0] == "x0,x2,value" and rows_b[0] == "x2,x0,value"
    assert len(rows_a) == len(rows_b) == 1 + 2 * 4
    # same cells under swapped coordinate order
    cells_a = {(r.split(",")[0], r.split(",")[1]): r.split(",")[2]
               for r in rows_a[1:]}
    cells_b = {(r.split(",")[1], r.split(",")[0]): r.split(",")[2]
               for r in rows_b[1:]}
    assert cells_a == cells_b
    # spot check one entry against the array
    x0 = repr(0.5)
    x2 = repr(2.5)
    assert cells_a[(x0, x2)] == repr(float(f.values[0, 1, 2]))


def test_slice_csv_rejects_bad_axes():
    f = ScalarField([0.0, 0.0], 1.0, np.zeros((4, 4)))
    for axes in ((0, 0), (0, 1, 1), (5,), (-1,)):
        with pytest.raises(FieldGeometryError):
            slice_csv(f, io.StringIO(), axes=axes)
    with pytest.raises(FieldGeometryError):
        slice_csv(f, io.StringIO(), axes=(0,), fixed=(1, 2))
