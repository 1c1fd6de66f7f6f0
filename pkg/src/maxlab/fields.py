"""Scalar fields sampled on uniform cell-centered grids.

A field covers the axis-aligned box [origin, origin + shape * spacing]
with cubical cells of side `spacing`; samples live at cell centers,
origin + (index + 1/2) * spacing.  Working with centers keeps sample
points off the natural jump sets of indicator data (body boundaries at
round coordinates), which matters when comparing against closed forms.

Norms and level-set measures use the cell-counting quadrature
h^d * sum(...), the exact value for piecewise constant fields.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .bodies import Body
from .errors import FieldGeometryError

__all__ = [
    "ScalarField",
    "field_from_function",
    "indicator_field",
    "tent_field",
    "two_bump_field",
    "lp_norm",
    "superlevel_measure",
    "discrete_laplacian",
    "DominationReport",
    "dominates",
    "check_domination",
    "save_field",
    "load_field",
    "slice_csv",
]

_FORMAT_TAG = "scalar-field-v1"


@dataclass(eq=False)
class ScalarField:
    origin: np.ndarray
    spacing: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.origin = np.atleast_1d(np.asarray(self.origin, dtype=float))
        if self.origin.shape != (self.values.ndim,):
            raise FieldGeometryError(
                f"origin has shape {self.origin.shape} but values have "
                f"{self.values.ndim} axes")
        if any(n < 2 for n in self.values.shape):
            raise FieldGeometryError(
                f"grid needs at least 2 cells per axis, got {self.values.shape}")
        if not self.spacing > 0:
            raise FieldGeometryError("spacing must be positive")
        if not np.all(np.isfinite(self.values)):
            raise FieldGeometryError("field values must all be finite")
        self.spacing = float(self.spacing)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def centers(self, axis: int) -> np.ndarray:
        n = self.values.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.spacing

    def center_grids(self) -> list[np.ndarray]:
        """Per-axis center coordinates broadcastable to the value shape."""
        return list(np.meshgrid(*(self.centers(a) for a in range(self.dim)),
                                indexing="ij", sparse=True))

    def points(self) -> np.ndarray:
        """Dense (shape..., dim) array of all cell-center coordinates."""
        grids = np.meshgrid(*(self.centers(a) for a in range(self.dim)),
                            indexing="ij")
        return np.stack(grids, axis=-1)

    def same_grid(self, other: "ScalarField") -> bool:
        return (self.shape == other.shape
                and np.allclose(self.origin, other.origin)
                and np.isclose(self.spacing, other.spacing))

    def copy(self) -> "ScalarField":
        return ScalarField(self.origin.copy(), self.spacing,
                           self.values.copy())


def field_from_function(fn, origin, spacing: float, shape) -> ScalarField:
    """Sample fn(points) at cell centers; fn maps (..., d) to (...)."""
    field = ScalarField(np.asarray(origin, dtype=float), spacing,
                        np.zeros(tuple(shape)))
    field.values = np.asarray(fn(field.points()), dtype=float)
    if field.values.shape != tuple(shape):
        raise FieldGeometryError(
            "sampled function did not return one value per cell")
    return field


# ---------------------------------------------------------------------------
# preset fields
# ---------------------------------------------------------------------------

def indicator_field(body: Body, origin, spacing: float, shape,
                    lam: float = 1.0) -> ScalarField:
    """1 inside the dilate lam * body, 0 outside, sampled at centers."""
    return field_from_function(
        lambda pts: (body.gauge(pts) <= lam).astype(float),
        origin, spacing, shape)


def tent_field(body: Body, origin, spacing: float, shape,
               lam: float = 1.0) -> ScalarField:
    """The cone max(0, 1 - gauge(x)/lam): height 1 at the center."""
    return field_from_function(
        lambda pts: np.maximum(0.0, 1.0 - body.gauge(pts) / lam),
        origin, spacing, shape)


def two_bump_field(body: Body, origin, spacing: float, shape,
                   centers, lam: float = 1.0) -> ScalarField:
    """Sum of two tents translated to the given pair of centers."""
    c = [np.asarray(p, dtype=float) for p in centers]
    if len(c) != 2:
        raise FieldGeometryError("two_bump_field needs exactly two centers")

    def fn(pts):
        out = np.zeros(pts.shape[:-1])
        for ck in c:
            out += np.maximum(0.0, 1.0 - body.gauge(pts - ck) / lam)
        return out

    return field_from_function(fn, origin, spacing, shape)


# ---------------------------------------------------------------------------
# norms, level sets, stencils
# ---------------------------------------------------------------------------

def lp_norm(field: ScalarField, p: float) -> float:
    """Discrete L^p norm (h^d sum |f|^p)^(1/p) for 1 < p < infinity."""
    p = float(p)
    if not np.isfinite(p) or p <= 1.0:
        raise ValueError("p must be a finite real greater than 1")
    total = float(np.sum(np.abs(field.values) ** p)) * field.cell_volume()
    return total ** (1.0 / p)


def superlevel_measure(field: ScalarField, threshold) -> np.ndarray | float:
    """Lebesgue measure of {f >= t}: cell volume times the cell count."""
    t = np.asarray(threshold, dtype=float)
    if np.any(t <= 0):
        raise ValueError("superlevel threshold must be positive")
    flat = np.sort(field.values, axis=None)
    counts = flat.size - np.searchsorted(flat, t, side="left")
    measure = counts * field.cell_volume()
    return float(measure) if np.isscalar(threshold) else measure


def discrete_laplacian(field: ScalarField) -> tuple[ScalarField, np.ndarray]:
    """Second-difference Laplacian and the mask of cells where it is valid.

    The stencil needs both neighbors along every axis, so the mask is the
    interior with a one-cell margin stripped; boundary cells hold zero.
    """
    v = field.values
    h2 = field.spacing ** 2
    lap = np.zeros_like(v)
    mask = np.ones(v.shape, dtype=bool)
    core = tuple(slice(1, -1) for _ in range(v.ndim))
    for axis in range(v.ndim):
        lo = [slice(1, -1)] * v.ndim
        hi = [slice(1, -1)] * v.ndim
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        lap[core] += v[tuple(hi)] + v[tuple(lo)] - 2.0 * v[core]
        edge = [slice(None)] * v.ndim
        for s in (slice(0, 1), slice(-1, None)):
            edge[axis] = s
            mask[tuple(edge)] = False
    lap[core] /= h2
    return ScalarField(field.origin.copy(), field.spacing, lap), mask


# ---------------------------------------------------------------------------
# domination check
# ---------------------------------------------------------------------------

@dataclass
class DominationReport:
    ok: bool
    factor: float
    n_cells: int
    worst_margin: float
    worst_ratio: float
    worst_point: tuple[float, ...] | None
    field_value: float | None
    reference_value: float | None

    def summary(self) -> str:
        if self.n_cells == 0:
            return "domination check: empty region"
        status = "holds" if self.ok else "FAILS"
        return (f"domination {status} on {self.n_cells} cells: "
                f"min(f - {self.factor:g}*ref) = {self.worst_margin:.6g} "
                f"at {self.worst_point}")


def check_domination(field: ScalarField, reference, region=None,
                     factor: float = 1.0) -> DominationReport:
    """Does field >= factor * reference hold on the region?

    `reference` is a callable on points of shape (..., d) or an array on
    the same grid; `region` is a callable on points returning a boolean
    mask, a boolean array, or None for the whole grid.  The report keeps
    the worst cell so failures are directly inspectable.
    """
    pts = field.points()
    ref = reference(pts) if callable(reference) else np.asarray(reference)
    if ref.shape != field.shape:
        raise FieldGeometryError("reference values do not match the grid")
    if region is None:
        mask = np.ones(field.shape, dtype=bool)
    elif callable(region):
        mask = np.asarray(region(pts), dtype=bool)
    else:
        mask = np.asarray(region, dtype=bool)
    if mask.shape != field.shape:
        raise FieldGeometryError("region mask does not match the grid")

    n = int(np.count_nonzero(mask))
    if n == 0:
        return DominationReport(True, factor, 0, np.inf, np.inf,
                                None, None, None)
    margin = field.values - factor * ref
    margin_masked = np.where(mask, margin, np.inf)
    flat_idx = int(np.argmin(margin_masked))
    idx = np.unravel_index(flat_idx, field.shape)
    worst_margin = float(margin[idx])
    positive = mask & (ref > 0)
    if np.any(positive):
        ratios = np.where(positive, field.values / np.where(ref > 0, ref, 1.0),
                          np.inf)
        worst_ratio = float(np.min(ratios))
    else:
        worst_ratio = np.inf
    return DominationReport(
        ok=bool(worst_margin >= 0.0),
        factor=factor,
        n_cells=n,
        worst_margin=worst_margin,
        worst_ratio=worst_ratio,
        worst_point=tuple(float(x) for x in pts[idx]),
        field_value=float(field.values[idx]),
        reference_value=float(ref[idx]),
    )


def dominates(field: ScalarField, other: ScalarField,
              tol: float = 0.0) -> DominationReport:
    """Does field >= other - tol hold cell by cell?

    Both fields must live on the same grid.  The report's ``ok`` flag is
    the verdict; on failure the worst cell (most negative margin) is
    recorded.  The margin reported is field - other, so ``ok`` is
    ``worst_margin >= -tol``.
    """
    if not field.same_grid(other):
        raise FieldGeometryError(
            "domination needs matching grids (origin, spacing, shape)")
    report = check_domination(field, other.values)
    report.ok = bool(report.worst_margin >= -float(tol))
    return report


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _header_path(path) -> str:
    return str(path) + ".json"


def save_field(field: ScalarField, path) -> None:
    """Raw little-endian float64 cells at `path`, JSON header beside it.

    The header lives at path + ".json" so the binary payload stays a
    plain memory dump that numpy can map directly.
    """
    header = {
        "format": _FORMAT_TAG,
        "origin": [float(x) for x in field.origin],
        "spacing": field.spacing,
        "shape": list(field.shape),
        "dtype": "<f8",
        "order": "C",
    }
    with open(_header_path(path), "w") as fh:
        json.dump(header, fh, indent=1)
        fh.write("\n")
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_field(path) -> ScalarField:
    try:
        with open(_header_path(path)) as fh:
            header = json.load(fh)
    except FileNotFoundError as exc:
        raise FieldGeometryError(
            f"missing geometry header {_header_path(path)}") from exc
    if header.get("format") != _FORMAT_TAG:
        raise FieldGeometryError(f"{path} is not a saved scalar field")
    shape = tuple(header["shape"])
    count = int(np.prod(shape))
    with open(path, "rb") as fh:
        raw = fh.read(count * 8)
    values = np.frombuffer(raw, dtype="<f8", count=count).reshape(shape)
    return ScalarField(np.array(header["origin"]), float(header["spacing"]),
                       values.copy())


def slice_csv(field: ScalarField, path, axes=(0,),
              fixed: tuple[int, ...] | None = None) -> None:
    """Write a 1-D or 2-D slice as CSV rows (coordinates..., value).

    `axes` names the one or two axes that vary along the slice; `fixed`
    picks the cell index on every remaining axis, defaulting to the
    middle cell of each.
    """
    if isinstance(axes, int):
        axes = (axes,)
    axes = tuple(int(a) for a in axes)
    d = field.dim
    if len(axes) not in (1, 2) or len(set(axes)) != len(axes) \
            or any(a < 0 or a >= d for a in axes):
        raise FieldGeometryError(
            f"axes must name 1 or 2 distinct axes below {d}, got {axes}")
    if fixed is None:
        fixed = tuple(field.shape[a] // 2 for a in range(d) if a not in axes)
    fixed = tuple(fixed)
    if len(fixed) != d - len(axes):
        raise FieldGeometryError(
            f"fixed must give {d - len(axes)} indices, got {len(fixed)}")
    indexer: list = []
    it = iter(fixed)
    for a in range(d):
        indexer.append(slice(None) if a in axes else next(it))
    block = field.values[tuple(indexer)]
    if axes == tuple(sorted(axes)):
        ordered = block
    else:
        ordered = block.T
    coords = [field.centers(a) for a in axes]
    if hasattr(path, "write"):
        _write_slice_rows(path, axes, coords, ordered)
    else:
        with open(path, "w", newline="") as fh:
            _write_slice_rows(fh, axes, coords, ordered)


def _write_slice_rows(fh, axes, coords, ordered) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([f"x{a}" for a in axes] + ["value"])
    if len(axes) == 1:
        for x, v in zip(coords[0], ordered):
            writer.writerow([repr(float(x)), repr(float(v))])
    else:
        for i, x in enumerate(coords[0]):
            for j, y in enumerate(coords[1]):
                writer.writerow([repr(float(x)), repr(float(y)),
                                 repr(float(ordered[i, j]))])
