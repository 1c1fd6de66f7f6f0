"""The discrete centered maximal transform and experiments built on it.

For a centrally symmetric convex body K the transform evaluates

    (M f)(x) = max( f(x),  max over ladder dilations t of
                    the average of f over the window x + t*K )

on a uniform cell grid, extending f by zero outside.  The dilation set
is a geometric ladder, so the discrete sup under-approximates the true
sup over all t > 0 by a bounded factor per octave; keeping it one-sided
preserves the pointwise guarantees (Mf >= f, monotonicity) exactly.

Averages are discrete correlations against cell-coverage kernels.  Axis
boxes get an exact separable kernel (per-axis interval clipping) applied
with prefix sums; every other body gets a dense kernel with supersampled
boundary cells, applied via zero-padded FFT correlation or, on small
grids, direct sliding-window correlation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .bodies import AxisBox, Ball, Body, CrossPolytope, LinearImage, VPolytope
from .config import (DEFAULT_MAX_ITERATIONS, DEFAULT_STOP_TOL, ISOTROPY_TOL,
                     KERNEL_SUPERSAMPLE, MAX_LADDER_RATIO)
from .errors import FieldGeometryError, GeometryError, IsotropyError
from .fields import ScalarField, discrete_laplacian, lp_norm, superlevel_measure
from .moments import isotropy_error, obstruction

__all__ = [
    "AveragingKernel",
    "DilationLadder",
    "build_kernel",
    "max_transform",
    "IterateResult",
    "iterate",
    "growth_ratio",
    "levelset_experiment",
    "superharmonicity_check",
    "quartic_probe",
    "richardson_limit",
]


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class AveragingKernel:
    """Normalized cell weights approximating the average over lam * body.

    Exactly one of `axis_weights` (separable exact path, axis boxes) and
    `patch` (dense path) is set.  `error_bound` bounds the kernel's own
    rasterization error relative to sup|f|; the separable path is exact,
    the dense path inherits the supersampling resolution of its boundary
    band.
    """

    body: Body
    lam: float
    spacing: float
    axis_weights: list[np.ndarray] | None = None
    patch: np.ndarray | None = None
    error_bound: float = 0.0

    @property
    def dim(self) -> int:
        return self.body.dim

    @property
    def half_extents(self) -> tuple[int, ...]:
        if self.axis_weights is not None:
            return tuple((len(w) - 1) // 2 for w in self.axis_weights)
        return tuple((s - 1) // 2 for s in self.patch.shape)

    @property
    def weight_sum(self) -> float:
        if self.axis_weights is not None:
            return float(np.prod([w.sum() for w in self.axis_weights]))
        return float(self.patch.sum())

    def dense(self) -> np.ndarray:
        """Materialize the full (2m+1)^d weight array."""
        if self.patch is not None:
            return self.patch
        out = self.axis_weights[0]
        for w in self.axis_weights[1:]:
            out = np.multiply.outer(out, w)
        return out

    def offsets_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """(n, d) integer cell offsets and the matching nonzero weights."""
        dense = self.dense()
        nz = np.nonzero(dense)
        offsets = np.stack(nz, axis=-1) - np.asarray(self.half_extents)
        return offsets, dense[nz]


def _axis_weights_exact(half_width: float, lam: float, spacing: float
                        ) -> np.ndarray:
    """1-D cell weights for the window [-lam*h, lam*h] by interval clipping.

    With L = lam*h/spacing the window covers 2L cells: the 2m-1 interior
    cells fully (weight 1/(2L) each) and the two edge cells by the exact
    overlap fraction.  Everything is exact float arithmetic when L is a
    power of two, which the operator-law tests exploit.
    """
    half_cells = lam * half_width / spacing
    edge = math.ceil(half_cells - 0.5)
    if edge <= 0:
        return np.array([1.0])
    w_full = 1.0 / (2.0 * half_cells)
    w_edge = (half_cells - (edge - 0.5)) / (2.0 * half_cells)
    weights = np.full(2 * edge + 1, w_full)
    weights[0] = weights[-1] = w_edge
    return weights


def _gauge_chunked(body: Body, points: np.ndarray,
                   chunk: int = 1 << 20) -> np.ndarray:
    flat = points.reshape(-1, points.shape[-1])
    out = np.empty(len(flat))
    for start in range(0, len(flat), chunk):
        out[start:start + chunk] = body.gauge(flat[start:start + chunk])
    return out.reshape(points.shape[:-1])


def _dense_patch(body: Body, lam: float, spacing: float,
                 supersample: int) -> tuple[np.ndarray, float]:
    """Cell-coverage weights for lam * body plus a raster error bound."""
    d = body.dim
    half = [int(math.floor(lam * body.extent(a) / spacing + 0.5))
            for a in range(d)]
    axes = [np.arange(-m, m + 1) * spacing for m in half]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    gauges = _gauge_chunked(body, centers)

    # A cell's circumball has radius (h/2)*sqrt(d); the gauge is Lipschitz
    # with constant 1/inradius, so cells sort into certainly-inside,
    # certainly-outside, and a boundary band needing subsampling.
    slack = 0.5 * spacing * math.sqrt(d) / body.inradius()
    inside = gauges <= lam - slack
    outside = gauges >= lam + slack
    band = ~(inside | outside)

    fractions = inside.astype(float)
    band_idx = np.argwhere(band)
    if len(band_idx):
        k = supersample
        sub = (np.arange(k) + 0.5) / k - 0.5
        sub_offsets = np.stack(
            np.meshgrid(*([sub * spacing] * d), indexing="ij"),
            axis=-1).reshape(-1, d)
        cell_chunk = max(1, (1 << 20) // len(sub_offsets))
        for start in range(0, len(band_idx), cell_chunk):
            rows = band_idx[start:start + cell_chunk]
            base = (rows - np.asarray(half)) * spacing
            pts = base[:, None, :] + sub_offsets[None, :, :]
            hit = body.gauge(pts.reshape(-1, d)) <= lam
            frac = hit.reshape(len(rows), -1).mean(axis=1)
            fractions[tuple(rows.T)] = frac

    total = fractions.sum()
    if total <= 0.0:
        raise GeometryError(
            "kernel came out empty; the body is too eccentric for this "
            f"grid (lam={lam:g}, spacing={spacing:g})")
    weights = fractions / total
    band_weight = float(weights[band].sum())
    return weights, band_weight / supersample


def build_kernel(body: Body, lam: float, spacing: float,
                 supersample: int = KERNEL_SUPERSAMPLE) -> AveragingKernel:
    """Cell weights for averaging over x + lam * body on an h-grid.

    Each weight is the fraction of the cell covered by the window,
    renormalized to sum 1: exact per-axis interval clipping for axis
    boxes, supersample^d boundary sampling for everything else.
    """
    lam = float(lam)
    spacing = float(spacing)
    if not spacing > 0:
        raise GeometryError("spacing must be positive")
    if lam < spacing:
        raise GeometryError(
            f"dilation {lam:g} is below the grid spacing {spacing:g}")
    if isinstance(body, AxisBox):
        weights = [_axis_weights_exact(float(h), lam, spacing)
                   for h in body.half_widths]
        return AveragingKernel(body=body, lam=lam, spacing=spacing,
                               axis_weights=weights, error_bound=0.0)
    patch, err = _dense_patch(body, lam, spacing, supersample)
    return AveragingKernel(body=body, lam=lam, spacing=spacing,
                           patch=patch, error_bound=err)


# ---------------------------------------------------------------------------
# dilation ladders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DilationLadder:
    """Geometric grid of dilations anchored at lam_max.

    values() descends from lam_max by the ratio until it passes lam_min,
    then includes lam_min itself, so both endpoints are always present
    and consecutive values never differ by more than the ratio.
    """

    lam_min: float
    lam_max: float
    ratio: float = 1.05

    def __post_init__(self):
        if not (0.0 < self.lam_min <= self.lam_max):
            raise GeometryError(
                f"need 0 < lam_min <= lam_max, got [{self.lam_min}, "
                f"{self.lam_max}]")
        if not (1.0 < self.ratio <= MAX_LADDER_RATIO):
            raise GeometryError(
                f"ladder ratio must lie in (1, {MAX_LADDER_RATIO}], "
                f"got {self.ratio}")

    def values(self) -> np.ndarray:
        """All dilations, ascending."""
        if self.lam_min == self.lam_max:
            return np.array([self.lam_max])
        steps = []
        value = self.lam_max
        # 1e-12 slack keeps an exact-ratio bottom value from duplicating
        while value > self.lam_min * (1.0 + 1e-12):
            steps.append(value)
            value /= self.ratio
        steps.append(self.lam_min)
        return np.array(steps[::-1])

    def __len__(self) -> int:
        return len(self.values())

    @classmethod
    def for_grid(cls, field: ScalarField, body: Body,
                 ratio: float = 1.05,
                 lam_min: float | None = None,
                 lam_max: float | None = None) -> "DilationLadder":
        """Ladder from the grid spacing up to the largest usable window."""
        extents = np.array([body.extent(a) for a in range(field.dim)])
        sizes = np.array(field.shape, dtype=float)
        diameter = float(np.linalg.norm(sizes * field.spacing))
        fit = float(np.min((sizes - 0.5) * field.spacing / extents))
        low = field.spacing if lam_min is None else float(lam_min)
        high = min(diameter, fit) if lam_max is None else float(lam_max)
        if high < low:
            raise GeometryError(
                "grid too coarse: no dilation fits between the spacing "
                f"({low:g}) and the domain cap ({high:g})")
        return cls(lam_min=low, lam_max=high, ratio=ratio)


# ---------------------------------------------------------------------------
# the maximal transform
# ---------------------------------------------------------------------------

def _require_nonnegative(field: ScalarField) -> None:
    if np.any(field.values < 0):
        raise ValueError("the maximal transform needs a nonnegative field")


def _footprint_check(field: ScalarField, body: Body, lam_max: float) -> None:
    for a in range(field.dim):
        m = int(math.floor(lam_max * body.extent(a) / field.spacing + 0.5))
        if m > field.shape[a]:
            raise GeometryError(
                f"domain too small for lam_max={lam_max:g}: kernel half "
                f"extent {m} cells exceeds the {field.shape[a]}-cell axis {a}")


def _correlate_axis(arr: np.ndarray, weights: np.ndarray,
                    axis: int) -> np.ndarray:
    """Weighted window sum along one axis with zero extension.

    The weight vector has the clipped-box shape (edge, full, ..., full,
    edge); the full-weight run is a box sum evaluated by prefix sums, the
    two edge taps are added separately.  Prefix-sum differences of exact
    dyadic data are exact, which the operator-law tests rely on.
    """
    m = (len(weights) - 1) // 2
    if m == 0:
        return arr * weights[0]
    w_edge = float(weights[0])
    w_full = float(weights[m])
    moved = np.moveaxis(arr, axis, -1)
    n = moved.shape[-1]
    padded = np.zeros(moved.shape[:-1] + (n + 2 * m,), dtype=arr.dtype)
    padded[..., m:m + n] = moved
    sums = np.zeros(moved.shape[:-1] + (n + 2 * m + 1,), dtype=arr.dtype)
    np.cumsum(padded, axis=-1, out=sums[..., 1:])
    box = sums[..., 2 * m:2 * m + n] - sums[..., 1:1 + n]
    out = w_full * box + w_edge * (padded[..., :n] + padded[..., 2 * m:])
    return np.moveaxis(out, -1, axis)


def _apply_separable(values: np.ndarray, kernel: AveragingKernel
                     ) -> np.ndarray:
    out = values
    for axis, w in enumerate(kernel.axis_weights):
        out = _correlate_axis(out, w, axis)
    return out


def _apply_direct(values: np.ndarray, kernel: AveragingKernel) -> np.ndarray:
    from scipy import ndimage

    return ndimage.correlate(values, kernel.dense(), mode="constant",
                             cval=0.0)


def _max_over_fft(values: np.ndarray, kernels: list[AveragingKernel],
                  out: np.ndarray, workers: int | None) -> None:
    """Fold max(correlation per kernel) into `out` via zero-padded FFTs.

    Padding to N + m + 1 makes the circular correlation alias-free: the
    wrapped reads of a half-extent-m kernel land entirely in the zero
    margin.  One padded size (the largest kernel's) is shared so the
    forward transform of f happens once.
    """
    import scipy.fft as sfft

    shape = values.shape
    d = len(shape)
    m_max = [max(k.half_extents[a] for k in kernels) for a in range(d)]
    pad = tuple(sfft.next_fast_len(n + m + 1, real=True)
                for n, m in zip(shape, m_max))
    crop = tuple(slice(0, n) for n in shape)
    fpad = np.zeros(pad)
    fpad[crop] = values
    fhat = sfft.rfftn(fpad, workers=workers)
    for kern in kernels:
        kpad = np.zeros(pad)
        wrap = np.ix_(*[np.arange(-m, m + 1) % p
                        for m, p in zip(kern.half_extents, pad)])
        kpad[wrap] = kern.dense()
        khat = sfft.rfftn(kpad, workers=workers)
        np.conjugate(khat, out=khat)
        khat *= fhat
        avg = sfft.irfftn(khat, s=pad, workers=workers)
        np.maximum(out, avg[crop], out=out)


def _prepare_kernels(body: Body, ladder: DilationLadder, spacing: float,
                     supersample: int) -> list[AveragingKernel]:
    return [build_kernel(body, lam, spacing, supersample)
            for lam in ladder.values()]


def max_transform(field: ScalarField, body: Body, ladder: DilationLadder,
                  backend: str = "auto",
                  kernels: list[AveragingKernel] | None = None,
                  supersample: int = KERNEL_SUPERSAMPLE,
                  workers: int | None = None) -> ScalarField:
    """One application of the discrete maximal transform.

    output(x) = max(f(x), max over ladder dilations of the kernel
    average at x), with f extended by zero outside the grid.  The f term
    realizes the small-dilation limit, so output >= f holds exactly.

    backend: "separable" (exact, axis boxes only), "fft", "direct", or
    "auto" which picks separable when available and fft otherwise.
    Passing precomputed `kernels` skips rebuilding them on repeated calls.
    """
    _require_nonnegative(field)
    if body.dim != field.dim:
        raise FieldGeometryError(
            f"body dim {body.dim} does not match field dim {field.dim}")
    _footprint_check(field, body, ladder.lam_max)
    if kernels is None:
        kernels = _prepare_kernels(body, ladder, field.spacing, supersample)
    separable_ok = all(k.axis_weights is not None for k in kernels)
    if backend == "auto":
        backend = "separable" if separable_ok else "fft"
    if backend == "separable" and not separable_ok:
        raise GeometryError(
            "separable backend requires an axis-box body")

    out = field.values.copy()
    if backend == "separable":
        for kern in kernels:
            np.maximum(out, _apply_separable(field.values, kern), out=out)
    elif backend == "fft":
        _max_over_fft(field.values, kernels, out, workers)
    elif backend == "direct":
        for kern in kernels:
            np.maximum(out, _apply_direct(field.values, kern), out=out)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return ScalarField(field.origin.copy(), field.spacing, out)


# ---------------------------------------------------------------------------
# fixed-point iteration
# ---------------------------------------------------------------------------

@dataclass
class IterateResult:
    field: ScalarField
    trace: list[dict] = dataclass_field(default_factory=list)
    converged: bool = False
    n_steps: int = 0

    def trace_column(self, key: str) -> list:
        return [row[key] for row in self.trace]


def iterate(f0: ScalarField, body: Body, ladder: DilationLadder,
            n_max: int = DEFAULT_MAX_ITERATIONS,
            stop_tol: float = DEFAULT_STOP_TOL,
            probes: dict[str, np.ndarray] | None = None,
            backend: str = "auto",
            supersample: int = KERNEL_SUPERSAMPLE,
            workers: int | None = None) -> IterateResult:
    """Repeat the maximal transform until the sup change drops to stop_tol.

    The sequence is pointwise nondecreasing by construction.  Each trace
    row records the step, the sup-norm change, and min/max over each
    probe window (boolean masks on the grid).  Running out of steps is
    not an error; it is reported through `converged`.
    """
    _require_nonnegative(f0)
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    probes = probes or {}
    for name, mask in probes.items():
        if np.asarray(mask).shape != f0.shape:
            raise FieldGeometryError(
                f"probe window {name!r} does not match the grid")
    kernels = _prepare_kernels(body, ladder, f0.spacing, supersample)
    result = IterateResult(field=f0)
    current = f0
    for step in range(1, n_max + 1):
        nxt = max_transform(current, body, ladder, backend=backend,
                            kernels=kernels, workers=workers)
        change = float(np.max(nxt.values - current.values))
        row = {"step": step, "sup_change": change}
        for name, mask in probes.items():
            windowed = nxt.values[np.asarray(mask, dtype=bool)]
            row[f"{name}_min"] = float(windowed.min()) if windowed.size else np.nan
            row[f"{name}_max"] = float(windowed.max()) if windowed.size else np.nan
        result.trace.append(row)
        current = nxt
        if change <= stop_tol:
            result.converged = True
            break
    result.field = current
    result.n_steps = len(result.trace)
    return result


def growth_ratio(field: ScalarField, body: Body, ladder: DilationLadder,
                 p: float, backend: str = "auto",
                 workers: int | None = None) -> float:
    """lp_norm(Mf, p) / lp_norm(f, p); errors on the zero field."""
    denom = lp_norm(field, p)
    if denom == 0.0:
        raise ValueError("growth ratio of the zero field is undefined")
    transformed = max_transform(field, body, ladder, backend=backend,
                                workers=workers)
    return lp_norm(transformed, p) / denom


# ---------------------------------------------------------------------------
# level-set accounting
# ---------------------------------------------------------------------------

def levelset_experiment(field: ScalarField, body: Body, mu, delta1: float,
                        n: int, b_const: float,
                        ladder: DilationLadder | None = None,
                        backend: str = "auto",
                        workers: int | None = None) -> dict:
    """Measure both sides of the iterated level-set inequality.

    After n+1 applications of the transform, the superlevel set of the
    iterate at threshold mu*(1-delta1)^2/(1+delta1)^3 should outweigh
    |{f >= mu}| + |{f >= 2 mu}| / b_const, where b_const is the empirical
    overlap bound from the covering module.  One row per requested mu.
    """
    if delta1 <= 0:
        raise ValueError("delta1 must be positive")
    if b_const <= 0:
        raise ValueError("the overlap constant must be positive")
    if n < 0:
        raise ValueError("n must be a nonnegative iteration count")
    mus = np.atleast_1d(np.asarray(mu, dtype=float))
    if np.any(mus <= 0):
        raise ValueError("mu must be positive")
    if ladder is None:
        ladder = DilationLadder.for_grid(field, body)

    kernels = _prepare_kernels(body, ladder, field.spacing,
                               KERNEL_SUPERSAMPLE)
    iterated = field
    for _ in range(n + 1):
        iterated = max_transform(iterated, body, ladder, backend=backend,
                                 kernels=kernels, workers=workers)

    factor = (1.0 - delta1) ** 2 / (1.0 + delta1) ** 3
    rows = []
    for value in mus:
        lhs = superlevel_measure(iterated, value * factor)
        rhs = superlevel_measure(field, value) \
            + superlevel_measure(field, 2.0 * value) / b_const
        slack = lhs - rhs
        rows.append({
            "mu": float(value),
            "threshold": float(value * factor),
            "lhs": lhs,
            "rhs": rhs,
            "slack": slack,
            "holds": bool(slack >= 0.0),
        })
    return {
        "delta1": float(delta1),
        "n": int(n),
        "b_const": float(b_const),
        "threshold_factor": factor,
        "rows": rows,
        "all_hold": all(r["holds"] for r in rows),
    }


def superharmonicity_check(field: ScalarField, window=None,
                           tol: float = 1.0e-12) -> dict:
    """Max of the discrete Laplacian over an interior window.

    `window` is a boolean mask or a tuple of slices; None means the whole
    stencil-valid interior.  Windows touching the boundary ring are
    rejected because one-sided stencils would pollute the verdict.
    """
    lap, valid = discrete_laplacian(field)
    if window is None:
        mask = valid
    elif isinstance(window, tuple):
        mask = np.zeros(field.shape, dtype=bool)
        mask[window] = True
    else:
        mask = np.asarray(window, dtype=bool)
        if mask.shape != field.shape:
            raise FieldGeometryError("window mask does not match the grid")
    if not np.any(mask):
        raise FieldGeometryError("superharmonicity window is empty")
    if np.any(mask & ~valid):
        raise FieldGeometryError(
            "superharmonicity window must stay interior to the grid")
    windowed = lap.values[mask]
    max_lap = float(np.max(windowed))
    return {
        "max_laplacian": max_lap,
        "tol": float(tol),
        "passes": bool(max_lap <= tol),
        "n_cells": int(windowed.size),
    }


# ---------------------------------------------------------------------------
# small-dilation probe of the fourth-order defect
# ---------------------------------------------------------------------------

def _rule_blocks(body: Body, level: int):
    """Yield (points, weights) quadrature blocks for the unit-dilation body.

    Weights are raw (proportional to volume); the caller normalizes by
    their running sum, which makes the mean of a constant exact and
    cancels the constant Jacobian of linear images.
    """
    from numpy.polynomial.legendre import leggauss

    if isinstance(body, LinearImage):
        for pts, w in _rule_blocks(body.base, level):
            yield pts @ body.matrix.T, w
        return

    if isinstance(body, AxisBox):
        nodes, weights = leggauss(level)
        axes_pts = [body.half_widths[a] * nodes for a in range(body.dim)]
        grid = np.stack(np.meshgrid(*axes_pts, indexing="ij"), axis=-1)
        w = weights
        for _ in range(body.dim - 1):
            w = np.multiply.outer(w, weights)
        yield grid.reshape(-1, body.dim), w.reshape(-1)
        return

    if isinstance(body, Ball):
        if body.dim != 3:
            raise GeometryError("the ball probe rule is implemented for d=3")
        nodes, weights = leggauss(level)
        radial = 0.5 * (nodes + 1.0)
        w_rad = 0.5 * weights * 3.0 * radial ** 2
        cos_th = nodes
        w_th = 0.5 * weights
        n_phi = 2 * level
        phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
        w_phi = np.full(n_phi, 1.0 / n_phi)
        sin_th = np.sqrt(np.maximum(0.0, 1.0 - cos_th ** 2))
        dirs = np.stack([
            np.multiply.outer(sin_th, np.cos(phi)),
            np.multiply.outer(sin_th, np.sin(phi)),
            np.broadcast_to(cos_th[:, None], (level, n_phi)).copy(),
        ], axis=-1)
        pts = body.radius * radial[:, None, None, None] * dirs[None, :, :, :]
        w = w_rad[:, None, None] * w_th[None, :, None] * w_phi[None, None, :]
        yield pts.reshape(-1, 3), w.reshape(-1)
        return

    if isinstance(body, (CrossPolytope, VPolytope)):
        if isinstance(body, CrossPolytope):
            from itertools import product as iproduct

            d = body.dim
            eye = np.eye(d) * float(body.scale)
            simplex_list = [np.diag(signs) @ eye
                            for signs in iproduct((-1.0, 1.0), repeat=d)]
        else:
            simplex_list = [np.asarray(body.vertices[list(s)], dtype=float)
                            for s in body.fan_simplices()]
        for verts in simplex_list:
            yield _simplex_block(verts, level)
        return

    raise GeometryError(f"no probe quadrature for {type(body).__name__}")


def _simplex_block(verts: np.ndarray, level: int
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on the origin-cone of d vertices (Duffy map).

    Barycentric coordinates t_i = xi_i * (1 - t_1 - ... - t_{i-1}) turn
    the unit cube into the simplex {t_i >= 0, sum t <= 1}; the Jacobian
    is the product of the remaining-mass factors and stays polynomial in
    xi, so the Gauss rule integrates the volume element exactly.
    """
    from numpy.polynomial.legendre import leggauss

    d = verts.shape[0]
    nodes, weights = leggauss(level)
    xi01 = 0.5 * (nodes + 1.0)
    w01 = 0.5 * weights
    grids = np.meshgrid(*([xi01] * d), indexing="ij")
    wgrid = w01
    for _ in range(d - 1):
        wgrid = np.multiply.outer(wgrid, w01)
    remaining = np.ones_like(grids[0])
    jac = np.ones_like(grids[0])
    coords = []
    for i in range(d):
        if i > 0:
            jac = jac * remaining
        t_i = grids[i] * remaining
        coords.append(t_i)
        remaining = remaining - t_i
    bary = np.stack([c.reshape(-1) for c in coords], axis=-1)
    pts = bary @ verts
    det = abs(float(np.linalg.det(verts)))
    raw_w = (wgrid * jac).reshape(-1) * det
    return pts, raw_w


def _probe_average(body: Body, point: np.ndarray, lam: float,
                   level: int) -> float:
    """Quadrature mean of 1/|y| over point + lam * body."""
    num = 0.0
    den = 0.0
    for pts, w in _rule_blocks(body, level):
        shifted = point[None, :] + lam * pts
        values = 1.0 / np.linalg.norm(shifted, axis=-1)
        num += float(np.dot(w, values))
        den += float(w.sum())
    return num / den


def richardson_limit(lams, values) -> float:
    """Extrapolate value(lam) = limit + c*lam^2 + O(lam^4) to lam = 0.

    Neville's scheme in the variable lam^2; any ordering of distinct
    dilations works.
    """
    x = np.asarray(lams, dtype=float) ** 2
    table = np.asarray(values, dtype=float).copy()
    n = len(table)
    if n != len(x):
        raise ValueError("lams and values must have equal length")
    if n == 0:
        raise ValueError("need at least one value to extrapolate")
    for k in range(1, n):
        for i in range(n - 1, k - 1, -1):
            table[i] = table[i] + (table[i] - table[i - 1]) * x[i] \
                / (x[i - k] - x[i])
    return float(table[-1])


def quartic_probe(body: Body, lams, point, levels: tuple[int, int] = (48, 64)
                  ) -> dict:
    """Numeric fourth-order defect of averaging 1/|x| over small windows.

    For an isotropic body in d=3 and a point outside the unit ball,
    (average of 1/|y| over point + lam*body  minus  1/|point|) / lam^4
    tends, as lam -> 0, to the fourth-order defect contraction divided by
    24*volume(body).  Each dilation is evaluated at two quadrature levels
    (coarse, fine) so the quadrature error is visible, and the dilation
    series is Richardson-extrapolated in lam^2.
    """
    if body.dim != 3:
        raise GeometryError("the probe is implemented for dimension 3")
    iso_err = isotropy_error(body)
    if iso_err > ISOTROPY_TOL:
        raise IsotropyError(
            f"body is not isotropic (second-moment deviation {iso_err:.3e})")
    pt = np.asarray(point, dtype=float)
    if pt.shape != (3,):
        raise GeometryError("point must be a 3-vector")
    radius = float(np.linalg.norm(pt))
    if radius <= 1.0:
        raise GeometryError(
            "probe point must lie outside the unit ball so the harmonic "
            "seed is smooth on every window")
    lam_arr = np.asarray(lams, dtype=float)
    if lam_arr.ndim != 1 or len(lam_arr) == 0:
        raise ValueError("need a nonempty 1-D list of dilations")
    if np.any(lam_arr <= 0):
        raise ValueError("dilations must be positive")
    gauge_pt = float(body.gauge(pt))
    if np.any(lam_arr >= gauge_pt):
        raise GeometryError(
            f"dilations must stay below the gauge of the point "
            f"({gauge_pt:.6g}) to keep the window away from the origin")
    coarse, fine = levels
    base = 1.0 / radius
    vals_fine = []
    vals_coarse = []
    for lam in lam_arr:
        mean_c = _probe_average(body, pt, lam, coarse)
        mean_f = _probe_average(body, pt, lam, fine)
        vals_coarse.append((mean_c - base) / lam ** 4)
        vals_fine.append((mean_f - base) / lam ** 4)
    vals_fine = np.array(vals_fine)
    vals_coarse = np.array(vals_coarse)
    if len(lam_arr) >= 2:
        extrapolated = richardson_limit(lam_arr, vals_fine)
    else:
        extrapolated = float(vals_fine[0])
    prediction = obstruction(body, 4, pt) / (24.0 * body.volume())
    # when the defect vanishes (balls) the relative figure is meaningless;
    # fall back to the extrapolated magnitude so it stays finite
    scale = max(abs(prediction), abs(extrapolated), 1e-15)
    return {
        "lams": [float(v) for v in lam_arr],
        "values": [float(v) for v in vals_fine],
        "values_coarse": [float(v) for v in vals_coarse],
        "quadrature_gaps": [float(abs(a - b))
                            for a, b in zip(vals_fine, vals_coarse)],
        "extrapolated": float(extrapolated),
        "prediction": float(prediction),
        "abs_deviation": float(abs(extrapolated - prediction)),
        "rel_deviation": float(abs(extrapolated - prediction) / scale),
    }
