"""Greedy covering selection for families of dilated convex bodies.

From a finite family {x_i + lam_i * K} the classical largest-first
greedy keeps a subfamily that still covers every input center while its
members' centers stay mutually uncovered.  The maximal overlap of the
kept subfamily, measured empirically, is the constant that the
level-set experiment consumes.

Membership is closed (gauge <= lam): a center sitting exactly on the
boundary of a kept set counts as covered, which is what makes the
greedy's discard step deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .bodies import Body, body_from_dict
from .errors import GeometryError

__all__ = [
    "CoverInput",
    "CoverReport",
    "greedy_cover",
    "overlap_at",
    "random_cover_input",
]


@dataclass
class CoverInput:
    """A body K, a family of (center, lam) dilates, and the cap Lambda."""

    body: Body
    items: list[tuple[np.ndarray, float]]
    cap: float

    def __post_init__(self):
        if not self.items:
            raise GeometryError("covering input needs at least one item")
        if not self.cap > 0:
            raise GeometryError("the dilation cap must be positive")
        cleaned = []
        for center, lam in self.items:
            c = np.asarray(center, dtype=float)
            if c.shape != (self.body.dim,):
                raise GeometryError(
                    f"center {c} does not match body dimension "
                    f"{self.body.dim}")
            lam = float(lam)
            if not (0.0 < lam < self.cap):
                raise GeometryError(
                    f"dilation {lam:g} must lie strictly inside "
                    f"(0, {self.cap:g})")
            cleaned.append((c, lam))
        self.items = cleaned

    @property
    def centers(self) -> np.ndarray:
        return np.array([c for c, _ in self.items])

    @property
    def lams(self) -> np.ndarray:
        return np.array([l for _, l in self.items])

    def to_dict(self) -> dict:
        return {
            "body": self.body.to_dict(),
            "Lambda": self.cap,
            "items": [{"center": [float(v) for v in c], "lambda": lam}
                      for c, lam in self.items],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoverInput":
        body = body_from_dict(data["body"])
        items = [(np.asarray(row["center"], dtype=float),
                  float(row["lambda"])) for row in data["items"]]
        return cls(body=body, items=items, cap=float(data["Lambda"]))


@dataclass
class CoverReport:
    """Greedy selection outcome plus empirical overlap statistics."""

    selected: list[int]
    covered: np.ndarray
    overlap_max: int
    overlap_histogram: dict[int, int]
    n_items: int

    def to_dict(self) -> dict:
        return {
            "selected": [int(i) for i in self.selected],
            "covered": [bool(v) for v in self.covered],
            "overlap_max": int(self.overlap_max),
            "overlap_histogram": {str(k): int(v) for k, v
                                  in sorted(self.overlap_histogram.items())},
            "n_items": int(self.n_items),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoverReport":
        return cls(
            selected=[int(i) for i in data["selected"]],
            covered=np.asarray(data["covered"], dtype=bool),
            overlap_max=int(data["overlap_max"]),
            overlap_histogram={int(k): int(v) for k, v
                               in data["overlap_histogram"].items()},
            n_items=int(data["n_items"]),
        )


def _membership_counts(body: Body, centers: np.ndarray, lams: np.ndarray,
                       points: np.ndarray) -> np.ndarray:
    """How many of the given dilates contain each point (closed sets)."""
    counts = np.zeros(len(points), dtype=int)
    # chunk over the family so the (points x family) broadcast stays small
    step = max(1, (1 << 20) // max(1, len(points)))
    for start in range(0, len(centers), step):
        c = centers[start:start + step]
        l = lams[start:start + step]
        diffs = points[:, None, :] - c[None, :, :]
        g = body.gauge(diffs.reshape(-1, points.shape[-1]))
        inside = g.reshape(len(points), len(c)) <= l[None, :]
        counts += inside.sum(axis=1)
    return counts


def _interval_overlap_max(centers: np.ndarray, lams: np.ndarray,
                          scale: float) -> int:
    """Exact max overlap of closed 1-D intervals by an endpoint sweep.

    Opening events sort before closing events at the same coordinate so
    intervals sharing an endpoint both count there, matching the closed
    membership convention.
    """
    lo = centers[:, 0] - lams * scale
    hi = centers[:, 0] + lams * scale
    events = sorted([(x, 0) for x in lo] + [(x, 1) for x in hi])
    best = 0
    running = 0
    for _, kind in events:
        if kind == 0:
            running += 1
            best = max(best, running)
        else:
            running -= 1
    return best


def _probe_points(body: Body, centers: np.ndarray, lams: np.ndarray,
                  resolution: int) -> np.ndarray:
    """Uniform grid over the bounding box of the selected dilates."""
    d = centers.shape[1]
    los = []
    his = []
    for a in range(d):
        ext = np.array([body.extent(a)] * len(centers)) * lams
        los.append(float(np.min(centers[:, a] - ext)))
        his.append(float(np.max(centers[:, a] + ext)))
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(los, his)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def greedy_cover(cover_input: CoverInput, resolution: int = 64
                 ) -> CoverReport:
    """Largest-first greedy selection with overlap measurement.

    Repeatedly keep the largest-dilation remaining item (ties broken by
    lowest index) and drop every item whose center the kept set covers.
    Every input center ends up covered, kept dilations are
    non-increasing, and kept centers are mutually uncovered.

    Overlap statistics for the kept family are evaluated at all input
    centers plus a probe grid; in d=1 the reported maximum is instead
    exact, from an interval endpoint sweep.
    """
    body = cover_input.body
    centers = cover_input.centers
    lams = cover_input.lams
    n = len(lams)

    alive = np.ones(n, dtype=bool)
    selected: list[int] = []
    while np.any(alive):
        masked = np.where(alive, lams, -np.inf)
        pick = int(np.argmax(masked))  # first max = lowest index on ties
        selected.append(pick)
        inside = body.gauge(centers - centers[pick]) <= lams[pick]
        alive &= ~inside
        alive[pick] = False

    sel_centers = centers[selected]
    sel_lams = lams[selected]

    center_counts = _membership_counts(body, sel_centers, sel_lams, centers)
    covered = center_counts >= 1

    if body.dim == 1:
        overlap_max = _interval_overlap_max(sel_centers, sel_lams,
                                            body.extent(0))
        eval_counts = center_counts
    else:
        probes = _probe_points(body, sel_centers, sel_lams, resolution)
        probe_counts = _membership_counts(body, sel_centers, sel_lams,
                                          probes)
        eval_counts = np.concatenate([center_counts, probe_counts])
        overlap_max = int(eval_counts.max())

    values, freqs = np.unique(eval_counts, return_counts=True)
    histogram = {int(v): int(f) for v, f in zip(values, freqs)}
    return CoverReport(selected=selected, covered=covered,
                       overlap_max=int(overlap_max),
                       overlap_histogram=histogram, n_items=n)


def overlap_at(report: CoverReport, cover_input: CoverInput,
               point) -> int:
    """Number of kept dilates whose closed set contains the point."""
    if report.n_items != len(cover_input.items):
        raise GeometryError("report does not match this covering input")
    if report.selected and max(report.selected) >= report.n_items:
        raise GeometryError("report indices exceed the input family")
    x = np.asarray(point, dtype=float).reshape(1, -1)
    if x.shape[1] != cover_input.body.dim:
        raise GeometryError("point dimension does not match the body")
    centers = cover_input.centers[report.selected]
    lams = cover_input.lams[report.selected]
    if len(centers) == 0:
        return 0
    return int(_membership_counts(cover_input.body, centers, lams, x)[0])


def random_cover_input(body: Body, n_items: int, cap: float,
                       spread: float, rng: np.random.Generator
                       ) -> CoverInput:
    """Uniform random centers in a cube of the given half-width `spread`
    with dilations uniform in (cap/10, cap)."""
    d = body.dim
    centers = rng.uniform(-spread, spread, size=(n_items, d))
    lams = rng.uniform(cap / 10.0, cap * (1.0 - 1e-9), size=n_items)
    items = [(centers[i], float(lams[i])) for i in range(n_items)]
    return CoverInput(body=body, items=items, cap=cap)
