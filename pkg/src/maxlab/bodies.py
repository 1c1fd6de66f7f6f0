"""Centrally symmetric convex bodies centered at the origin.

Every body K here satisfies K = -K and has nonempty interior, so its
Minkowski gauge  g(x) = inf {t > 0 : x in t K}  is a norm.  Five concrete
shapes are provided:

  * Ball           Euclidean ball of a given radius,
  * AxisBox        axis-aligned box with per-axis half-widths,
  * CrossPolytope  the l1 ball scaled by a single parameter,
  * VPolytope      convex hull of an explicitly listed symmetric vertex set,
  * LinearImage    image A K of another body under an invertible matrix.

Each body keeps an exact rational mirror of its defining data (Fraction
entries) alongside the float arrays used for vectorized numerics.  The
exact mirror is what the moment code consumes, and it is what the JSON
round trip preserves bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import permutations, product
from typing import Sequence

import numpy as np

from .config import CONDITION_CAP, ORTHOGONALITY_TOL
from .errors import DegenerateBodyError, GeometryError, SingularMatrixError

__all__ = [
    "Body",
    "Ball",
    "AxisBox",
    "CrossPolytope",
    "VPolytope",
    "LinearImage",
    "body_to_json",
    "body_from_json",
    "random_symmetric_polytope",
]


# ---------------------------------------------------------------------------
# exact-scalar helpers
# ---------------------------------------------------------------------------

def as_fraction(x) -> Fraction:
    """Coerce int / float / Fraction / string to an exact Fraction.

    Floats convert exactly (every float64 is a dyadic rational); strings
    accept both "3/4" and decimal forms like "0.25".
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as an exact scalar")


def _frac_vector(values) -> tuple[Fraction, ...]:
    return tuple(as_fraction(v) for v in values)


def _frac_matrix(rows) -> tuple[tuple[Fraction, ...], ...]:
    mat = tuple(_frac_vector(r) for r in rows)
    n = len(mat)
    if any(len(r) != n for r in mat):
        raise GeometryError("matrix must be square")
    return mat


def exact_det(mat: Sequence[Sequence[Fraction]]) -> Fraction:
    """Leibniz-formula determinant over exact scalars (small dimensions)."""
    n = len(mat)
    total = Fraction(0)
    for perm in permutations(range(n)):
        sign = 1
        seen = list(perm)
        # count inversions for the permutation sign
        inv = sum(1 for i in range(n) for j in range(i + 1, n)
                  if seen[i] > seen[j])
        if inv % 2:
            sign = -1
        term = Fraction(sign)
        for i, j in enumerate(perm):
            term *= mat[i][j]
        total += term
    return total


def exact_matmul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    assert len(a[0]) == k
    return tuple(
        tuple(sum((a[i][t] * b[t][j] for t in range(k)), Fraction(0))
              for j in range(m))
        for i in range(n)
    )


def _fraction_sqrt(x: Fraction) -> Fraction | None:
    """Exact square root of a Fraction, or None when it is irrational."""
    if x < 0:
        return None
    p, q = x.numerator, x.denominator
    rp, rq = math.isqrt(p), math.isqrt(q)
    if rp * rp == p and rq * rq == q:
        return Fraction(rp, rq)
    return None


def _num_out(f: Fraction):
    """JSON encoding of an exact scalar: plain number when lossless."""
    as_float = float(f)
    if Fraction(as_float) == f and math.isfinite(as_float):
        return as_float
    return str(f)


def _str_out(f: Fraction) -> str:
    """Decimal-string encoding, exact for every float-representable value.

    repr of a float is the shortest decimal that round-trips, so parsing
    it back through Fraction(float(...)) recovers the same exact value.
    Values that are not exactly representable as floats (for example 1/3)
    fall back to the fraction literal "p/q", which as_fraction accepts.
    """
    as_float = float(f)
    if Fraction(as_float) == f and math.isfinite(as_float):
        return repr(as_float)
    return str(f)


# ---------------------------------------------------------------------------
# the body hierarchy
# ---------------------------------------------------------------------------

class Body:
    """Common interface; concrete shapes subclass this."""

    dim: int

    # -- geometry queries ---------------------------------------------------

    def gauge(self, points: np.ndarray) -> np.ndarray:
        """Minkowski gauge evaluated at points of shape (..., dim)."""
        raise NotImplementedError

    def volume(self) -> float:
        raise NotImplementedError

    def support_radius(self) -> float:
        """Radius of the smallest origin-centered ball containing the body."""
        raise NotImplementedError

    def inradius(self) -> float:
        """Radius of the largest origin-centered ball inside the body."""
        raise NotImplementedError

    def extent(self, axis: int) -> float:
        """max |x_axis| over the body (per-axis bounding half-width)."""
        raise NotImplementedError

    def contains(self, points: np.ndarray, lam: float = 1.0) -> np.ndarray:
        """Boolean mask: is each point inside the dilate lam * body."""
        pts = np.asarray(points, dtype=float)
        return self.gauge(pts) <= lam

    def _points(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 0 or pts.shape[-1] != self.dim:
            raise GeometryError(
                f"points have shape {pts.shape}, expected (..., {self.dim}) "
                f"for a {self.dim}-d body")
        return pts

    # -- transformation -----------------------------------------------------

    def linear_map(self, matrix) -> "Body":
        """Image of this body under an invertible matrix.

        The result simplifies to a native shape whenever the map provably
        preserves the shape class (checked on the exact mirrors): diagonal
        matrices keep boxes axis-aligned, exact similarities keep balls
        round, signed permutations times a scalar keep cross polytopes.
        Everything else becomes a LinearImage, and stacked linear images
        collapse into a single matrix.
        """
        return _apply_linear(self, _frac_matrix(matrix))

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        raise NotImplementedError

    def describe(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


def _validate_dim(dim: int) -> None:
    if dim < 1 or dim > 3:
        raise GeometryError(
            f"supported dimensions are 1, 2, 3; got {dim}")


@dataclass(eq=False)
class Ball(Body):
    """Euclidean ball of given radius, any value coercible to Fraction."""

    dim: int
    radius_exact: Fraction

    def __init__(self, dim: int, radius):
        _validate_dim(dim)
        self.dim = dim
        self.radius_exact = as_fraction(radius)
        if self.radius_exact <= 0:
            raise DegenerateBodyError("ball radius must be positive")
        self.radius = float(self.radius_exact)

    def gauge(self, points):
        pts = self._points(points)
        return np.linalg.norm(pts, axis=-1) / self.radius

    def volume(self):
        return unit_ball_volume(self.dim) * self.radius ** self.dim

    def support_radius(self):
        return self.radius

    def inradius(self):
        return self.radius

    def extent(self, axis):
        return self.radius

    def to_dict(self):
        return {"type": "ball", "dim": self.dim,
                "radius": _num_out(self.radius_exact)}

    def describe(self):
        return f"ball(dim={self.dim}, radius={self.radius:g})"


@dataclass(eq=False)
class AxisBox(Body):
    """Axis-aligned box {|x_i| <= h_i}; h is the vector of half-widths."""

    half_widths_exact: tuple[Fraction, ...]

    def __init__(self, half_widths):
        hw = _frac_vector(half_widths)
        _validate_dim(len(hw))
        if any(h <= 0 for h in hw):
            raise DegenerateBodyError("box half-widths must be positive")
        self.half_widths_exact = hw
        self.dim = len(hw)
        self.half_widths = np.array([float(h) for h in hw])

    def gauge(self, points):
        pts = self._points(points)
        return np.max(np.abs(pts) / self.half_widths, axis=-1)

    def volume(self):
        return float(np.prod(2.0 * self.half_widths))

    def support_radius(self):
        return float(np.linalg.norm(self.half_widths))

    def inradius(self):
        return float(np.min(self.half_widths))

    def extent(self, axis):
        return float(self.half_widths[axis])

    def to_dict(self):
        return {"type": "box", "dim": self.dim,
                "half_widths": [_num_out(h) for h in self.half_widths_exact]}

    def describe(self):
        hw = ", ".join(f"{h:g}" for h in self.half_widths)
        return f"box(half_widths=[{hw}])"


@dataclass(eq=False)
class CrossPolytope(Body):
    """The l1 ball of radius `scale`: {sum |x_i| <= scale}."""

    dim: int
    scale_exact: Fraction

    def __init__(self, dim: int, scale):
        _validate_dim(dim)
        self.dim = dim
        self.scale_exact = as_fraction(scale)
        if self.scale_exact <= 0:
            raise DegenerateBodyError("cross polytope scale must be positive")
        self.scale = float(self.scale_exact)

    def gauge(self, points):
        pts = self._points(points)
        return np.sum(np.abs(pts), axis=-1) / self.scale

    def volume(self):
        return (2.0 * self.scale) ** self.dim / math.factorial(self.dim)

    def support_radius(self):
        return self.scale

    def inradius(self):
        return self.scale / math.sqrt(self.dim)

    def extent(self, axis):
        return self.scale

    def to_dict(self):
        return {"type": "cross", "dim": self.dim,
                "scale": _num_out(self.scale_exact)}

    def describe(self):
        return f"cross(dim={self.dim}, scale={self.scale:g})"


@dataclass(eq=False)
class VPolytope(Body):
    """Convex hull of an explicit symmetric vertex list (dim >= 2).

    The vertex set must be closed under negation; this is checked exactly
    on the rational mirror.  Points interior to the hull are tolerated in
    the input list but ignored by the facet structure.  One-dimensional
    polytopes are just intervals; use AxisBox for those.
    """

    vertices_exact: tuple[tuple[Fraction, ...], ...]

    def __init__(self, vertices):
        rows = tuple(_frac_vector(v) for v in vertices)
        if not rows:
            raise DegenerateBodyError("vertex list is empty")
        dim = len(rows[0])
        if any(len(r) != dim for r in rows):
            raise GeometryError("vertices have inconsistent dimensions")
        if dim < 2:
            raise GeometryError(
                "VPolytope needs dim >= 2; use AxisBox for intervals")
        vertex_set = set(rows)
        for r in rows:
            if tuple(-c for c in r) not in vertex_set:
                raise GeometryError(
                    f"vertex set is not centrally symmetric: {r} has no mirror")
        self.vertices_exact = rows
        self.dim = dim
        self.vertices = np.array([[float(c) for c in r] for r in rows])

    @cached_property
    def _hull(self):
        from scipy.spatial import ConvexHull
        from scipy.spatial import QhullError

        try:
            return ConvexHull(self.vertices, qhull_options="Qt")
        except QhullError as exc:
            raise DegenerateBodyError(
                "vertex set does not span the ambient space") from exc

    @cached_property
    def _facets(self):
        """(normals, offsets) with <n, x> <= c per facet, c > 0."""
        eqs = self._hull.equations
        normals = eqs[:, :-1]
        offsets = -eqs[:, -1]
        if np.any(offsets <= 0):
            raise DegenerateBodyError(
                "origin is not interior to the polytope")
        return normals, offsets

    def fan_simplices(self) -> list[tuple[int, ...]]:
        """Vertex-index tuples of the triangulated facets.

        Coning each facet simplex to the origin partitions the polytope, so
        integrals over the body are sums of integrals over these cones.
        """
        return [tuple(int(i) for i in s) for s in self._hull.simplices]

    def gauge(self, points):
        pts = self._points(points)
        normals, offsets = self._facets
        vals = pts @ normals.T / offsets
        return np.max(vals, axis=-1)

    def volume(self):
        return float(self._hull.volume)

    def support_radius(self):
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def inradius(self):
        normals, offsets = self._facets
        return float(np.min(offsets / np.linalg.norm(normals, axis=1)))

    def extent(self, axis):
        return float(np.max(np.abs(self.vertices[:, axis])))

    def to_dict(self):
        # vertices go out as decimal strings so rational coordinates survive
        # the round trip bit for bit
        return {"type": "vpolytope", "dim": self.dim,
                "vertices": [[_str_out(c) for c in r]
                             for r in self.vertices_exact]}

    def describe(self):
        return f"vpolytope(dim={self.dim}, vertices={len(self.vertices)})"


@dataclass(eq=False)
class LinearImage(Body):
    """Image A * base of another body under an invertible matrix A."""

    matrix_exact: tuple[tuple[Fraction, ...], ...]

    def __init__(self, base: Body, matrix):
        mat = _frac_matrix(matrix)
        if len(mat) != base.dim:
            raise GeometryError(
                f"matrix is {len(mat)}x{len(mat)} but body has dim {base.dim}")
        self.base = base
        self.matrix_exact = mat
        self.dim = base.dim
        self.matrix = np.array([[float(c) for c in r] for r in mat])
        det = exact_det(mat)
        if det == 0:
            raise SingularMatrixError("linear image matrix is singular")
        cond = np.linalg.cond(self.matrix)
        if not np.isfinite(cond) or cond > CONDITION_CAP:
            raise SingularMatrixError(
                f"matrix condition number {cond:.3e} exceeds cap {CONDITION_CAP:.1e}")
        self.det_exact = det
        self.matrix_inv = np.linalg.inv(self.matrix)

    def gauge(self, points):
        pts = self._points(points)
        return self.base.gauge(pts @ self.matrix_inv.T)

    def volume(self):
        return abs(float(self.det_exact)) * self.base.volume()

    @cached_property
    def _singular_values(self):
        return np.linalg.svd(self.matrix, compute_uv=False)

    def _mapped_vertices(self) -> np.ndarray | None:
        base = self.base
        if isinstance(base, VPolytope):
            verts = base.vertices
        elif isinstance(base, AxisBox):
            corners = np.array(list(product((-1.0, 1.0), repeat=self.dim)))
            verts = corners * base.half_widths
        elif isinstance(base, CrossPolytope):
            eye = np.eye(self.dim) * base.scale
            verts = np.vstack([eye, -eye])
        else:
            return None
        return verts @ self.matrix.T

    def support_radius(self):
        verts = self._mapped_vertices()
        if verts is not None:
            return float(np.max(np.linalg.norm(verts, axis=1)))
        return float(self._singular_values[0]) * self.base.support_radius()

    def inradius(self):
        base = self.base
        normals, offsets = _base_facets(base)
        if normals is not None:
            mapped = normals @ self.matrix_inv  # rows n^T A^{-1}
            return float(np.min(offsets / np.linalg.norm(mapped, axis=1)))
        return float(self._singular_values[-1]) * base.inradius()

    def extent(self, axis):
        verts = self._mapped_vertices()
        if verts is not None:
            return float(np.max(np.abs(verts[:, axis])))
        # support function of A*Ball(r) in direction e_axis is r * |row_axis(A)|
        return self.base.support_radius() * float(
            np.linalg.norm(self.matrix[axis]))

    def to_dict(self):
        return {"type": "linear_image", "dim": self.dim,
                "matrix": [[_num_out(c) for c in r] for r in self.matrix_exact],
                "base": self.base.to_dict()}

    def describe(self):
        return f"linear_image(dim={self.dim}, base={self.base.describe()})"


def _base_facets(body: Body):
    """Facet description (normals, offsets) for polytopal bodies, else None."""
    if isinstance(body, VPolytope):
        return body._facets
    if isinstance(body, AxisBox):
        eye = np.eye(body.dim)
        normals = np.vstack([eye, -eye])
        offsets = np.concatenate([body.half_widths, body.half_widths])
        return normals, offsets
    if isinstance(body, CrossPolytope):
        signs = np.array(list(product((-1.0, 1.0), repeat=body.dim)))
        return signs, np.full(len(signs), body.scale)
    return None, None


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


# ---------------------------------------------------------------------------
# linear-map simplification
# ---------------------------------------------------------------------------

def _is_exact_diagonal(mat) -> bool:
    n = len(mat)
    return all(mat[i][j] == 0 for i in range(n) for j in range(n) if i != j)


def _exact_similarity_scale(mat) -> Fraction | None:
    """If A^T A = s^2 I exactly with s rational, return s, else None."""
    n = len(mat)
    at_a = exact_matmul(tuple(zip(*mat)), mat)
    s2 = at_a[0][0]
    for i in range(n):
        for j in range(n):
            want = s2 if i == j else Fraction(0)
            if at_a[i][j] != want:
                return None
    return _fraction_sqrt(s2)


def _is_signed_permutation_scaled(mat) -> Fraction | None:
    """If A = c * (signed permutation) exactly, return |c|, else None."""
    n = len(mat)
    c = None
    for row in mat:
        nonzero = [abs(v) for v in row if v != 0]
        if len(nonzero) != 1:
            return None
        if c is None:
            c = nonzero[0]
        elif nonzero[0] != c:
            return None
    for j in range(n):
        col_nonzero = sum(1 for i in range(n) if mat[i][j] != 0)
        if col_nonzero != 1:
            return None
    return c


def _apply_linear(body: Body, mat) -> Body:
    if isinstance(body, LinearImage):
        combined = exact_matmul(mat, body.matrix_exact)
        return _apply_linear(body.base, combined)
    if isinstance(body, AxisBox) and _is_exact_diagonal(mat):
        hw = tuple(abs(mat[i][i]) * body.half_widths_exact[i]
                   for i in range(body.dim))
        return AxisBox(hw)
    if isinstance(body, Ball):
        s = _exact_similarity_scale(mat)
        if s is not None:
            return Ball(body.dim, s * body.radius_exact)
        # fall back to a float check for nearly-orthogonal maps: only the
        # exact test may simplify, otherwise the gauge would silently drift
        a = np.array([[float(c) for c in r] for r in mat])
        gram = a.T @ a
        scale = gram[0, 0]
        if scale > 0 and np.max(np.abs(gram - scale * np.eye(body.dim))) \
                <= ORTHOGONALITY_TOL * scale:
            exact_scale = _fraction_sqrt(as_fraction(gram[0, 0]))
            if exact_scale is not None:
                return Ball(body.dim, exact_scale * body.radius_exact)
    if isinstance(body, CrossPolytope):
        c = _is_signed_permutation_scaled(mat)
        if c is not None:
            return CrossPolytope(body.dim, c * body.scale_exact)
    if isinstance(body, VPolytope):
        mapped = exact_matmul(body.vertices_exact, tuple(zip(*mat)))
        return VPolytope(mapped)
    return LinearImage(body, mat)


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------

def body_to_json(body: Body) -> str:
    return json.dumps(body.to_dict())


def body_from_dict(d: dict) -> Body:
    kind = d.get("type")
    if kind == "ball":
        return Ball(int(d["dim"]), as_fraction(d["radius"]))
    if kind == "box":
        return AxisBox([as_fraction(h) for h in d["half_widths"]])
    if kind == "cross":
        return CrossPolytope(int(d["dim"]), as_fraction(d["scale"]))
    if kind == "vpolytope":
        return VPolytope([[as_fraction(c) for c in r]
                          for r in d["vertices"]])
    if kind == "linear_image":
        base = body_from_dict(d["base"])
        mat = [[as_fraction(c) for c in r] for r in d["matrix"]]
        return LinearImage(base, mat)
    raise GeometryError(f"unknown body type {kind!r}")


def body_from_json(text: str) -> Body:
    return body_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# random generation
# ---------------------------------------------------------------------------

def random_symmetric_polytope(dim: int, n_points: int,
                              rng: np.random.Generator) -> VPolytope:
    """Hull of n_points Gaussian samples together with their negatives.

    Gaussian points are in general position almost surely, so the result
    is full-dimensional as soon as n_points >= dim.
    """
    if n_points < dim:
        raise GeometryError("need at least dim points for a solid polytope")
    pts = rng.standard_normal((n_points, dim))
    sym = np.vstack([pts, -pts])
    return VPolytope(sym)
