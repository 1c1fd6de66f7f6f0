"""Moment tensors, isotropic normalization, and the fourth-order defect.

For a body K the raw moment tensor of order k has components

    M[i1..ik] = integral over K of x_{i1} * ... * x_{ik} dx,

computed in exact rational arithmetic for polytopes and boxes and in
closed form (rational multiples of powers of pi) for balls.  The second
moment matrix drives the isotropic normalization: there is a unique
symmetric positive matrix A with

    |det A| * A * M2 * A^T = I,

namely A = det(M2)^(1/(2(d+2))) * M2^(-1/2), and the normalized body
A K has second moment matrix equal to the identity.

The defect functional pairs the order-k moment tensor of a normalized
body with the k-th derivative tensor of the radial harmonic kernel
h(x) = |x|^(2-d), d >= 3, at a base point away from the origin.  Balls
give exactly zero at every order by the mean value property; bodies
whose defect is nonzero cannot reproduce harmonic means at fourth
order, which is the quantity the probe experiments in
:mod:`maxlab.maxop` measure dynamically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np

from .bodies import (AxisBox, Ball, Body, CrossPolytope, LinearImage,
                     VPolytope, as_fraction, exact_det)
from .config import (CERT_EPSILON, CONDITION_CAP, DEFAULT_POINT_RADIUS,
                     ISOTROPY_TOL, ORTHOGONALITY_TOL)
from .errors import (DegenerateBodyError, GeometryError, IsotropyError,
                     SingularMatrixError)
from .symtensor import (SymmetricTensor, index_to_exponents, multiplicity,
                        sorted_indices)

__all__ = [
    "moment_tensor",
    "moment_tensor_exact",
    "second_moment_matrix",
    "isotropy_error",
    "isotropize",
    "IsotropizeResult",
    "green_coeffs",
    "green_coeffs_exact",
    "laplacian_defect",
    "obstruction",
    "is_obstructed",
    "certify",
    "quasi_uniform_rotations",
    "rotation_scan",
]

MOMENT_ORDERS = (2, 4, 6)
DEFECT_ORDERS = (4, 6)


# ---------------------------------------------------------------------------
# exact moment tensors
# ---------------------------------------------------------------------------

def _box_moment(half_widths: tuple[Fraction, ...], alpha) -> Fraction:
    out = Fraction(1)
    for h, a in zip(half_widths, alpha):
        if a % 2:
            return Fraction(0)
        out *= 2 * h ** (a + 1) / (a + 1)
    return out


def _cross_moment(dim: int, scale: Fraction, alpha) -> Fraction:
    # integral over the l1 ball of radius `scale` of prod x_i^{a_i}:
    # 2^d * scale^(|a|+d) * prod(a_i!) / (|a|+d)!  for even exponents
    if any(a % 2 for a in alpha):
        return Fraction(0)
    k = sum(alpha)
    num = Fraction(2 ** dim) * scale ** (k + dim)
    for a in alpha:
        num *= math.factorial(a)
    return num / math.factorial(k + dim)


def _ball_moment_float(dim: int, radius: float, alpha) -> float:
    if any(a % 2 for a in alpha):
        return 0.0
    k = sum(alpha)
    num = 2.0 * radius ** (k + dim)
    for a in alpha:
        num *= math.gamma((a + 1) / 2.0)
    return num / ((k + dim) * math.gamma((k + dim) / 2.0))


def _ball_moment_exact(dim: int, radius: Fraction, alpha):
    """Rational multiple of pi**floor(dim/2), as a sympy expression."""
    import sympy as sp

    if any(a % 2 for a in alpha):
        return sp.Integer(0)
    k = sum(alpha)
    # prod Gamma(b_i + 1/2) = pi^(d/2) prod (2b)!/(4^b b!)
    coeff = Fraction(2)
    for a in alpha:
        b = a // 2
        coeff *= Fraction(math.factorial(2 * b),
                          4 ** b * math.factorial(b))
    n2 = k + dim  # the full exponent in Gamma(n2 / 2)
    if n2 % 2 == 0:
        # denominator Gamma is an integer factorial; net power of pi is d/2
        coeff /= math.factorial(n2 // 2 - 1)
        pi_pow = dim // 2  # dim is even here since k is even
    else:
        # Gamma(n + 1/2) = (2n)! sqrt(pi) / (4^n n!), n = (n2 - 1) / 2
        n = (n2 - 1) // 2
        coeff *= Fraction(4 ** n * math.factorial(n),
                          math.factorial(2 * n))
        pi_pow = (dim - 1) // 2
    coeff = coeff * radius ** (k + dim) / n2
    return sp.Rational(coeff.numerator, coeff.denominator) * sp.pi ** pi_pow


def _simplex_cone_moment(vertices, alpha) -> Fraction:
    """integral of x^alpha over conv(0, v_1, ..., v_d), exact.

    Parametrize x = sum_j t_j v_j over the standard simplex and expand the
    monomial; each assignment of factor -> generator contributes a product
    of vertex coordinates times a Dirichlet integral of the t-monomial.
    """
    d = len(vertices)
    k = sum(alpha)
    det = exact_det(vertices)
    if det == 0:
        return Fraction(0)
    idx = []
    for axis, a in enumerate(alpha):
        idx.extend([axis] * a)
    denom = math.factorial(d + k)
    total = Fraction(0)
    for assign in product(range(d), repeat=k):
        term = Fraction(1)
        counts = [0] * d
        for factor_axis, gen in zip(idx, assign):
            term *= vertices[gen][factor_axis]
            counts[gen] += 1
        if term == 0:
            continue
        weight = 1
        for c in counts:
            weight *= math.factorial(c)
        total += term * weight
    return abs(det) * total / denom


def moment_tensor_exact(body: Body, order: int) -> SymmetricTensor:
    """Raw order-k moment tensor with exact entries.

    Entries are Fractions for boxes, cross polytopes and vertex polytopes
    (and their linear images); ball entries are sympy expressions that are
    rational multiples of a power of pi.
    """
    if order not in MOMENT_ORDERS:
        raise ValueError(
            f"unsupported moment order {order}; supported: {MOMENT_ORDERS}")
    d = body.dim
    out = SymmetricTensor(d, order)
    if isinstance(body, AxisBox):
        for idx in sorted_indices(d, order):
            out.set(idx, _box_moment(body.half_widths_exact,
                                     index_to_exponents(idx, d)))
        return out
    if isinstance(body, CrossPolytope):
        for idx in sorted_indices(d, order):
            out.set(idx, _cross_moment(d, body.scale_exact,
                                       index_to_exponents(idx, d)))
        return out
    if isinstance(body, Ball):
        for idx in sorted_indices(d, order):
            out.set(idx, _ball_moment_exact(d, body.radius_exact,
                                            index_to_exponents(idx, d)))
        return out
    if isinstance(body, VPolytope):
        simplices = body.fan_simplices()
        corners = [tuple(body.vertices_exact[i] for i in s)
                   for s in simplices]
        for idx in sorted_indices(d, order):
            alpha = index_to_exponents(idx, d)
            out.set(idx, sum((_simplex_cone_moment(c, alpha)
                              for c in corners), Fraction(0)))
        return out
    if isinstance(body, LinearImage):
        base = moment_tensor_exact(body.base, order)
        return base.pushforward(body.matrix_exact, abs(body.det_exact))
    raise GeometryError(f"no moment formula for {type(body).__name__}")


def moment_tensor(body: Body, order: int) -> SymmetricTensor:
    """Raw order-k moment tensor with float entries."""
    if order not in MOMENT_ORDERS:
        raise ValueError(
            f"unsupported moment order {order}; supported: {MOMENT_ORDERS}")
    d = body.dim
    if isinstance(body, Ball):
        out = SymmetricTensor(d, order)
        for idx in sorted_indices(d, order):
            out.set(idx, _ball_moment_float(d, body.radius,
                                            index_to_exponents(idx, d)))
        return out
    if isinstance(body, LinearImage):
        base = moment_tensor(body.base, order)
        return base.pushforward(body.matrix, abs(float(body.det_exact)))
    return moment_tensor_exact(body, order).map(float)


def second_moment_matrix(body: Body) -> np.ndarray:
    m2 = moment_tensor(body, 2)
    d = body.dim
    out = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            out[i, j] = m2.get((i, j))
    return out


# ---------------------------------------------------------------------------
# isotropic normalization
# ---------------------------------------------------------------------------

@dataclass
class IsotropizeResult:
    body: Body
    matrix: np.ndarray
    error_before: float
    error_after: float


def isotropy_error(body: Body) -> float:
    """Max absolute entrywise deviation of the second moment matrix from I."""
    return float(np.max(np.abs(second_moment_matrix(body) - np.eye(body.dim))))


def normalizing_matrix(body: Body) -> np.ndarray:
    """The unique SPD matrix A with |det A| A M2 A^T = I."""
    m2 = second_moment_matrix(body)
    m2 = 0.5 * (m2 + m2.T)
    eigvals, eigvecs = np.linalg.eigh(m2)
    if np.any(eigvals <= 0):
        raise DegenerateBodyError(
            "second moment matrix is not positive definite")
    if eigvals[-1] / eigvals[0] > CONDITION_CAP:
        raise SingularMatrixError(
            "second moment matrix condition number "
            f"{eigvals[-1] / eigvals[0]:.3e} exceeds cap {CONDITION_CAP:.1e}")
    d = body.dim
    det = float(np.prod(eigvals))
    inv_sqrt = eigvecs @ np.diag(eigvals ** -0.5) @ eigvecs.T
    return det ** (1.0 / (2 * (d + 2))) * inv_sqrt


def isotropize(body: Body) -> IsotropizeResult:
    """Apply the normalizing map; the result has second moments == I."""
    before = isotropy_error(body)
    a = normalizing_matrix(body)
    mapped = body.linear_map(a)
    after = isotropy_error(mapped)
    return IsotropizeResult(body=mapped, matrix=a,
                            error_before=before, error_after=after)


# ---------------------------------------------------------------------------
# derivative tensors of the radial harmonic kernel
# ---------------------------------------------------------------------------
#
# Terms are stored as {(beta, q): coeff} meaning coeff * x^beta * r^q with
# r = |x|.  Differentiation is closed on this family:
#   d/dx_i [c x^beta r^q] = c beta_i x^(beta - e_i) r^q
#                         + c q x^(beta + e_i) r^(q - 2).

def _differentiate(terms: dict, axis: int) -> dict:
    out: dict = {}
    for (beta, q), c in terms.items():
        if beta[axis] > 0:
            nb = list(beta)
            nb[axis] -= 1
            key = (tuple(nb), q)
            out[key] = out.get(key, Fraction(0)) + c * beta[axis]
        if q != 0:
            nb = list(beta)
            nb[axis] += 1
            key = (tuple(nb), q - 2)
            out[key] = out.get(key, Fraction(0)) + c * q
    return {k: v for k, v in out.items() if v != 0}


@lru_cache(maxsize=None)
def _green_terms(dim: int, idx: tuple[int, ...]) -> dict:
    """Symbolic derivative d^idx of h = |x|^(2-d), valid for d >= 3."""
    if dim < 3:
        raise GeometryError("the radial harmonic kernel needs dim >= 3")
    if not idx:
        return {((0,) * dim, 2 - dim): Fraction(1)}
    return _differentiate(_green_terms(dim, idx[:-1]), idx[-1])


def _eval_terms_float(terms: dict, point: np.ndarray) -> float:
    r = float(np.linalg.norm(point))
    total = 0.0
    for (beta, q), c in terms.items():
        val = float(c) * r ** q
        for x, b in zip(point, beta):
            if b:
                val *= float(x) ** b
        total += val
    return total


def _eval_terms_exact(terms: dict, point: tuple[Fraction, ...]):
    """Exact value; Fraction when |point| is rational, sympy otherwise."""
    r2 = sum(x * x for x in point)
    if r2 == 0:
        raise GeometryError("kernel derivatives are singular at the origin")
    from .bodies import _fraction_sqrt

    r = _fraction_sqrt(r2)
    if r is not None:
        total = Fraction(0)
        for (beta, q), c in terms.items():
            val = c * r ** q
            for x, b in zip(point, beta):
                if b:
                    val *= x ** b
            total += val
        return total
    import sympy as sp

    rs = sp.sqrt(sp.Rational(r2.numerator, r2.denominator))
    total = sp.Integer(0)
    for (beta, q), c in terms.items():
        val = sp.Rational(c.numerator, c.denominator) * rs ** q
        for x, b in zip(point, beta):
            if b:
                val *= sp.Rational(x.numerator, x.denominator) ** b
        total += val
    return sp.simplify(total)


def _check_defect_order(order: int) -> None:
    if order not in DEFECT_ORDERS:
        raise ValueError(
            f"unsupported derivative order {order}; supported: {DEFECT_ORDERS}")


def green_coeffs(dim: int, point, order: int) -> SymmetricTensor:
    """Order-k derivative tensor of the radial harmonic kernel at `point`."""
    _check_defect_order(order)
    if dim < 3:
        raise GeometryError("the radial harmonic kernel needs dim >= 3")
    pt = np.asarray(point, dtype=float)
    if pt.shape != (dim,):
        raise GeometryError(f"point must have shape ({dim},)")
    if not np.linalg.norm(pt) > 0:
        raise GeometryError("kernel derivatives are singular at the origin")
    out = SymmetricTensor(dim, order)
    for idx in sorted_indices(dim, order):
        out.set(idx, _eval_terms_float(_green_terms(dim, idx), pt))
    return out


def green_coeffs_exact(dim: int, point, order: int) -> SymmetricTensor:
    _check_defect_order(order)
    if dim < 3:
        raise GeometryError("the radial harmonic kernel needs dim >= 3")
    pt = tuple(as_fraction(x) for x in point)
    if len(pt) != dim:
        raise GeometryError(f"point must have {dim} coordinates")
    out = SymmetricTensor(dim, order)
    for idx in sorted_indices(dim, order):
        out.set(idx, _eval_terms_exact(_green_terms(dim, idx), pt))
    return out


def laplacian_defect(dim: int, point, order: int) -> float:
    """Max |trace over one index pair| of the derivative tensor.

    Zero in exact arithmetic because the kernel is harmonic away from the
    origin; the float value measures accumulated roundoff only.
    """
    return green_coeffs(dim, point, order).trace_pair().max_abs()


# ---------------------------------------------------------------------------
# the defect functional and its certification
# ---------------------------------------------------------------------------

def _default_point(dim: int) -> np.ndarray:
    pt = np.zeros(dim)
    pt[0] = DEFAULT_POINT_RADIUS
    return pt


def obstruction(body: Body, order: int = 4, point=None) -> float:
    """Full contraction of the kernel derivative tensor with the moments.

    The body must already be isotropic (second moments == identity within
    ISOTROPY_TOL); normalize first with :func:`isotropize`, or call
    :func:`certify` which does so internally.
    """
    _check_defect_order(order)
    if body.dim < 3:
        raise GeometryError("the defect functional needs dimension >= 3")
    err = isotropy_error(body)
    if err > ISOTROPY_TOL:
        raise IsotropyError(
            f"body is not isotropic (error {err:.3e} > {ISOTROPY_TOL:.1e}); "
            "apply isotropize() first")
    pt = _default_point(body.dim) if point is None else \
        np.asarray(point, dtype=float)
    g = green_coeffs(body.dim, pt, order)
    m = moment_tensor(body, order)
    return float(g.contract_full(m))


def is_obstructed(body: Body, order: int = 4, point=None,
                  epsilon: float = CERT_EPSILON) -> bool:
    return abs(obstruction(body, order, point)) > epsilon


def _diagonal_exact_m2(body: Body):
    """Exact second moments if diagonal, as a list of entries, else None."""
    m2 = moment_tensor_exact(body, 2)
    d = body.dim
    diag = []
    for i in range(d):
        for j in range(i, d):
            v = m2.get((i, j))
            if i == j:
                diag.append(v)
            elif v != 0:
                return None
    return diag


def certify(body: Body, order: int = 4, point=None) -> dict:
    """Decide whether the defect of the normalized body vanishes.

    The raw body is normalized internally.  When the exact second moment
    matrix is diagonal (balls, boxes, cross polytopes, axis-aligned
    stretches of these) the normalizer is an exact diagonal radical and
    the decision is made in symbolic arithmetic, reported with
    ``arithmetic: "exact"``.  Otherwise the normalization and contraction
    run in floats and the verdict compares |Q| against CERT_EPSILON.
    """
    _check_defect_order(order)
    d = body.dim
    if d < 3:
        raise GeometryError("the defect functional needs dimension >= 3")
    pt = _default_point(d) if point is None else np.asarray(point, dtype=float)
    if not np.linalg.norm(pt) > 0:
        raise GeometryError("base point must be away from the origin")

    diag = _diagonal_exact_m2(body)
    point_exact = None
    try:
        point_exact = tuple(as_fraction(float(x)) for x in pt)
    except (TypeError, ValueError):
        pass

    if diag is not None and point_exact is not None:
        import sympy as sp

        def to_sym(v):
            if isinstance(v, Fraction):
                return sp.Rational(v.numerator, v.denominator)
            return sp.sympify(v)

        m_diag = [to_sym(v) for v in diag]
        det = sp.prod(m_diag)
        # A = det^(1/(2(d+2))) diag(m_i^(-1/2)),  |det A| = det^(-1/(d+2))
        scale = det ** sp.Rational(1, 2 * (d + 2))
        a_diag = [scale / sp.sqrt(m) for m in m_diag]
        det_a = det ** sp.Rational(-1, d + 2)

        moments = moment_tensor_exact(body, order)
        greens = green_coeffs_exact(d, point_exact, order)
        q = sp.Integer(0)
        for idx in sorted_indices(d, order):
            t = moments.get(idx)
            if t == 0:
                continue
            factor = det_a
            for ax in idx:
                factor *= a_diag[ax]
            q += multiplicity(idx) * to_sym(greens.get(idx)) \
                * factor * to_sym(t)
        q = sp.simplify(sp.powsimp(q))
        zero = bool(q == 0) or q.is_zero is True
        return {
            "body": body.describe(),
            "dim": d,
            "order": order,
            "point": [float(x) for x in pt],
            "Q": 0.0 if zero else float(q),
            "Q_exact": str(q),
            "is_obstructed": not zero,
            "arithmetic": "exact",
        }

    result = isotropize(body)
    q = obstruction(result.body, order, pt)
    return {
        "body": body.describe(),
        "dim": d,
        "order": order,
        "point": [float(x) for x in pt],
        "Q": q,
        "Q_exact": None,
        "is_obstructed": abs(q) > CERT_EPSILON,
        "arithmetic": "float",
    }


# ---------------------------------------------------------------------------
# rotation scans
# ---------------------------------------------------------------------------

def quasi_uniform_rotations(n: int, dim: int = 3, seed: int = 0) -> np.ndarray:
    """n rotation matrices spread quasi-uniformly over the rotation group.

    dim 3 uses the subgroup-algorithm map from a Sobol sequence on the
    cube to unit quaternions; dim 2 uses Sobol-stratified angles.
    """
    from scipy.stats import qmc

    n_draw = 1 << max(0, int(np.ceil(np.log2(max(1, n)))))
    if dim == 2:
        eng = qmc.Sobol(d=1, scramble=True, seed=seed)
        angles = 2.0 * np.pi * eng.random(n_draw)[:n, 0]
        c, s = np.cos(angles), np.sin(angles)
        return np.stack([np.stack([c, -s], axis=-1),
                         np.stack([s, c], axis=-1)], axis=-2)
    if dim == 3:
        from scipy.spatial.transform import Rotation

        eng = qmc.Sobol(d=3, scramble=True, seed=seed)
        u = eng.random(n_draw)[:n]
        # Shoemake's map: uniform points of the unit quaternion sphere
        q = np.stack([
            np.sqrt(1.0 - u[:, 0]) * np.sin(2 * np.pi * u[:, 1]),
            np.sqrt(1.0 - u[:, 0]) * np.cos(2 * np.pi * u[:, 1]),
            np.sqrt(u[:, 0]) * np.sin(2 * np.pi * u[:, 2]),
            np.sqrt(u[:, 0]) * np.cos(2 * np.pi * u[:, 2]),
        ], axis=-1)
        return Rotation.from_quat(q).as_matrix()
    raise GeometryError("rotation scans support dim 2 and 3 only")


def rotation_scan(body: Body, order: int, rotations, point=None) -> dict:
    """Defect values of rotated copies of an isotropic body.

    Rotations commute with the isotropic normalization, so each rotated
    copy is again isotropic and its defect equals the defect of the
    original body at the back-rotated point.  Averaging over the rotation
    group kills the defect exactly (the derivative tensor restricted to a
    sphere integrates to zero against the moments), so the average over a
    quasi-uniform rotation set should shrink as the set grows.
    """
    d = body.dim
    pt = _default_point(d) if point is None else np.asarray(point, dtype=float)
    mats = [np.asarray(r, dtype=float) for r in rotations]
    for k, rot in enumerate(mats):
        if rot.shape != (d, d):
            raise GeometryError(
                f"rotation {k} has shape {rot.shape}, expected ({d}, {d})")
        gram_dev = float(np.max(np.abs(rot.T @ rot - np.eye(d))))
        if gram_dev > ORTHOGONALITY_TOL:
            raise GeometryError(
                f"rotation {k} is not orthogonal "
                f"(Gram deviation {gram_dev:.3e} > {ORTHOGONALITY_TOL:.1e})")
    values = [obstruction(body.linear_map(rot), order, pt) for rot in mats]
    avg = float(np.mean(values)) if values else 0.0
    return {
        "values": values,
        "average": avg,
        "max_abs": float(np.max(np.abs(values))) if values else 0.0,
    }
