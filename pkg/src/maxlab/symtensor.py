"""Fully symmetric tensors stored by sorted multi-index.

A symmetric tensor of order k in dimension d is determined by its components
on sorted index tuples (i1 <= i2 <= ... <= ik).  Components may be floats or
exact scalars (fractions.Fraction / sympy expressions); the container is
agnostic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Iterator


def sorted_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    """All sorted index tuples of the given length with entries in [0, dim)."""
    return list(combinations_with_replacement(range(dim), order))


def index_to_exponents(idx: tuple[int, ...], dim: int) -> tuple[int, ...]:
    """Exponent vector alpha with alpha[i] = multiplicity of axis i in idx."""
    alpha = [0] * dim
    for i in idx:
        alpha[i] += 1
    return tuple(alpha)


def exponents_to_index(alpha: tuple[int, ...]) -> tuple[int, ...]:
    out: list[int] = []
    for axis, a in enumerate(alpha):
        out.extend([axis] * a)
    return tuple(out)


def multiplicity(idx: tuple[int, ...]) -> int:
    """Number of distinct orderings of the multiset idx (multinomial count)."""
    alpha: dict[int, int] = {}
    for i in idx:
        alpha[i] = alpha.get(i, 0) + 1
    m = math.factorial(len(idx))
    for a in alpha.values():
        m //= math.factorial(a)
    return m


@dataclass
class SymmetricTensor:
    """Symmetric tensor with components keyed by sorted index tuple."""

    dim: int
    order: int
    data: dict[tuple[int, ...], object] = field(default_factory=dict)

    def get(self, idx: tuple[int, ...]):
        return self.data.get(tuple(sorted(idx)), 0)

    def set(self, idx: tuple[int, ...], value) -> None:
        self.data[tuple(sorted(idx))] = value

    def items(self) -> Iterator[tuple[tuple[int, ...], object]]:
        return iter(self.data.items())

    def map(self, fn) -> "SymmetricTensor":
        return SymmetricTensor(self.dim, self.order,
                               {k: fn(v) for k, v in self.data.items()})

    def contract_full(self, other: "SymmetricTensor"):
        """Sum over ALL index tuples of self[idx] * other[idx].

        Both tensors must share dim and order; the sum over unordered
        components is weighted by the number of orderings of each multiset.
        """
        if (self.dim, self.order) != (other.dim, other.order):
            raise ValueError("tensor shape mismatch in contraction")
        total = 0
        for idx in sorted_indices(self.dim, self.order):
            a = self.get(idx)
            b = other.get(idx)
            if a == 0 or b == 0:
                continue
            total = total + multiplicity(idx) * a * b
        return total

    def trace_pair(self) -> "SymmetricTensor":
        """Contract the last two indices: out[J] = sum_m self[J + (m, m)]."""
        if self.order < 2:
            raise ValueError("need order >= 2 to trace")
        out = SymmetricTensor(self.dim, self.order - 2)
        for jdx in sorted_indices(self.dim, self.order - 2):
            s = 0
            for m in range(self.dim):
                s = s + self.get(jdx + (m, m))
            out.set(jdx, s)
        return out

    def max_abs(self) -> float:
        return max((abs(float(v)) for v in self.data.values()), default=0.0)

    def pushforward(self, matrix, det_abs) -> "SymmetricTensor":
        """Components of the tensor transported by x -> A x.

        out[i1..ik] = |det A| * sum_j A[i1,j1]...A[ik,jk] * self[j1..jk].
        `matrix` is indexable as matrix[i][j]; works for numpy arrays and
        nested lists of exact scalars alike.
        """
        from itertools import product

        k = self.order
        out = SymmetricTensor(self.dim, k)
        for idx in sorted_indices(self.dim, k):
            s = 0
            for jdx in product(range(self.dim), repeat=k):
                t = self.get(jdx)
                if t == 0:
                    continue
                coeff = det_abs
                for i_ax, j_ax in zip(idx, jdx):
                    coeff = coeff * matrix[i_ax][j_ax]
                s = s + coeff * t
            out.set(idx, s)
        return out

    def to_dense(self):
        """Dense numpy array with full symmetry expanded (float entries)."""
        import numpy as np
        from itertools import permutations

        arr = np.zeros((self.dim,) * self.order)
        for idx, v in self.data.items():
            for p in set(permutations(idx)):
                arr[p] = float(v)
        return arr
