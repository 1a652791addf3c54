"""Dense univariate polynomials with real coefficients.

Coefficients are stored in ascending-power order, ``coeffs[k]`` multiplies
``x**k``. Nothing here trims trailing zeros behind the caller's back; use
:func:`trim` when an exact degree matters.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

Number = Union[float, int]


@dataclass(frozen=True, init=False)
class Polynomial:
    """Immutable dense polynomial c0 + c1 x + ... + cd x^d"""
    coeffs: tuple

    def __init__(self, coeffs: Iterable[Number]):
        values = tuple(float(c) for c in coeffs)
        if not values:
            values = (0.0,)
        object.__setattr__(self, 'coeffs', values)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def __call__(self, x):
        return evaluate(self, x)

    def __add__(self, other: 'Polynomial') -> 'Polynomial':
        return add(self, other)

    def __sub__(self, other: 'Polynomial') -> 'Polynomial':
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return multiply(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __len__(self):
        return len(self.coeffs)

    def __repr__(self):
        return f"Polynomial({list(self.coeffs)})"

    def to_list(self):
        return list(self.coeffs)


def evaluate(p: Polynomial, x):
    """Horner evaluation; accepts scalars or numpy arrays"""
    coeffs = p.coeffs
    result = np.zeros_like(np.asarray(x, dtype=float)) + coeffs[-1]
    for c in reversed(coeffs[:-1]):
        result = result * x + c
    if np.ndim(result) == 0:
        return float(result)
    return result


def derivative(p: Polynomial) -> Polynomial:
    if p.degree == 0:
        return Polynomial([0.0])
    k = np.arange(1, len(p.coeffs))
    return Polynomial(p.array[1:] * k)


def antiderivative(p: Polynomial, constant: Number = 0.0) -> Polynomial:
    k = np.arange(1, len(p.coeffs) + 1)
    return Polynomial(np.concatenate(([float(constant)], p.array / k)))


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    size = max(len(p), len(q))
    out = np.zeros(size)
    out[:len(p)] += p.array
    out[:len(q)] += q.array
    return Polynomial(out)


def scale(p: Polynomial, factor: Number) -> Polynomial:
    return Polynomial(p.array * float(factor))


def multiply(p: Polynomial, q: Polynomial) -> Polynomial:
    return Polynomial(np.convolve(p.array, q.array))


def compose_affine(p: Polynomial, shift: Number, slope: Number) -> Polynomial:
    """Return the polynomial x -> p(shift + slope * x) in monomial form"""
    inner = Polynomial([shift, slope])
    result = Polynomial([p.coeffs[-1]])
    for c in reversed(p.coeffs[:-1]):
        result = add(multiply(result, inner), Polynomial([c]))
    return result


def trim(p: Polynomial, threshold: float = 0.0) -> Polynomial:
    """Drop trailing coefficients with magnitude <= threshold (exact zeros by default)"""
    values = list(p.coeffs)
    while len(values) > 1 and abs(values[-1]) <= threshold:
        values.pop()
    return Polynomial(values)


def from_shifted(coeffs: Sequence[Number], center: Number) -> Polynomial:
    """Re-expand sum_k coeffs[k] (x - center)^k into the monomial basis"""
    return compose_affine(Polynomial(coeffs), -float(center), 1.0)

