"""Target functions and monotone polynomial renormalization maps.

Three families are built here or in :mod:`closures.sos_fit`:

* ``PhiDivergence``: beta_K(x) = (1 + x/K)^K for odd K,
* ``Taylor``: T_{2K+1}, the degree 2K+1 Taylor polynomial of the target at x0,
* ``Optimized``: the L2-optimal monotone polynomial (see ``sos_fit``).

All maps are carried in the monomial basis together with their exact
derivative and are certified monotone on a sampling grid at construction.
"""
from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import bisect

from . import poly
from .exceptions import CertificationError, DomainError, MomentRangeError
from .poly import Polynomial

logger = logging.getLogger(__name__)

CERTIFICATION_POINTS = 2001
GLOBAL_CERTIFICATION_WINDOW = (-50.0, 50.0)
CERTIFICATION_TOL = 1e-12


class TargetFunction(enum.Enum):
    """The function a renormalization map approximates"""
    BOLTZMANN_SHANNON = 'BS'
    BOSE_EINSTEIN = 'BE'

    @classmethod
    def parse(cls, value) -> 'TargetFunction':
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace('-', '_')
        aliases = {
            'BS': cls.BOLTZMANN_SHANNON, 'BOLTZMANN_SHANNON': cls.BOLTZMANN_SHANNON, 'EXP': cls.BOLTZMANN_SHANNON,
            'BE': cls.BOSE_EINSTEIN, 'BOSE_EINSTEIN': cls.BOSE_EINSTEIN, 'PLANCK': cls.BOSE_EINSTEIN,
        }
        if key not in aliases:
            raise DomainError(f"Unknown target '{value}'. Expected one of: BS, BE")
        return aliases[key]

    @property
    def domain(self) -> Tuple[float, float]:
        if self is TargetFunction.BOLTZMANN_SHANNON:
            return (-math.inf, math.inf)
        return (-math.inf, 0.0)

    def check_domain(self, x) -> None:
        if self is TargetFunction.BOSE_EINSTEIN and np.any(np.asarray(x) >= 0.0):
            raise DomainError("The Planckian target is only defined for strictly negative arguments")

    def value(self, x):
        """exp(x) for BS, 1/(exp(-x) - 1) for BE (increasing on x < 0)"""
        if self is TargetFunction.BOLTZMANN_SHANNON:
            return np.exp(x)
        return 1.0 / np.expm1(-np.asarray(x, dtype=float))

    def nth_derivative(self, n: int, x):
        if self is TargetFunction.BOLTZMANN_SHANNON:
            return np.exp(x)
        return target_derivatives_BE(n)(self.value(x))

    def derivative(self, x):
        return self.nth_derivative(1, x)


class MapFamily(enum.Enum):
    PHI_DIVERGENCE = 'beta'
    TAYLOR = 'taylor'
    OPTIMIZED = 'optimized'

    @classmethod
    def parse(cls, value) -> 'MapFamily':
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            'beta': cls.PHI_DIVERGENCE, 'phi': cls.PHI_DIVERGENCE, 'phidivergence': cls.PHI_DIVERGENCE,
            'taylor': cls.TAYLOR, 't': cls.TAYLOR,
            'optimized': cls.OPTIMIZED, 'o': cls.OPTIMIZED,
        }
        if key not in aliases:
            raise DomainError(f"Unknown map family '{value}'. Expected one of: beta, taylor, optimized")
        return aliases[key]


def _fmt(value: float) -> str:
    return format(float(value), 'g')


@dataclass(frozen=True)
class RenormalizationMap:
    """A monotone polynomial p with its derivative and provenance"""
    p: Polynomial
    dp: Polynomial
    family: MapFamily
    target: TargetFunction
    params: Dict[str, Any] = field(default_factory=dict, hash=False)

    def __call__(self, x):
        return eval_map(self, x)

    @property
    def degree(self) -> int:
        return self.p.degree

    @property
    def validity_interval(self) -> Tuple[float, float]:
        """Interval on which the map is meant to approximate its target"""
        if self.family is MapFamily.PHI_DIVERGENCE:
            K = self.params['K']
            return (-float(K), float(K))
        if self.family is MapFamily.TAYLOR:
            x0 = self.params['x0']
            if self.target is TargetFunction.BOSE_EINSTEIN:
                return (2.0 * x0, 0.0)
            return (x0 - 5.0, x0 + 5.0)
        a, b = self.params['interval']
        return (float(a), float(b))

    def label(self, N: Optional[int] = None) -> str:
        """Model label: beta_N_K, T_N_K(x0=...) or O_N_K[a,b] (N omitted when None)"""
        prefix = {MapFamily.PHI_DIVERGENCE: 'beta', MapFamily.TAYLOR: 'T', MapFamily.OPTIMIZED: 'O'}[self.family]
        head = f"{prefix}_{self.degree}" if N is None else f"{prefix}_{N}_{self.degree}"
        if self.family is MapFamily.TAYLOR:
            return f"{head}(x0={_fmt(self.params['x0'])})"
        if self.family is MapFamily.OPTIMIZED:
            a, b = self.params['interval']
            return f"{head}[{_fmt(a)},{_fmt(b)}]"
        return head

    def to_dict(self) -> Dict[str, Any]:
        return {
            'family': self.family.value,
            'target': self.target.value,
            'params': _jsonable(self.params),
            'coeffs': list(self.p.coeffs),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> 'RenormalizationMap':
        p = Polynomial(record['coeffs'])
        params = dict(record.get('params') or {})
        if 'interval' in params:
            params['interval'] = tuple(params['interval'])
        return cls(
            p=p,
            dp=poly.derivative(p),
            family=MapFamily.parse(record['family']),
            target=TargetFunction.parse(record['target']),
            params=params,
        )


def _jsonable(params: Dict[str, Any]) -> Dict[str, Any]:
    out = {}
    for key, value in params.items():
        if isinstance(value, tuple):
            value = list(value)
        elif isinstance(value, np.generic):
            value = value.item()
        out[key] = value
    return out


def eval_map(rmap: RenormalizationMap, x):
    return poly.evaluate(rmap.p, x)


def eval_map_derivative(rmap: RenormalizationMap, x):
    return poly.evaluate(rmap.dp, x)


def _horner_bound(p: Polynomial, x: np.ndarray) -> np.ndarray:
    # magnitude of sum |c_k| |x|^k bounds the rounding error of Horner evaluation
    return poly.evaluate(Polynomial(np.abs(p.array)), np.abs(x))


def certify_monotone(rmap: RenormalizationMap, points: int = CERTIFICATION_POINTS) -> None:
    """Raise CertificationError unless dp >= 0 on the validity and global grids"""
    if rmap.degree % 2 != 1:
        raise CertificationError(
            f"{rmap.label()} has even degree {rmap.degree}; monotone maps must have odd degree"
        )
    grids = [np.linspace(*rmap.validity_interval, points), np.linspace(*GLOBAL_CERTIFICATION_WINDOW, points)]
    for grid in grids:
        values = poly.evaluate(rmap.dp, grid)
        slack = CERTIFICATION_TOL * (1.0 + _horner_bound(rmap.dp, grid))
        bad = values < -slack
        if np.any(bad) or not np.all(np.isfinite(values)):
            worst = int(np.argmin(values))
            raise CertificationError(
                f"{rmap.label()} is not monotone: p'({grid[worst]:.6g}) = {values[worst]:.3e}",
                details={'x': float(grid[worst]), 'dp': float(values[worst])},
            )


def build_beta_K(K: int) -> RenormalizationMap:
    """beta_K(x) = (1 + x/K)^K expanded in monomials"""
    if int(K) != K or K < 1 or K % 2 == 0:
        raise DomainError(f"beta_K requires an odd positive K, got {K}")
    K = int(K)
    coeffs = [math.comb(K, k) / K ** k for k in range(K + 1)]
    p = Polynomial(coeffs)
    rmap = RenormalizationMap(
        p=p,
        dp=poly.derivative(p),
        family=MapFamily.PHI_DIVERGENCE,
        target=TargetFunction.BOLTZMANN_SHANNON,
        params={'K': K},
    )
    certify_monotone(rmap)
    return rmap


def eta_K(K: int, I: float) -> float:
    """Entropy dual to beta_K: K I ((K/(K+1)) I^(1/K) - 1)"""
    if I <= 0:
        raise DomainError(f"eta_K is defined for I > 0, got {I}")
    return K * I * ((K / (K + 1.0)) * I ** (1.0 / K) - 1.0)


def eta_K_derivative(K: int, I):
    """K (I^(1/K) - 1), the inverse of beta_K; the real K-th root is used for odd K"""
    I = np.asarray(I, dtype=float)
    root = np.sign(I) * np.abs(I) ** (1.0 / K)
    result = K * (root - 1.0)
    return float(result) if result.ndim == 0 else result


def entropy_density(K: int, values) -> np.ndarray:
    """Vectorised eta_K over an array of strictly positive intensities"""
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        raise DomainError("entropy density requires strictly positive intensities")
    return K * values * ((K / (K + 1.0)) * values ** (1.0 / K) - 1.0)


def target_derivatives_BE(n: int) -> Polynomial:
    """P_n with beta_BE^(n)(x) = P_n(beta_BE(x)); P_0 = u, P_{n+1} = P_n'(u) u (1 + u)"""
    if n < 0:
        raise DomainError(f"derivative order must be non-negative, got {n}")
    current = Polynomial([0.0, 1.0])
    u_one_plus_u = Polynomial([0.0, 1.0, 1.0])
    for _ in range(n):
        current = poly.multiply(poly.derivative(current), u_one_plus_u)
    return current


def build_taylor(target, K: int, x0: float) -> RenormalizationMap:
    """T_{2K+1}: the degree 2K+1 Taylor polynomial of the target about x0"""
    target = TargetFunction.parse(target)
    if int(K) != K or K < 0:
        raise DomainError(f"Taylor order K must be a non-negative integer, got {K}")
    K = int(K)
    if target is TargetFunction.BOSE_EINSTEIN and x0 >= 0:
        raise DomainError(f"Planckian Taylor maps need x0 < 0, got {x0}")

    degree = 2 * K + 1
    shifted = [float(target.nth_derivative(k, x0)) / math.factorial(k) for k in range(degree + 1)]
    p = poly.from_shifted(shifted, x0)
    rmap = RenormalizationMap(
        p=p,
        dp=poly.derivative(p),
        family=MapFamily.TAYLOR,
        target=target,
        params={'K': K, 'x0': float(x0)},
    )
    certify_monotone(rmap)
    return rmap


def invert_map(rmap: RenormalizationMap, y: float,
               window: Tuple[float, float] = GLOBAL_CERTIFICATION_WINDOW) -> float:
    """Solve map(x) = y by bisection on the sampled argument window"""
    lo, hi = window
    f_lo = eval_map(rmap, lo) - y
    f_hi = eval_map(rmap, hi) - y
    if f_lo > 0 or f_hi < 0:
        raise MomentRangeError(
            f"value {y:.6g} is outside the range [{f_lo + y:.6g}, {f_hi + y:.6g}] of {rmap.label()} on {window}",
            details={'value': y, 'window': list(window)},
        )
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    return bisect(lambda x: eval_map(rmap, x) - y, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def l2_error(rmap: RenormalizationMap, interval: Tuple[float, float], nodes: int = 400) -> float:
    """sqrt(int_a^b |p - beta|^2 dx) by Gauss-Legendre quadrature"""
    a, b = interval
    rmap.target.check_domain(np.array([a, b]))
    t, w = leggauss(nodes)
    x = 0.5 * (b - a) * t + 0.5 * (a + b)
    diff = eval_map(rmap, x) - rmap.target.value(x)
    return float(np.sqrt(0.5 * (b - a) * np.dot(w, diff * diff)))
