"""Real spherical harmonics and exact spherical quadrature.

Basis ordering is l-major with m running from -l to l, so Y_{l,m} sits at
index l*l + l + m. Harmonics are orthonormal on S^2 and use the real
convention without the Condon-Shortley phase:

    Y_{l,0}  = p_l^0(z)
    Y_{l,m}  = sqrt(2) p_l^m(z) Re (x + i y)^m      (m > 0)
    Y_{l,-m} = sqrt(2) p_l^m(z) Im (x + i y)^m

where p_l^m is the normalised associated Legendre function divided by
sin(theta)^m, which keeps every term polynomial in (x, y, z).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import DomainError, QuadratureFileError

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi

# point count -> algebraic degree of the published Lebedev rules
LEBEDEV_DEGREES = {
    6: 3, 14: 5, 26: 7, 38: 9, 50: 11, 74: 13, 86: 15, 110: 17, 146: 19, 170: 21,
    194: 23, 230: 25, 266: 27, 302: 29, 350: 31, 434: 35, 590: 41, 770: 47, 974: 53,
    1202: 59, 1454: 65, 1730: 71, 2030: 77, 2354: 83, 2702: 89, 3074: 95, 3470: 101,
    3890: 107, 4334: 113, 4802: 119, 5294: 125, 5810: 131,
}


@dataclass(frozen=True, eq=False)
class _CoefficientVector:
    """Coefficients against the degree-N real harmonic basis"""
    values: np.ndarray
    N: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        values.setflags(write=False)
        if values.shape != ((self.N + 1) ** 2,):
            raise DomainError(
                f"{type(self).__name__} for N={self.N} needs {(self.N + 1) ** 2} entries, got {values.shape}"
            )
        object.__setattr__(self, 'values', values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, item):
        return self.values[item]

    def to_list(self):
        return self.values.tolist()


class MomentVector(_CoefficientVector):
    """U = int m(Omega) I(Omega) dOmega"""


class EntropicVariables(_CoefficientVector):
    """lambda, the coefficients of the polynomial inside the renormalization map"""


@dataclass(frozen=True)
class SphericalBasis:
    """All real spherical harmonics Y_{l,m} with l <= N"""
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise DomainError(f"harmonic degree N must be a non-negative integer, got {self.N}")

    @property
    def size(self) -> int:
        return (self.N + 1) ** 2

    @staticmethod
    def index(l: int, m: int) -> int:
        return l * l + l + m

    def evaluate(self, omega) -> np.ndarray:
        """m(Omega) for unit vectors of shape (3,) or (Q, 3); returns (size,) or (Q, size)"""
        omega = np.asarray(omega, dtype=float)
        single = omega.ndim == 1
        points = np.atleast_2d(omega)
        x, y, z = points[:, 0], points[:, 1], points[:, 2]
        out = np.empty((points.shape[0], self.size))

        re_power = np.ones_like(x)
        im_power = np.zeros_like(x)
        q_diag = np.full_like(x, 1.0 / math.sqrt(FOUR_PI))
        for m in range(self.N + 1):
            if m > 0:
                re_power, im_power = re_power * x - im_power * y, im_power * x + re_power * y
                q_diag = q_diag * math.sqrt((2 * m + 1) / (2.0 * m))
            q_prev2 = None
            q_prev = q_diag
            for l in range(m, self.N + 1):
                if l == m:
                    q = q_diag
                elif l == m + 1:
                    q = math.sqrt(2 * m + 3) * z * q_diag
                else:
                    a_lm = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                    b_lm = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
                    q = a_lm * (z * q_prev - b_lm * q_prev2)
                if m == 0:
                    out[:, self.index(l, 0)] = q
                else:
                    out[:, self.index(l, m)] = math.sqrt(2.0) * q * re_power
                    out[:, self.index(l, -m)] = math.sqrt(2.0) * q * im_power
                if l > m:
                    q_prev2, q_prev = q_prev, q
        return out[0] if single else out


def build_basis(N: int) -> SphericalBasis:
    return SphericalBasis(N)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes on S^2 with positive weights, exact for polynomials up to ``exactness``"""
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    exactness: int
    provenance: str

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return integrate(self, f)

    def describe(self) -> dict:
        return {'provenance': self.provenance, 'exactness': self.exactness, 'points': self.size}


def gauss_legendre(n: int):
    """n-point Gauss-Legendre nodes and weights on [-1, 1]"""
    if n < 1:
        raise DomainError(f"Gauss-Legendre rule needs at least one node, got {n}")
    return leggauss(n)


def product_rule(exactness: int) -> QuadratureRule:
    """Gauss-Legendre in cos(theta) times the trapezoid rule in azimuth"""
    n_polar = max(1, math.ceil((exactness + 1) / 2))
    n_azimuth = exactness + 1
    mu, w_mu = gauss_legendre(n_polar)
    phi = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
    sin_theta = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
    nodes = np.stack([
        np.outer(sin_theta, np.cos(phi)).ravel(),
        np.outer(sin_theta, np.sin(phi)).ravel(),
        np.repeat(mu, n_azimuth),
    ], axis=1)
    weights = np.outer(w_mu, np.full(n_azimuth, 2.0 * math.pi / n_azimuth)).ravel()
    return QuadratureRule(nodes=nodes, weights=weights, exactness=int(exactness),
                          provenance=f"gauss-product({n_polar}x{n_azimuth})")


def load_lebedev(path: Union[str, Path], exactness: Optional[int] = None) -> QuadratureRule:
    """Read a Lebedev table: one node per line, 'azimuth polar weight' in degrees, weights summing to 1"""
    path = Path(path)
    try:
        table = np.loadtxt(path, dtype=float, ndmin=2)
    except (OSError, ValueError) as exc:
        raise QuadratureFileError(f"could not read Lebedev rule {path}: {exc}") from exc
    if table.shape[1] != 3 or table.shape[0] == 0:
        raise QuadratureFileError(f"Lebedev rule {path} must have three columns, got shape {table.shape}")

    degree = exactness if exactness is not None else LEBEDEV_DEGREES.get(table.shape[0])
    if degree is None:
        raise QuadratureFileError(
            f"Lebedev rule {path} has {table.shape[0]} points, which matches no known rule; pass its exactness"
        )
    azimuth = np.radians(table[:, 0])
    polar = np.radians(table[:, 1])
    weights = table[:, 2] * FOUR_PI
    if np.any(weights <= 0):
        raise QuadratureFileError(f"Lebedev rule {path} contains non-positive weights")
    if abs(weights.sum() - FOUR_PI) > 1e-10:
        raise QuadratureFileError(f"Lebedev rule {path} weights sum to {table[:, 2].sum():.15g}, expected 1")
    nodes = np.stack([np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)], axis=1)
    return QuadratureRule(nodes=nodes, weights=weights, exactness=int(degree), provenance=f"lebedev({path.name})")


def build_quadrature(exactness: int, lebedev_path: Optional[Union[str, Path]] = None) -> QuadratureRule:
    """A rule exact to degree >= exactness; a Lebedev file is used when it is exact enough"""
    if int(exactness) != exactness or exactness < 0:
        raise DomainError(f"quadrature exactness must be a non-negative integer, got {exactness}")
    exactness = int(exactness)
    if lebedev_path is not None:
        rule = load_lebedev(lebedev_path)
        if rule.exactness >= exactness:
            return rule
        logger.warning(
            f"{rule.provenance} is exact to degree {rule.exactness} < {exactness}; using a product rule instead"
        )
        fallback = product_rule(exactness)
        return QuadratureRule(nodes=fallback.nodes, weights=fallback.weights, exactness=exactness,
                              provenance=f"{fallback.provenance} [{rule.provenance} too coarse]")
    return product_rule(exactness)


def integrate(rule: QuadratureRule, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """sum_q w_q f(Omega_q); ``f`` maps (Q, 3) node arrays to (Q,) values"""
    values = np.asarray(f(rule.nodes), dtype=float)
    return float(np.dot(rule.weights, values))


def exact_monomial_integral(px: int, py: int, pz: int) -> float:
    """int_{S^2} x^px y^py z^pz dOmega in closed form"""
    if px % 2 or py % 2 or pz % 2:
        return 0.0
    return 2.0 * math.exp(
        math.lgamma((px + 1) / 2) + math.lgamma((py + 1) / 2) + math.lgamma((pz + 1) / 2)
        - math.lgamma((px + py + pz + 3) / 2)
    )


def check_rotation(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise DomainError(f"rotation must be a 3x3 matrix, got shape {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-10 or abs(np.linalg.det(R) - 1.0) > 1e-10:
        raise DomainError("matrix is not a proper rotation (R^T R = I, det R = 1)")
    return R


def rotate_basis_moments(U, R, basis: SphericalBasis, rule: QuadratureRule,
                         intensity: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> MomentVector:
    """Moments of Omega -> I(R^T Omega)

    With an explicit ``intensity`` the rotated function is integrated directly.
    Otherwise I is replaced by its degree-N expansion sum_i U_i Y_i, which
    rotates within the span of the basis, so the result is exact whenever the
    rule integrates degree 2N.
    """
    R = check_rotation(R)
    values = np.asarray(U, dtype=float)
    if intensity is None and rule.exactness < 2 * basis.N:
        raise DomainError(f"rotating degree-{basis.N} moments needs exactness >= {2 * basis.N}")
    pulled_back = rule.nodes @ R
    if intensity is None:
        samples = basis.evaluate(pulled_back) @ values
    else:
        samples = np.asarray(intensity(pulled_back), dtype=float)
    rotated = basis.evaluate(rule.nodes).T @ (rule.weights * samples)
    return MomentVector(rotated, basis.N)
