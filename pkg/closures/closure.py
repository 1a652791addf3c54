"""Moment inversion and the algebraic objects of the closed moment system.

For entropic variables lambda the ansatz is I(Omega) = beta(lambda . m(Omega)),
and the closure produces

    U      = int m beta(lambda . m) dOmega
    F_d    = int Omega_d m beta(lambda . m) dOmega        d = x, y, z
    LU     = int m sigma (<beta> - beta) dOmega           <.> the angular mean

All integrals are quadrature sums; with a rule sized by
:func:`required_exactness` they are exact up to roundoff because beta is a
polynomial.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh

from . import renorm
from .exceptions import DomainError, MomentRangeError
from .renorm import MapFamily, RenormalizationMap
from .sphere import (
    FOUR_PI,
    EntropicVariables,
    MomentVector,
    QuadratureRule,
    SphericalBasis,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100
MAX_HALVINGS = 40
TIKHONOV_SHIFT = 1e-12

LATLONG_SHAPE = (181, 360)

AXIS_DIRECTIONS = np.array([
    [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0], [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
])
SIX_GAUSSIAN_WIDTH = 5.0


@dataclass(frozen=True)
class InversionReport:
    lam: EntropicVariables
    iterations: int
    residual_norm: float
    jacobian_min_eigenvalue_estimate: float
    converged: bool
    status: str
    tolerance: float

    def to_dict(self) -> dict:
        return {
            'lambda': self.lam.to_list(),
            'N': self.lam.N,
            'iterations': self.iterations,
            'residual_norm': self.residual_norm,
            'jacobian_min_eigenvalue_estimate': self.jacobian_min_eigenvalue_estimate,
            'converged': self.converged,
            'status': self.status,
            'tolerance': self.tolerance,
        }


def required_exactness(rmap: RenormalizationMap, N: int) -> int:
    """Degree that makes U, F and the Jacobian exact: m m^T beta'(.) has degree 2N + (deg p - 1) N"""
    return 2 * N + (rmap.degree - 1) * N + 2


@lru_cache(maxsize=16)
def _design_matrix(basis: SphericalBasis, rule: QuadratureRule) -> np.ndarray:
    matrix = basis.evaluate(rule.nodes)
    matrix.setflags(write=False)
    return matrix


def _as_lambda(lam, basis: SphericalBasis) -> np.ndarray:
    values = np.asarray(lam, dtype=float)
    if values.shape != (basis.size,):
        raise DomainError(f"entropic variables for N={basis.N} need {basis.size} entries, got {values.shape}")
    return values


def _check_exactness(rule: QuadratureRule, needed: int, what: str) -> None:
    if rule.exactness < needed:
        raise DomainError(f"{what} needs a rule exact to degree {needed}, got {rule.exactness} ({rule.provenance})")


def moments_of(rmap: RenormalizationMap, lam, basis: SphericalBasis, rule: QuadratureRule) -> MomentVector:
    _check_exactness(rule, basis.N + rmap.degree * basis.N, 'moments')
    Mq = _design_matrix(basis, rule)
    values = renorm.eval_map(rmap, Mq @ _as_lambda(lam, basis))
    return MomentVector(Mq.T @ (rule.weights * values), basis.N)


def jacobian(rmap: RenormalizationMap, lam, basis: SphericalBasis, rule: QuadratureRule) -> np.ndarray:
    """int m m^T beta'(lambda . m) dOmega, symmetric positive semidefinite for monotone maps"""
    _check_exactness(rule, 2 * basis.N + (rmap.degree - 1) * basis.N, 'the moment Jacobian')
    Mq = _design_matrix(basis, rule)
    slopes = renorm.eval_map_derivative(rmap, Mq @ _as_lambda(lam, basis))
    J = Mq.T @ ((rule.weights * slopes)[:, None] * Mq)
    return 0.5 * (J + J.T)


def flux_and_collision_moments(rmap: RenormalizationMap, lam, basis: SphericalBasis, rule: QuadratureRule,
                               sigma: float) -> Tuple[Tuple[MomentVector, MomentVector, MomentVector], MomentVector]:
    if sigma < 0:
        raise DomainError(f"scattering coefficient must be non-negative, got {sigma}")
    _check_exactness(rule, basis.N + 1 + rmap.degree * basis.N, 'flux moments')
    Mq = _design_matrix(basis, rule)
    values = renorm.eval_map(rmap, Mq @ _as_lambda(lam, basis))
    weighted = rule.weights * values
    flux = tuple(MomentVector(Mq.T @ (rule.nodes[:, d] * weighted), basis.N) for d in range(3))

    mean = float(np.dot(rule.weights, values)) / FOUR_PI
    collision = MomentVector(Mq.T @ (rule.weights * sigma * (mean - values)), basis.N)
    return flux, collision


def isotropic_start(rmap: RenormalizationMap, U, basis: SphericalBasis) -> EntropicVariables:
    """lambda with only the constant component, reproducing U_0"""
    level = float(np.asarray(U)[0]) / math.sqrt(FOUR_PI)
    try:
        argument = renorm.invert_map(rmap, level)
    except MomentRangeError as exc:
        raise MomentRangeError(
            f"U_0 = {float(np.asarray(U)[0]):.6g} cannot be reached by {rmap.label(basis.N)}: {exc.message}",
            details=exc.details,
        ) from exc
    lam = np.zeros(basis.size)
    lam[0] = math.sqrt(FOUR_PI) * argument
    return EntropicVariables(lam, basis.N)


def _newton_step(J: np.ndarray, residual: np.ndarray) -> Optional[np.ndarray]:
    try:
        return cho_solve(cho_factor(J), residual)
    except LinAlgError:
        pass
    shift = TIKHONOV_SHIFT * max(float(np.trace(J)), np.finfo(float).tiny)
    try:
        return cho_solve(cho_factor(J + shift * np.eye(len(J))), residual)
    except LinAlgError:
        return None


def invert(rmap: RenormalizationMap, U_target, basis: SphericalBasis, rule: QuadratureRule,
           tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
           lambda0=None) -> InversionReport:
    """Solve moments_of(lambda) = U_target by damped Newton

    Non-convergence is reported through ``converged``/``status``, never raised.
    A zeroth moment outside the range of the map raises MomentRangeError
    before any iteration when no starting point is given.
    """
    U = np.asarray(U_target, dtype=float)
    if U.shape != (basis.size,):
        raise DomainError(f"moment vector for N={basis.N} needs {basis.size} entries, got {U.shape}")
    if not np.all(np.isfinite(U)):
        raise DomainError("moment vector contains non-finite entries")
    _check_exactness(rule, basis.N + rmap.degree * basis.N, 'moment inversion')

    if lambda0 is None:
        lam = np.array(isotropic_start(rmap, U, basis).values)
    else:
        lam = _as_lambda(lambda0, basis).copy()

    threshold = tol * (1.0 + float(np.linalg.norm(U)))
    residual = np.asarray(moments_of(rmap, lam, basis, rule)) - U
    residual_norm = float(np.linalg.norm(residual))
    iterations = 0
    status = 'max_iter'

    while True:
        if not np.isfinite(residual_norm):
            status = 'non_finite'
            break
        if residual_norm <= threshold:
            status = 'converged'
            break
        if iterations >= max_iter:
            break

        step = _newton_step(jacobian(rmap, lam, basis, rule), residual)
        if step is None:
            status = 'singular_jacobian'
            break

        accepted = False
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = lam - scale * step
            trial_residual = np.asarray(moments_of(rmap, trial, basis, rule)) - U
            trial_norm = float(np.linalg.norm(trial_residual))
            if np.isfinite(trial_norm) and trial_norm < residual_norm:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            status = 'line_search'
            break

        lam, residual, residual_norm = trial, trial_residual, trial_norm
        iterations += 1
        logger.debug(f"invert iteration {iterations}: |R| = {residual_norm:.3e}, step scale {scale:g}")

    if np.all(np.isfinite(lam)):
        min_eigenvalue = float(eigvalsh(jacobian(rmap, lam, basis, rule))[0])
    else:
        status = 'non_finite'
        min_eigenvalue = math.nan

    converged = status == 'converged'
    if converged:
        logger.info(f"{rmap.label(basis.N)} inverted in {iterations} iterations, |R| = {residual_norm:.3e}")
    else:
        logger.warning(
            f"{rmap.label(basis.N)} inversion stopped ({status}) after {iterations} iterations, |R| = {residual_norm:.3e}"
        )
    return InversionReport(
        lam=EntropicVariables(lam, basis.N),
        iterations=iterations,
        residual_norm=residual_norm,
        jacobian_min_eigenvalue_estimate=min_eigenvalue,
        converged=converged,
        status=status,
        tolerance=threshold,
    )


@dataclass(frozen=True)
class Reconstruction:
    """Omega -> beta(lambda . m(Omega))"""
    rmap: RenormalizationMap
    lam: EntropicVariables
    basis: SphericalBasis

    def __call__(self, omega):
        arguments = self.basis.evaluate(omega) @ np.asarray(self.lam)
        return renorm.eval_map(self.rmap, arguments)


def reconstruct(rmap: RenormalizationMap, lam, basis: SphericalBasis) -> Reconstruction:
    if not isinstance(lam, EntropicVariables):
        lam = EntropicVariables(_as_lambda(lam, basis), basis.N)
    return Reconstruction(rmap, lam, basis)


def dirac_moments(basis: SphericalBasis, directions: Iterable[Sequence[float]],
                  amplitudes: Optional[Sequence[float]] = None) -> MomentVector:
    """Moments of sum_k a_k delta(Omega - Omega_k), i.e. sum_k a_k m(Omega_k)"""
    directions = np.atleast_2d(np.asarray(list(directions), dtype=float))
    norms = np.linalg.norm(directions, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise DomainError("beam directions must be unit vectors")
    if amplitudes is None:
        amplitudes = np.ones(len(directions))
    return MomentVector(np.asarray(amplitudes, dtype=float) @ basis.evaluate(directions), basis.N)


def intensity_moments(intensity: Callable[[np.ndarray], np.ndarray], basis: SphericalBasis,
                      rule: QuadratureRule) -> MomentVector:
    """Moments of a smooth intensity by quadrature"""
    values = np.asarray(intensity(rule.nodes), dtype=float)
    return MomentVector(_design_matrix(basis, rule).T @ (rule.weights * values), basis.N)


def six_gaussian_intensity(omega) -> np.ndarray:
    """sum over the six axis directions of exp(-5 |Omega - Omega_k|^2)"""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    distances = ((omega[:, None, :] - AXIS_DIRECTIONS[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-SIX_GAUSSIAN_WIDTH * distances).sum(axis=1)


def sphere_l2_error(exact: Callable, approximation: Callable, rule: QuadratureRule) -> float:
    diff = np.asarray(exact(rule.nodes), dtype=float) - np.asarray(approximation(rule.nodes), dtype=float)
    return float(math.sqrt(np.dot(rule.weights, diff * diff)))


def entropy_of(rmap: RenormalizationMap, lam, basis: SphericalBasis, rule: QuadratureRule) -> float:
    """int eta_K(beta_K(lambda . m)) dOmega for phi-divergence maps"""
    if rmap.family is not MapFamily.PHI_DIVERGENCE:
        raise DomainError(f"entropy is only available in closed form for beta_K maps, not {rmap.label()}")
    values = renorm.eval_map(rmap, _design_matrix(basis, rule) @ _as_lambda(lam, basis))
    return float(np.dot(rule.weights, renorm.entropy_density(rmap.params['K'], values)))


def latlong_grid(shape: Tuple[int, int] = LATLONG_SHAPE):
    """Cell-centred polar/azimuth angles in degrees and the matching unit vectors, row-major in theta"""
    n_theta, n_phi = shape
    theta = (np.arange(n_theta) + 0.5) * 180.0 / n_theta
    phi = (np.arange(n_phi) + 0.5) * 360.0 / n_phi
    tt, pp = np.meshgrid(np.radians(theta), np.radians(phi), indexing='ij')
    nodes = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1).reshape(-1, 3)
    theta_col, phi_col = np.meshgrid(theta, phi, indexing='ij')
    return theta_col.ravel(), phi_col.ravel(), nodes


def sample_latlong(function: Callable, shape: Tuple[int, int] = LATLONG_SHAPE):
    """Rows (theta, phi, value) of ``function`` on the lat-long grid"""
    theta, phi, nodes = latlong_grid(shape)
    values = np.asarray(function(nodes), dtype=float)
    return theta, phi, values, nodes
