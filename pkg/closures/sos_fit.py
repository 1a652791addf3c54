"""L2-optimal monotone polynomial approximation O_{2K+1}.

The derivative of the fitted polynomial is parameterised as a sum of two
squares, p'(x) = (sum a_i x^i)^2 + (sum b_i x^i)^2 with deg b < deg a, so
every parameter vector w = (C, a_0..a_K, b_0..b_{K-1}) gives a monotone
polynomial and the constrained fit becomes an unconstrained quartic
minimisation in w. Stationary points are found with damped Newton from many
random starts and the best one is kept.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg
from scipy.integrate import quad

from . import poly, special
from .exceptions import DomainError, NoConvergenceError
from .poly import Polynomial
from .renorm import MapFamily, RenormalizationMap, TargetFunction, certify_monotone

logger = logging.getLogger(__name__)

DEFAULT_STARTS = 500
MAX_ITER = 200
MAX_HALVINGS = 30
GRADIENT_TOL = 1e-10
# gradient level below which a start that stops improving counts as converged
STAGNATION_GRADIENT_TOL = 1e-6
STAGNATION_WINDOW = 5
DEDUP_TOL = 1e-6
MOMENT_CHECK_RTOL = 1e-9
REFERENCE_NODES = (128, 256, 512)
REFERENCE_RTOL = 1e-14


@dataclass(frozen=True)
class SosParameters:
    """w = (C, a_0..a_K, b_0..b_{K-1}); b_K is fixed to zero"""
    C: float
    a: Tuple[float, ...]
    b: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'C', float(self.C))
        object.__setattr__(self, 'a', tuple(float(v) for v in self.a))
        object.__setattr__(self, 'b', tuple(float(v) for v in self.b))
        if len(self.b) != len(self.a) - 1:
            raise DomainError(f"SOS parameters need len(b) = len(a) - 1, got {len(self.a)} and {len(self.b)}")

    @property
    def K(self) -> int:
        return len(self.a) - 1

    def to_vector(self) -> np.ndarray:
        return np.concatenate(([self.C], self.a, self.b))

    @classmethod
    def from_vector(cls, vector: Sequence[float], K: int) -> 'SosParameters':
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (2 * K + 2,):
            raise DomainError(f"parameter vector for K={K} must have length {2 * K + 2}, got {vector.shape}")
        return cls(C=vector[0], a=vector[1:K + 2], b=vector[K + 2:])

    def to_dict(self) -> Dict[str, Any]:
        return {'C': self.C, 'a': list(self.a), 'b': list(self.b)}


def _split(w) -> Tuple[np.ndarray, int]:
    if isinstance(w, SosParameters):
        return w.to_vector(), w.K
    vector = np.asarray(w, dtype=float)
    if vector.size % 2:
        raise DomainError(f"parameter vector must have even length 2K+2, got {vector.size}")
    return vector, vector.size // 2 - 1


def alpha_from_w(w) -> np.ndarray:
    """Monomial coefficients alpha_0..alpha_{2K+1} of the polynomial parameterised by w"""
    vector, K = _split(w)
    a = vector[1:K + 2]
    b = vector[K + 2:]
    square_sum = np.convolve(a, a)
    if K > 0:
        square_sum[:2 * K - 1] += np.convolve(b, b)
    alpha = np.empty(2 * K + 2)
    alpha[0] = vector[0]
    alpha[1:] = square_sum / np.arange(1, 2 * K + 2)
    return alpha


def jacobian_alpha(w) -> np.ndarray:
    """J = d alpha / d w; column of a_i holds (2/n) a_{n-1-i}, same band for b"""
    vector, K = _split(w)
    a = vector[1:K + 2]
    b = vector[K + 2:]
    size = 2 * K + 2
    J = np.zeros((size, size))
    J[0, 0] = 1.0
    for n in range(1, 2 * K + 2):
        for i in range(K + 1):
            j = n - 1 - i
            if 0 <= j <= K:
                J[n, 1 + i] = 2.0 * a[j] / n
        for i in range(K):
            j = n - 1 - i
            if 0 <= j <= K - 1:
                J[n, K + 2 + i] = 2.0 * b[j] / n
    return J


@dataclass(frozen=True, eq=False)
class FitProblem:
    """Gram matrix and target moments of the L2 fit on [a, b]"""
    target: TargetFunction
    K: int
    interval: Tuple[float, float]
    gram: np.ndarray = field(repr=False)
    moments: np.ndarray = field(repr=False)
    moment_check: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        return 2 * self.K + 2


def gram_matrix(interval: Tuple[float, float], size: int) -> np.ndarray:
    a, b = interval
    k = np.arange(size)
    powers = k[:, None] + k[None, :] + 1
    return (np.power(float(b), powers) - np.power(float(a), powers)) / powers


def target_moments(target: TargetFunction, interval: Tuple[float, float], size: int) -> np.ndarray:
    """beta_j = int_a^b x^j beta(x) dx in closed form (incomplete Gamma or polylog)"""
    a, b = interval
    moments = np.empty(size)
    if target is TargetFunction.BOLTZMANN_SHANNON:
        for j in range(size):
            moments[j] = (-1) ** j * (special.upper_incomplete_gamma(j + 1, -b)
                                      - special.upper_incomplete_gamma(j + 1, -a))
        return moments

    za, zb = math.exp(a), math.exp(b)
    for j in range(size):
        total = 0.0
        for k in range(j + 1):
            factor = (-1) ** (j + k) * math.factorial(j) / math.factorial(k)
            total += factor * (b ** k * special.polylog(j + 1 - k, zb) - a ** k * special.polylog(j + 1 - k, za))
        moments[j] = total
    return moments


def quadrature_moments(target: TargetFunction, interval: Tuple[float, float], size: int) -> np.ndarray:
    """Adaptive-quadrature reference for target_moments"""
    a, b = interval
    values = []
    for j in range(size):
        value, _ = quad(lambda x, j=j: x ** j * target.value(x), a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        values.append(value)
    return np.asarray(values)


def build_fit_problem(target, K: int, interval: Tuple[float, float], validate: bool = True) -> FitProblem:
    target = TargetFunction.parse(target)
    a, b = float(interval[0]), float(interval[1])
    if int(K) != K or K < 0:
        raise DomainError(f"K must be a non-negative integer, got {K}")
    if not a < b:
        raise DomainError(f"fit interval must satisfy a < b, got [{a}, {b}]")
    if target is TargetFunction.BOSE_EINSTEIN and b >= 0:
        raise DomainError(f"Planckian fits need b < 0, got [{a}, {b}]")
    K = int(K)
    size = 2 * K + 2

    moments = target_moments(target, (a, b), size)
    check: Dict[str, Any] = {'validated': False, 'source': 'closed-form'}
    if validate:
        reference = quadrature_moments(target, (a, b), size)
        scale = np.maximum(np.abs(reference), np.finfo(float).tiny)
        max_rel = float(np.max(np.abs(moments - reference) / scale))
        check = {
            'validated': True,
            'max_relative_error': max_rel,
            'passed': max_rel <= MOMENT_CHECK_RTOL,
            'source': 'closed-form',
        }
        if not check['passed']:
            # Gamma and polylog differences cancel on short intervals
            logger.warning(
                f"closed-form moments on [{a}, {b}] deviate from quadrature by {max_rel:.2e}; using quadrature"
            )
            moments = reference
            check['source'] = 'quadrature'

    return FitProblem(
        target=target,
        K=K,
        interval=(a, b),
        gram=gram_matrix((a, b), size),
        moments=moments,
        moment_check=check,
    )


def objective(problem: FitProblem, w) -> float:
    """f(alpha(w)) = 1/2 alpha^T M alpha - beta^T alpha (constant term dropped)"""
    alpha = alpha_from_w(w)
    return float(0.5 * alpha @ problem.gram @ alpha - problem.moments @ alpha)


def objective_gradient(problem: FitProblem, w) -> np.ndarray:
    """J(w)^T (M alpha(w) - beta)"""
    alpha = alpha_from_w(w)
    return jacobian_alpha(w).T @ (problem.gram @ alpha - problem.moments)


def objective_hessian(problem: FitProblem, w) -> np.ndarray:
    """J^T M J plus the curvature of alpha(w) contracted with the residual"""
    vector, K = _split(w)
    J = jacobian_alpha(vector)
    residual = problem.gram @ alpha_from_w(vector) - problem.moments
    H = J.T @ problem.gram @ J
    idx = np.arange(K + 1)
    n = idx[:, None] + idx[None, :] + 1
    H[1:K + 2, 1:K + 2] += 2.0 * residual[n] / n
    if K > 0:
        n_b = n[:K, :K]
        H[K + 2:, K + 2:] += 2.0 * residual[n_b] / n_b
    return H


@lru_cache(maxsize=None)
def _legendre_rule(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(nodes)


def reference_moments(target: TargetFunction, interval: Tuple[float, float], size: int) -> np.ndarray:
    """int_{-1}^{1} t^j beta(c + h t) dt for the interval's midpoint c and half-width h

    Gauss-Legendre on the smooth integrand, doubling the node count until two
    rules agree; adaptive quadrature takes over when they never do (Planckian
    intervals ending very close to 0).
    """
    a, b = float(interval[0]), float(interval[1])
    center, half = 0.5 * (a + b), 0.5 * (b - a)
    powers = np.arange(size)
    previous = None
    for nodes in REFERENCE_NODES:
        t, weights = _legendre_rule(nodes)
        values = np.asarray(target.value(center + half * t), dtype=float)
        current = (t[None, :] ** powers[:, None]) @ (weights * values)
        # beta > 0 and |t^j| <= 1, so every moment is bounded by the zeroth
        if previous is not None and np.max(np.abs(current - previous)) <= REFERENCE_RTOL * current[0]:
            return current
        previous = current
    logger.warning(f"Gauss-Legendre moments on [{a}, {b}] did not settle; using adaptive quadrature")
    return np.asarray([
        quad(lambda t, j=j: t ** j * target.value(center + half * t), -1.0, 1.0,
             epsabs=0.0, epsrel=1e-13, limit=400)[0]
        for j in range(size)
    ])


def _reference_problem(problem: FitProblem) -> Tuple[FitProblem, float, float]:
    """Same fit expressed in t = (x - c) / h on [-1, 1]"""
    a, b = problem.interval
    center, half = 0.5 * (a + b), 0.5 * (b - a)
    size = problem.size
    moments = reference_moments(problem.target, problem.interval, size)
    reference = FitProblem(
        target=problem.target,
        K=problem.K,
        interval=(-1.0, 1.0),
        gram=gram_matrix((-1.0, 1.0), size),
        moments=moments,
    )
    return reference, center, half


def _to_original_coordinates(w_t: np.ndarray, K: int, center: float, half: float) -> SosParameters:
    """Map parameters fitted in t to parameters of the same polynomial in x"""
    params = SosParameters.from_vector(w_t, K)
    root = math.sqrt(half)
    a_x = poly.scale(poly.compose_affine(Polynomial(params.a), -center / half, 1.0 / half), 1.0 / root)
    if K > 0:
        b_x = poly.scale(poly.compose_affine(Polynomial(params.b), -center / half, 1.0 / half), 1.0 / root)
        b_values = b_x.coeffs
    else:
        b_values = ()
    C_x = poly.evaluate(Polynomial(alpha_from_w(w_t)), -center / half)
    return SosParameters(C=C_x, a=a_x.coeffs, b=b_values)


@dataclass
class _StartOutcome:
    index: int
    w: np.ndarray
    converged: bool
    gradient_norm: float
    objective: float
    iterations: int
    status: str


def _solve_direction(H: np.ndarray, g: np.ndarray, gauss_newton: np.ndarray) -> np.ndarray:
    eigenvalues = np.linalg.eigvalsh(H)
    matrix = H
    if eigenvalues[0] < -1e-12 * max(1.0, abs(eigenvalues[-1])):
        matrix = gauss_newton
    shift = 1e-12 * max(np.trace(matrix), 1e-300)
    try:
        return linalg.solve(matrix + shift * np.eye(len(g)), -g, assume_a='sym')
    except (linalg.LinAlgError, ValueError):
        return np.linalg.lstsq(matrix, -g, rcond=None)[0]


def _newton(problem: FitProblem, w0: np.ndarray, tol: float, max_iter: int, index: int,
            floor_tol: float = 0.0) -> _StartOutcome:
    """Damped Newton from w0; stops at |grad| <= tol, or at the rounding floor

    At degree 13 the gradient bottoms out above ``tol``. A start whose gradient
    is below ``floor_tol`` and has not halved for STAGNATION_WINDOW accepted
    steps, or admits no acceptable step at all, has reached that floor and is
    reported as converged with status 'stagnated'.
    """
    w = w0.copy()
    g = objective_gradient(problem, w)
    f = objective(problem, w)
    merit = float(g @ g)
    best_merit, since_progress = merit, 0
    for iteration in range(max_iter):
        if not (np.all(np.isfinite(w)) and np.isfinite(merit)):
            return _StartOutcome(index, w, False, math.inf, math.inf, iteration, 'non_finite')
        if math.sqrt(merit) <= tol:
            return _StartOutcome(index, w, True, math.sqrt(merit), f, iteration, 'converged')
        if since_progress >= STAGNATION_WINDOW and math.sqrt(merit) <= floor_tol:
            return _StartOutcome(index, w, True, math.sqrt(merit), f, iteration, 'stagnated')

        J = jacobian_alpha(w)
        direction = _solve_direction(objective_hessian(problem, w), g, J.T @ problem.gram @ J)
        slope = float(g @ direction)

        step = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            candidate = w + step * direction
            g_new = objective_gradient(problem, candidate)
            f_new = objective(problem, candidate)
            merit_new = float(g_new @ g_new)
            if np.isfinite(merit_new) and np.isfinite(f_new):
                # accept on a smaller gradient, or on Armijo descent of f itself
                if merit_new < merit or (slope < 0 and f_new <= f + 1e-4 * step * slope):
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            if math.sqrt(merit) <= floor_tol:
                return _StartOutcome(index, w, True, math.sqrt(merit), f, iteration, 'stagnated')
            return _StartOutcome(index, w, False, math.sqrt(merit), f, iteration, 'line_search')
        w, g, f, merit = candidate, g_new, f_new, merit_new
        if merit < 0.25 * best_merit:
            best_merit, since_progress = merit, 0
        else:
            since_progress += 1
        logger.debug(f"start {index} iteration {iteration}: |grad| = {math.sqrt(merit):.3e}, f = {f:.12g}")

    converged = math.sqrt(merit) <= tol
    return _StartOutcome(index, w, converged, math.sqrt(merit), f, max_iter, 'converged' if converged else 'max_iter')


def initial_guess(problem: FitProblem, rng: np.random.Generator, center: float) -> np.ndarray:
    """Uniform [-1, 1] start with C at the target value in the interval midpoint

    ``problem`` lives on the reference interval [-1, 1]; a and b are scaled by the
    square root of the target's least-squares slope there so p' has the right size.
    """
    K = problem.K
    w = rng.uniform(-1.0, 1.0, size=2 * K + 2)
    # least-squares slope of the target on [-1, 1]: 3/2 * int t beta dt
    slope = max(1.5 * problem.moments[1], 1e-8)
    w[0] = float(problem.target.value(center))
    w[1:] *= math.sqrt(slope)
    return w


@dataclass(frozen=True)
class FitResult:
    map: RenormalizationMap
    w: SosParameters
    objective: float
    starts_tried: int
    converged_starts: int
    distinct_solutions: int = 1
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        record = self.map.to_dict()
        record.update({
            'objective': self.objective,
            'starts_tried': self.starts_tried,
            'converged_starts': self.converged_starts,
            'distinct_solutions': self.distinct_solutions,
            'seed': self.seed,
            'w': self.w.to_dict(),
        })
        return record


def _distinct(outcomes: List[_StartOutcome]) -> int:
    seen: List[np.ndarray] = []
    for outcome in outcomes:
        alpha = alpha_from_w(outcome.w)
        if not any(np.max(np.abs(alpha - other)) < DEDUP_TOL for other in seen):
            seen.append(alpha)
    return len(seen)


def fit(problem: FitProblem, starts: int = DEFAULT_STARTS, seed: int = 0,
        max_iter: int = MAX_ITER, workers: int = 1) -> FitResult:
    """Multistart damped Newton on grad f(alpha(w)) = 0; keeps the least objective"""
    if starts < 1:
        raise DomainError(f"at least one start is required, got {starts}")
    reference, center, half = _reference_problem(problem)
    scale = 1.0 + float(np.linalg.norm(reference.moments))
    tol, floor_tol = GRADIENT_TOL * scale, STAGNATION_GRADIENT_TOL * scale

    def run(index: int) -> _StartOutcome:
        rng = np.random.default_rng([int(seed), index])
        return _newton(reference, initial_guess(reference, rng, center), tol, max_iter, index, floor_tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(run, range(starts)))
    else:
        outcomes = [run(index) for index in range(starts)]

    converged = [o for o in outcomes if o.converged]
    if not converged:
        best = min(outcomes, key=lambda o: (o.gradient_norm, o.index))
        best_w = _to_original_coordinates(best.w, problem.K, center, half) if np.all(np.isfinite(best.w)) else None
        logger.error(f"no start converged for K={problem.K} on {problem.interval}; best |grad| = {best.gradient_norm:.3e}")
        raise NoConvergenceError(
            f"none of {starts} Newton starts converged (best gradient norm {best.gradient_norm:.3e})",
            best=best_w,
            details={'starts': starts, 'best_gradient_norm': best.gradient_norm, 'best_status': best.status},
        )

    best = min(converged, key=lambda o: (o.objective, o.index))
    w = _to_original_coordinates(best.w, problem.K, center, half)
    alpha = alpha_from_w(w)
    # f scales with the interval: f_x = h * f_t
    value = half * best.objective
    p = Polynomial(alpha)
    rmap = RenormalizationMap(
        p=p,
        dp=poly.derivative(p),
        family=MapFamily.OPTIMIZED,
        target=problem.target,
        params={'K': problem.K, 'interval': problem.interval, 'objective': value},
    )
    certify_monotone(rmap)
    logger.info(
        f"fitted {rmap.label()}: objective {value:.10g}, {len(converged)}/{starts} starts converged"
    )
    return FitResult(
        map=rmap,
        w=w,
        objective=value,
        starts_tried=starts,
        converged_starts=len(converged),
        distinct_solutions=_distinct(converged),
        seed=seed,
    )
