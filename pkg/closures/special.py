"""Closed-form special functions for the L2 fit moment integrals.

Only integer orders are needed: Gamma(j+1, x) for the exponential target and
Li_s(e^a) for the Planckian target, with j <= 2K+1.
"""
import logging
import math

from .exceptions import DomainError, SpecialFunctionOverflow

logger = logging.getLogger(__name__)

# exp(709.78) is the last finite double
_EXP_LIMIT = 709.78

POLYLOG_RELATIVE_TOL = 1e-16
POLYLOG_MAX_TERMS = 100_000


def upper_incomplete_gamma(order: int, x: float) -> float:
    """Gamma(s, x) for integer s >= 1 through the finite sum

        Gamma(s, x) = (s-1)! e^{-x} sum_{k<s} x^k / k!

    which is exact for every real x, including negative arguments.
    """
    if int(order) != order or order < 1:
        raise DomainError(f"incomplete gamma order must be a positive integer, got {order}")
    order = int(order)
    if -x > _EXP_LIMIT:
        raise SpecialFunctionOverflow(
            f"Gamma({order}, {x}) overflows: exp({-x}) is not representable",
            details={'order': order, 'x': x},
        )

    term = 1.0
    total = 1.0
    for k in range(1, order):
        term *= x / k
        total += term
    value = math.factorial(order - 1) * math.exp(-x) * total
    if not math.isfinite(value):
        raise SpecialFunctionOverflow(
            f"Gamma({order}, {x}) is not finite",
            details={'order': order, 'x': x},
        )
    return value


def polylog(order: int, z: float) -> float:
    """Li_s(z) for integer s >= 1 and real 0 < z < 1"""
    if int(order) != order or order < 1:
        raise DomainError(f"polylog order must be an integer >= 1, got {order}")
    if not 0.0 < z < 1.0:
        raise DomainError(f"polylog argument must lie in (0, 1), got {z}")
    order = int(order)

    if order == 1:
        return -math.log1p(-z)

    total = 0.0
    power = 1.0
    for n in range(1, POLYLOG_MAX_TERMS + 1):
        power *= z
        term = power / n ** order
        total += term
        if term < POLYLOG_RELATIVE_TOL * total:
            break
    else:
        logger.warning(f"polylog({order}, {z}) hit the {POLYLOG_MAX_TERMS}-term cap")
    return total
