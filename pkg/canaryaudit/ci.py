"""
Confidence intervals on the mean of an exchangeable Bernoulli vector.

Two families are provided, each at orders 1, 2 and 4:

- Bernstein intervals are valid for every n. The order-1 interval bounds
  Var(m_1) by mu_1(1 - mu_1); order 2 plugs an upper bound on mu_2 into the
  exact variance mu_1/K - mu_1^2 + (K-1)/K mu_2; order 4 additionally
  bounds mu_2 through the variance of m_2, which involves mu_3 and mu_4.
- Wilson intervals use the same variance expansions with the Gaussian
  quantile Z_beta in place of the Bernstein constants. They are valid as
  n grows and have closed-form roots.

Higher orders spend part of the failure budget on the auxiliary moment
bounds (beta/2 or beta/4 each), so each one-sided bound still fails with
probability at most beta.
"""

import logging
import math
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.optimize
import scipy.stats

from .exceptions import (
    InvalidBracketError,
    InvalidInputError,
    NumericalError,
    OrderExceedsDimensionError,
)
from .models import CI_METHODS, CI_ORDERS, ConfidenceBound, MomentVector
from .utils import validate_probability
from .xbern import StatMatrix, aggregate_moments

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-12

Variance = Callable[[float], float]


def solve_monotone(
    f: Callable[[float], float],
    bracket: Tuple[float, float],
    tol: float = ROOT_TOL,
) -> Optional[float]:
    """
    Find the root of a continuous function on a bracket by bisection.

    Args:
        f: Function continuous on the bracket
        bracket: (a, b) with a <= b
        tol: Bracket width at termination

    Returns:
        The root, or None when f has the same sign at both endpoints

    Raises:
        InvalidBracketError: If a > b
    """
    a, b = float(bracket[0]), float(bracket[1])
    if a > b:
        raise InvalidBracketError(f"invalid bracket [{a}, {b}]")
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        return None
    return float(scipy.optimize.bisect(f, a, b, xtol=tol, maxiter=200))


def z_quantile(beta: float) -> float:
    """(1 - beta)-quantile of the standard normal."""
    return float(scipy.stats.norm.ppf(1.0 - beta))


def binomial_variance(x: float) -> float:
    return max(0.0, x * (1.0 - x))


def sigma1_squared(mu1: float, mu2: float, k: int) -> float:
    """Var(m_1) = mu_1/K - mu_1^2 + (K-1)/K mu_2."""
    return mu1 / k - mu1 * mu1 + (k - 1) / k * mu2


def sigma2_squared(mu2: float, mu3: float, mu4: float, k: int) -> float:
    """Var(m_2) expressed through mu_2, mu_3, mu_4 (requires K >= 2)."""
    if k < 2:
        raise OrderExceedsDimensionError(f"Var(m_2) needs K >= 2, got K={k}")
    norm = k * (k - 1)
    return (
        2.0 * mu2 * (1.0 - mu2) / norm
        + 4.0 * (k - 2) / norm * (mu3 - mu2 * mu2)
        + (k - 2) * (k - 3) / norm * (mu4 - mu2 * mu2)
    )


def _bernstein_lower(mu_hat: float, n: int, log_term: float, variance: Variance) -> float:
    slack = 2.0 * log_term / (3.0 * n)

    def gap(x: float) -> float:
        return mu_hat - x - math.sqrt(2.0 * log_term / n * max(0.0, variance(x))) - slack

    root = solve_monotone(gap, (0.0, mu_hat))
    return 0.0 if root is None else root


def _bernstein_upper(mu_hat: float, n: int, log_term: float, variance: Variance) -> float:
    slack = 2.0 * log_term / (3.0 * n)

    def gap(x: float) -> float:
        return x - mu_hat - math.sqrt(2.0 * log_term / n * max(0.0, variance(x))) - slack

    root = solve_monotone(gap, (mu_hat, 1.0))
    return 1.0 if root is None else root


def _check_common(n: int, beta: float) -> None:
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    validate_probability("beta", beta)


def _check_order(order: int, k: int) -> None:
    if k < order:
        raise OrderExceedsDimensionError(
            f"order-{order} interval needs K >= {order}, got K={k}"
        )


def _order2_variance(k: int, mu2_upper: float) -> Variance:
    def variance(x: float) -> float:
        return x / k - x * x + (k - 1) / k * mu2_upper

    return variance


def bernstein1(moments: MomentVector, n: int, beta: float) -> ConfidenceBound:
    """First-order Bernstein interval; each side fails w.p. <= beta."""
    _check_common(n, beta)
    mu1 = moments.mu(1)
    log_term = math.log(1.0 / beta)
    return ConfidenceBound(
        lower=_bernstein_lower(mu1, n, log_term, binomial_variance),
        upper=_bernstein_upper(mu1, n, log_term, binomial_variance),
        method="bernstein",
        order=1,
        beta=beta,
    )


def bernstein2(moments: MomentVector, n: int, k: int, beta: float) -> ConfidenceBound:
    """Second-order Bernstein interval, budget beta/2 per inequality."""
    _check_common(n, beta)
    _check_order(2, k)
    log_term = math.log(2.0 / beta)
    mu2_upper = _bernstein_upper(moments.mu(2), n, log_term, binomial_variance)
    variance = _order2_variance(k, mu2_upper)
    mu1 = moments.mu(1)
    logger.debug(f"bernstein2: mu2_upper={mu2_upper:.6g}")
    return ConfidenceBound(
        lower=_bernstein_lower(mu1, n, log_term, variance),
        upper=_bernstein_upper(mu1, n, log_term, variance),
        method="bernstein",
        order=2,
        beta=beta,
    )


def bernstein4(moments: MomentVector, n: int, k: int, beta: float) -> ConfidenceBound:
    """Fourth-order Bernstein interval, budget beta/4 per inequality."""
    _check_common(n, beta)
    _check_order(4, k)
    log_term = math.log(4.0 / beta)
    mu3_upper = _bernstein_upper(moments.mu(3), n, log_term, binomial_variance)
    mu4_upper = _bernstein_upper(moments.mu(4), n, log_term, binomial_variance)

    def mu2_variance(x: float) -> float:
        return sigma2_squared(x, mu3_upper, mu4_upper, k)

    mu2_upper = _bernstein_upper(moments.mu(2), n, log_term, mu2_variance)
    variance = _order2_variance(k, mu2_upper)
    mu1 = moments.mu(1)
    logger.debug(
        f"bernstein4: mu2_upper={mu2_upper:.6g} mu3_upper={mu3_upper:.6g} "
        f"mu4_upper={mu4_upper:.6g}"
    )
    return ConfidenceBound(
        lower=_bernstein_lower(mu1, n, log_term, variance),
        upper=_bernstein_upper(mu1, n, log_term, variance),
        method="bernstein",
        order=4,
        beta=beta,
    )


def _quadratic_roots(a: float, b: float, c: float) -> Optional[Tuple[float, float]]:
    """Roots of a x^2 - b x + c = 0 (a > 0), or None if they are complex."""
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        # Rounding noise around a double root
        if disc > -1e-12 * max(1.0, b * b):
            disc = 0.0
        else:
            return None
    root = math.sqrt(disc)
    return (b - root) / (2.0 * a), (b + root) / (2.0 * a)


def _clamp_unit(x: float) -> float:
    return min(1.0, max(0.0, x))


def _wilson_moment_upper(mu_hat: float, n: int, z: float) -> float:
    roots = _quadratic_roots(n + z * z, 2.0 * n * mu_hat + z * z, n * mu_hat * mu_hat)
    if roots is None:
        raise NumericalError(f"Wilson quadratic has no real root for mu_hat={mu_hat}")
    return _clamp_unit(roots[1])


def _wilson_mean_interval(
    mu1: float, n: int, k: int, z: float, mu2_upper: float
) -> Tuple[float, float]:
    roots = _quadratic_roots(
        n + z * z,
        2.0 * n * mu1 + z * z / k,
        n * mu1 * mu1 - (k - 1) / k * z * z * mu2_upper,
    )
    if roots is None:
        raise NumericalError(
            f"Wilson quadratic on mu1 has no real root (mu1={mu1}, mu2_upper={mu2_upper})"
        )
    lower, upper = (_clamp_unit(r) for r in roots)
    return lower, upper


def wilson1(moments: MomentVector, n: int, k: int, beta: float) -> ConfidenceBound:
    """First-order Wilson interval."""
    _check_common(n, beta)
    mu1 = moments.mu(1)
    z = z_quantile(beta)
    roots = _quadratic_roots(n + z * z, 2.0 * n * mu1 + z * z, n * mu1 * mu1)
    if roots is None:
        raise NumericalError(f"Wilson quadratic has no real root for mu1={mu1}")
    return ConfidenceBound(
        lower=_clamp_unit(roots[0]),
        upper=_clamp_unit(roots[1]),
        method="wilson",
        order=1,
        beta=beta,
    )


def wilson2(moments: MomentVector, n: int, k: int, beta: float) -> ConfidenceBound:
    """Second-order Wilson interval, quantile Z_{beta/2}."""
    _check_common(n, beta)
    _check_order(2, k)
    z = z_quantile(beta / 2.0)
    mu2_upper = _wilson_moment_upper(moments.mu(2), n, z)
    lower, upper = _wilson_mean_interval(moments.mu(1), n, k, z, mu2_upper)
    return ConfidenceBound(lower=lower, upper=upper, method="wilson", order=2, beta=beta)


def _wilson4_mu2_upper(
    mu2: float, n: int, k: int, z: float, mu3_upper: float, mu4_upper: float
) -> float:
    norm = k * (k - 1)
    c = (k - 2) * (k - 3) / norm * (mu4_upper - mu3_upper**2) + 4.0 * (
        k - 2
    ) / norm * mu3_upper
    roots = _quadratic_roots(
        n + 2.0 * z * z * (2 * k - 3) / norm,
        2.0 * n * mu2 + 2.0 * z * z / norm,
        n * mu2 * mu2 - c * z * z,
    )
    if roots is None:
        logger.warning(
            "fourth-order Wilson bound on mu2 has no real root; using mu2_upper=1"
        )
        return 1.0
    return _clamp_unit(roots[1])


def wilson4(moments: MomentVector, n: int, k: int, beta: float) -> ConfidenceBound:
    """Fourth-order Wilson interval, quantile Z_{beta/4}."""
    _check_common(n, beta)
    _check_order(4, k)
    z = z_quantile(beta / 4.0)
    mu3_upper = _wilson_moment_upper(moments.mu(3), n, z)
    mu4_upper = _wilson_moment_upper(moments.mu(4), n, z)
    mu2_upper = _wilson4_mu2_upper(moments.mu(2), n, k, z, mu3_upper, mu4_upper)
    lower, upper = _wilson_mean_interval(moments.mu(1), n, k, z, mu2_upper)
    return ConfidenceBound(lower=lower, upper=upper, method="wilson", order=4, beta=beta)


def compute_bound(
    method: str, order: int, moments: MomentVector, n: int, k: int, beta: float
) -> ConfidenceBound:
    """
    Dispatch to one of the six interval algorithms.

    Args:
        method: "bernstein" or "wilson"
        order: 1, 2 or 4
        moments: Empirical moments up to at least the given order
        n: Number of trials
        k: Number of tests per trial
        beta: One-sided failure probability

    Returns:
        ConfidenceBound on mu1
    """
    if method not in CI_METHODS:
        raise InvalidInputError(f"unknown interval method: {method}")
    if order not in CI_ORDERS:
        raise InvalidInputError(f"interval order must be 1, 2 or 4, got {order}")
    _check_order(order, k)
    if method == "bernstein":
        if order == 1:
            return bernstein1(moments, n, beta)
        return (bernstein2 if order == 2 else bernstein4)(moments, n, k, beta)
    return {1: wilson1, 2: wilson2, 4: wilson4}[order](moments, n, k, beta)


def matrix_bound(
    matrix: Union[StatMatrix, np.ndarray], method: str, order: int, beta: float
) -> ConfidenceBound:
    """Aggregate moments of a statistics matrix and compute an interval on mu1."""
    if not isinstance(matrix, StatMatrix):
        matrix = StatMatrix(np.asarray(matrix))
    if matrix.k < order:
        raise OrderExceedsDimensionError(
            f"order-{order} interval needs K >= {order}, got K={matrix.k}"
        )
    moments = aggregate_moments(matrix, order)
    return compute_bound(method, order, moments, matrix.n, matrix.k, beta)
