"""
Mechanisms under audit and Gaussian noise calibration
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Union, runtime_checkable

import numpy as np
import scipy.optimize

from .exceptions import InvalidInputError, SensitivityViolationError
from .utils import validate_probability

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]

NORM_TOLERANCE = 1e-9
ALPHA_RANGE = (1.0 + 1e-6, 1e6)
SIGMA_RANGE = (1e-3, 1e3)


@runtime_checkable
class Mechanism(Protocol):
    """A randomized algorithm treated as a black box by the auditor"""

    def run(self, dataset: np.ndarray, trial_seed: SeedLike) -> np.ndarray:
        """Return the output on `dataset` using randomness from `trial_seed`."""
        ...


@dataclass(frozen=True)
class PrivacyParams:
    """(epsilon, delta) differential privacy parameters"""

    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise InvalidInputError(f"epsilon must be >= 0, got {self.epsilon}")
        validate_probability("delta", self.delta, open_interval=False)


@dataclass(frozen=True)
class GaussianSumMechanism:
    """Noisy sum of unit-ball vectors: sum(D) + sigma * N(0, I_d)"""

    d: int
    sigma: float

    def __post_init__(self) -> None:
        if self.d < 1:
            raise InvalidInputError(f"dimension must be >= 1, got {self.d}")
        if self.sigma < 0:
            raise InvalidInputError(f"sigma must be >= 0, got {self.sigma}")

    @classmethod
    def calibrated(cls, d: int, privacy: PrivacyParams) -> "GaussianSumMechanism":
        """Mechanism whose noise scale makes it (epsilon, delta)-DP."""
        return cls(d=d, sigma=sigma_for_epsilon(privacy.epsilon, privacy.delta))

    def run(self, dataset: np.ndarray, trial_seed: SeedLike) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(dataset, dtype=np.float64))
        if rows.shape[1] != self.d:
            raise InvalidInputError(
                f"dataset rows have dimension {rows.shape[1]}, expected {self.d}"
            )
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms > 1.0 + NORM_TOLERANCE):
            worst = int(np.argmax(norms))
            # Refuse rather than clip: clipping would change the audited mechanism
            raise SensitivityViolationError(
                f"dataset row {worst} has l2 norm {norms[worst]:.12g} > 1"
            )
        rng = np.random.default_rng(trial_seed)
        noise = rng.standard_normal(self.d)
        return rows.sum(axis=0) + self.sigma * noise


def run_gaussian(
    mech: GaussianSumMechanism, dataset: np.ndarray, trial_seed: SeedLike
) -> np.ndarray:
    """Run the Gaussian sum mechanism once."""
    return mech.run(dataset, trial_seed)


def rdp_conversion_objective(alpha: float, sigma: float, delta: float) -> float:
    """
    Epsilon implied by the order-alpha Renyi guarantee of the Gaussian mechanism.

    alpha / (2 sigma^2) + log(1 / (alpha delta)) / (alpha - 1) + log(1 - 1/alpha)
    """
    return (
        alpha / (2.0 * sigma * sigma)
        + math.log(1.0 / (alpha * delta)) / (alpha - 1.0)
        + math.log1p(-1.0 / alpha)
    )


def _check_calibration_args(value: float, name: str, delta: float) -> None:
    if not value > 0:
        raise InvalidInputError(f"{name} must be > 0, got {value}")
    validate_probability("delta", delta)


def optimal_alpha(sigma: float, delta: float) -> float:
    """Minimizer of rdp_conversion_objective over alpha in (1 + 1e-6, 1e6)."""
    _check_calibration_args(sigma, "sigma", delta)
    result = scipy.optimize.minimize_scalar(
        lambda log_alpha: rdp_conversion_objective(math.exp(log_alpha), sigma, delta),
        bounds=(math.log(ALPHA_RANGE[0]), math.log(ALPHA_RANGE[1])),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(math.exp(result.x))


def epsilon_of_sigma(sigma: float, delta: float) -> float:
    """
    Smallest epsilon for which the Gaussian mechanism with noise sigma is
    (epsilon, delta)-DP, via the Renyi-to-DP conversion.

    Args:
        sigma: Noise scale (sensitivity 1)
        delta: Target delta in (0, 1)

    Returns:
        epsilon >= 0
    """
    alpha = optimal_alpha(sigma, delta)
    return max(0.0, rdp_conversion_objective(alpha, sigma, delta))


def epsilon_closed_form(sigma: float, delta: float) -> float:
    """Looser bound sqrt(2 log(1/delta)) / sigma + 1 / (2 sigma^2)."""
    _check_calibration_args(sigma, "sigma", delta)
    return math.sqrt(2.0 * math.log(1.0 / delta)) / sigma + 1.0 / (2.0 * sigma * sigma)


@lru_cache(maxsize=256)
def sigma_for_epsilon(eps: float, delta: float) -> float:
    """
    Smallest noise scale whose calibrated epsilon does not exceed `eps`.

    Args:
        eps: Target epsilon > 0
        delta: Target delta in (0, 1)

    Returns:
        sigma with epsilon_of_sigma(sigma, delta) <= eps. Targets met
        already at SIGMA_RANGE[0] return that lower edge, which is then more
        private than asked for.
    """
    _check_calibration_args(eps, "epsilon", delta)

    def excess(log_sigma: float) -> float:
        return epsilon_of_sigma(math.exp(log_sigma), delta) - eps

    lo, hi = math.log(SIGMA_RANGE[0]), math.log(SIGMA_RANGE[1])
    if excess(lo) <= 0:
        logger.debug(
            f"eps={eps} is met at the smallest supported sigma; "
            f"clamping to sigma={SIGMA_RANGE[0]:g}"
        )
        return SIGMA_RANGE[0]
    if excess(hi) > 0:
        raise InvalidInputError(
            f"epsilon={eps} needs sigma > {SIGMA_RANGE[1]} at delta={delta}"
        )
    xtol = 1e-10
    root = scipy.optimize.bisect(excess, lo, hi, xtol=xtol, maxiter=200)
    sigma = math.exp(root + xtol)
    # The root lies within xtol; step up until the guarantee holds
    for _ in range(1000):
        if epsilon_of_sigma(sigma, delta) <= eps:
            break
        sigma *= 1.0 + 1e-8
    logger.debug(f"calibrated sigma={sigma:.10g} for eps={eps}, delta={delta}")
    return sigma
