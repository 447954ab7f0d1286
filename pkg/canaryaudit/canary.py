"""
Canary distributions, rejection rules and threshold tuning
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .exceptions import InvalidInputError
from .mechanism import SeedLike
from .models import ThresholdTuning

logger = logging.getLogger(__name__)

DEFAULT_TAU_GRID = tuple(float(t) for t in np.linspace(0.0, 2.0, 21))
UNIT_NORM_TOLERANCE = 1e-9


class CanarySampler(Protocol):
    """Draws i.i.d. canaries; the i-th row depends only on (seed, i)"""

    def sample(self, count: int, seed: SeedLike) -> np.ndarray:
        ...


@dataclass(frozen=True)
class CanarySet:
    """K training canaries followed by m null-test canaries"""

    canaries: np.ndarray
    num_training: int

    def __post_init__(self) -> None:
        if self.canaries.ndim != 2:
            raise InvalidInputError("canaries must be a 2-D array")
        if not 0 <= self.num_training <= self.canaries.shape[0]:
            raise InvalidInputError(
                f"num_training={self.num_training} outside 0..{self.canaries.shape[0]}"
            )

    @property
    def training(self) -> np.ndarray:
        return self.canaries[: self.num_training]

    @property
    def null(self) -> np.ndarray:
        return self.canaries[self.num_training :]

    @property
    def d(self) -> int:
        return int(self.canaries.shape[1])


@dataclass(frozen=True)
class SphereCanarySampler:
    """Uniform canaries on the unit sphere of R^d"""

    d: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise InvalidInputError(f"dimension must be >= 1, got {self.d}")

    def sample(self, count: int, seed: SeedLike) -> np.ndarray:
        if count < 1:
            raise InvalidInputError(f"canary count must be >= 1, got {count}")
        rng = np.random.default_rng(seed)
        gaussian = rng.standard_normal((count, self.d))
        return gaussian / np.linalg.norm(gaussian, axis=1, keepdims=True)


def sample_sphere(
    d: int, count: int, seed: SeedLike, num_training: Optional[int] = None
) -> CanarySet:
    """
    Draw `count` canaries uniformly from the unit sphere in R^d.

    Args:
        d: Dimension >= 1
        count: Number of canaries K + m
        seed: Seed of the draw
        num_training: How many leading canaries are training canaries
            (default: all)

    Returns:
        CanarySet of unit vectors
    """
    canaries = SphereCanarySampler(d).sample(count, seed)
    return CanarySet(canaries, count if num_training is None else num_training)


@dataclass(frozen=True)
class RejectionRule:
    """Declare canary c present in output u when <u, c> > tau"""

    tau: float

    def score(self, output: np.ndarray, canary: np.ndarray) -> float:
        output = np.asarray(output)
        canary = np.asarray(canary)
        if output.shape != canary.shape:
            raise InvalidInputError(
                f"output shape {output.shape} does not match canary shape {canary.shape}"
            )
        return float(np.dot(output, canary))

    def contains(self, output: np.ndarray, canary: np.ndarray) -> int:
        return int(self.score(output, canary) > self.tau)


def test_canary(output: np.ndarray, c: np.ndarray, tau: float) -> int:
    """Return 1 if <c, output> > tau else 0."""
    return RejectionRule(tau).contains(output, c)


# Not a pytest test despite the name
test_canary.__test__ = False  # type: ignore[attr-defined]


def threshold_scores(scores: np.ndarray, tau: float) -> np.ndarray:
    """Apply the rejection rule to a matrix of precomputed scores."""
    return (np.asarray(scores) > tau).astype(np.uint8)


def tune_threshold(
    grid: Sequence[float],
    holdout_budget: int,
    audit_closure: Callable[[float, int], float],
) -> ThresholdTuning:
    """
    Pick the threshold with the largest empirical epsilon on holdout trials.

    The closure must run on holdout seeds only; callers report an audit on
    fresh seeds at the returned threshold. Ties go to the smallest tau.

    Args:
        grid: Candidate thresholds
        holdout_budget: Number of holdout trials passed to the closure
        audit_closure: (tau, n_trials) -> eps_hat on the holdout trials

    Returns:
        ThresholdTuning with the chosen tau and all holdout eps_hat values
    """
    if len(grid) == 0:
        raise InvalidInputError("threshold grid must not be empty")
    if holdout_budget < 1:
        raise InvalidInputError(f"holdout budget must be >= 1, got {holdout_budget}")
    taus = sorted(float(t) for t in grid)
    values = [float(audit_closure(tau, holdout_budget)) for tau in taus]
    best = 0
    for i, value in enumerate(values):
        if value > values[best]:
            best = i
    logger.info(
        f"tuned threshold tau={taus[best]:g} (holdout eps_hat={values[best]:.4f})"
    )
    return ThresholdTuning(
        tau=taus[best],
        grid=taus,
        holdout_eps_hat=values,
        holdout_trials=holdout_budget,
    )
