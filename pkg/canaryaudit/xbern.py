"""
Exchangeable Bernoulli (XBern) moments and synthetic samplers.

A trial of a multi-canary audit yields a binary vector x in {0,1}^K whose
distribution is invariant under permutations of the canaries. Its law is
parameterized by the moments mu_l = E[x_{j1} ... x_{jl}] for distinct
indices. Per trial, the subset average

    m_l = C(K, l)^-1 * sum_{j1 < ... < jl} x_{j1} ... x_{jl}

is an unbiased estimate of mu_l and satisfies the linear-time recurrence
m_{l+1} = m_l * (K m_1 - l) / (K - l).
"""

from dataclasses import dataclass
from typing import Dict, NamedTuple, Protocol, Sequence, Union

import numpy as np
import scipy.stats

from .exceptions import InvalidInputError, OrderExceedsDimensionError
from .models import MAX_MOMENT_ORDER, MomentVector

BinaryLike = Union[Sequence[int], np.ndarray]


@dataclass(frozen=True)
class StatMatrix:
    """n x K matrix of binary test outcomes, one row per trial"""

    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise InvalidInputError(
                f"statistics matrix must be n x K with n, K >= 1, got shape {rows.shape}"
            )
        if not np.isin(rows, (0, 1)).all():
            raise InvalidInputError("statistics matrix entries must be 0 or 1")
        object.__setattr__(self, "rows", rows.astype(np.uint8, copy=False))

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def k(self) -> int:
        return int(self.rows.shape[1])

    def complement(self) -> "StatMatrix":
        """Outcomes of the complementary rejection sets."""
        return StatMatrix(1 - self.rows)


def as_binary_vector(x: BinaryLike) -> np.ndarray:
    """Validate a single trial's outcome vector."""
    vector = np.asarray(x)
    if vector.ndim != 1 or vector.size == 0:
        raise InvalidInputError("binary vector must be one-dimensional and non-empty")
    if not np.isin(vector, (0, 1)).all():
        raise InvalidInputError("binary vector entries must be 0 or 1")
    return vector.astype(np.uint8, copy=False)


def _check_order(max_order: int, k: int) -> None:
    if max_order < 1:
        raise InvalidInputError(f"moment order must be >= 1, got {max_order}")
    if max_order > MAX_MOMENT_ORDER:
        raise InvalidInputError(
            f"moments above order {MAX_MOMENT_ORDER} are not supported, got {max_order}"
        )
    if max_order > k:
        raise OrderExceedsDimensionError(
            f"moment order {max_order} exceeds the number of tests K={k}"
        )


def _moments_from_counts(counts: np.ndarray, k: int, max_order: int) -> np.ndarray:
    """Per-trial moments m_1..m_max_order from the number of ones per trial."""
    moments = np.empty((counts.shape[0], max_order), dtype=np.float64)
    moments[:, 0] = counts / k
    for ell in range(1, max_order):
        # K m_1 is the integer count, so a factor is exactly zero once ell
        # reaches it and the moment stays zero
        moments[:, ell] = moments[:, ell - 1] * (counts - ell) / (k - ell)
    return moments


def trial_moments(x: BinaryLike, max_order: int) -> np.ndarray:
    """
    Compute the subset-average moments of one trial via the recurrence.

    Args:
        x: Binary outcome vector of length K
        max_order: Highest order to compute, 1 <= max_order <= min(4, K)

    Returns:
        Array [m_1, ..., m_max_order]
    """
    vector = as_binary_vector(x)
    k = vector.size
    _check_order(max_order, k)
    counts = np.array([int(vector.sum())], dtype=np.float64)
    return _moments_from_counts(counts, k, max_order)[0]


def aggregate_moments(matrix: Union[StatMatrix, np.ndarray], max_order: int) -> MomentVector:
    """
    Average per-trial moments over all trials of a statistics matrix.

    Args:
        matrix: StatMatrix or n x K binary array
        max_order: Highest order to compute, 1 <= max_order <= min(4, K)

    Returns:
        MomentVector with mu_hat[l] = mean_i m_l^(i)
    """
    if not isinstance(matrix, StatMatrix):
        matrix = StatMatrix(np.asarray(matrix))
    _check_order(max_order, matrix.k)
    counts = matrix.rows.sum(axis=1, dtype=np.int64).astype(np.float64)
    per_trial = _moments_from_counts(counts, matrix.k, max_order)
    mu_hat = per_trial.mean(axis=0)
    return MomentVector(
        mu_hat={ell + 1: float(mu_hat[ell]) for ell in range(max_order)},
        per_trial=per_trial,
    )


class Mixing(Protocol):
    """Distribution of the per-row success probability p"""

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        """Map U(0,1) draws to draws of p by inverse transform."""
        ...

    def moment(self, order: int) -> float:
        """E[p^order]."""
        ...


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidInputError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class PointMixing:
    """p fixed: coordinates are independent Bernoulli(p)"""

    p: float

    def __post_init__(self) -> None:
        _check_unit("p", self.p)

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        return np.full_like(uniforms, self.p)

    def moment(self, order: int) -> float:
        return float(self.p**order)


@dataclass(frozen=True)
class TwoPointMixing:
    """p = p_a with probability w, else p_b"""

    p_a: float
    p_b: float
    w: float

    def __post_init__(self) -> None:
        _check_unit("p_a", self.p_a)
        _check_unit("p_b", self.p_b)
        _check_unit("w", self.w)

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        return np.where(uniforms < self.w, self.p_a, self.p_b)

    def moment(self, order: int) -> float:
        return float(self.w * self.p_a**order + (1 - self.w) * self.p_b**order)


@dataclass(frozen=True)
class BetaMixing:
    """p ~ Beta(a, b)"""

    a: float
    b: float

    def __post_init__(self) -> None:
        if self.a <= 0 or self.b <= 0:
            raise InvalidInputError(
                f"beta mixing parameters must be positive, got a={self.a}, b={self.b}"
            )

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        return scipy.stats.beta.ppf(uniforms, self.a, self.b)

    def moment(self, order: int) -> float:
        value = 1.0
        for j in range(order):
            value *= (self.a + j) / (self.a + self.b + j)
        return value


class MixtureSample(NamedTuple):
    matrix: StatMatrix
    true_moments: Dict[int, float]


def sample_xbern_mixture(k: int, n: int, mixing: Mixing, seed: int) -> MixtureSample:
    """
    Draw n exchangeable binary vectors of length K from a Bernoulli mixture.

    Row i uses the uniforms at positions [i(K+1), (i+1)(K+1)) of one PCG64
    stream, so it depends only on (seed, i, K): the first draw picks p, the
    remaining K are thresholded at p.

    Args:
        k: Vector length K >= 1
        n: Number of rows n >= 1
        mixing: Distribution of p
        seed: Non-negative integer seed

    Returns:
        MixtureSample with the matrix and mu_l = E[p^l] for l = 1..4
    """
    if k < 1 or n < 1:
        raise InvalidInputError(f"K and n must be >= 1, got K={k}, n={n}")
    rng = np.random.default_rng(seed)
    uniforms = rng.random((n, k + 1))
    p = mixing.sample(uniforms[:, 0])
    rows = (uniforms[:, 1:] < p[:, None]).astype(np.uint8)
    true_moments = {
        order: mixing.moment(order) for order in range(1, MAX_MOMENT_ORDER + 1)
    }
    return MixtureSample(StatMatrix(rows), true_moments)
