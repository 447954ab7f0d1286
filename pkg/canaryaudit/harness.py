"""
End-to-end audit: coupled datasets, statistics matrices and epsilon estimates.

Each trial draws K training canaries and m null canaries, runs the
mechanism on D1 = D + {c_1..c_K} (and on D0 = D + {c_1..c_{K-1}} in the
add/remove neighborhood) and records the scores <c, output>. Thresholding
the scores gives the binary statistics matrices X (n x K, alternative) and
Y (n x m, null). The audit reports

    eps_hat = log((p1_lower - delta) / p0_upper)

where p1_lower bounds the mean of X from below and p0_upper bounds the mean
of Y from above, each with failure probability beta/2.
"""

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.stats

from .canary import (
    CanarySampler,
    CanarySet,
    SphereCanarySampler,
    threshold_scores,
    tune_threshold,
)
from .ci import matrix_bound
from .config import AuditConfig, ExperimentSpec
from .exceptions import AuditError, ConfigError, InvalidInputError
from .mechanism import GaussianSumMechanism, Mechanism, PrivacyParams, SeedLike
from .models import (
    MAX_MOMENT_ORDER,
    AuditReport,
    ConfidenceBound,
    DecompositionRow,
    MomentVector,
)
from .utils import trial_seed
from .xbern import StatMatrix, aggregate_moments

logger = logging.getLogger(__name__)

ScoreCache = Dict[Hashable, "ScoreSet"]

SWEEP_COLUMNS = (
    "n",
    "k",
    "d",
    "epsilon",
    "method",
    "order",
    "repeat",
    "eps_hat",
    "corr2",
    "corr4",
    "delta_bias",
    "delta_var",
    "eps_hat_mean",
    "eps_hat_stderr",
)


class CountingMechanism:
    """Thread-safe call counter around a mechanism"""

    def __init__(self, inner: Mechanism):
        self.inner = inner
        self.calls = 0
        self._lock = threading.Lock()

    def run(self, dataset: np.ndarray, trial_seed: SeedLike) -> np.ndarray:
        with self._lock:
            self.calls += 1
        return self.inner.run(dataset, trial_seed)


@dataclass(frozen=True)
class TrialScores:
    """Test scores <c, output> of one trial"""

    alt: np.ndarray
    null: np.ndarray
    null_on_alt: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ScoreSet:
    """Scores of n trials stacked row-wise"""

    alt: np.ndarray
    null: np.ndarray
    null_on_alt: Optional[np.ndarray]
    mechanism_calls: int

    @classmethod
    def stack(cls, trials: Sequence[TrialScores], mechanism_calls: int) -> "ScoreSet":
        null_on_alt = None
        if trials and trials[0].null_on_alt is not None:
            null_on_alt = np.vstack([t.null_on_alt for t in trials])
        return cls(
            alt=np.vstack([t.alt for t in trials]),
            null=np.vstack([t.null for t in trials]),
            null_on_alt=null_on_alt,
            mechanism_calls=mechanism_calls,
        )

    def matrices(self, tau: float) -> Tuple[np.ndarray, np.ndarray]:
        """Binary matrices (X, Y) under the rejection rule <c, u> > tau."""
        return threshold_scores(self.alt, tau), threshold_scores(self.null, tau)

    @property
    def null_shift(self) -> Optional[float]:
        if self.null_on_alt is None:
            return None
        return float(self.null_on_alt.mean() - self.null.mean())


@dataclass(frozen=True)
class EpsilonEstimate:
    eps_hat: float
    p1_lower: ConfidenceBound
    p0_upper: ConfidenceBound


def build_mechanism(config: AuditConfig) -> GaussianSumMechanism:
    """Gaussian sum mechanism at the configured or calibrated noise scale."""
    if config.sigma is not None:
        return GaussianSumMechanism(d=config.d, sigma=config.sigma)
    return GaussianSumMechanism.calibrated(
        config.d, PrivacyParams(config.epsilon, config.delta)
    )


def trial_canaries(
    config: AuditConfig,
    trial_index: int,
    sampler: Optional[CanarySampler] = None,
    phase: str = "report",
) -> CanarySet:
    """Fresh K + m canaries of one trial."""
    sampler = sampler or SphereCanarySampler(config.d)
    seed = trial_seed(config.seed, phase, trial_index, "canaries")
    canaries = sampler.sample(config.k + config.num_null, seed)
    return CanarySet(canaries, config.k)


def collect_trial_scores(
    config: AuditConfig,
    trial_index: int,
    mechanism: Mechanism,
    sampler: Optional[CanarySampler] = None,
    phase: str = "report",
) -> TrialScores:
    """
    Run one trial and score every canary against the mechanism output.

    Args:
        config: Audit configuration
        trial_index: Index of the trial within its phase
        mechanism: Mechanism under audit
        sampler: Canary distribution (default: unit sphere in R^d)
        phase: "report" or "holdout"; the phases never share randomness

    Returns:
        TrialScores for the training and null canaries
    """
    canaries = trial_canaries(config, trial_index, sampler, phase)
    base = np.zeros((1, canaries.d))
    d1 = np.vstack([base, canaries.training])
    out1 = mechanism.run(d1, trial_seed(config.seed, phase, trial_index, "mech1"))
    alt = canaries.training @ out1
    if config.neighborhood == "replace_one":
        return TrialScores(alt=alt, null=canaries.null @ out1)
    d0 = np.vstack([base, canaries.training[: config.k - 1]])
    out0 = mechanism.run(d0, trial_seed(config.seed, phase, trial_index, "mech0"))
    return TrialScores(
        alt=alt, null=canaries.null @ out0, null_on_alt=canaries.null @ out1
    )


def _resolve_tau(config: AuditConfig, tau: Optional[float]) -> float:
    if tau is not None:
        return tau
    if config.tau is None:
        raise ConfigError("tau", "a single trial needs a fixed threshold")
    return config.tau


def _run_trial(
    config: AuditConfig,
    trial_index: int,
    mechanism: Optional[Mechanism],
    tau: Optional[float],
) -> Tuple[np.ndarray, np.ndarray]:
    threshold = _resolve_tau(config, tau)
    scores = collect_trial_scores(
        config, trial_index, mechanism or build_mechanism(config)
    )
    x = threshold_scores(scores.alt, threshold)
    return x, threshold_scores(scores.null, threshold)


def run_trial_add_remove(
    config: AuditConfig,
    trial_index: int,
    mechanism: Optional[Mechanism] = None,
    tau: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    One add/remove trial: x tests c_1..c_K on A(D1), y tests the null
    canaries on A(D0). Two mechanism calls.
    """
    config = config.with_changes(neighborhood="add_remove")
    return _run_trial(config, trial_index, mechanism, tau)


def run_trial_replace_one(
    config: AuditConfig,
    trial_index: int,
    mechanism: Optional[Mechanism] = None,
    tau: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """One replace-one trial: both x and y are tested on A(D1). One mechanism call."""
    config = config.with_changes(neighborhood="replace_one")
    return _run_trial(config, trial_index, mechanism, tau)


def collect_scores(
    config: AuditConfig,
    mechanism: Mechanism,
    sampler: Optional[CanarySampler] = None,
    phase: str = "report",
) -> ScoreSet:
    """Run n trials, concurrently when config.workers > 1, folded in index order."""
    counter = CountingMechanism(mechanism)

    def one(index: int) -> TrialScores:
        return collect_trial_scores(config, index, counter, sampler, phase)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            trials = list(executor.map(one, range(config.n)))
    else:
        trials = [one(index) for index in range(config.n)]
    logger.debug(f"collected {config.n} {phase} trials ({counter.calls} mechanism calls)")
    return ScoreSet.stack(trials, counter.calls)


def epsilon_lower_bound(p1_lower: float, p0_upper: float, delta: float) -> float:
    """
    Empirical epsilon log((p1_lower - delta) / p0_upper), clamped at 0.

    A non-positive numerator certifies nothing and gives 0; a zero upper
    bound on the null side with a positive numerator gives +inf.
    """
    numerator = p1_lower - delta
    if numerator <= 0:
        return 0.0
    if p0_upper <= 0:
        return math.inf
    return max(0.0, math.log(numerator / p0_upper))


def estimate_epsilon(
    x: np.ndarray, y: np.ndarray, config: AuditConfig
) -> EpsilonEstimate:
    """Bound both sides at beta/2 with the configured interval and combine."""
    half = config.beta / 2.0
    p1 = matrix_bound(x, config.ci_method, config.ci_order, half)
    p0 = matrix_bound(y, config.ci_method, config.ci_order, half)
    eps = epsilon_lower_bound(p1.lower, p0.upper, config.delta)
    logger.debug(
        f"{config.ci}: p1_lower={p1.lower:.6g} p0_upper={p0.upper:.6g} eps_hat={eps:.6g}"
    )
    return EpsilonEstimate(eps_hat=eps, p1_lower=p1, p0_upper=p0)


def _directional_estimates(
    scores: ScoreSet, tau: float, config: AuditConfig
) -> Tuple[EpsilonEstimate, Optional[EpsilonEstimate]]:
    x, y = scores.matrices(tau)
    forward = estimate_epsilon(x, y, config)
    if not config.both_directions:
        return forward, None
    # Complement rejection sets swap the roles of the two models
    return forward, estimate_epsilon(1 - y, 1 - x, config)


def _best(forward: EpsilonEstimate, reverse: Optional[EpsilonEstimate]) -> EpsilonEstimate:
    if reverse is not None and reverse.eps_hat > forward.eps_hat:
        return reverse
    return forward


def correlation_diagnostics(
    matrix: np.ndarray, orders: Iterable[int] = (2, 4)
) -> Dict[str, float]:
    """
    Correlation between tests: corr2 = |mu2 - mu1^2|, corr4 = |mu4 - mu2^2|.

    Raises:
        OrderExceedsDimensionError: If the matrix has fewer columns than an order
    """
    orders = tuple(orders)
    moments = aggregate_moments(StatMatrix(np.asarray(matrix)), max(orders))
    result: Dict[str, float] = {}
    for order in orders:
        half = moments.mu(order // 2)
        result[f"corr{order}"] = abs(moments.mu(order) - half * half)
    return result


def _supported_orders(k: int) -> Tuple[int, ...]:
    return tuple(order for order in (2, 4) if order <= k)


def _diagnostics(x: np.ndarray, y: np.ndarray, scores: ScoreSet) -> Dict[str, Optional[float]]:
    diagnostics: Dict[str, Optional[float]] = {
        "corr2": None,
        "corr4": None,
        "null_corr2": None,
        "null_corr4": None,
    }
    if _supported_orders(x.shape[1]):
        diagnostics.update(correlation_diagnostics(x, _supported_orders(x.shape[1])))
    if _supported_orders(y.shape[1]):
        null_corr = correlation_diagnostics(y, _supported_orders(y.shape[1]))
        diagnostics.update({f"null_{key}": value for key, value in null_corr.items()})
    diagnostics["null_shift"] = scores.null_shift
    return diagnostics


def _moments(matrix: np.ndarray) -> MomentVector:
    return aggregate_moments(matrix, min(MAX_MOMENT_ORDER, matrix.shape[1]))


def _score_key(
    config: AuditConfig, phase: str, identity: Tuple[int, int]
) -> Hashable:
    return (
        phase,
        config.seed,
        config.n,
        config.k,
        config.num_null,
        config.d,
        config.neighborhood,
        config.epsilon,
        config.delta,
        config.sigma,
        identity,
    )


def _cached_scores(
    config: AuditConfig,
    mechanism: Mechanism,
    identity: Tuple[int, int],
    sampler: Optional[CanarySampler],
    phase: str,
    cache: Optional[ScoreCache],
) -> ScoreSet:
    key = _score_key(config, phase, identity)
    if cache is not None and key in cache:
        return cache[key]
    scores = collect_scores(config, mechanism, sampler, phase)
    if cache is not None:
        cache[key] = scores
    return scores


def audit(
    config: AuditConfig,
    mechanism: Optional[Mechanism] = None,
    sampler: Optional[CanarySampler] = None,
    score_cache: Optional[ScoreCache] = None,
) -> AuditReport:
    """
    Run a complete audit and report the empirical epsilon.

    Without a fixed threshold, tau is tuned on n holdout trials whose seeds
    are disjoint from the n reported trials.

    Args:
        config: Audit configuration
        mechanism: Mechanism under audit (default: calibrated Gaussian sum)
        sampler: Canary distribution (default: unit sphere in R^d)
        score_cache: Optional dict reusing trial scores across audits that
            differ only in threshold or interval

    Returns:
        AuditReport
    """
    started = time.perf_counter()
    logger.info(
        f"auditing: n={config.n} K={config.k} m={config.num_null} d={config.d} "
        f"ci={config.ci} neighborhood={config.neighborhood}"
    )
    # Calibrated mechanisms are identified by the config part of the cache key
    identity = (0 if mechanism is None else id(mechanism), id(sampler))
    # The noise scale is only known when the mechanism is built here
    sigma: Optional[float] = None
    if mechanism is None:
        gaussian = build_mechanism(config)
        sigma = gaussian.sigma
        logger.info(f"Gaussian mechanism sigma={sigma:.6g}")
        mechanism = gaussian

    calls = 0
    tuning = None
    tau = config.tau
    if tau is None:
        holdout = _cached_scores(
            config, mechanism, identity, sampler, "holdout", score_cache
        )
        calls += holdout.mechanism_calls

        def holdout_eps(threshold: float, n_trials: int) -> float:
            return _best(*_directional_estimates(holdout, threshold, config)).eps_hat

        tuning = tune_threshold(config.grid, config.n, holdout_eps)
        tau = tuning.tau

    scores = _cached_scores(
        config, mechanism, identity, sampler, "report", score_cache
    )
    calls += scores.mechanism_calls
    x, y = scores.matrices(tau)
    forward, reverse = _directional_estimates(scores, tau, config)
    chosen = _best(forward, reverse)
    direction = "forward" if chosen is forward else "reverse"
    # The written matrices are the ones behind the reported bounds
    stats_alt, stats_null = (x, y) if chosen is forward else (1 - y, 1 - x)

    report = AuditReport(
        eps_hat=chosen.eps_hat,
        p1_lower=chosen.p1_lower,
        p0_upper=chosen.p0_upper,
        moments_alt=_moments(stats_alt),
        moments_null=_moments(stats_null),
        diagnostics=_diagnostics(x, y, scores),
        config=config.to_dict(),
        tau=tau,
        sigma=sigma,
        mechanism_calls=calls,
        eps_hat_forward=forward.eps_hat,
        eps_hat_reverse=reverse.eps_hat if reverse is not None else None,
        tuning=tuning,
        wall_clock_seconds=time.perf_counter() - started,
        stats_alt=stats_alt,
        stats_null=stats_null,
        direction=direction,
    )
    logger.info(f"audit finished: eps_hat={report.eps_hat:.4f} ({report.guarantee})")
    return report


def _stderr(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def bias_variance_decomposition(
    base_config: AuditConfig,
    k_values: Sequence[int],
    orders: Sequence[int] = (2, 4),
    seeds: Iterable[int] = range(10),
    mechanism: Optional[Mechanism] = None,
) -> List[DecompositionRow]:
    """
    Split the change in empirical epsilon from adding canaries into a bias
    term and a variance term, averaged over seeds.

    dBias(K) = eps_hat(K, 1) - eps_hat(1, 1) is the cost of the extra canary
    randomness at order 1; dVar(K, l) = eps_hat(K, l) - eps_hat(K, 1) is the
    gain of the order-l interval. Orders above K are skipped.

    Returns:
        One DecompositionRow per K, in the order given
    """
    seeds = list(seeds)
    if not seeds:
        raise InvalidInputError("at least one seed is required")
    if not k_values:
        raise InvalidInputError("at least one K value is required")
    cache: ScoreCache = {}

    def eps_hat(k: int, order: int, seed: int) -> float:
        config = base_config.with_changes(k=k, ci_order=order, seed=seed)
        return audit(config, mechanism, score_cache=cache).eps_hat

    baseline = {seed: eps_hat(1, 1, seed) for seed in seeds}
    rows = []
    for k in k_values:
        first_order = {seed: eps_hat(k, 1, seed) for seed in seeds}
        bias = [first_order[s] - baseline[s] for s in seeds]
        means = {1: float(np.mean(list(first_order.values())))}
        delta_var: Dict[int, float] = {}
        delta_var_stderr: Dict[int, float] = {}
        for order in orders:
            if order > min(k, base_config.m or k) or order == 1:
                continue
            values = {seed: eps_hat(k, order, seed) for seed in seeds}
            gains = [values[s] - first_order[s] for s in seeds]
            means[order] = float(np.mean(list(values.values())))
            delta_var[order] = float(np.mean(gains))
            delta_var_stderr[order] = _stderr(gains)
        rows.append(
            DecompositionRow(
                k=k,
                eps_hat=means,
                delta_bias=float(np.mean(bias)),
                delta_var=delta_var,
                delta_bias_stderr=_stderr(bias),
                delta_var_stderr=delta_var_stderr,
            )
        )
        logger.info(
            f"K={k}: dBias={rows[-1].delta_bias:.4f} dVar={rows[-1].delta_var}"
        )
    return rows


def _reference_key(config: AuditConfig) -> Hashable:
    return (config.n, config.k, config.d, config.epsilon, config.ci, config.seed)


def run_sweep(spec: ExperimentSpec) -> List[Dict[str, Any]]:
    """
    Audit every sweep point `repeats` times.

    Repeat r uses master seed base.seed + r. Each row also carries the bias
    and variance deltas against the K=1 order-1 audit and the order-1 audit
    at the same K, plus the mean and standard error of eps_hat over repeats.

    Returns:
        Rows keyed by SWEEP_COLUMNS, sorted by sweep axes then repeat
    """
    cache: ScoreCache = {}
    reference: Dict[Hashable, float] = {}

    def eps_for(config: AuditConfig) -> float:
        key = _reference_key(config)
        if key not in reference:
            reference[key] = audit(config, score_cache=cache).eps_hat
        return reference[key]

    rows: List[Dict[str, Any]] = []
    for point in spec.points():
        point_rows = []
        for repeat in range(spec.repeats):
            config = spec.config_for(point, repeat)
            try:
                report = audit(config, score_cache=cache)
                reference[_reference_key(config)] = report.eps_hat
                first_order = eps_for(config.with_changes(ci_order=1))
                baseline = eps_for(config.with_changes(k=1, ci_order=1))
            except Exception as e:
                raise AuditError(
                    f"sweep point {point.axes()} repeat {repeat} failed: {e}"
                ) from e
            point_rows.append(
                {
                    "n": config.n,
                    "k": config.k,
                    "d": config.d,
                    "epsilon": config.epsilon,
                    "method": config.ci_method,
                    "order": config.ci_order,
                    "repeat": repeat,
                    "eps_hat": report.eps_hat,
                    "corr2": report.diagnostics.get("corr2"),
                    "corr4": report.diagnostics.get("corr4"),
                    "delta_bias": first_order - baseline,
                    "delta_var": report.eps_hat - first_order,
                }
            )
        values = [row["eps_hat"] for row in point_rows]
        finite = [v for v in values if math.isfinite(v)]
        for row in point_rows:
            row["eps_hat_mean"] = float(np.mean(finite)) if finite else math.inf
            row["eps_hat_stderr"] = _stderr(finite) if spec.repeats > 1 else None
        rows.extend(point_rows)
        logger.info(
            f"sweep point {point.axes()}: mean eps_hat={point_rows[0]['eps_hat_mean']:.4f}"
        )
    return rows


def paired_sign_test(a: Sequence[float], b: Sequence[float]) -> float:
    """
    One-sided sign test that `a` exceeds `b` pairwise; ties are dropped.

    Returns:
        The binomial p-value (1.0 when every pair is tied)
    """
    if len(a) != len(b):
        raise InvalidInputError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    wins = int(np.sum(diff > 0))
    trials = wins + int(np.sum(diff < 0))
    if trials == 0:
        return 1.0
    return float(scipy.stats.binomtest(wins, trials, 0.5, alternative="greater").pvalue)


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise InvalidInputError("need at least two paired points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidInputError("log-log regression needs positive values")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)
