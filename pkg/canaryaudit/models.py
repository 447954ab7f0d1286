"""
Data models for canaryaudit results
"""

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .exceptions import InvalidInputError

MAX_MOMENT_ORDER = 4
CI_METHODS = ("bernstein", "wilson")
CI_ORDERS = (1, 2, 4)

# Two-sided failure budget of each interval order, as a multiple of beta
JOINT_FAILURE_FACTOR = {1: 2.0, 2: 1.5, 4: 1.25}


def json_float(value: Optional[float]) -> Any:
    """Make a float JSON-safe: infinities become the strings "inf"/"-inf"."""
    if value is None:
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


@dataclass
class MomentVector:
    """Empirical exchangeable-Bernoulli moments of a statistics matrix"""

    mu_hat: Dict[int, float]
    per_trial: np.ndarray

    def __post_init__(self) -> None:
        for order, value in self.mu_hat.items():
            if not 1 <= order <= MAX_MOMENT_ORDER:
                raise InvalidInputError(f"moment order {order} not in 1..4")
            if not -1e-12 <= value <= 1 + 1e-12:
                raise InvalidInputError(
                    f"moment mu{order}={value} outside [0, 1]"
                )

    @property
    def max_order(self) -> int:
        return max(self.mu_hat)

    @property
    def n(self) -> int:
        return int(self.per_trial.shape[0])

    def mu(self, order: int) -> float:
        """Return the empirical moment of the given order."""
        if order not in self.mu_hat:
            raise InvalidInputError(
                f"moment of order {order} was not computed "
                f"(available: 1..{self.max_order})"
            )
        return self.mu_hat[order]

    def to_dict(self) -> Dict[str, Any]:
        return {
            f"mu{order}": self.mu_hat.get(order)
            for order in range(1, MAX_MOMENT_ORDER + 1)
        }

    def to_json(self, indent: int = 2) -> str:
        """Convert to JSON string"""
        return json.dumps(self.to_dict(), indent=indent)


@dataclass
class ConfidenceBound:
    """Confidence interval on the XBern mean mu1"""

    lower: float
    upper: float
    method: str
    order: int
    beta: float
    joint_failure: float = field(default=-1.0)

    def __post_init__(self) -> None:
        if self.method not in CI_METHODS:
            raise InvalidInputError(f"unknown interval method: {self.method}")
        if self.order not in CI_ORDERS:
            raise InvalidInputError(f"interval order must be 1, 2 or 4: {self.order}")
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise InvalidInputError(
                f"bounds must satisfy 0 <= lower <= upper <= 1, "
                f"got [{self.lower}, {self.upper}]"
            )
        if self.joint_failure < 0:
            self.joint_failure = JOINT_FAILURE_FACTOR[self.order] * self.beta

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def name(self) -> str:
        return f"{self.method}{self.order}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "order": self.order,
            "beta": self.beta,
            "joint_failure": self.joint_failure,
            "lower": self.lower,
            "upper": self.upper,
        }

    def to_json(self, indent: int = 2) -> str:
        """Convert to JSON string"""
        return json.dumps(self.to_dict(), indent=indent)


@dataclass
class ThresholdTuning:
    """Holdout result of the rejection-threshold search"""

    tau: float
    grid: List[float]
    holdout_eps_hat: List[float]
    holdout_trials: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tau": self.tau,
            "grid": list(self.grid),
            "holdout_eps_hat": [json_float(v) for v in self.holdout_eps_hat],
            "holdout_trials": self.holdout_trials,
        }


@dataclass
class AuditReport:
    """Complete result of one audit run"""

    eps_hat: float
    p1_lower: ConfidenceBound
    p0_upper: ConfidenceBound
    moments_alt: MomentVector
    moments_null: MomentVector
    diagnostics: Dict[str, Optional[float]]
    config: Dict[str, Any]
    tau: float
    sigma: Optional[float]
    mechanism_calls: int
    eps_hat_forward: float
    eps_hat_reverse: Optional[float] = None
    tuning: Optional[ThresholdTuning] = None
    wall_clock_seconds: float = 0.0
    # "reverse" when the complement rejection sets gave the larger estimate
    direction: str = "forward"
    # Binary matrices behind the bounds; written as CSV, not part of to_dict
    stats_alt: Optional[np.ndarray] = field(default=None, repr=False)
    stats_null: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def beta(self) -> float:
        return float(self.config["beta"])

    @property
    def guarantee(self) -> str:
        return f"P(eps < eps_hat) <= {self.beta:g}"

    def violates(self, claimed_epsilon: float) -> bool:
        """True when the empirical lower bound exceeds the claimed epsilon."""
        return self.eps_hat > claimed_epsilon

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps_hat": json_float(self.eps_hat),
            "eps_hat_forward": json_float(self.eps_hat_forward),
            "eps_hat_reverse": json_float(self.eps_hat_reverse),
            "direction": self.direction,
            "guarantee": self.guarantee,
            "tau": self.tau,
            "tuning": self.tuning.to_dict() if self.tuning else None,
            "p1_lower": self.p1_lower.to_dict(),
            "p0_upper": self.p0_upper.to_dict(),
            "moments_alt": self.moments_alt.to_dict(),
            "moments_null": self.moments_null.to_dict(),
            "diagnostics": {k: json_float(v) for k, v in self.diagnostics.items()},
            "sigma": self.sigma,
            "mechanism_calls": self.mechanism_calls,
            "config": self.config,
            "wall_clock_seconds": self.wall_clock_seconds,
        }

    def to_json(self, indent: int = 2) -> str:
        """Convert to JSON string"""
        return json.dumps(self.to_dict(), indent=indent)


@dataclass
class DecompositionRow:
    """Bias/variance split of the empirical epsilon for one canary count"""

    k: int
    eps_hat: Dict[int, float]
    delta_bias: float
    delta_var: Dict[int, float]
    delta_bias_stderr: float = 0.0
    delta_var_stderr: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "eps_hat": {str(o): json_float(v) for o, v in self.eps_hat.items()},
            "delta_bias": json_float(self.delta_bias),
            "delta_bias_stderr": json_float(self.delta_bias_stderr),
            "delta_var": {str(o): json_float(v) for o, v in self.delta_var.items()},
            "delta_var_stderr": {
                str(o): json_float(v) for o, v in self.delta_var_stderr.items()
            },
        }
