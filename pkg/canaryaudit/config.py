"""
Configuration management for canaryaudit
"""

import itertools
import logging
import math
import os
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Set, Tuple

from dotenv import dotenv_values

from .canary import DEFAULT_TAU_GRID
from .exceptions import ConfigError
from .models import CI_METHODS, CI_ORDERS

NEIGHBORHOODS = ("add_remove", "replace_one")
WORKERS_ENV = "CANARYAUDIT_WORKERS"

logger = logging.getLogger(__name__)

# Alternative spellings accepted in config files
KEY_ALIASES = {"eps": "epsilon", "out": "out_dir"}

_CI_PATTERN = re.compile(r"(bernstein|wilson)([124])")


def parse_ci(value: str) -> Tuple[str, int]:
    """
    Split an interval name such as "wilson2" into (method, order).

    Raises:
        ConfigError: If the method or order is unknown
    """
    match = _CI_PATTERN.fullmatch(str(value).strip().lower())
    if match is None:
        raise ConfigError(
            "ci", f"expected bernstein or wilson followed by 1, 2 or 4, got {value!r}"
        )
    return match.group(1), int(match.group(2))


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional(parser: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        if text.strip().lower() in ("", "none", "auto"):
            return None
        return parser(text)

    return parse


def parse_float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(item) for item in text.split(",") if item.strip())


def _parse_int_list(text: str) -> List[int]:
    return [int(item) for item in text.split(",") if item.strip()]


def _parse_str_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


_AUDIT_PARSERS: Dict[str, Callable[[str], Any]] = {
    "n": int,
    "k": int,
    "m": _parse_optional(int),
    "d": int,
    "epsilon": float,
    "delta": float,
    "beta": float,
    "ci_method": str,
    "ci_order": int,
    "neighborhood": str,
    "tau": _parse_optional(float),
    "tau_grid": _parse_optional(parse_float_list),
    "sigma": _parse_optional(float),
    "seed": int,
    "workers": int,
    "both_directions": _parse_bool,
}

_SWEEP_PARSERS: Dict[str, Callable[[str], Any]] = {
    "sweep_n": _parse_int_list,
    "sweep_k": _parse_int_list,
    "sweep_d": _parse_int_list,
    "sweep_eps": lambda text: list(parse_float_list(text)),
    "sweep_ci": _parse_str_list,
    "repeats": int,
    "out_dir": str,
}


def _read_key_values(path: str) -> Dict[str, str]:
    if not Path(path).is_file():
        raise ConfigError("config", f"config file not found: {path}")
    raw = dotenv_values(path)
    values: Dict[str, str] = {}
    for key, value in raw.items():
        name = key.strip().lower()
        values[KEY_ALIASES.get(name, name)] = "" if value is None else value
    return values


def _split_sweep_keys(
    values: Dict[str, str]
) -> Tuple[Dict[str, str], Dict[str, Any]]:
    """Separate audit keys from validated sweep keys (repeats, out, sweep_*)."""
    sweep_raw = {k: v for k, v in values.items() if k in _SWEEP_PARSERS}
    base_raw = {k: v for k, v in values.items() if k not in _SWEEP_PARSERS}
    return base_raw, _convert(sweep_raw, _SWEEP_PARSERS)


def output_directory(config_file: Optional[str]) -> Optional[str]:
    """The out (or out_dir) value of a key=value file, if it sets one."""
    if not config_file:
        return None
    _, sweep = _split_sweep_keys(_read_key_values(config_file))
    return sweep.get("out_dir")


def _convert(
    values: Dict[str, str], parsers: Dict[str, Callable[[str], Any]]
) -> Dict[str, Any]:
    converted: Dict[str, Any] = {}
    for key, text in values.items():
        if key == "ci":
            converted["ci_method"], converted["ci_order"] = parse_ci(text)
            continue
        if key not in parsers:
            raise ConfigError(key, "unknown configuration key")
        try:
            converted[key] = parsers[key](text)
        except ValueError as e:
            raise ConfigError(key, f"cannot parse {text!r}: {e}") from e
    return converted


@dataclass(frozen=True)
class AuditConfig:
    """Configuration of one audit run"""

    n: int = 1024
    k: int = 32
    m: Optional[int] = None
    d: int = 1000
    epsilon: float = 1.0
    delta: float = 1e-5
    beta: float = 0.05
    ci_method: str = "wilson"
    ci_order: int = 2
    neighborhood: str = "add_remove"
    tau: Optional[float] = None
    tau_grid: Optional[Tuple[float, ...]] = None
    sigma: Optional[float] = None
    seed: int = 0
    workers: int = 1
    both_directions: bool = False

    def __post_init__(self) -> None:
        if self.tau_grid is not None:
            object.__setattr__(self, "tau_grid", tuple(float(t) for t in self.tau_grid))
        for name in ("n", "k", "d", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if self.m is not None and self.m < 1:
            raise ConfigError("m", f"must be >= 1, got {self.m}")
        if self.seed < 0:
            raise ConfigError("seed", f"must be >= 0, got {self.seed}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigError("epsilon", f"must be a positive number, got {self.epsilon}")
        for name in ("delta", "beta"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(name, f"must be in (0, 1), got {value}")
        if self.ci_method not in CI_METHODS:
            raise ConfigError("ci", f"unknown interval method {self.ci_method!r}")
        if self.ci_order not in CI_ORDERS:
            raise ConfigError("ci", f"interval order must be 1, 2 or 4, got {self.ci_order}")
        if self.ci_order > self.k:
            raise ConfigError(
                "ci", f"{self.ci} needs K >= {self.ci_order}, got K={self.k}"
            )
        if self.ci_order > self.num_null:
            raise ConfigError(
                "ci", f"{self.ci} needs m >= {self.ci_order}, got m={self.num_null}"
            )
        if self.neighborhood not in NEIGHBORHOODS:
            raise ConfigError(
                "neighborhood",
                f"expected one of {', '.join(NEIGHBORHOODS)}, got {self.neighborhood!r}",
            )
        if self.tau is not None and not math.isfinite(self.tau):
            raise ConfigError("tau", f"must be finite, got {self.tau}")
        if self.tau_grid is not None and len(self.tau_grid) == 0:
            raise ConfigError("tau_grid", "must contain at least one threshold")
        if self.sigma is not None and not self.sigma >= 0:
            raise ConfigError("sigma", f"must be >= 0, got {self.sigma}")

    @property
    def num_null(self) -> int:
        """Number of null canaries per trial (defaults to K)."""
        return self.k if self.m is None else self.m

    @property
    def ci(self) -> str:
        return f"{self.ci_method}{self.ci_order}"

    @property
    def grid(self) -> Tuple[float, ...]:
        return self.tau_grid if self.tau_grid is not None else DEFAULT_TAU_GRID

    def with_changes(self, **changes: Any) -> "AuditConfig":
        """Copy with some fields replaced (validated again)."""
        return replace(self, **changes)

    @classmethod
    def from_file(
        cls, config_file: Optional[str] = None, **overrides: Any
    ) -> "AuditConfig":
        """
        Build a configuration from defaults, environment, file and flags.

        Later sources win: defaults, then CANARYAUDIT_WORKERS, then the
        key=value file, then keyword overrides that are not None.
        Sweep keys in the file are checked the same way ExperimentSpec
        checks them and otherwise left out, so one file serves both.

        Args:
            config_file: Path to a key=value file (optional)
            **overrides: Field values, typically CLI flags

        Returns:
            AuditConfig instance

        Raises:
            ConfigError: If a key is unknown or a value is invalid
        """
        values: Dict[str, Any] = {}
        env_workers = os.getenv(WORKERS_ENV)
        if env_workers:
            values.update(_convert({"workers": env_workers}, _AUDIT_PARSERS))
        if config_file:
            base_raw, sweep = _split_sweep_keys(_read_key_values(config_file))
            if sweep:
                logger.debug(
                    f"{config_file}: {', '.join(sorted(sweep))} "
                    "do not configure a single audit"
                )
            values.update(_convert(base_raw, _AUDIT_PARSERS))
        values.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(values) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration key")
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        """Convert config to dictionary"""
        return {
            "n": self.n,
            "k": self.k,
            "m": self.num_null,
            "d": self.d,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "beta": self.beta,
            "ci": self.ci,
            "neighborhood": self.neighborhood,
            "tau": self.tau,
            "tau_grid": list(self.tau_grid) if self.tau_grid is not None else None,
            "sigma": self.sigma,
            "seed": self.seed,
            "workers": self.workers,
            "both_directions": self.both_directions,
        }


@dataclass(frozen=True)
class SweepPoint:
    """One point of an experiment grid"""

    n: int
    k: int
    d: int
    epsilon: float
    ci: str

    def axes(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "k": self.k,
            "d": self.d,
            "epsilon": self.epsilon,
            "ci": self.ci,
        }


@dataclass(frozen=True)
class ExperimentSpec:
    """Grid of audits over n, K, d, epsilon and interval, repeated r times"""

    base: AuditConfig = field(default_factory=AuditConfig)
    n_values: List[int] = field(default_factory=list)
    k_values: List[int] = field(default_factory=list)
    d_values: List[int] = field(default_factory=list)
    eps_values: List[float] = field(default_factory=list)
    ci_values: List[str] = field(default_factory=list)
    repeats: int = 1
    out_dir: str = "results"

    def __post_init__(self) -> None:
        if self.repeats < 1:
            raise ConfigError("repeats", f"must be >= 1, got {self.repeats}")
        for ci in self.ci_values:
            parse_ci(ci)
        # Every grid point must yield a valid configuration
        for point in self.points():
            self.config_for(point, 0)

    def points(self) -> Iterator[SweepPoint]:
        """
        Sweep points in sorted axis order (n, K, d, epsilon, ci).

        An interval order that K or m cannot support is lowered to the
        largest order that fits, so K=1 points run the order-1 baseline.
        Points that coincide after lowering are yielded once.
        """
        axes = itertools.product(
            sorted(set(self.n_values)) or [self.base.n],
            sorted(set(self.k_values)) or [self.base.k],
            sorted(set(self.d_values)) or [self.base.d],
            sorted(set(self.eps_values)) or [self.base.epsilon],
            sorted(set(self.ci_values), key=parse_ci) or [self.base.ci],
        )
        seen: Set[SweepPoint] = set()
        for n, k, d, eps, ci in axes:
            point = SweepPoint(n=n, k=k, d=d, epsilon=eps, ci=self._supported_ci(ci, k))
            if point not in seen:
                seen.add(point)
                yield point

    def _supported_ci(self, ci: str, k: int) -> str:
        method, order = parse_ci(ci)
        limit = min(k, self.base.m if self.base.m is not None else k)
        supported = max(o for o in CI_ORDERS if o <= max(1, min(order, limit)))
        return f"{method}{supported}"

    def config_for(self, point: SweepPoint, repeat: int) -> AuditConfig:
        """Audit configuration of one sweep point and repeat index."""
        method, order = parse_ci(point.ci)
        try:
            return self.base.with_changes(
                n=point.n,
                k=point.k,
                d=point.d,
                epsilon=point.epsilon,
                ci_method=method,
                ci_order=order,
                seed=self.base.seed + repeat,
            )
        except ConfigError as e:
            raise ConfigError(e.field, f"sweep point {point.axes()}: {e}") from e

    @classmethod
    def from_file(cls, spec_file: str, **overrides: Any) -> "ExperimentSpec":
        """
        Load an experiment grid from a key=value file.

        Sweep keys (sweep_n, sweep_K, sweep_d, sweep_eps, sweep_ci, repeats,
        out) describe the grid; every other key configures the base audit.
        """
        base_raw, sweep = _split_sweep_keys(_read_key_values(spec_file))
        base_values = _convert(base_raw, _AUDIT_PARSERS)
        sweep_overrides = {
            key: overrides.pop(key) for key in ("repeats", "out_dir") if key in overrides
        }
        base_values.update({k: v for k, v in overrides.items() if v is not None})
        env_workers = os.getenv(WORKERS_ENV)
        if env_workers and "workers" not in base_values:
            base_values.update(_convert({"workers": env_workers}, _AUDIT_PARSERS))
        sweep.update({k: v for k, v in sweep_overrides.items() if v is not None})
        return cls(
            base=AuditConfig(**base_values),
            n_values=sweep.get("sweep_n", []),
            k_values=sweep.get("sweep_k", []),
            d_values=sweep.get("sweep_d", []),
            eps_values=sweep.get("sweep_eps", []),
            ci_values=sweep.get("sweep_ci", []),
            repeats=sweep.get("repeats", 1),
            out_dir=sweep.get("out_dir", "results"),
        )
