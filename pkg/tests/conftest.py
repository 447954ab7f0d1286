"""
Pytest configuration and fixtures
"""

import itertools
import math
import os
from typing import Dict, List
from unittest.mock import patch

import numpy as np
import pytest
from hypothesis import settings

from canaryaudit.config import AuditConfig
from canaryaudit.xbern import BetaMixing, PointMixing, TwoPointMixing

settings.register_profile("canaryaudit", deadline=None, max_examples=60)
settings.load_profile("canaryaudit")


def brute_force_moments(x: np.ndarray, max_order: int) -> List[float]:
    """Subset-average moments by explicit enumeration of index subsets."""
    k = len(x)
    moments = []
    for order in range(1, max_order + 1):
        total = sum(
            int(all(x[j] for j in subset))
            for subset in itertools.combinations(range(k), order)
        )
        moments.append(total / math.comb(k, order))
    return moments


MIXTURES = {
    "point(0.1)": PointMixing(0.1),
    "point(0.5)": PointMixing(0.5),
    "beta(2,5)": BetaMixing(2.0, 5.0),
    "two-point(0.1,0.9,0.5)": TwoPointMixing(0.1, 0.9, 0.5),
}


@pytest.fixture
def temp_env():
    """Fixture to temporarily modify environment variables"""
    with patch.dict(os.environ, {}, clear=False) as env:
        env.pop("CANARYAUDIT_WORKERS", None)
        env.pop("LOG_LEVEL", None)
        yield env


@pytest.fixture
def noiseless_config() -> AuditConfig:
    """Sigma=0 audit where present canaries score about 1 and absent ones about 0"""
    return AuditConfig(
        n=20,
        k=4,
        d=500,
        sigma=0.0,
        tau=0.5,
        ci_method="wilson",
        ci_order=2,
        seed=3,
    )


@pytest.fixture
def small_config() -> AuditConfig:
    """Reduced-scale calibrated audit that runs in well under a second"""
    return AuditConfig(n=64, k=8, d=200, epsilon=2.0, tau=1.0, seed=11)


@pytest.fixture
def sample_matrix() -> np.ndarray:
    return np.array([[1, 1, 0, 1], [0, 0, 0, 0]], dtype=np.uint8)


@pytest.fixture
def config_file(tmp_path) -> str:
    """key=value configuration file with a few overrides"""
    path = tmp_path / "audit.conf"
    path.write_text(
        "# small audit\n"
        "n=50\n"
        "K=4\n"
        "d=100\n"
        "eps=2\n"
        "ci=bernstein1\n"
        "tau=0.5\n"
        "seed=5\n"
    )
    return str(path)


def moments_dict(values: List[float]) -> Dict[int, float]:
    return {order + 1: value for order, value in enumerate(values)}
