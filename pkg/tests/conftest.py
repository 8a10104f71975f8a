"""
공용 테스트 픽스처
"""

import numpy as np
import pytest

from app.backend.schemas.distributions import DiscreteDistribution, Interval
from app.backend.services.dist_core import make_interval, theta_lottery


@pytest.fixture
def unit_interval() -> Interval:
    return make_interval(0.0, 1.0)


@pytest.fixture
def lottery_pair(unit_interval: Interval) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    """θ = 0.5, n = 2 의 (F, G): F = δ_0.5, G = {0: 0.25, 1: 0.75}"""
    return theta_lottery(0.5, 2, unit_interval)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
