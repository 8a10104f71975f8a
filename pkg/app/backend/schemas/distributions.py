"""
분포 관련 Pydantic 스키마
유계 구간, 이산 분포, 시나리오 수익률 표를 정의합니다. 모든 모델은 생성 후 불변입니다.
"""

import math
from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Interval(BaseModel):
    """유계 구간 [a, b]"""

    model_config = ConfigDict(frozen=True)

    a: float = Field(..., description="하한")
    b: float = Field(..., description="상한")

    @model_validator(mode="after")
    def validate_bounds(self) -> "Interval":
        """a < b, 둘 다 유한값"""
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("interval endpoints must be finite")
        if not self.a < self.b:
            raise ValueError(f"interval requires a < b, got a={self.a}, b={self.b}")
        return self

    @property
    def length(self) -> float:
        return self.b - self.a

    def grid(self, size: int) -> np.ndarray:
        """양 끝점을 포함하는 균등 격자"""
        return np.linspace(self.a, self.b, size)

    def __str__(self) -> str:
        return f"[{self.a:g}, {self.b:g}]"


class DiscreteDistribution(BaseModel):
    """
    구간 [a, b] 위의 유한 이산 분포

    원자는 엄격히 증가하고 확률은 모두 양수이며 합은 1입니다.
    직접 생성하기보다 dist_core.make_distribution 을 사용하세요.
    """

    model_config = ConfigDict(frozen=True)

    atoms: tuple[float, ...] = Field(..., description="원자 (엄격히 증가)")
    probs: tuple[float, ...] = Field(..., description="원자별 확률 (양수)")
    support_interval: Interval = Field(..., description="지지 구간")

    @model_validator(mode="after")
    def validate_invariants(self) -> "DiscreteDistribution":
        if len(self.atoms) == 0 or len(self.atoms) != len(self.probs):
            raise ValueError("atoms and probs must be nonempty and aligned")
        atoms = np.asarray(self.atoms)
        probs = np.asarray(self.probs)
        if np.any(np.diff(atoms) <= 0):
            raise ValueError("atoms must be strictly increasing")
        if np.any(probs <= 0):
            raise ValueError("every probability must be positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, expected 1")
        if atoms[0] < self.support_interval.a or atoms[-1] > self.support_interval.b:
            raise ValueError("atoms must lie inside the support interval")
        return self

    @cached_property
    def atom_array(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=float)

    @cached_property
    def prob_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def mean(self) -> float:
        return float(self.atom_array @ self.prob_array)

    def expectation(self, values: np.ndarray) -> float:
        """원자별 값의 기댓값"""
        return float(np.asarray(values, dtype=float) @ self.prob_array)


class ScenarioTable(BaseModel):
    """시나리오 수익률 표 (자산 × 시나리오)"""

    model_config = ConfigDict(frozen=True)

    returns: tuple[tuple[float, ...], ...] = Field(..., description="자산별 시나리오 수익률")
    scenario_probs: tuple[float, ...] = Field(..., description="시나리오 확률")
    asset_names: tuple[str, ...] | None = Field(None, description="자산 이름")

    @model_validator(mode="after")
    def validate_shape(self) -> "ScenarioTable":
        if len(self.returns) == 0:
            raise ValueError("scenario table needs at least one asset")
        scenarios = len(self.scenario_probs)
        if scenarios == 0 or any(len(row) != scenarios for row in self.returns):
            raise ValueError("every asset row needs one return per scenario")
        matrix = np.asarray(self.returns, dtype=float)
        if not np.all(np.isfinite(matrix)):
            raise ValueError("returns must be finite")
        probs = np.asarray(self.scenario_probs, dtype=float)
        if np.any(probs <= 0):
            raise ValueError("scenario probabilities must be positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"scenario probabilities sum to {probs.sum()!r}, expected 1")
        if self.asset_names is not None and len(self.asset_names) != len(self.returns):
            raise ValueError("asset_names must match the number of assets")
        return self

    @cached_property
    def return_matrix(self) -> np.ndarray:
        return np.asarray(self.returns, dtype=float)

    @cached_property
    def prob_array(self) -> np.ndarray:
        return np.asarray(self.scenario_probs, dtype=float)

    @property
    def asset_count(self) -> int:
        return len(self.returns)

    @property
    def scenario_count(self) -> int:
        return len(self.scenario_probs)

    @property
    def expected_returns(self) -> np.ndarray:
        """자산별 기대수익률 E(R_i)"""
        return self.return_matrix @ self.prob_array

    @property
    def names(self) -> tuple[str, ...]:
        if self.asset_names is not None:
            return self.asset_names
        return tuple(f"asset_{i + 1}" for i in range(self.asset_count))
