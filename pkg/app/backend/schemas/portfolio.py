"""
포트폴리오 최적화 스키마
시나리오 기반 기대수익 최대화 문제, 해, CLI 문제 파일 형식을 정의합니다.
"""

from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.backend.schemas.distributions import DiscreteDistribution, Interval, ScenarioTable


class ConstraintDirection(str, Enum):
    """LPM 제약 방향"""

    # LPM(포트폴리오) ≤ LPM(벤치마크): 볼록 실행가능 집합
    PORTFOLIO_AT_MOST_BENCHMARK = "PortfolioAtMostBenchmark"
    # LPM(포트폴리오) ≥ LPM(벤치마크): 역볼록 집합, 풀지 않음
    PORTFOLIO_AT_LEAST_BENCHMARK = "PortfolioAtLeastBenchmark"


class PortfolioProblem(BaseModel):
    """기대수익 최대화 + 모든 c ∈ [a, b] 에서의 LPM 제약"""

    model_config = ConfigDict(frozen=True)

    table: ScenarioTable = Field(..., description="자산 × 시나리오 수익률")
    benchmark: DiscreteDistribution = Field(..., description="벤치마크 분포 Y")
    exponent_n: int = Field(..., ge=1, description="LPM 지수")
    interval: Interval = Field(..., description="임계값 구간 [a, b]")
    constraint_direction: ConstraintDirection = ConstraintDirection.PORTFOLIO_AT_MOST_BENCHMARK
    tolerance: float = Field(1e-7, gt=0, description="제약 위반 허용오차")
    extra_thresholds: tuple[float, ...] = Field((), description="초기 임계값 집합에 추가할 c")

    @model_validator(mode="after")
    def validate_support(self) -> "PortfolioProblem":
        if self.benchmark.support_interval != self.interval:
            raise ValueError("benchmark must be supported on the problem interval")
        slack = 1e-12 * self.interval.length
        returns = self.table.return_matrix
        # 단체 위 포트폴리오 수익률의 범위는 시나리오별 자산 최소/최대
        if returns.min() < self.interval.a - slack or returns.max() > self.interval.b + slack:
            raise ValueError("achievable portfolio returns must lie in the interval")
        for c in self.extra_thresholds:
            if not self.interval.a <= c <= self.interval.b:
                raise ValueError(f"extra threshold {c} outside the interval")
        return self


class PortfolioSolution(BaseModel):
    """절단평면 해"""

    weights: list[float] = Field(..., description="단체 위 가중치")
    asset_names: list[str] = Field(default_factory=list)
    expected_return: float
    active_thresholds: list[float] = Field(default_factory=list, description="제약이 걸린 c")
    iterations: int = Field(..., ge=0)
    max_violation: float
    worst_threshold: float
    tolerance: float
    violation_history: list[float] = Field(
        default_factory=list, description="반복별 현재 최선 해의 최대 위반량"
    )

    @model_validator(mode="after")
    def validate_solution(self) -> "PortfolioSolution":
        if min(self.weights) < -1e-12 or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must lie on the simplex")
        if self.max_violation > self.tolerance:
            raise ValueError("a returned solution must satisfy the dominance constraints")
        return self


class ProblemFile(BaseModel):
    """
    CLI 문제 파일 (JSON/YAML)

    CSV 경로가 상대 경로이면 문제 파일 위치 기준으로 해석합니다.
    """

    model_config = ConfigDict(extra="forbid")

    scenarios_csv: Path
    benchmark_csv: Path
    n: int = Field(..., ge=1)
    a: float
    b: float
    tolerance: float | None = Field(None, gt=0)
    max_iterations: int | None = Field(None, ge=1)
    constraint_direction: ConstraintDirection = ConstraintDirection.PORTFOLIO_AT_MOST_BENCHMARK
    extra_thresholds: list[float] = Field(default_factory=list)

    def resolve(self, base: Path) -> "ProblemFile":
        return self.model_copy(
            update={
                "scenarios_csv": base / self.scenarios_csv,
                "benchmark_csv": base / self.benchmark_csv,
            }
        )
