"""
생성자(generator) 실험실
역방향 반복 적분으로 G_n 원소를 만들고, 꺾인 볼록 함수를 매끄럽게 만든 뒤(mollify),
LPM 효용 −max{c−x, 0}^n 으로 수렴하는 근사 효용과 분포의 반복 적분을 계산합니다.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import cumulative_trapezoid, trapezoid

from app.backend.core.config import settings
from app.backend.core.exceptions import (
    BadOrderError,
    MalformedInputError,
    NegativeBaseError,
    NotConvexError,
    NotDecreasingError,
)
from app.backend.core.logging import get_logger, log_context
from app.backend.schemas.distributions import DiscreteDistribution, Interval
from app.backend.services.dist_core import lpm_at
from app.backend.services.polyseg import PiecewisePolynomial, lpm_curve
from app.backend.services.utility_classes import UtilitySpec

logger = get_logger(__name__)

BaseSampler = Callable[[np.ndarray], np.ndarray]


# ----- 적분 테이블 효용 -----


class IntegratedTableUtility(UtilitySpec):
    """
    도함수 차수별 구간별 다항식으로 저장된 효용

    u^{(n+1)} 은 격자 위 선형 보간이고, 낮은 차수는 b 에서 정확한 역적분으로 얻습니다.
    따라서 k = 1..n−1 에 대해 u^{(k)}(b) = 0, u(b) = 0 이 구성상 성립합니다.
    """

    def __init__(
        self,
        n: int,
        interval: Interval,
        pieces: list[PiecewisePolynomial],
        construction_log: dict[str, Any],
        label: str | None = None,
    ):
        super().__init__(interval, len(pieces) - 1, label or f"integrated_table(n={n})")
        self.n = n
        self.pieces = pieces
        self.construction_log = construction_log

    @property
    def grid(self) -> np.ndarray:
        return self.pieces[0].breakpoints

    def _derivative(self, x: np.ndarray, k: int) -> np.ndarray:
        return np.asarray(self.pieces[k](x), dtype=float)

    @cached_property
    def derivative_tables(self) -> np.ndarray:
        """(n+2, 격자) 배열, 행 k 는 격자 위 u^{(k)}"""
        return np.vstack([np.asarray(p(self.grid), dtype=float) for p in self.pieces])

    def table_consistency_error(self) -> float:
        """
        표 k+1 을 b 에서 거꾸로 사다리꼴 적분해 표 k 를 재현할 때의 최대 초과 오차

        각 차수의 허용폭은 1e-8·scale 에 사다리꼴 오차 한계 L·h²·max|u^{(k+3)}|/12 를 더한 값이며,
        반환값이 0 이면 모든 차수가 허용폭 안에 있습니다.
        """
        tables = self.derivative_tables
        x = self.grid
        h = float(np.max(np.diff(x)))
        worst = 0.0
        for k in range(self.n + 1):
            upper = tables[k + 1]
            integral = cumulative_trapezoid(upper[::-1], -x[::-1], initial=0.0)[::-1]
            reproduced = tables[k][-1] - integral
            curvature = self.pieces[k + 1].derivative(2)
            bound = self.interval.length * h**2 * float(np.max(np.abs(curvature(x)))) / 12.0
            scale = max(1.0, float(np.max(np.abs(tables[k]))))
            excess = float(np.max(np.abs(reproduced - tables[k]))) - (1e-8 * scale + 2.0 * bound)
            worst = max(worst, excess)
        return worst

    def is_consistent(self) -> bool:
        return self.table_consistency_error() <= 0.0


def sample_generator_utility(
    n: int,
    interval: Interval,
    base_w: BaseSampler | np.ndarray,
    boundary_s: float = 0.0,
    grid_resolution: int | None = None,
) -> IntegratedTableUtility:
    """
    G_n 원소 생성

    u^{(n+1)} = (−1)^n·w, u^{(n)}(b) = (−1)^{n+1}·s 로 두고 b 에서 아래로 적분합니다.
    낮은 차수는 모두 b 에서 0 입니다.

    Args:
        n: 차수
        interval: 구간 [a, b]
        base_w: 격자 위에서 평가할 비음수 함수 또는 격자 크기의 표본 배열
        boundary_s: 비음수 경계값
        grid_resolution: 격자 점 수 (기본값 generator_grid_resolution)

    Raises:
        NegativeBaseError: w 또는 s 가 음수
    """
    if n < 1:
        raise BadOrderError(f"n must be positive, got {n}", n=n)
    size = grid_resolution or settings.generator_grid_resolution
    if size < 2:
        raise MalformedInputError(f"grid_resolution must be at least 2, got {size}")
    grid = interval.grid(size)
    w = np.asarray(base_w(grid) if callable(base_w) else base_w, dtype=float)
    if w.shape != grid.shape or not np.all(np.isfinite(w)):
        raise MalformedInputError(
            "base samples must be finite and match the grid", expected=int(grid.size)
        )
    floor = 1e-14 * max(1.0, float(np.max(np.abs(w))))
    if np.any(w < -floor):
        raise NegativeBaseError(
            "base function must be nonnegative",
            min_value=float(w.min()),
            at=float(grid[np.argmin(w)]),
        )
    if not boundary_s >= 0:
        raise NegativeBaseError(f"boundary value must be nonnegative, got {boundary_s}")
    w = np.maximum(w, 0.0)

    sign = (-1.0) ** n
    slopes = np.diff(w) / np.diff(grid)
    top = PiecewisePolynomial(grid, sign * np.column_stack([w[:-1], slopes]))
    pieces = [top, top.antiderivative(anchor="right", value=-sign * boundary_s)]
    for _ in range(n):
        pieces.append(pieces[-1].antiderivative(anchor="right", value=0.0))
    pieces.reverse()

    log = {
        "base_samples": int(w.size),
        "boundary_s": float(boundary_s),
        "base_mass": float(trapezoid(w, grid)),
    }
    logger.debug("Generator utility built", extra=log_context(n=n, **log))
    return IntegratedTableUtility(n, interval, pieces, log)


@dataclass(frozen=True)
class BaseFunction:
    """비음수 기저 함수: 상수 + 무작위 봉우리들의 합"""

    interval: Interval
    constant: float
    bumps: tuple[dict[str, Any], ...] = ()

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.full_like(x, self.constant)
        a, length = self.interval.a, self.interval.length
        for bump in self.bumps:
            kind, amp = bump["kind"], bump["amplitude"]
            if kind == "gaussian":
                total += amp * np.exp(-0.5 * ((x - bump["center"]) / bump["scale"]) ** 2)
            elif kind == "cosine":
                z = (x - bump["center"]) / bump["scale"]
                total += amp * np.where(np.abs(z) < 1.0, 0.5 * (1.0 + np.cos(np.pi * z)), 0.0)
            else:
                u = (x - a) / length
                if bump["side"] == "right":
                    u = 1.0 - u
                total += amp * np.clip(u, 0.0, 1.0) ** bump["power"]
        return total

    def describe(self) -> dict[str, Any]:
        return {"constant": self.constant, "bumps": list(self.bumps)}


def random_base_function(rng: np.random.Generator, interval: Interval) -> BaseFunction:
    """가우시안/코사인/다항식 봉우리 1~5개와 상수의 비음수 혼합"""
    a, length = interval.a, interval.length
    constant = float(rng.uniform(0.0, 1.0)) if rng.random() < 0.5 else 0.0
    bumps = []
    for _ in range(int(rng.integers(1, 6))):
        kind = str(rng.choice(["gaussian", "cosine", "polynomial"]))
        bump: dict[str, Any] = {"kind": kind, "amplitude": float(rng.uniform(0.1, 3.0))}
        if kind == "polynomial":
            bump["power"] = int(rng.integers(0, 4))
            bump["side"] = str(rng.choice(["left", "right"]))
        else:
            bump["center"] = float(a + length * rng.uniform(-0.1, 1.1))
            bump["scale"] = float(length * rng.uniform(0.05, 0.5))
        bumps.append(bump)
    return BaseFunction(interval=interval, constant=constant, bumps=tuple(bumps))


# ----- 완화(mollification) -----


class MollifierConfig(BaseModel):
    """
    표준 봉우리 커널 exp(−1/(1−t²)) 의 폭 조정 설정

    kernel_resolution 은 [−1, 1] 위 커널 표의 점 수이고, grid_resolution 은 결과 표의 점 수입니다.
    """

    model_config = ConfigDict(frozen=True)

    width: float = Field(..., gt=0, description="커널 반폭")
    kernel_resolution: int = Field(
        default_factory=lambda: settings.mollifier_kernel_resolution, ge=33
    )
    grid_resolution: int | None = Field(None, ge=3, description="결과 표 점 수")
    right_extension: Literal["slope", "constant"] = "slope"

    @cached_property
    def kernel_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        t = np.linspace(-1.0, 1.0, self.kernel_resolution)
        kernel = np.zeros_like(t)
        inner = np.abs(t) < 1.0
        kernel[inner] = np.exp(-1.0 / (1.0 - t[inner] ** 2))
        kernel /= trapezoid(kernel, t)
        cdf = cumulative_trapezoid(kernel, t, initial=0.0)
        cdf /= cdf[-1]
        ramp = cumulative_trapezoid(cdf, t, initial=0.0)
        return t, kernel, cdf, ramp

    @property
    def kernel_weights(self) -> np.ndarray:
        """커널 표 칸별 확률 질량 (합 1)"""
        return np.diff(self.kernel_table[2])

    def kernel(self, s: np.ndarray) -> np.ndarray:
        t, kernel, _, _ = self.kernel_table
        return np.interp(s, t, kernel, left=0.0, right=0.0)

    def kernel_cdf(self, s: np.ndarray) -> np.ndarray:
        t, _, cdf, _ = self.kernel_table
        return np.interp(s, t, cdf, left=0.0, right=1.0)

    def ramp(self, s: np.ndarray) -> np.ndarray:
        """∫_{−∞}^s K_cdf, 즉 max(s, 0) 를 커널로 완화한 값"""
        t, _, _, ramp = self.kernel_table
        inside = np.interp(s, t, ramp)
        return np.where(s >= 1.0, ramp[-1] + (s - 1.0), np.where(s <= -1.0, 0.0, inside))


@dataclass(frozen=True, eq=False)
class FunctionTable:
    """격자 위 함수 값 표"""

    x: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or x.size < 2 or np.any(np.diff(x) <= 0):
            raise MalformedInputError("function table needs increasing abscissae and matching values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(
        cls, f: Callable[[np.ndarray], np.ndarray], interval: Interval, size: int
    ) -> "FunctionTable":
        grid = interval.grid(size)
        return cls(grid, f(grid))

    @property
    def interval(self) -> Interval:
        return Interval(a=float(self.x[0]), b=float(self.x[-1]))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.interp(x, self.x, self.values)


@dataclass(frozen=True, eq=False)
class MollifiedTable:
    """
    꺾은선 함수를 커널로 완화한 결과

    f̂(x) = f(t_0) + d_0(x − t_0) + Σ Δd_i·w·Ramp((x − t_i)/w)
    """

    origin: float
    origin_value: float
    origin_slope: float
    knots: np.ndarray
    jumps: np.ndarray
    config: MollifierConfig
    interval: Interval

    def _offsets(self, x: float | np.ndarray) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        return (arr[:, None] - self.knots[None, :]) / self.config.width

    def _shape(self, x: float | np.ndarray, result: np.ndarray) -> Any:
        return float(result[0]) if np.ndim(x) == 0 else result

    def value(self, x: float | np.ndarray) -> Any:
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        w = self.config.width
        smooth = (self.config.ramp(self._offsets(arr)) * w) @ self.jumps
        result = self.origin_value + self.origin_slope * (arr - self.origin) + smooth
        return self._shape(x, result)

    def slope(self, x: float | np.ndarray) -> Any:
        result = self.origin_slope + self.config.kernel_cdf(self._offsets(x)) @ self.jumps
        return self._shape(x, result)

    def curvature(self, x: float | np.ndarray) -> Any:
        result = self.config.kernel(self._offsets(x)) @ self.jumps / self.config.width
        return self._shape(x, result)

    def table(self, size: int | None = None) -> FunctionTable:
        size = size or self.config.grid_resolution or settings.generator_grid_resolution
        grid = self.interval.grid(size)
        return FunctionTable(grid, self.value(grid))


def mollify(
    f: FunctionTable,
    config: MollifierConfig,
    tolerance: float = 1e-9,
) -> MollifiedTable:
    """
    볼록 감소 꺾은선 함수의 매끄러운 근사

    a 왼쪽은 f'(a) 기울기의 직선, b 오른쪽은 right_extension 에 따라 b 에서의 왼쪽 기울기 연장
    ("slope") 또는 상수 f(b) ("constant") 로 연장한 뒤 커널과 정확히 합성곱합니다.
    결과는 볼록, 감소이며 f 와의 최대 거리는 Lipschitz(f)·width 이하입니다.

    Raises:
        NotDecreasingError: 차분 기울기가 tol·scale 보다 큼
        NotConvexError: 기울기 증분이 −tol·scale 보다 작음
    """
    x, values = f.x, f.values
    slopes = np.diff(values) / np.diff(x)
    scale = max(1.0, float(np.max(np.abs(slopes))))
    if np.max(slopes) > tolerance * scale:
        i = int(np.argmax(slopes))
        raise NotDecreasingError(
            "function must be nonincreasing", at=float(x[i]), slope=float(slopes[i])
        )
    jumps = np.diff(slopes)
    if jumps.size and np.min(jumps) < -tolerance * scale:
        i = int(np.argmin(jumps))
        raise NotConvexError(
            "function must be convex", at=float(x[i + 1]), slope_change=float(jumps[i])
        )

    knots = x[1:-1]
    significant = np.abs(jumps) > 1e-12 * scale
    knots, jumps = knots[significant], np.maximum(jumps[significant], 0.0)
    if config.right_extension == "constant" and slopes[-1] < 0:
        knots = np.append(knots, x[-1])
        jumps = np.append(jumps, -slopes[-1])

    logger.debug(
        "Mollified table",
        extra=log_context(width=config.width, kinks=int(knots.size), extension=config.right_extension),
    )
    return MollifiedTable(
        origin=float(x[0]),
        origin_value=float(values[0]),
        origin_slope=float(slopes[0]),
        knots=knots,
        jumps=jumps,
        config=config,
        interval=f.interval,
    )


# ----- LPM 근사 효용 -----


def build_lemma5_approximant(
    c: float,
    n: int,
    interval: Interval,
    width: float,
    grid_resolution: int | None = None,
) -> IntegratedTableUtility:
    """
    −max{c−x, 0}^n 으로 수렴하는 G_n 원소

    (n−1)차 도함수 윤곽 n!·max{c−x, 0} 을 완화하고 그 곡률을 기저 w, b 에서의 기울기를
    경계값으로 사용해 generator 구성을 그대로 적용합니다. 짝/홀 n 의 부호는 (−1)^n 한 경로로
    처리됩니다.

    c ≤ a 이면 영 효용을, c = b 이면 정확히 −(b−x)^n 을 돌려줍니다.
    """
    if n < 1:
        raise BadOrderError(f"n must be positive, got {n}", n=n)
    a, b = interval.a, interval.b
    if not a - 1e-12 * interval.length <= c <= b + 1e-12 * interval.length:
        raise MalformedInputError(f"threshold {c} outside {interval}", c=c)
    c = min(max(c, a), b)
    config = MollifierConfig(width=width)

    refinement = settings.mollifier_refinement
    resolution = max(
        grid_resolution or settings.generator_grid_resolution,
        math.ceil(2 * refinement * interval.length / width) + 1,
    )
    if c <= a:
        zero = np.zeros(resolution)
        utility = sample_generator_utility(n, interval, zero, 0.0, resolution)
        utility.construction_log.update({"threshold": c, "width": width, "note": "inactive kink"})
        return utility

    factorial = math.factorial(n)
    grid = np.union1d(interval.grid(resolution), [c])
    profile = FunctionTable(grid, factorial * np.maximum(c - grid, 0.0))
    smooth = mollify(profile, config)

    utility_grid = interval.grid(resolution)
    base = np.maximum(smooth.curvature(utility_grid), 0.0)
    boundary = max(-float(smooth.slope(b)), 0.0)
    utility = sample_generator_utility(n, interval, base, boundary, resolution)
    utility.label = f"lpm_approximant(n={n}, c={c:g}, width={width:g})"
    utility.construction_log.update({"threshold": c, "width": width, "resolution": resolution})
    return utility


# ----- 반복 적분 -----


def iterated_integral(W: DiscreteDistribution, j: int, c: float) -> float:
    """(1/j!)·Σ_{x_i < c} p_i (c − x_i)^j, 누적분포의 j 중 반복 적분"""
    if j < 1:
        raise BadOrderError(f"j must be positive, got {j}", j=j)
    return lpm_at(W, j, c) / math.factorial(j)


def iterated_cdf(W: DiscreteDistribution, j: int) -> PiecewisePolynomial:
    """누적분포 함수를 a 에서부터 j 번 정확히 적분한 구간별 다항식"""
    if j < 0:
        raise BadOrderError(f"j must be nonnegative, got {j}", j=j)
    curve = lpm_curve(W, 0)
    for _ in range(j):
        curve = curve.antiderivative(anchor="left", value=0.0)
    return curve
