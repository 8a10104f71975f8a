"""
포트폴리오 최적화 서비스
모든 임계값 c ∈ [a, b] 에서 LPM_{n,c}(Σ R_i x_i) ≤ LPM_{n,c}(Y) 를 만족하는 단체 위 가중치 중
기대수익이 최대인 해를 임계값 교환(cutting-plane exchange) 방식으로 구합니다.

내부 단계는 유한 임계값 집합의 볼록 제약을 지지 초평면으로 근사한 선형계획(Kelley 절단평면)이며,
외부 단계는 구간별 다항식 인증으로 전 구간 최대 위반 임계값을 찾아 집합에 추가합니다.
"""

from collections.abc import Sequence

import numpy as np
from pydantic import ValidationError
from scipy.optimize import linprog
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from app.backend.core.config import settings
from app.backend.core.exceptions import (
    InfeasibleError,
    IntervalMismatchError,
    IterationLimitError,
    MalformedInputError,
    NumericalFailureError,
    OutOfIntervalError,
    SolverStatusError,
    UnsupportedDirectionError,
)
from app.backend.core.logging import get_logger, log_context
from app.backend.schemas.distributions import DiscreteDistribution, Interval, ScenarioTable
from app.backend.schemas.portfolio import ConstraintDirection, PortfolioProblem, PortfolioSolution
from app.backend.services.dist_core import lpm_at, portfolio_distribution
from app.backend.services.polyseg import certify_nonnegative, lpm_curve

logger = get_logger(__name__)

# HiGHS 실패 시 차례로 시도할 방법
_LP_METHODS = ("highs", "highs-ds", "highs-ipm")


def make_problem(
    table: ScenarioTable,
    benchmark: DiscreteDistribution,
    exponent_n: int,
    interval: Interval,
    constraint_direction: ConstraintDirection = ConstraintDirection.PORTFOLIO_AT_MOST_BENCHMARK,
    tolerance: float | None = None,
    extra_thresholds: Sequence[float] = (),
) -> PortfolioProblem:
    """
    문제 생성 및 검증

    Raises:
        IntervalMismatchError: 벤치마크 구간이 문제 구간과 다름
        OutOfIntervalError: 달성 가능한 포트폴리오 수익률이 구간 밖
    """
    if benchmark.support_interval != interval:
        raise IntervalMismatchError(
            f"benchmark supported on {benchmark.support_interval}, problem uses {interval}"
        )
    returns = table.return_matrix
    slack = 1e-12 * interval.length
    if returns.min() < interval.a - slack or returns.max() > interval.b + slack:
        raise OutOfIntervalError(
            f"scenario returns span [{returns.min():g}, {returns.max():g}] outside {interval}",
            low=float(returns.min()),
            high=float(returns.max()),
        )
    try:
        return PortfolioProblem(
            table=table,
            benchmark=benchmark,
            exponent_n=exponent_n,
            interval=interval,
            constraint_direction=constraint_direction,
            tolerance=settings.portfolio_tolerance if tolerance is None else tolerance,
            extra_thresholds=tuple(extra_thresholds),
        )
    except ValidationError as e:
        raise MalformedInputError(
            "invalid portfolio problem", errors=[err["msg"] for err in e.errors()]
        ) from e


def project_to_simplex(v: Sequence[float] | np.ndarray) -> np.ndarray:
    """
    확률 단체 위로의 유클리드 사영 (정렬 임계값 방식, O(k log k))
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    index = np.arange(1, v.size + 1)
    rho = np.nonzero(u - cumulative / index > 0)[0][-1]
    theta = cumulative[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def constraint_violation(
    problem: PortfolioProblem, weights: Sequence[float] | np.ndarray
) -> tuple[float, float]:
    """
    max_{c ∈ [a,b]} LPM_{n,c}(포트폴리오) − LPM_{n,c}(Y) 와 그 위치

    Returns:
        (max_violation, worst_c)
    """
    portfolio = portfolio_distribution(problem.table, weights, problem.interval)
    difference = lpm_curve(problem.benchmark, problem.exponent_n) - lpm_curve(
        portfolio, problem.exponent_n
    )
    certificate = certify_nonnegative(difference, problem.tolerance)
    return -certificate.min_value, certificate.argmin


def solve(problem: PortfolioProblem, max_iterations: int | None = None) -> PortfolioSolution:
    """
    LPM 지배 제약 아래 기대수익 최대화

    내부 단계는 투영 부분기울기와 정확 벌점 대신 Kelley 지지 초평면 선형계획(HiGHS)으로 풉니다.

    Raises:
        UnsupportedDirectionError: 역볼록 방향의 제약
        InfeasibleError: 절단평면 선형계획이 실행불가
        IterationLimitError: 반복 한도 안에 허용오차 이내 해를 찾지 못함
        NumericalFailureError: 모든 HiGHS 방법이 실패
    """
    if problem.constraint_direction is not ConstraintDirection.PORTFOLIO_AT_MOST_BENCHMARK:
        raise UnsupportedDirectionError(
            "only LPM(portfolio) <= LPM(benchmark) yields a convex feasible set",
            direction=problem.constraint_direction.value,
        )
    limit = max_iterations or settings.portfolio_max_iterations
    returns = problem.table.return_matrix
    probs = problem.table.prob_array
    mu = problem.table.expected_returns
    k = problem.table.asset_count
    n = problem.exponent_n
    tol = problem.tolerance

    thresholds = sorted(
        set(problem.benchmark.atoms) | {problem.interval.a, problem.interval.b}
        | set(problem.extra_thresholds)
    )
    benchmark_lpm = {c: lpm_at(problem.benchmark, n, c) for c in thresholds}

    cut_rows: list[np.ndarray] = []
    cut_bounds: list[float] = []

    def add_cut(c: float, point: np.ndarray) -> None:
        if c not in benchmark_lpm:
            benchmark_lpm[c] = lpm_at(problem.benchmark, n, c)
        value, gradient = _constraint_and_gradient(returns, probs, n, c, point)
        cut_rows.append(gradient)
        cut_bounds.append(float(gradient @ point) - (value - benchmark_lpm[c]))

    barycenter = np.full(k, 1.0 / k)
    for c in thresholds:
        add_cut(c, barycenter)

    best_weights, best_violation = barycenter, np.inf
    history: list[float] = []
    for iteration in range(1, limit + 1):
        weights = project_to_simplex(_solve_lp(-mu, cut_rows, cut_bounds, k))
        violation, worst_c = constraint_violation(problem, weights)
        if violation < best_violation:
            best_weights, best_violation = weights, violation
        history.append(best_violation)
        logger.debug(
            "Cutting-plane iteration",
            extra=log_context(
                iteration=iteration,
                objective=float(mu @ weights),
                violation=violation,
                worst_c=worst_c,
            ),
        )

        if violation <= tol:
            active = _active_thresholds(problem, weights, sorted(benchmark_lpm) + [worst_c])
            solution = PortfolioSolution(
                weights=weights.tolist(),
                asset_names=problem.table.names,
                expected_return=float(mu @ weights),
                active_thresholds=active,
                iterations=iteration,
                max_violation=max(violation, 0.0),
                worst_threshold=worst_c,
                tolerance=tol,
                violation_history=history,
            )
            logger.info(
                "Portfolio solved",
                extra=log_context(
                    iterations=iteration,
                    expected_return=solution.expected_return,
                    max_violation=violation,
                ),
            )
            return solution

        add_cut(worst_c, weights)
        # 포트폴리오 원자에서도 위반되는 임계값을 함께 추가
        for c in np.unique(weights @ returns):
            if problem.interval.a <= c <= problem.interval.b:
                value, _ = _constraint_and_gradient(returns, probs, n, float(c), weights)
                if value - lpm_at(problem.benchmark, n, float(c)) > tol:
                    add_cut(float(c), weights)

    raise IterationLimitError(
        f"no solution within tolerance after {limit} iterations",
        iterations=limit,
        best_violation=float(best_violation),
        best_weights=best_weights.tolist(),
    )


def _constraint_and_gradient(
    returns: np.ndarray, probs: np.ndarray, n: int, c: float, weights: np.ndarray
) -> tuple[float, np.ndarray]:
    """x ↦ Σ_s p_s max{c − r_s·x, 0}^n 의 값과 기울기"""
    shortfall = np.maximum(c - weights @ returns, 0.0)
    value = float(probs @ shortfall**n)
    if n == 1:
        slope = (shortfall > 0).astype(float)
    else:
        slope = n * shortfall ** (n - 1)
    gradient = -(returns @ (probs * slope))
    return value, gradient


def _solve_lp(
    objective: np.ndarray, rows: list[np.ndarray], bounds: list[float], k: int
) -> np.ndarray:
    """
    단체 위 선형계획

    실행불가면 InfeasibleError, 그 밖의 실패는 다른 HiGHS 방법으로 재시도합니다.
    """
    A_ub = np.vstack(rows) if rows else None
    b_ub = np.asarray(bounds) if rows else None
    try:
        for attempt in Retrying(
            stop=stop_after_attempt(len(_LP_METHODS)),
            retry=retry_if_exception_type(SolverStatusError),
            reraise=True,
        ):
            with attempt:
                method = _LP_METHODS[attempt.retry_state.attempt_number - 1]
                result = linprog(
                    objective,
                    A_ub=A_ub,
                    b_ub=b_ub,
                    A_eq=np.ones((1, k)),
                    b_eq=np.array([1.0]),
                    bounds=[(0.0, None)] * k,
                    method=method,
                )
                if result.status == 2:
                    raise InfeasibleError(
                        "dominance constraints cannot be met by any portfolio",
                        cuts=len(rows),
                    )
                if not result.success:
                    raise SolverStatusError(f"{method}: {result.message}")
                return np.asarray(result.x, dtype=float)
    except SolverStatusError as e:
        raise NumericalFailureError(f"linear program failed for every method: {e}") from e
    raise NumericalFailureError("linear program produced no result")


def _active_thresholds(
    problem: PortfolioProblem, weights: np.ndarray, candidates: list[float]
) -> list[float]:
    """g_c(x) ≥ −10·tol 인 임계값"""
    portfolio = portfolio_distribution(problem.table, weights, problem.interval)
    band = 10.0 * problem.tolerance
    active = []
    for c in sorted(set(candidates)):
        gap = lpm_at(portfolio, problem.exponent_n, c) - lpm_at(
            problem.benchmark, problem.exponent_n, c
        )
        if gap >= -band and c > problem.interval.a:
            active.append(float(c))
    return active
