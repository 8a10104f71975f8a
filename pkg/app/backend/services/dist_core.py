"""
이산 분포 서비스
유계 구간 위 이산 분포의 생성/검증, θ-복권 예제, 포트폴리오 분포 구성, CSV 입출력을 담당합니다.
"""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.backend.core.config import settings
from app.backend.core.exceptions import (
    BadWeightsError,
    EmptySupportError,
    MalformedInputError,
    OutOfIntervalError,
)
from app.backend.core.logging import get_logger, log_context
from app.backend.schemas.distributions import DiscreteDistribution, Interval, ScenarioTable

logger = get_logger(__name__)


def make_interval(a: float, b: float) -> Interval:
    """
    구간 생성

    Raises:
        MalformedInputError: a >= b 이거나 끝점이 유한하지 않은 경우
    """
    try:
        return Interval(a=a, b=b)
    except ValidationError as e:
        raise MalformedInputError(f"invalid interval [{a}, {b}]", a=a, b=b) from e


def make_distribution(
    atoms: Sequence[float] | np.ndarray,
    probs: Sequence[float] | np.ndarray,
    interval: Interval,
    normalize: bool = False,
) -> DiscreteDistribution:
    """
    이산 분포 생성

    확률이 0인 원자는 버리고, (b−a)·merge_tolerance 이내로 가까운 원자는 확률을 합쳐 병합한 뒤
    정렬합니다.

    Args:
        atoms: 원자 값
        probs: 원자별 확률 (음수 불가)
        interval: 지지 구간
        normalize: True면 확률 합을 1로 재정규화

    Returns:
        검증된 DiscreteDistribution

    Raises:
        EmptySupportError: 모든 확률이 0
        OutOfIntervalError: 구간 밖 원자
        BadWeightsError: 음수 확률 또는 합이 1에서 weight_tolerance 이상 벗어남
    """
    x = np.asarray(atoms, dtype=float)
    p = np.asarray(probs, dtype=float)
    if x.ndim != 1 or x.shape != p.shape or x.size == 0:
        raise MalformedInputError(
            "atoms and probs must be nonempty sequences of equal length",
            atoms=int(x.size),
            probs=int(p.size),
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
        raise MalformedInputError("atoms and probs must be finite")
    if np.any(p < 0):
        raise BadWeightsError("probabilities must be nonnegative", min_prob=float(p.min()))

    keep = p > 0
    if not np.any(keep):
        raise EmptySupportError("all probabilities are zero")
    x, p = x[keep], p[keep]

    slack = settings.merge_tolerance * interval.length
    outside = (x < interval.a - slack) | (x > interval.b + slack)
    if np.any(outside):
        raise OutOfIntervalError(
            f"atom outside {interval}",
            atom=float(x[outside][0]),
            a=interval.a,
            b=interval.b,
        )
    x = np.clip(x, interval.a, interval.b)

    total = float(p.sum())
    if not normalize and abs(total - 1.0) > settings.weight_tolerance:
        raise BadWeightsError(f"probabilities sum to {total!r}, expected 1", total=total)

    order = np.argsort(x, kind="stable")
    x, p = x[order], p[order]

    # 가까운 원자 병합 (그룹의 첫 원자 위치 유지)
    starts = np.concatenate(([True], np.diff(x) > slack))
    group_index = np.flatnonzero(starts)
    merged_atoms = x[group_index]
    merged_probs = np.add.reduceat(p, group_index)
    if merged_atoms.size < x.size:
        logger.debug(
            "Merged duplicate atoms",
            extra=log_context(before=int(x.size), after=int(merged_atoms.size)),
        )

    merged_probs = merged_probs / merged_probs.sum()
    return DiscreteDistribution(
        atoms=tuple(merged_atoms.tolist()),
        probs=tuple(merged_probs.tolist()),
        support_interval=interval,
    )


def point_mass(x: float, interval: Interval) -> DiscreteDistribution:
    """x 에 집중된 퇴화 분포 δ_x"""
    return make_distribution([x], [1.0], interval)


def theta_lottery(
    theta: float, n: int, interval: Interval
) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    """
    θ-복권 쌍 생성

    G 는 확률 θ^n 으로 a, 1−θ^n 으로 b 를 주고, F 는 θa + (1−θ)b 에 집중된 분포입니다.

    Returns:
        (F, G)
    """
    if not 0.0 < theta < 1.0:
        raise MalformedInputError(f"theta must lie in (0, 1), got {theta}", theta=theta)
    if n < 1:
        raise MalformedInputError(f"n must be a positive integer, got {n}", n=n)

    low_prob = theta**n
    G = make_distribution([interval.a, interval.b], [low_prob, 1.0 - low_prob], interval)
    F = point_mass(theta * interval.a + (1.0 - theta) * interval.b, interval)
    return F, G


def lpm_at(dist: DiscreteDistribution, exponent: int, c: float) -> float:
    """
    직접 합산으로 LPM_{exponent,c} = Σ_{x_i < c} p_i (c − x_i)^exponent 계산
    """
    gap = c - dist.atom_array
    below = gap > 0
    return float(np.sum(dist.prob_array[below] * gap[below] ** exponent))


def make_scenario_table(
    returns: Sequence[Sequence[float]] | np.ndarray,
    scenario_probs: Sequence[float] | np.ndarray,
    asset_names: Sequence[str] | None = None,
) -> ScenarioTable:
    """
    시나리오 표 생성

    Raises:
        MalformedInputError: 형상/유한성/확률 조건 위반
    """
    matrix = np.atleast_2d(np.asarray(returns, dtype=float))
    probs = np.asarray(scenario_probs, dtype=float)
    try:
        return ScenarioTable(
            returns=tuple(tuple(row) for row in matrix.tolist()),
            scenario_probs=tuple(probs.tolist()),
            asset_names=tuple(asset_names) if asset_names is not None else None,
        )
    except ValidationError as e:
        raise MalformedInputError("invalid scenario table", reason=str(e.errors()[0]["msg"])) from e


def portfolio_distribution(
    table: ScenarioTable,
    weights: Sequence[float] | np.ndarray,
    interval: Interval,
) -> DiscreteDistribution:
    """
    포트폴리오 Σ R_i x_i 의 시나리오 분포

    Raises:
        BadWeightsError: 가중치가 단체(simplex) 밖
        OutOfIntervalError: 포트폴리오 수익률이 구간 밖
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (table.asset_count,):
        raise MalformedInputError(
            "weights length must equal the asset count",
            weights=int(w.size),
            assets=table.asset_count,
        )
    tol = settings.weight_tolerance
    if np.any(w < -tol) or abs(w.sum() - 1.0) > tol:
        raise BadWeightsError("weights must lie on the simplex", total=float(w.sum()))

    returns = np.clip(w, 0.0, None) @ table.return_matrix
    return make_distribution(returns, table.prob_array, interval)


def read_distribution_csv(
    path: str | Path, interval: Interval | None = None, normalize: bool = False
) -> DiscreteDistribution:
    """
    `atom,prob` 헤더를 가진 UTF-8 CSV 에서 분포 로드

    interval 이 없으면 [최소 원자, 최대 원자] 를 사용합니다 (원자가 하나면 길이 1 구간).

    Raises:
        MalformedInputError: 파일 없음, 헤더 누락, 숫자가 아닌 값
    """
    frame = _read_csv(path)
    missing = {"atom", "prob"} - set(frame.columns)
    if missing:
        raise MalformedInputError(
            f"distribution CSV is missing columns {sorted(missing)}", path=str(path)
        )
    atoms = _numeric_column(frame, "atom", path)
    probs = _numeric_column(frame, "prob", path)
    if interval is None:
        interval = infer_interval(atoms)
    logger.debug("Loaded distribution CSV", extra=log_context(path=str(path), rows=len(frame)))
    return make_distribution(atoms, probs, interval, normalize=normalize)


def write_distribution_csv(dist: DiscreteDistribution, path: str | Path) -> None:
    """분포를 `atom,prob` CSV 로 저장"""
    pd.DataFrame({"atom": dist.atom_array, "prob": dist.prob_array}).to_csv(
        path, index=False, float_format="%.17g"
    )


def read_scenario_csv(path: str | Path) -> ScenarioTable:
    """
    첫 열이 `prob`, 나머지 열이 자산별 수익률인 시나리오 CSV 로드
    """
    frame = _read_csv(path)
    if len(frame.columns) < 2 or frame.columns[0] != "prob":
        raise MalformedInputError(
            "scenario CSV needs a leading 'prob' column and at least one asset column",
            path=str(path),
        )
    probs = _numeric_column(frame, "prob", path)
    names = [str(col) for col in frame.columns[1:]]
    returns = np.vstack([_numeric_column(frame, col, path) for col in frame.columns[1:]])
    return make_scenario_table(returns, probs, names)


def _read_csv(path: str | Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except FileNotFoundError as e:
        raise MalformedInputError(f"file not found: {path}", path=str(path)) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise MalformedInputError(f"cannot parse CSV {path}: {e}", path=str(path)) from e
    frame.columns = [str(col).strip() for col in frame.columns]
    if frame.empty:
        raise MalformedInputError(f"CSV has no rows: {path}", path=str(path))
    return frame


def _numeric_column(frame: pd.DataFrame, column: str, path: str | Path) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=float)
    if np.any(np.isnan(values)):
        raise MalformedInputError(f"non-numeric value in column '{column}'", path=str(path))
    return values


def infer_interval(atoms: Sequence[float] | np.ndarray) -> Interval:
    """원자를 감싸는 가장 작은 구간 (퇴화하면 원자 중심의 길이 1 구간)"""
    x = np.asarray(atoms, dtype=float)
    low, high = float(x.min()), float(x.max())
    if high <= low:
        return make_interval(low - 0.5, high + 0.5)
    return make_interval(low, high)
