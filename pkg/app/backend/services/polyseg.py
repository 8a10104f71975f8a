"""
구간별 다항식(piecewise polynomial) 연산과 부호 인증
LPM 곡선과 그 차이를 정확히 표현하고, 연속체 [a, b] 전체에서의 비음수성을 임계점 열거로 판정합니다.

각 조각 [t_i, t_{i+1}] 의 계수는 이동 변수 (c − t_i) 의 오름차순 계수입니다.
"""

from dataclasses import dataclass, field
from math import comb
from typing import Any, Literal

import numpy as np
from scipy.optimize import brentq

from app.backend.core.config import settings
from app.backend.core.exceptions import (
    DegreeCapExceededError,
    IntervalMismatchError,
    MalformedInputError,
)
from app.backend.core.logging import get_logger, log_context
from app.backend.schemas.distributions import DiscreteDistribution, Interval
from app.backend.schemas.reports import CertificateVerdict, SignCertificate

logger = get_logger(__name__)

# 근 고립 재귀 깊이 상한 (구간 폭 2^-48 수준)
_MAX_ISOLATION_DEPTH = 48
_ROOT_XTOL = 1e-13


@dataclass(frozen=True, eq=False)
class PiecewisePolynomial:
    """
    구간별 다항식

    Attributes:
        breakpoints: 엄격히 증가하는 분할점 t_0 < … < t_m
        coeffs: (m, D+1) 배열, 조각 i 의 (c − t_i) 오름차순 계수
        left_value: t_0 에서의 값이 첫 조각의 우극한과 다를 때 그 값 (없으면 None)
    """

    breakpoints: np.ndarray
    coeffs: np.ndarray
    left_value: float | None = None
    _lengths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        bp = np.array(self.breakpoints, dtype=float)
        cf = np.atleast_2d(np.array(self.coeffs, dtype=float))
        if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
            raise MalformedInputError("breakpoints must be a strictly increasing sequence")
        if cf.shape[0] != bp.size - 1:
            raise MalformedInputError(
                "piece count must equal breakpoint count minus one",
                pieces=int(cf.shape[0]),
                breakpoints=int(bp.size),
            )
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(cf))):
            raise MalformedInputError("breakpoints and coefficients must be finite")
        if self.left_value is not None:
            if not np.isfinite(self.left_value):
                raise MalformedInputError("left value must be finite")
            object.__setattr__(self, "left_value", float(self.left_value))
        bp.setflags(write=False)
        cf.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "coeffs", cf)
        object.__setattr__(self, "_lengths", np.diff(bp))

    # ----- 생성자 -----

    @classmethod
    def constant(cls, value: float, interval: Interval) -> "PiecewisePolynomial":
        return cls(np.array([interval.a, interval.b]), np.array([[float(value)]]))

    @classmethod
    def zero(cls, interval: Interval) -> "PiecewisePolynomial":
        return cls.constant(0.0, interval)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PiecewisePolynomial":
        """{breakpoints: [...], pieces: [[...], ...]} 형식에서 복원"""
        try:
            pieces = data["pieces"]
            width = max(len(piece) for piece in pieces)
            padded = [list(piece) + [0.0] * (width - len(piece)) for piece in pieces]
            return cls(
                np.asarray(data["breakpoints"], dtype=float),
                np.asarray(padded, dtype=float),
                data.get("left_value"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedInputError(f"invalid piecewise polynomial JSON: {e}") from e

    # ----- 기본 속성 -----

    @property
    def interval(self) -> Interval:
        return Interval(a=float(self.breakpoints[0]), b=float(self.breakpoints[-1]))

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def piece_count(self) -> int:
        return self.coeffs.shape[0]

    @property
    def lengths(self) -> np.ndarray:
        return self._lengths

    @property
    def coefficient_scale(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    @property
    def start_value(self) -> float:
        """t_0 에서의 실제 값"""
        return float(self.coeffs[0, 0]) if self.left_value is None else self.left_value

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "breakpoints": self.breakpoints.tolist(),
            "pieces": self.coeffs.tolist(),
        }
        if self.left_value is not None:
            data["left_value"] = self.left_value
        return data

    # ----- 평가 -----

    def locate(self, c: np.ndarray) -> np.ndarray:
        """c 가 속한 조각 번호 (조각 i 는 (t_i, t_{i+1}], 첫 조각은 t_0 포함)"""
        idx = np.searchsorted(self.breakpoints, c, side="left") - 1
        return np.clip(idx, 0, self.piece_count - 1)

    def __call__(self, c: float | np.ndarray) -> Any:
        arr = np.asarray(c, dtype=float)
        idx = self.locate(arr)
        values = _horner(self.coeffs[idx], arr - self.breakpoints[idx])
        if self.left_value is not None:
            values = np.where(arr == self.breakpoints[0], self.left_value, values)
        return float(values) if values.ndim == 0 else values

    def piece_value(self, i: int, s: float | np.ndarray) -> Any:
        """조각 i 를 이동 변수 s = c − t_i 에서 평가"""
        return np.polynomial.polynomial.polyval(s, self.coeffs[i])

    def continuity_defect(self) -> float:
        """내부 분할점에서의 좌우 값 차이 최댓값"""
        if self.piece_count == 1:
            return 0.0
        left_limits = _horner(self.coeffs[:-1], self.lengths[:-1])
        right_values = self.coeffs[1:, 0]
        return float(np.max(np.abs(left_limits - right_values)))

    # ----- 미적분 -----

    def derivative(self, k: int = 1) -> "PiecewisePolynomial":
        cf = self.coeffs
        for _ in range(k):
            if cf.shape[1] == 1:
                cf = np.zeros_like(cf)
                break
            cf = cf[:, 1:] * np.arange(1, cf.shape[1])
        return PiecewisePolynomial(self.breakpoints, cf)

    def antiderivative(
        self, anchor: Literal["left", "right"] = "left", value: float = 0.0
    ) -> "PiecewisePolynomial":
        """
        연속 부정적분

        Args:
            anchor: "left"면 F(a) = value, "right"면 F(b) = value
            value: 기준점에서의 값
        """
        m, width = self.coeffs.shape
        cf = np.zeros((m, width + 1))
        cf[:, 1:] = self.coeffs / np.arange(1, width + 1)
        piece_integrals = _horner(cf, self.lengths)
        if anchor == "left":
            cf[:, 0] = value + np.concatenate(([0.0], np.cumsum(piece_integrals[:-1])))
        else:
            tail = np.cumsum(piece_integrals[::-1])[::-1]
            cf[:, 0] = value - tail
        return PiecewisePolynomial(self.breakpoints, cf)

    # ----- 산술 -----

    def refine(self, breakpoints: np.ndarray) -> "PiecewisePolynomial":
        """
        상위 분할 격자로 재전개 (테일러 이동)

        새 조각 (s_j, s_{j+1}] 의 부모는 s_{j+1} 을 포함하는 원래 조각이며,
        계수는 그 부모의 왼쪽 끝점에서 s_j 로 이동합니다.
        """
        new_bp = np.asarray(breakpoints, dtype=float)
        parents = np.clip(
            np.searchsorted(self.breakpoints, new_bp[1:], side="left") - 1,
            0,
            self.piece_count - 1,
        )
        delta = new_bp[:-1] - self.breakpoints[parents]
        return PiecewisePolynomial(
            new_bp, _taylor_shift_rows(self.coeffs[parents], delta), self.left_value
        )

    def with_degree(self, degree: int) -> "PiecewisePolynomial":
        if degree <= self.degree:
            return self
        pad = np.zeros((self.piece_count, degree - self.degree))
        return PiecewisePolynomial(
            self.breakpoints, np.hstack([self.coeffs, pad]), self.left_value
        )

    def __add__(self, other: "PiecewisePolynomial") -> "PiecewisePolynomial":
        p, q = _align(self, other)
        left = _left_value(self, other, self.start_value + other.start_value)
        return PiecewisePolynomial(p.breakpoints, p.coeffs + q.coeffs, left)

    def __sub__(self, other: "PiecewisePolynomial") -> "PiecewisePolynomial":
        p, q = _align(self, other)
        left = _left_value(self, other, self.start_value - other.start_value)
        return PiecewisePolynomial(p.breakpoints, p.coeffs - q.coeffs, left)

    def __neg__(self) -> "PiecewisePolynomial":
        left = None if self.left_value is None else -self.left_value
        return PiecewisePolynomial(self.breakpoints, -self.coeffs, left)

    def __mul__(self, scalar: float) -> "PiecewisePolynomial":
        left = None if self.left_value is None else self.left_value * float(scalar)
        return PiecewisePolynomial(self.breakpoints, self.coeffs * float(scalar), left)

    __rmul__ = __mul__


def subtract(p: PiecewisePolynomial, q: PiecewisePolynomial) -> PiecewisePolynomial:
    """
    병합 격자 위의 정확한 차 p − q

    Raises:
        IntervalMismatchError: 정의 구간이 다름
    """
    return p - q


def lpm_curve(dist: DiscreteDistribution, n: int) -> PiecewisePolynomial:
    """
    c ↦ LPM_{n,c}(dist) = Σ_{x_i < c} p_i (c − x_i)^n 을 [a, b] 위에서 정확히 표현

    분할점은 원자와 양 끝점이며 모든 조각의 차수는 n 이하입니다.

    Raises:
        DegreeCapExceededError: n 이 설정된 차수 상한을 초과
    """
    _check_degree(n)
    interval = dist.support_interval
    atoms, probs = dist.atom_array, dist.prob_array
    bp = np.unique(np.concatenate(([interval.a], atoms, [interval.b])))

    left = bp[:-1]
    gap = left[:, None] - atoms[None, :]
    weights = np.where(gap >= 0, probs[None, :], 0.0)
    gap = np.where(gap >= 0, gap, 0.0)
    # sums[i, e] = Σ_j w_ij gap_ij^e
    sums = np.einsum("ij,ije->ie", weights, gap[:, :, None] ** np.arange(n + 1))
    binom = np.array([comb(n, m) for m in range(n + 1)], dtype=float)
    coeffs = binom[None, :] * sums[:, ::-1]
    # n = 0 이면 a 의 원자가 첫 조각에 들어가지만 c = a 에서는 x_i < c 인 원자가 없음
    left_value = 0.0 if n == 0 and coeffs[0, 0] != 0.0 else None
    return PiecewisePolynomial(bp, coeffs, left_value)


def certify_nonnegative(
    p: PiecewisePolynomial, tolerance: float | None = None
) -> SignCertificate:
    """
    [a, b] 전체에서 p ≥ 0 인지 인증

    각 조각의 양 끝과 도함수의 모든 실근(데카르트 부호 규칙으로 구간을 나눈 뒤 이분법)에서
    값을 평가하여 전역 최솟값을 구합니다.

    Args:
        p: 구간별 다항식
        tolerance: 판정 허용오차 (기본값 verdict_tolerance · max(1, sup|p|))

    Returns:
        SignCertificate
    """
    points: list[np.ndarray] = []
    values: list[np.ndarray] = []
    deriv = p.derivative()
    if p.left_value is not None:
        points.append(p.breakpoints[:1])
        values.append(np.array([p.left_value]))
    for i in range(p.piece_count):
        length = float(p.lengths[i])
        # 오른쪽 끝을 먼저 두어 같은 값이면 조각에 실제로 속한 점이 argmin 이 됨
        s = np.concatenate(([length, 0.0], critical_points(deriv.coeffs[i], length)))
        points.append(p.breakpoints[i] + s)
        values.append(np.asarray(p.piece_value(i, s), dtype=float))

    all_points = np.concatenate(points)
    all_values = np.concatenate(values)
    return _certificate(all_points, all_values, tolerance)


def tail_nonnegative(
    F: DiscreteDistribution,
    G: DiscreteDistribution,
    n: int,
    tolerance: float | None = None,
) -> SignCertificate:
    """
    반직선 [b, ∞) 위에서 D(c) = LPM_{n,c}(F) − LPM_{n,c}(G) ≥ 0 인지 인증

    c ≥ b 에서 모든 원자가 c 이하이므로 D 는 s = c − b 에 대한 단일 n차 다항식입니다.
    근 고립과 최고차 계수 부호로 반직선 전체의 부호를 결정합니다.
    """
    _same_interval(F.support_interval, G.support_interval)
    _check_degree(n)
    b = F.support_interval.b

    coeffs = np.zeros(n + 1)
    for m in range(n + 1):
        moment_F = float(F.prob_array @ (b - F.atom_array) ** (n - m))
        moment_G = float(G.prob_array @ (b - G.atom_array) ** (n - m))
        coeffs[m] = comb(n, m) * (moment_F - moment_G)
    coeffs = _trim_leading(coeffs)

    if coeffs.size == 1:
        return _certificate(np.array([b]), np.array([coeffs[0]]), tolerance)

    lead = coeffs[-1]
    bound = 1.0 + float(np.max(np.abs(coeffs[:-1] / lead)))
    if lead < 0:
        # 충분히 큰 s 에서 D 는 음의 무한대로 발산
        s = bound
        tol = _default_tolerance(np.abs(coeffs), tolerance)
        for _ in range(200):
            if np.polynomial.polynomial.polyval(s, coeffs) < -tol:
                break
            s *= 2.0
        value = float(np.polynomial.polynomial.polyval(s, coeffs))
        return SignCertificate(
            verdict=CertificateVerdict.VIOLATED_AT,
            min_value=value,
            argmin=b + s,
            witness=b + s,
            tolerance=tol,
        )

    deriv = np.polynomial.polynomial.polyder(coeffs)
    s = np.concatenate(([0.0], critical_points(deriv, bound)))
    values = np.polynomial.polynomial.polyval(s, coeffs)
    return _certificate(b + s, values, tolerance)


def critical_points(coeffs: np.ndarray, length: float) -> np.ndarray:
    """
    (0, length) 안의 실근 위치 (오름차순 계수, 보통 조각 도함수를 넘겨 임계점을 구함)
    """
    cf = _trim_leading(np.asarray(coeffs, dtype=float))
    if cf.size <= 1 or length <= 0:
        return np.empty(0)
    if cf.size == 2:
        root = -cf[0] / cf[1]
        return np.array([root]) if 0.0 < root < length else np.empty(0)

    roots = isolate_real_roots(cf, 0.0, length)
    # 동반행렬 고유값을 안전망으로 추가 (후보가 늘어나는 것은 최솟값 계산에 무해)
    companion = np.polynomial.polynomial.polyroots(cf)
    real = companion.real[np.abs(companion.imag) <= 1e-9 * max(1.0, length)]
    extra = real[(real > 0.0) & (real < length)]
    return np.concatenate((np.asarray(roots, dtype=float), extra))


def isolate_real_roots(coeffs: np.ndarray, lo: float, hi: float) -> list[float]:
    """
    데카르트 부호 규칙 기반 이분 고립 후 브렌트/이분법으로 (lo, hi) 의 실근 정제

    고립이 끝나지 않는 군집/중근 구간은 중점을 후보로 반환합니다.
    """
    width = hi - lo
    # q(t) = p(lo + width·t), t ∈ [0, 1]
    unit = _scale(_taylor_shift(np.asarray(coeffs, dtype=float), lo), width)
    found: list[float] = []

    def poly(x: float) -> float:
        return float(np.polynomial.polynomial.polyval(x, coeffs))

    def recurse(q: np.ndarray, left: float, right: float, depth: int) -> None:
        variations = _descartes_unit_count(q)
        if variations == 0:
            return
        if variations == 1:
            f_left, f_right = poly(left), poly(right)
            if f_left * f_right < 0:
                xtol = _ROOT_XTOL * max(1.0, abs(left), abs(right))
                found.append(float(brentq(poly, left, right, xtol=xtol, rtol=4 * np.finfo(float).eps)))
            else:
                found.append(0.5 * (left + right))
            return
        mid = 0.5 * (left + right)
        if depth >= _MAX_ISOLATION_DEPTH or right - left <= _ROOT_XTOL * max(1.0, abs(mid)):
            found.append(mid)
            return
        half = _scale(q, 0.5)
        if abs(float(np.polynomial.polynomial.polyval(1.0, half))) <= 1e-15 * np.max(np.abs(q)):
            found.append(mid)
        recurse(half, left, mid, depth + 1)
        recurse(_taylor_shift(half, 1.0), mid, right, depth + 1)

    recurse(unit, lo, hi, 0)
    return [r for r in found if lo < r < hi]


# ----- 내부 도우미 -----


def _horner(coeffs: np.ndarray, s: np.ndarray) -> np.ndarray:
    """행별 계수(…, D+1) 를 s 에서 평가"""
    result = np.zeros(np.broadcast_shapes(coeffs.shape[:-1], np.shape(s)))
    for j in range(coeffs.shape[-1] - 1, -1, -1):
        result = result * s + coeffs[..., j]
    return result


def _taylor_shift(coeffs: np.ndarray, delta: float) -> np.ndarray:
    """q(s) = p(s + delta) 의 계수"""
    return _taylor_shift_rows(coeffs[None, :], np.array([delta]))[0]


def _taylor_shift_rows(coeffs: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """행별로 q_j(s) = p_j(s + delta_j)"""
    width = coeffs.shape[1]
    powers = np.arange(width)
    binom = np.array([[comb(l, k) for k in range(width)] for l in range(width)], dtype=float)
    exponent = powers[:, None] - powers[None, :]  # l − k
    mask = exponent >= 0
    dpow = np.where(
        mask[None, :, :],
        delta[:, None, None] ** np.where(mask, exponent, 0)[None, :, :],
        0.0,
    )
    return np.einsum("jl,lk,jlk->jk", coeffs, binom, dpow)


def _scale(coeffs: np.ndarray, factor: float) -> np.ndarray:
    """q(t) = p(factor·t) 의 계수"""
    return coeffs * factor ** np.arange(coeffs.size)


def _descartes_unit_count(q: np.ndarray) -> int:
    """(0, 1) 안의 근 개수 상한: (1+t)^d q(1/(1+t)) 계수의 부호 변화 수"""
    transformed = _taylor_shift(q[::-1].copy(), 1.0)
    scale = np.max(np.abs(transformed))
    if scale == 0:
        return 0
    significant = transformed[np.abs(transformed) > 1e-14 * scale]
    signs = np.sign(significant)
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def _trim_leading(coeffs: np.ndarray) -> np.ndarray:
    """최고차의 수치적 0 계수 제거"""
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    if scale == 0:
        return np.zeros(1)
    last = coeffs.size
    while last > 1 and abs(coeffs[last - 1]) <= 1e-12 * scale:
        last -= 1
    return coeffs[:last]


def _default_tolerance(values: np.ndarray, tolerance: float | None) -> float:
    if tolerance is not None:
        if not np.isfinite(tolerance) or tolerance < 0:
            raise MalformedInputError(f"tolerance must be finite and >= 0, got {tolerance}")
        return float(tolerance)
    sup = float(np.max(np.abs(values))) if values.size else 0.0
    return settings.verdict_tolerance * max(1.0, sup)


def _certificate(
    points: np.ndarray, values: np.ndarray, tolerance: float | None
) -> SignCertificate:
    tol = _default_tolerance(values, tolerance)
    k = int(np.argmin(values))
    min_value, argmin = float(values[k]), float(points[k])
    if min_value < -tol:
        logger.debug(
            "Sign certificate violated",
            extra=log_context(min_value=min_value, argmin=argmin, tolerance=tol),
        )
        return SignCertificate(
            verdict=CertificateVerdict.VIOLATED_AT,
            min_value=min_value,
            argmin=argmin,
            witness=argmin,
            tolerance=tol,
        )
    return SignCertificate(
        verdict=CertificateVerdict.NONNEGATIVE_EVERYWHERE,
        min_value=min_value,
        argmin=argmin,
        tolerance=tol,
    )


def _align(
    p: PiecewisePolynomial, q: PiecewisePolynomial
) -> tuple[PiecewisePolynomial, PiecewisePolynomial]:
    _same_interval(p.interval, q.interval)
    a, b = p.breakpoints[0], p.breakpoints[-1]
    # 내부 분할점은 병합 없이 정확한 합집합 (중복만 제거)
    interior = np.union1d(p.breakpoints[1:-1], q.breakpoints[1:-1])
    interior = interior[(interior > a) & (interior < b)]
    grid = np.concatenate(([a], interior, [b]))
    degree = max(p.degree, q.degree)
    return p.with_degree(degree).refine(grid), q.with_degree(degree).refine(grid)


def _left_value(
    p: PiecewisePolynomial, q: PiecewisePolynomial, combined: float
) -> float | None:
    if p.left_value is None and q.left_value is None:
        return None
    return combined


def _same_interval(first: Interval, second: Interval) -> None:
    slack = 1e-12 * max(first.length, second.length)
    if abs(first.a - second.a) > slack or abs(first.b - second.b) > slack:
        raise IntervalMismatchError(
            f"interval mismatch: {first} vs {second}",
            first=[first.a, first.b],
            second=[second.a, second.b],
        )


def _check_degree(n: int) -> None:
    if n < 0:
        raise MalformedInputError(f"exponent must be nonnegative, got {n}", n=n)
    if n > settings.degree_cap:
        raise DegreeCapExceededError(
            f"exponent {n} exceeds the degree cap {settings.degree_cap}",
            n=n,
            cap=settings.degree_cap,
        )
