"""
효용 함수 클래스 서비스
닫힌 형태 효용과 그 정확한 도함수를 표현하고, U / AP / LP / G 클래스 멤버십을 격자 위에서 판정합니다.

멤버십 보고서의 slack 은 조건별 크기로 정규화된 값이며, slack ≥ −tolerance 이면 조건을 만족합니다.
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from numpy.polynomial import Polynomial
from pydantic import ValidationError

from app.backend.core.config import settings
from app.backend.core.exceptions import (
    BadOrderError,
    DerivativeOrderUnavailableError,
    EvaluationDomainError,
    IntervalMismatchError,
    MalformedInputError,
    VanishingFirstDerivativeError,
)
from app.backend.core.logging import get_logger, log_context
from app.backend.schemas.distributions import Interval
from app.backend.schemas.reports import ConditionSlack, MembershipClass, MembershipReport
from app.backend.schemas.utilities import (
    AffineDescriptor,
    CombinationDescriptor,
    ConstantDescriptor,
    CRRADescriptor,
    LpmKinkDescriptor,
    NegPowerDescriptor,
    PolynomialDescriptor,
    PowerCRRAVariantDescriptor,
    Prop2CounterexampleDescriptor,
    UtilityDescriptor,
    WeightedTerm,
    utility_descriptor_adapter,
)

logger = get_logger(__name__)

# 닫힌 형태 효용의 도함수 차수 상한 (사실상 무한)
UNBOUNDED_ORDER = 64

_EPS = float(np.finfo(float).eps)


class UtilitySpec(ABC):
    """
    구간 [a, b] 위의 효용 함수

    derivative(x, k) 로 u^{(k)} 를 평가하며, 끝점에서는 한쪽 극한값을 사용합니다.
    """

    def __init__(self, interval: Interval, max_derivative_order: int, label: str):
        """
        Args:
            interval: 정의 구간
            max_derivative_order: 평가 가능한 최고 도함수 차수
            label: 로그/보고서용 이름
        """
        self.interval = interval
        self.max_derivative_order = max_derivative_order
        self.label = label

    @abstractmethod
    def _derivative(self, x: np.ndarray, k: int) -> np.ndarray:
        """구간 안으로 정리된 x 에서 u^{(k)}"""

    def derivative(self, x: float | np.ndarray, k: int) -> np.ndarray:
        """
        u^{(k)}(x)

        Raises:
            DerivativeOrderUnavailableError: k 가 max_derivative_order 초과
            EvaluationDomainError: x 가 구간 밖
        """
        if k < 0 or k > self.max_derivative_order:
            raise DerivativeOrderUnavailableError(
                f"{self.label} provides derivatives up to order {self.max_derivative_order}, "
                f"requested {k}",
                requested=k,
                available=self.max_derivative_order,
            )
        arr = np.asarray(x, dtype=float)
        a, b = self.interval.a, self.interval.b
        slack = 1e-12 * self.interval.length
        if np.any((arr < a - slack) | (arr > b + slack)) or not np.all(np.isfinite(arr)):
            raise EvaluationDomainError(
                f"{self.label} evaluated outside {self.interval}", a=a, b=b
            )
        return self._derivative(np.clip(arr, a, b), k)

    def value(self, x: float | np.ndarray) -> np.ndarray:
        return self.derivative(x, 0)

    def descriptor(self) -> UtilityDescriptor | None:
        """JSON 디스크립터 (닫힌 형태만 해당)"""
        return None

    def describe(self) -> dict[str, Any]:
        descriptor = self.descriptor()
        return {
            "label": self.label,
            "interval": [self.interval.a, self.interval.b],
            "max_derivative_order": self.max_derivative_order,
            "descriptor": descriptor.model_dump() if descriptor is not None else None,
        }

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.label} on {self.interval})"


# ----- 닫힌 형태 효용 -----


class CRRAUtility(UtilitySpec):
    """u_γ(x) = x^{1−γ}/(1−γ), γ=1 이면 log x (x > 0 에서만 정의)"""

    def __init__(self, gamma: float, interval: Interval):
        if gamma <= 0:
            raise MalformedInputError(f"gamma must be positive, got {gamma}", gamma=gamma)
        super().__init__(interval, UNBOUNDED_ORDER, f"crra(gamma={gamma:g})")
        self.gamma = gamma

    def _derivative(self, x: np.ndarray, k: int) -> np.ndarray:
        if np.any(x <= 0):
            raise EvaluationDomainError(f"{self.label} is undefined at x <= 0")
        g = self.gamma
        if k == 0:
            return np.log(x) if g == 1.0 else x ** (1.0 - g) / (1.0 - g)
        # d^k/dx^k: (−γ)(−γ−1)…(−γ−k+2) x^{−γ−k+1}
        coef = math.prod(-g - j for j in range(k - 1))
        return coef * x ** (-g - k + 1)

    def descriptor(self) -> UtilityDescriptor | None:
        return CRRADescriptor(gamma=self.gamma)


class PowerCRRAVariant(CRRAUtility):
    """v_γ(x) = u_γ(x) − x/b^γ, 한계효용이 b 에서 0 이 되도록 보정한 CRRA"""

    def __init__(self, gamma: float, b: float, interval: Interval):
        super().__init__(gamma, interval)
        if b <= 0:
            raise MalformedInputError(f"b must be positive, got {b}", b=b)
        self.b = b
        self.label = f"power_crra_variant(gamma={gamma:g}, b={b:g})"

    def _derivative(self, x: np.ndarray, k: int) -> np.ndarray:
        base = super()._derivative(x, k)
        if k == 0:
            return base - x / self.b**self.gamma
        if k == 1:
            return base - self.b ** (-self.gamma)
        return base

    def descriptor(self) -> UtilityDescriptor | None:
        return PowerCRRAVariantDescriptor(gamma=self.gamma, b=self.b)


class _ReflectedPolynomialUtility(UtilitySpec):
    """t = b − x 에 대한 다항식 P 로 u(x) = P(b − x)"""

    def __init__(self, poly_t: Polynomial, b: float, interval: Interval, label: str):
        super().__init__(interval, UNBOUNDED_ORDER, label)
        self.poly_t = poly_t
        self.b = b

    def _derivative(self, x: np.ndarray, k: int) -> np.ndarray:
        return (-1.0) ** k * self.poly_t.deriv(k)(self.b - x)


class NegPower(_ReflectedPolynomialUtility):
    """u(x) = −(b−x)^n, G_n 의 등호 경계 원소"""

    def __init__(self, n: int, b: float, interval: Interval):
        if n < 1:
            raise BadOrderError(f"n must be positive, got {n}", n=n)
        coeffs = np.zeros(n + 1)
        coeffs[n] = -1.0
        super().__init__(Polynomial(coeffs), b, interval, f"neg_power(n={n}, b={b:g})")
        self.n = n

    def descriptor(self) -> UtilityDescriptor | None:
        return NegPowerDescriptor(n=self.n, b=self.b)


class Prop2Counterexample(_ReflectedPolynomialUtility):
    """
    g(x) = −(b−x)^{n+1}(1 − γ(b−x))

    γ = (n+1)/(2b(n+2)) 이면 AP_n 에는 속하지만 LP_n 에는 속하지 않습니다.
    """

    def __init__(self, n: int, b: float, gamma: float, interval: Interval):
        coeffs = np.zeros(n + 3)
        coeffs[n + 1] = -1.0
        coeffs[n + 2] = gamma
        super().__init__(
            Polynomial(coeffs), b, interval, f"prop2_counterexample(n={n}, b={b:g}, gamma={gamma:g})"
        )
        self.n = n
        self.gamma = gamma

    def descriptor(self) -> UtilityDescriptor | None:
        return Prop2CounterexampleDescriptor(n=self.n, b=self.b, gamma=self.gamma)


class LpmKink(UtilitySpec):
    """u(x) = −max{c−x, 0}^n (C^{n−1} 까지만 매끄러움)"""

    def __init__(self, n: int, c: float, interval: Interval):
        if n < 1:
            raise BadOrderError(f"n must be positive, got {n}", n=n)
        super().__init__(interval, n - 1, f"lpm_kink(n={n}, c={c:g})")
        self.n = n
        self.c = c

    def _derivative(self, x: np.ndarray, k: int) -> np.ndarray:
        gap = np.maximum(self.c - x, 0.0)
        coef = -((-1.0) ** k) * math.factorial(self.n) / math.factorial(self.n - k)
        return coef * gap ** (self.n - k)

    def descriptor(self) -> UtilityDescriptor | None:
        return LpmKinkDescriptor(n=self.n, c=self.c)


class PolynomialUtility(UtilitySpec):
    """u(x) = Σ coeffs[k] x^k"""

    def __init__(self, coeffs: Sequence[float], interval: Interval, label: str | None = None):
        self.poly = Polynomial(np.asarray(coeffs, dtype=float))
        super().__init__(interval, UNBOUNDED_ORDER, label or f"polynomial({list(coeffs)})")

    def _derivative(self, x: np.ndarray, k: int) -> np.ndarray:
        return np.asarray(self.poly.deriv(k)(x), dtype=float)

    def descriptor(self) -> UtilityDescriptor | None:
        return PolynomialDescriptor(coeffs=tuple(self.poly.coef.tolist()))


class Affine(PolynomialUtility):
    """u(x) = alpha·x + beta"""

    def __init__(self, alpha: float, beta: float, interval: Interval):
        super().__init__([beta, alpha], interval, f"affine(alpha={alpha:g}, beta={beta:g})")
        self.alpha, self.beta = alpha, beta

    def descriptor(self) -> UtilityDescriptor | None:
        return AffineDescriptor(alpha=self.alpha, beta=self.beta)


class Constant(PolynomialUtility):
    def __init__(self, kappa: float, interval: Interval):
        super().__init__([kappa], interval, f"constant({kappa:g})")
        self.kappa = kappa

    def descriptor(self) -> UtilityDescriptor | None:
        return ConstantDescriptor(kappa=self.kappa)


class CombinedUtility(UtilitySpec):
    """Σ w_i u_i + κ (w_i ≥ 0), 볼록 원뿔 성질 검증과 스윕 표본 생성에 사용"""

    def __init__(self, terms: Sequence[tuple[float, UtilitySpec]], constant: float = 0.0):
        if not terms:
            raise MalformedInputError("a combination needs at least one term")
        interval = terms[0][1].interval
        for weight, term in terms:
            if weight < 0:
                raise MalformedInputError(f"combination weights must be >= 0, got {weight}")
            if term.interval != interval:
                raise IntervalMismatchError(
                    f"combined utilities must share an interval: {term.interval} vs {interval}"
                )
        order = min(term.max_derivative_order for _, term in terms)
        label = " + ".join(f"{w:g}*{t.label}" for w, t in terms)
        if constant:
            label = f"{label} + {constant:g}"
        super().__init__(interval, order, label)
        self.terms = list(terms)
        self.constant = constant

    def _derivative(self, x: np.ndarray, k: int) -> np.ndarray:
        total = sum(weight * term.derivative(x, k) for weight, term in self.terms)
        result = np.asarray(total, dtype=float)
        return result + self.constant if k == 0 else result

    def descriptor(self) -> UtilityDescriptor | None:
        parts = []
        for weight, term in self.terms:
            inner = term.descriptor()
            if inner is None:
                return None
            parts.append(WeightedTerm(weight=weight, utility=inner))
        return CombinationDescriptor(terms=tuple(parts), constant=self.constant)


# ----- 디스크립터 파싱 -----


def build_utility(descriptor: UtilityDescriptor, interval: Interval) -> UtilitySpec:
    """디스크립터로부터 효용 객체 생성"""
    if isinstance(descriptor, PowerCRRAVariantDescriptor):
        return PowerCRRAVariant(descriptor.gamma, descriptor.b, interval)
    if isinstance(descriptor, CRRADescriptor):
        return CRRAUtility(descriptor.gamma, interval)
    if isinstance(descriptor, NegPowerDescriptor):
        return NegPower(descriptor.n, descriptor.b, interval)
    if isinstance(descriptor, Prop2CounterexampleDescriptor):
        gamma = descriptor.gamma
        if gamma is None:
            gamma = prop2_gamma(descriptor.n, descriptor.b)
        return Prop2Counterexample(descriptor.n, descriptor.b, gamma, interval)
    if isinstance(descriptor, LpmKinkDescriptor):
        return LpmKink(descriptor.n, descriptor.c, interval)
    if isinstance(descriptor, AffineDescriptor):
        return Affine(descriptor.alpha, descriptor.beta, interval)
    if isinstance(descriptor, ConstantDescriptor):
        return Constant(descriptor.kappa, interval)
    if isinstance(descriptor, PolynomialDescriptor):
        return PolynomialUtility(descriptor.coeffs, interval)
    if isinstance(descriptor, CombinationDescriptor):
        terms = [(t.weight, build_utility(t.utility, interval)) for t in descriptor.terms]
        return CombinedUtility(terms, descriptor.constant)
    raise MalformedInputError(f"unknown utility descriptor {descriptor!r}")


def parse_utility(source: str | dict[str, Any], interval: Interval) -> UtilitySpec:
    """
    JSON/YAML 문자열, 파일 경로 또는 dict 에서 효용 생성

    Raises:
        MalformedInputError: 알 수 없는 kind 또는 잘못된 매개변수
    """
    data: Any = source
    if isinstance(source, str):
        text = source
        path = Path(source)
        if len(source) < 4096 and path.is_file():
            text = path.read_text(encoding="utf-8")
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise MalformedInputError(f"cannot parse utility descriptor: {e}") from e
    try:
        descriptor = utility_descriptor_adapter.validate_python(data)
    except ValidationError as e:
        raise MalformedInputError(
            "invalid utility descriptor", errors=[err["msg"] for err in e.errors()]
        ) from e
    return build_utility(descriptor, interval)


# ----- 명명된 예제 -----


def prop2_gamma(n: int, b: float) -> float:
    """γ = (n+1)/(2b(n+2))"""
    return (n + 1) / (2.0 * b * (n + 2))


def prop2_counterexample(n: int, b: float) -> Prop2Counterexample:
    """
    AP_n 에는 속하지만 LP_n 에는 속하지 않는 [0, b] 위의 효용

    Raises:
        BadOrderError: n < 2
    """
    if n < 2:
        raise BadOrderError(f"the counterexample needs n >= 2, got {n}", n=n)
    if b <= 0:
        raise MalformedInputError(f"b must be positive, got {b}", b=b)
    return Prop2Counterexample(n, b, prop2_gamma(n, b), Interval(a=0.0, b=b))


def prop2_ratio_at_zero(n: int) -> float:
    """반례의 x=0 에서의 비율 R(0) = (n+3)(n−1)/((n+2)(n+1))"""
    return (n + 3) * (n - 1) / ((n + 2) * (n + 1))


# ----- 멤버십 판정 -----


def check_U(
    u: UtilitySpec, n: int, grid_size: int | None = None, tolerance: float | None = None
) -> MembershipReport:
    """
    U_n: k = 1..n+1 에 대해 (−1)^k u^{(k)} ≤ 0

    Raises:
        DerivativeOrderUnavailableError: n+1 차 도함수를 제공하지 않음
    """
    _require_order(u, n + 1)
    x, tol = _grid(u, grid_size), _tolerance(tolerance)
    conditions = _u_conditions(u, n, x)
    return _report(MembershipClass.U, n, u, conditions, tol)


def ap_slack(u: UtilitySpec, n: int, x: float) -> float:
    """z(x) = (n−1)u'(x) + u''(x)(b−x), 양수이면 AP 조건 위반"""
    _require_order(u, 2)
    b = u.interval.b
    return float((n - 1) * u.derivative(x, 1) + u.derivative(x, 2) * (b - x))


def check_AP(
    u: UtilitySpec, n: int, grid_size: int | None = None, tolerance: float | None = None
) -> MembershipReport:
    """AP_n: u' ≥ 0, u'' ≤ 0, z(x) ≤ 0 (Arrow-Pratt 계수 ≥ (n−1)/(b−x))"""
    _require_order(u, 2)
    x, tol = _grid(u, grid_size), _tolerance(tolerance)
    b = u.interval.b
    u1, u2 = u.derivative(x, 1), u.derivative(x, 2)
    z = (n - 1) * u1 + u2 * (b - x)
    conditions = [
        _worst("u' >= 0", u1, x),
        _worst("u'' <= 0", -u2, x),
        _worst("(n-1)u' + u''(b-x) <= 0", -z, x),
    ]
    return _report(MembershipClass.AP, n, u, conditions, tol)


def lp_ratio(u: UtilitySpec, n: int, x: float) -> float:
    """
    R(x) = (u(x) − u(b))·u''(x)/u'(x)², LP_n 은 R ≥ (n−1)/n 과 동치

    Raises:
        VanishingFirstDerivativeError: |u'(x)| ≤ 1e-12
    """
    _require_order(u, 2)
    u1 = float(u.derivative(x, 1))
    if abs(u1) <= 1e-12:
        raise VanishingFirstDerivativeError(f"u'({x:g}) = {u1:g} vanishes", x=x)
    drop = float(u.value(x)) - float(u.value(u.interval.b))
    return drop * float(u.derivative(x, 2)) / u1**2


def check_LP(
    u: UtilitySpec, n: int, grid_size: int | None = None, tolerance: float | None = None
) -> MembershipReport:
    """
    LP_n: φ(x) = (u(b) − u(x))^{1/n} 이 볼록이고 감소

    u 의 비감소성을 먼저 확인한 뒤, 2계 차분 볼록성 검사와 u' > 0 인 곳의 비율 검사를 모두
    수행합니다. 두 기준이 엇갈리면 diagnostics 에 플래그를 남깁니다.
    """
    _require_order(u, 2)
    x, tol = _grid(u, grid_size), _tolerance(tolerance)
    b = u.interval.b
    u0, u1, u2 = u.value(x), u.derivative(x, 1), u.derivative(x, 2)
    u_b = float(u.value(b))

    drop = u_b - u0
    phi, phi_noise = nth_root_with_noise(drop, n, 4 * _EPS * (np.abs(u0) + abs(u_b)))
    conditions = [_worst("u nondecreasing", u1, x)]

    # φ 감소 (두 번째 해석)
    phi_scale = max(1.0, float(phi.max()))
    rise = np.diff(phi) - (phi_noise[1:] + phi_noise[:-1])
    conditions.append(
        ConditionSlack(
            label="phi decreasing",
            slack=float(-rise.max() / phi_scale) if rise.size else 0.0,
            location=float(x[int(np.argmax(rise))]) if rise.size else float(x[0]),
        )
    )

    convexity = convexity_slack(phi, phi_noise, x, "phi convex (second differences)")
    conditions.append(convexity)

    # 비율 기준: 잡음이 R 을 오염시키지 않는 점에서만 평가
    scale1 = max(1.0, float(np.max(np.abs(u1))))
    noise = 4 * _EPS * (np.abs(u0) + abs(u_b))
    mask = (u1 > 1e-10 * scale1) & (drop > 1e9 * noise) & (drop > 0)
    diagnostics: list[str] = []
    if np.any(mask):
        ratio = (u0[mask] - u_b) * u2[mask] / u1[mask] ** 2
        excess = ratio - (n - 1) / n
        i = int(np.argmin(excess))
        ratio_condition = ConditionSlack(
            label="R(x) >= (n-1)/n", slack=float(excess[i]), location=float(x[mask][i])
        )
    else:
        ratio_condition = ConditionSlack(label="R(x) >= (n-1)/n", slack=0.0, location=float(b))
        diagnostics.append("ratio_criterion_vacuous")
    conditions.append(ratio_condition)

    monotone_ok = conditions[0].slack >= -tol
    decreasing_ok = conditions[1].slack >= -tol
    if monotone_ok != decreasing_ok:
        diagnostics.append("monotonicity_readings_disagree")
    if (convexity.slack >= -tol) != (ratio_condition.slack >= -tol):
        diagnostics.append("criteria_disagree")
    if diagnostics:
        logger.debug(
            "LP membership diagnostics",
            extra=log_context(utility=u.label, n=n, diagnostics=diagnostics),
        )
    return _report(MembershipClass.LP, n, u, conditions, tol, diagnostics)


def check_G(
    u: UtilitySpec, n: int, grid_size: int | None = None, tolerance: float | None = None
) -> MembershipReport:
    """G_n: U_n 이면서 k = 1..n−1 에 대해 u^{(k)}(b) = 0"""
    _require_order(u, n + 1)
    x, tol = _grid(u, grid_size), _tolerance(tolerance)
    conditions = _u_conditions(u, n, x)
    b = u.interval.b
    for k in range(1, n):
        values = u.derivative(x, k)
        scale_k = float(np.max(np.abs(values)))
        at_b = abs(float(u.derivative(b, k)))
        slack = -at_b / scale_k if scale_k > 0 else 0.0
        conditions.append(ConditionSlack(label=f"u^({k})(b) = 0", slack=slack, location=float(b)))
    return _report(MembershipClass.G, n, u, conditions, tol)


def finite_difference_defect(u: UtilitySpec, k: int, grid_size: int = 1025) -> float:
    """
    u^{(k)} 과 u^{(k−1)} 중심차분의 최대 차이를 h² 로 나눈 값 (교차 검증용)
    """
    x = _grid(u, grid_size)
    h = x[1] - x[0]
    lower = u.derivative(x, k - 1)
    central = (lower[2:] - lower[:-2]) / (2 * h)
    exact = u.derivative(x[1:-1], k)
    return float(np.max(np.abs(central - exact)) / h**2)


# ----- 공용 수치 도우미 -----


def nth_root_with_noise(
    drop: np.ndarray, n: int, value_noise: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    φ = max(drop, 0)^{1/n} 과 drop 의 반올림 오차가 φ 에 주는 변동 폭
    """
    clipped = np.maximum(drop, 0.0)
    phi = clipped ** (1.0 / n)
    upper = (clipped + value_noise) ** (1.0 / n)
    lower = np.maximum(clipped - value_noise, 0.0) ** (1.0 / n)
    return phi, upper - lower


def convexity_slack(
    values: np.ndarray, noise: np.ndarray, x: np.ndarray, label: str = "convex"
) -> ConditionSlack:
    """
    균등 격자 위 2계 차분 볼록성 여유값

    2계 도함수 추정치에 반올림 허용폭을 더한 뒤 (값 범위 / 구간 길이²) 로 정규화합니다.
    """
    if values.size < 3:
        return ConditionSlack(label=label, slack=0.0, location=float(x[0]))
    h = x[1] - x[0]
    second = (values[2:] - 2 * values[1:-1] + values[:-2]) / h**2
    allowance = (noise[2:] + 2 * noise[1:-1] + noise[:-2]) / h**2
    length = x[-1] - x[0]
    scale = max(1.0, float(values.max() - values.min()) / length**2)
    slack = (second + allowance) / scale
    i = int(np.argmin(slack))
    return ConditionSlack(label=label, slack=float(slack[i]), location=float(x[i + 1]))


def _u_conditions(u: UtilitySpec, n: int, x: np.ndarray) -> list[ConditionSlack]:
    conditions = []
    for k in range(1, n + 2):
        signed = (-1.0) ** k * u.derivative(x, k)
        conditions.append(_worst(f"(-1)^{k} u^({k}) <= 0", -signed, x))
    return conditions


def _worst(label: str, margin: np.ndarray, x: np.ndarray) -> ConditionSlack:
    """margin ≥ 0 이어야 하는 조건의 정규화된 최소 여유값"""
    margin = np.broadcast_to(np.asarray(margin, dtype=float), x.shape)
    scale = max(1.0, float(np.max(np.abs(margin))))
    i = int(np.argmin(margin))
    return ConditionSlack(label=label, slack=float(margin[i] / scale), location=float(x[i]))


def _report(
    class_id: MembershipClass,
    n: int,
    u: UtilitySpec,
    conditions: list[ConditionSlack],
    tol: float,
    diagnostics: list[str] | None = None,
) -> MembershipReport:
    worst = min(conditions, key=lambda c: c.slack)
    member = all(c.slack >= -tol for c in conditions)
    logger.debug(
        "Membership decided",
        extra=log_context(
            utility=u.label, class_id=class_id.value, n=n, member=member, worst=worst.label
        ),
    )
    return MembershipReport(
        class_id=class_id,
        n=n,
        interval=u.interval,
        member=member,
        worst_slack=worst.slack,
        worst_location=worst.location,
        per_condition=conditions,
        tolerance=tol,
        binding_criterion=worst.label,
        diagnostics=diagnostics or [],
    )


def _require_order(u: UtilitySpec, order: int) -> None:
    if u.max_derivative_order < order:
        raise DerivativeOrderUnavailableError(
            f"{u.label} provides derivatives up to order {u.max_derivative_order}, needs {order}",
            requested=order,
            available=u.max_derivative_order,
        )


def _grid(u: UtilitySpec, grid_size: int | None) -> np.ndarray:
    size = grid_size or settings.membership_grid_size
    if size < 3:
        raise MalformedInputError(f"grid_size must be at least 3, got {size}")
    return u.interval.grid(size)


def _tolerance(tolerance: float | None) -> float:
    tol = settings.membership_tolerance if tolerance is None else tolerance
    if not np.isfinite(tol) or tol < 0:
        raise MalformedInputError(f"tolerance must be finite and >= 0, got {tol}")
    return float(tol)
