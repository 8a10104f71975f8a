"""
확률지배 판정 서비스
n차 확률지배(SD), 단일 임계값 LPM 위험척도, 유계 확률지배(BSD) 판정과 기대효용 차이를 계산합니다.

모든 판정 함수는 LPM 지수(exponent)를 명시적으로 받습니다.
SD 의 "n차" 는 지수 n−1, BSD 의 "n차" 는 지수 n 에 대응하며 차수 표기는 보고서에서만 사용합니다.
"""

from typing import TYPE_CHECKING

import numpy as np

from app.backend.core.config import settings
from app.backend.core.exceptions import BadOrderError, EvaluationDomainError, IntervalMismatchError
from app.backend.core.logging import get_logger, log_context
from app.backend.schemas.distributions import DiscreteDistribution, Interval
from app.backend.schemas.reports import (
    CertificateVerdict,
    DominanceOrder,
    DominanceVerdict,
    SignCertificate,
)
from app.backend.services.dist_core import lpm_at
from app.backend.services.polyseg import certify_nonnegative, lpm_curve, tail_nonnegative

if TYPE_CHECKING:
    from app.backend.services.utility_classes import UtilitySpec

logger = get_logger(__name__)


def check_bsd(
    F: DiscreteDistribution,
    G: DiscreteDistribution,
    exponent: int,
    interval: Interval | None = None,
    tolerance: float | None = None,
) -> DominanceVerdict:
    """
    유계 확률지배 F ⪰ G 판정

    모든 c ∈ [a, b] 에서 LPM_{exponent,c}(F) ≥ LPM_{exponent,c}(G) 이면 성립합니다.
    허용오차 이내의 동률은 성립으로 봅니다.

    Args:
        F: 위험이 더 큰 쪽으로 주장되는 분포
        G: 비교 분포
        exponent: LPM 지수 n (n ≥ 1)
        interval: 판정 구간 (기본값 F 의 지지 구간)
        tolerance: 판정 허용오차 (기본값 verdict_tolerance · max(1, sup|D|))

    Raises:
        IntervalMismatchError: F, G, interval 의 구간이 다름
        BadOrderError: exponent < 1
    """
    if exponent < 1:
        raise BadOrderError(f"bounded dominance needs exponent >= 1, got {exponent}", n=exponent)
    interval = _common_interval(F, G, interval)

    difference = lpm_curve(F, exponent) - lpm_curve(G, exponent)
    certificate = certify_nonnegative(difference, tolerance)
    verdict = _verdict(DominanceOrder.BSD, exponent, interval, certificate)
    logger.info(
        "BSD verdict",
        extra=log_context(
            exponent=exponent,
            holds=verdict.holds,
            min_margin=verdict.min_margin,
            witness_c=verdict.witness_c,
        ),
    )
    return verdict


def check_sd(
    F: DiscreteDistribution,
    G: DiscreteDistribution,
    exponent: int,
    tolerance: float | None = None,
) -> DominanceVerdict:
    """
    (exponent+1)차 확률지배 판정

    모든 실수 c 에서 LPM_{exponent,c}(F) ≥ LPM_{exponent,c}(G) 인지 확인합니다.
    c < a 에서는 차이가 0 이고, [a, b] 는 구간별 인증, [b, ∞) 는 tail_nonnegative 로 판정합니다.
    """
    if exponent < 0:
        raise BadOrderError(f"exponent must be nonnegative, got {exponent}", n=exponent)
    interval = _common_interval(F, G, None)

    inner = certify_nonnegative(lpm_curve(F, exponent) - lpm_curve(G, exponent), tolerance)
    tail = tail_nonnegative(F, G, exponent, tolerance)

    failing = [cert for cert in (inner, tail) if not cert.holds]
    if failing:
        certificate = min(failing, key=lambda cert: cert.min_value)
    else:
        certificate = min((inner, tail), key=lambda cert: cert.min_value)
    holds = not failing

    verdict = DominanceVerdict(
        order=DominanceOrder.SD,
        exponent=exponent,
        interval=interval,
        holds=holds,
        min_margin=min(inner.min_value, tail.min_value),
        witness_c=None if holds else certificate.witness,
        tolerance=max(inner.tolerance, tail.tolerance),
        certificate=certificate,
    )
    logger.info(
        "SD verdict",
        extra=log_context(exponent=exponent, holds=holds, min_margin=verdict.min_margin),
    )
    return verdict


def check_lpm_at(
    F: DiscreteDistribution,
    G: DiscreteDistribution,
    exponent: int,
    c: float,
    tolerance: float | None = None,
) -> DominanceVerdict:
    """
    단일 임계값 c 에서 LPM_{exponent,c}(F) ≥ LPM_{exponent,c}(G) 판정

    margin 은 c 에서의 차이입니다.
    """
    if exponent < 0:
        raise BadOrderError(f"exponent must be nonnegative, got {exponent}", n=exponent)
    lpm_F = lpm_at(F, exponent, c)
    lpm_G = lpm_at(G, exponent, c)
    margin = lpm_F - lpm_G
    tol = (
        tolerance
        if tolerance is not None
        else settings.verdict_tolerance * max(1.0, abs(lpm_F), abs(lpm_G))
    )
    holds = margin >= -tol
    certificate = SignCertificate(
        verdict=CertificateVerdict.NONNEGATIVE_EVERYWHERE if holds else CertificateVerdict.VIOLATED_AT,
        min_value=margin,
        argmin=c,
        witness=None if holds else c,
        tolerance=tol,
    )
    return DominanceVerdict(
        order=DominanceOrder.LPM_AT,
        exponent=exponent,
        interval=F.support_interval,
        threshold=c,
        holds=holds,
        min_margin=margin,
        witness_c=None if holds else c,
        tolerance=tol,
        certificate=certificate,
    )


def sd_implies_bsd(
    F: DiscreteDistribution, G: DiscreteDistribution, exponent: int
) -> tuple[DominanceVerdict, DominanceVerdict]:
    """같은 지수의 SD 판정과 BSD 판정을 함께 반환 (SD 성립 ⇒ BSD 성립)"""
    return check_sd(F, G, exponent), check_bsd(F, G, exponent)


def expected_utility_gap(
    F: DiscreteDistribution, G: DiscreteDistribution, u: "UtilitySpec"
) -> float:
    """
    ∫u dG − ∫u dF

    양수이면 의사결정자가 G 를 선호합니다.

    Raises:
        EvaluationDomainError: 원자에서 u 가 정의되지 않음 (예: x=0 에서 log)
    """
    value_G = G.expectation(_utility_values(u, G.atom_array))
    value_F = F.expectation(_utility_values(u, F.atom_array))
    return value_G - value_F


def _utility_values(u: "UtilitySpec", atoms: np.ndarray) -> np.ndarray:
    values = np.asarray(u.value(atoms), dtype=float)
    if not np.all(np.isfinite(values)):
        bad = atoms[~np.isfinite(values)]
        raise EvaluationDomainError(
            f"utility {u.label} is not finite at atom {bad[0]!r}", atom=float(bad[0])
        )
    return values


def _common_interval(
    F: DiscreteDistribution, G: DiscreteDistribution, interval: Interval | None
) -> Interval:
    reference = interval or F.support_interval
    for dist in (F, G):
        other = dist.support_interval
        slack = 1e-12 * reference.length
        if abs(other.a - reference.a) > slack or abs(other.b - reference.b) > slack:
            raise IntervalMismatchError(
                f"distribution supported on {other}, expected {reference}",
                expected=[reference.a, reference.b],
                found=[other.a, other.b],
            )
    return reference


def _verdict(
    order: DominanceOrder, exponent: int, interval: Interval, certificate: SignCertificate
) -> DominanceVerdict:
    return DominanceVerdict(
        order=order,
        exponent=exponent,
        interval=interval,
        holds=certificate.holds,
        min_margin=certificate.min_value,
        witness_c=certificate.witness,
        tolerance=certificate.tolerance,
        certificate=certificate,
    )
