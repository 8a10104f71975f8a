"""
판정/보고서 Pydantic 스키마
부호 인증서, 지배 판정, 효용 클래스 멤버십, 하네스/스윕 보고서, CLI 실행 결과를 정의합니다.
"""

from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.backend.schemas.distributions import Interval


class CertificateVerdict(str, Enum):
    """부호 인증 결과"""

    NONNEGATIVE_EVERYWHERE = "NonnegativeEverywhere"
    VIOLATED_AT = "ViolatedAt"


class SignCertificate(BaseModel):
    """구간 전체에서의 비음수성 인증서"""

    model_config = ConfigDict(frozen=True)

    verdict: CertificateVerdict = Field(..., description="판정")
    min_value: float = Field(..., description="최솟값")
    argmin: float = Field(..., description="최솟값 위치")
    witness: float | None = Field(None, description="허용오차를 넘어 음수가 되는 점")
    tolerance: float = Field(..., ge=0, description="판정 허용오차")

    @model_validator(mode="after")
    def validate_verdict(self) -> "SignCertificate":
        if self.verdict is CertificateVerdict.VIOLATED_AT:
            if self.witness is None or not self.min_value < -self.tolerance:
                raise ValueError("ViolatedAt requires a witness below -tolerance")
        elif self.min_value < -self.tolerance:
            raise ValueError("NonnegativeEverywhere requires min_value >= -tolerance")
        return self

    @property
    def holds(self) -> bool:
        return self.verdict is CertificateVerdict.NONNEGATIVE_EVERYWHERE


class DominanceOrder(str, Enum):
    """지배 관계 종류"""

    SD = "SD"  # n차 확률지배 (모든 실수 c, 지수 n-1)
    BSD = "BSD"  # 유계 확률지배 (c ∈ [a,b], 지수 n)
    LPM_AT = "LPMAt"  # 단일 임계값 LPM 위험척도


class DominanceVerdict(BaseModel):
    """지배 판정 결과"""

    model_config = ConfigDict(frozen=True)

    order: DominanceOrder = Field(..., description="지배 관계")
    exponent: int = Field(..., ge=0, description="LPM 지수")
    interval: Interval = Field(..., description="판정 구간")
    threshold: float | None = Field(None, description="단일 임계값 (LPMAt 전용)")
    holds: bool = Field(..., description="지배 성립 여부")
    min_margin: float = Field(..., description="최소 LPM 차이")
    witness_c: float | None = Field(None, description="위반 임계값")
    tolerance: float = Field(..., ge=0, description="판정 허용오차")
    certificate: SignCertificate = Field(..., description="부호 인증서")

    @model_validator(mode="after")
    def validate_witness(self) -> "DominanceVerdict":
        if not self.holds and self.witness_c is None:
            raise ValueError("a failing verdict must carry a witness threshold")
        if self.holds and self.min_margin < -self.tolerance:
            raise ValueError("a holding verdict must have min_margin >= -tolerance")
        return self

    @property
    def degree_label(self) -> str:
        """보고서용 차수 표기 (SD 는 지수+1 차)"""
        if self.order is DominanceOrder.BSD:
            return f"{self.exponent}-th degree bounded on {self.interval}"
        if self.order is DominanceOrder.SD:
            return f"{self.exponent + 1}-th degree"
        return f"LPM exponent {self.exponent} at c={self.threshold:g}"


class MembershipClass(str, Enum):
    """효용 함수 클래스"""

    U = "U"
    AP = "AP"
    LP = "LP"
    G = "G"


class ConditionSlack(BaseModel):
    """조건별 여유값 (양수일수록 안전, 크기로 정규화됨)"""

    label: str
    slack: float
    location: float


class MembershipReport(BaseModel):
    """효용 클래스 멤버십 보고서"""

    class_id: MembershipClass = Field(..., description="클래스")
    n: int = Field(..., ge=1, description="차수")
    interval: Interval
    member: bool
    worst_slack: float
    worst_location: float
    per_condition: list[ConditionSlack] = Field(default_factory=list)
    tolerance: float = Field(..., ge=0)
    binding_criterion: str | None = Field(None, description="가장 빠듯한 조건")
    diagnostics: list[str] = Field(default_factory=list, description="진단 플래그")

    @model_validator(mode="after")
    def validate_member(self) -> "MembershipReport":
        if self.member != all(c.slack >= -self.tolerance for c in self.per_condition):
            raise ValueError("member must equal 'every slack >= -tolerance'")
        if not self.interval.a <= self.worst_location <= self.interval.b:
            raise ValueError("worst_location must lie in the interval")
        return self


class Corollary1Report(BaseModel):
    """g_n / k_n 볼록성 동치 보고서"""

    n: int
    g_convex: bool
    k_convex: bool
    agree: bool
    g_worst_slack: float
    k_worst_slack: float
    precondition_checked: bool = True


class Corollary2Report(BaseModel):
    """E f(X) ≤ f(b − (E(b−X)^n)^{1/n}) ≤ f(E X) 부등식 사슬"""

    lhs: float
    mid: float
    rhs: float
    chain_holds: bool


class HarnessRecord(BaseModel):
    """하네스 시행 1회 기록 (JSONL 한 줄)"""

    seed: int
    trial: int
    n: int
    interval: Interval
    bsd_FG: bool
    bsd_GF: bool
    margin_FG: float
    margin_GF: float
    utilities_tested: int
    min_gap: float | None
    refuted_by_approximant: bool | None
    refutation_width: float | None = None
    near_tie: bool = False
    counterexample: bool = False
    note: str | None = None


class HarnessReport(BaseModel):
    """정리 하네스 요약"""

    seed: int
    n_range: list[int]
    trials_per_n: int
    records: list[HarnessRecord] = Field(default_factory=list)
    holding_directions: int = 0
    failing_directions: int = 0
    refuted: int = 0
    near_ties: int = 0
    counterexamples: int = 0


class MembershipSweepReport(BaseModel):
    """G = U∩AP, AP = LP (U 내부) 집합 동치 스윕 보고서"""

    samples: int
    excluded: int
    excluded_fraction: float
    g_ap_agree: int
    ap_lp_agree: int
    counterexamples: int
    reading_flags: int
    members_g: int
    disagreements: list[dict[str, Any]] = Field(default_factory=list)


class CorollarySweepReport(BaseModel):
    """따름정리 1/2 스윕 보고서"""

    samples: int
    corollary1_agree: int
    corollary2_chain_holds: int
    counterexamples: int
    best_improvement: float = Field(..., description="max(rhs − mid), Jensen 대비 개선폭")
    disagreements: list[dict[str, Any]] = Field(default_factory=list)


class CommandOutcome(BaseModel):
    """CLI 명령 실행 결과"""

    exit_code: int = Field(..., ge=0, le=3)
    report_path: str | None = None
    stdout_json: dict[str, Any] = Field(default_factory=dict)
    summary: str = ""
