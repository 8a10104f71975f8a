"""
효용 함수 디스크립터 스키마
JSON/YAML 로 주고받는 닫힌 형태(closed form) 효용의 매개변수를 정의합니다.
예: {"kind": "power_crra_variant", "gamma": 2.0, "b": 1.0}
"""

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter


class _Descriptor(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class PowerCRRAVariantDescriptor(_Descriptor):
    """v_γ(x) = x^{1−γ}/(1−γ) − x/b^γ (γ=1 이면 log x − x/b)"""

    kind: Literal["power_crra_variant"] = "power_crra_variant"
    gamma: float = Field(..., gt=0, description="상대 위험회피 계수")
    b: float = Field(..., gt=0, description="구간 상한")


class CRRADescriptor(_Descriptor):
    """u_γ(x) = x^{1−γ}/(1−γ) (γ=1 이면 log x)"""

    kind: Literal["crra"] = "crra"
    gamma: float = Field(..., gt=0, description="상대 위험회피 계수")


class NegPowerDescriptor(_Descriptor):
    """u(x) = −(b−x)^n"""

    kind: Literal["neg_power"] = "neg_power"
    n: int = Field(..., ge=1)
    b: float


class Prop2CounterexampleDescriptor(_Descriptor):
    """g(x) = −(b−x)^{n+1}(1 − γ(b−x)), γ 생략 시 (n+1)/(2b(n+2))"""

    kind: Literal["prop2_counterexample"] = "prop2_counterexample"
    n: int = Field(..., ge=2)
    b: float = Field(..., gt=0)
    gamma: float | None = None


class LpmKinkDescriptor(_Descriptor):
    """u(x) = −max{c−x, 0}^n"""

    kind: Literal["lpm_kink"] = "lpm_kink"
    n: int = Field(..., ge=1)
    c: float


class AffineDescriptor(_Descriptor):
    """u(x) = alpha·x + beta"""

    kind: Literal["affine"] = "affine"
    alpha: float
    beta: float = 0.0


class ConstantDescriptor(_Descriptor):
    kind: Literal["constant"] = "constant"
    kappa: float


class PolynomialDescriptor(_Descriptor):
    """u(x) = Σ coeffs[k] x^k"""

    kind: Literal["polynomial"] = "polynomial"
    coeffs: tuple[float, ...] = Field(..., min_length=1)


class WeightedTerm(_Descriptor):
    weight: float = Field(..., ge=0)
    utility: "UtilityDescriptor"


class CombinationDescriptor(_Descriptor):
    """Σ weight_i·u_i + constant (비음수 가중치)"""

    kind: Literal["combination"] = "combination"
    terms: tuple[WeightedTerm, ...] = Field(..., min_length=1)
    constant: float = 0.0


UtilityDescriptor = Annotated[
    PowerCRRAVariantDescriptor
    | CRRADescriptor
    | NegPowerDescriptor
    | Prop2CounterexampleDescriptor
    | LpmKinkDescriptor
    | AffineDescriptor
    | ConstantDescriptor
    | PolynomialDescriptor
    | CombinationDescriptor,
    Field(discriminator="kind"),
]

WeightedTerm.model_rebuild()
CombinationDescriptor.model_rebuild()

utility_descriptor_adapter: TypeAdapter[UtilityDescriptor] = TypeAdapter(UtilityDescriptor)
