"""
도메인 예외 계층
모든 공개 연산은 BsdLabError 하위 예외만 발생시키며, 각 예외는 CLI 종료 코드와 대응됩니다.
"""

from typing import Any

from pydantic import BaseModel, Field


class ErrorResponse(BaseModel):
    """에러 응답 스키마"""

    error: str = Field(..., description="에러 타입")
    message: str = Field(..., description="에러 메시지")
    details: dict[str, Any] | None = Field(None, description="에러 상세 정보")


class BsdLabError(Exception):
    """BSD Lab 기본 예외"""

    error: str = "bsd_lab_error"
    exit_code: int = 2

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_response(self) -> ErrorResponse:
        """에러 응답 스키마로 변환"""
        return ErrorResponse(error=self.error, message=self.message, details=self.details or None)


# ----- 입력 오류 (exit 2) -----


class MalformedInputError(BsdLabError):
    """CSV/JSON/디스크립터 형식 오류"""

    error = "malformed_input"


class DistributionError(BsdLabError):
    """이산 분포 구성 오류"""

    error = "distribution_error"


class EmptySupportError(DistributionError):
    error = "empty_support"


class OutOfIntervalError(DistributionError):
    error = "out_of_interval"


class BadWeightsError(DistributionError):
    error = "bad_weights"


class IntervalMismatchError(BsdLabError):
    error = "interval_mismatch"


class DegreeCapExceededError(BsdLabError):
    error = "degree_cap_exceeded"


class BadOrderError(BsdLabError):
    error = "bad_order"


class DerivativeOrderUnavailableError(BsdLabError):
    error = "derivative_order_unavailable"


class EvaluationDomainError(BsdLabError):
    error = "evaluation_domain"


class VanishingFirstDerivativeError(BsdLabError):
    error = "vanishing_first_derivative"


class NegativeBaseError(BsdLabError):
    error = "negative_base"


class NotConvexError(BsdLabError):
    error = "not_convex"


class NotDecreasingError(BsdLabError):
    error = "not_decreasing"


class PreconditionViolatedError(BsdLabError):
    error = "precondition_violated"


class PreconditionUViolatedError(PreconditionViolatedError):
    error = "precondition_u_violated"


class UnsupportedDirectionError(BsdLabError):
    error = "unsupported_direction"


# ----- 검사 결과 실패 (exit 1) -----


class InfeasibleError(BsdLabError):
    """지배 제약을 만족하는 포트폴리오가 없음"""

    error = "infeasible"
    exit_code = 1


class IterationLimitError(BsdLabError):
    """반복 한도 내에 실행 가능해를 찾지 못함"""

    error = "iteration_limit"
    exit_code = 1


# ----- 수치 실패 (exit 3) -----


class NumericalFailureError(BsdLabError):
    """내부 수치 계산 실패 (솔버 상태 이상, 비유한 값, 손상된 허용오차 등)"""

    error = "numerical_failure"
    exit_code = 3


class SolverStatusError(NumericalFailureError):
    """선형계획 풀이가 최적/실행불가 이외의 상태로 끝남 (방법 폴백 대상)"""

    error = "solver_status"
