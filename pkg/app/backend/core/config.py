"""
애플리케이션 설정 관리
환경 변수(BSD_LAB_*)와 .env 파일에서 수치 허용오차, 격자 크기, 병렬도 등을 로드하고 검증합니다.
"""

from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """애플리케이션 전역 설정"""

    model_config = SettingsConfigDict(
        env_prefix="BSD_LAB_",
        # 프로젝트 루트의 .env 파일을 명시적으로 지정
        env_file=[
            Path(__file__).parent.parent.parent.parent / ".env",  # 프로젝트 루트
            ".env",  # 현재 디렉토리
        ],
        env_ignore_empty=True,
        extra="ignore",
    )

    # 애플리케이션 설정
    app_name: str = "BSD Lab"
    app_version: str = "0.1.0"
    environment: str = Field(default="development", pattern="^(development|staging|production)$")
    debug: bool = False

    # 로깅 설정
    log_level: str = Field(default="WARNING", pattern="^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$")
    log_format: str = Field(default="text", pattern="^(json|text)$")

    # 병렬 실행 (0 = 직렬)
    threads: int = Field(default=0, ge=0, description="하네스 병렬 워커 수 상한")

    # 분포 / 다항식 설정
    degree_cap: int = Field(default=8, description="LPM 곡선 최대 차수")
    merge_tolerance: float = Field(default=1e-12, description="원자 병합 허용오차 (구간 길이 대비)")
    weight_tolerance: float = Field(default=1e-9, description="확률 합 허용오차")
    verdict_tolerance: float = Field(default=1e-9, description="부호 판정 상대 허용오차")

    # 효용 클래스 판정
    membership_grid_size: int = Field(default=2049, description="멤버십 판정 격자 점 수")
    membership_tolerance: float = Field(default=1e-8, description="멤버십 판정 허용오차")

    # 생성자 실험실
    generator_grid_resolution: int = Field(default=257, description="적분 효용 격자 점 수")
    mollifier_kernel_resolution: int = Field(default=4097, description="커널 테이블 점 수")
    mollifier_refinement: int = Field(default=8, description="커널 폭 대비 격자 세분 배수")

    # 정리 하네스
    harness_utilities: int = Field(default=200, description="지배 방향당 검사할 효용 수")
    harness_gap_tolerance: float = Field(default=1e-9, description="기대효용 차 허용오차")
    harness_max_halvings: int = Field(default=10, description="근사 효용 폭 반감 최대 횟수")

    # 포트폴리오 최적화
    portfolio_tolerance: float = Field(default=1e-7, description="지배 제약 위반 허용오차")
    portfolio_max_iterations: int = Field(default=500, description="절단평면 최대 반복 횟수")

    @field_validator(
        "merge_tolerance",
        "weight_tolerance",
        "verdict_tolerance",
        "membership_tolerance",
        "harness_gap_tolerance",
        "portfolio_tolerance",
    )
    @classmethod
    def validate_tolerance(cls, v: float) -> float:
        """허용오차는 음이 아닌 유한값이어야 함"""
        if not v >= 0 or v == float("inf"):
            raise ValueError("tolerance must be a finite nonnegative number")
        return v

    @field_validator("membership_grid_size", "generator_grid_resolution", "mollifier_kernel_resolution")
    @classmethod
    def validate_grid_size(cls, v: int) -> int:
        """격자는 최소 3개 점이 필요함"""
        if v < 3:
            raise ValueError("grid sizes must be at least 3")
        return v

    @field_validator("degree_cap", "mollifier_refinement", "harness_utilities", "portfolio_max_iterations")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        """양의 정수 검증"""
        if v < 1:
            raise ValueError("value must be a positive integer")
        return v


@lru_cache
def get_settings() -> Settings:
    """
    설정 싱글톤 인스턴스 반환
    @lru_cache를 사용하여 한 번만 로드
    """
    return Settings()


# 전역 설정 인스턴스
settings = get_settings()
