"""
구조화된 로깅 설정
표준 출력은 JSON 결과 전용이므로 모든 로그는 stderr로 보냅니다.
개발 환경 텍스트 모드에서는 컬러 포맷, 그 외에는 JSON 형식의 로그를 생성합니다.
"""

import logging
import sys
from typing import Any

from pythonjsonlogger import jsonlogger

from app.backend.core.config import settings


class ColoredFormatter(logging.Formatter):
    """컬러 포맷터 - 개발 환경용 사용자 친화적 로그"""

    # ANSI 컬러 코드
    COLORS = {
        "DEBUG": "\033[36m",  # 시안
        "INFO": "\033[32m",  # 녹색
        "WARNING": "\033[33m",  # 노란색
        "ERROR": "\033[31m",  # 빨간색
        "CRITICAL": "\033[35m",  # 자주색
        "RESET": "\033[0m",  # 리셋
    }

    EMOJIS = {
        "DEBUG": "🔍",
        "INFO": "ℹ️",
        "WARNING": "⚠️",
        "ERROR": "❌",
        "CRITICAL": "🚨",
    }

    def format(self, record: logging.LogRecord) -> str:
        color = self.COLORS.get(record.levelname, self.COLORS["RESET"])
        reset = self.COLORS["RESET"]
        timestamp = self.formatTime(record, "%H:%M:%S")

        # 모듈명 간소화
        module = record.module
        if len(module) > 12:
            module = module[:12] + "..."

        emoji = self.EMOJIS.get(record.levelname, "")
        message = record.getMessage()

        # 구조화 컨텍스트가 있으면 한 줄로 덧붙임
        context = getattr(record, "extra", None)
        if isinstance(context, dict) and context:
            pairs = " ".join(f"{key}={value}" for key, value in context.items())
            message = f"{message} | {pairs}"

        return f"{color}[{timestamp}] {emoji} {record.levelname:<8}{reset} {module:<15} {message}"


class CustomJsonFormatter(jsonlogger.JsonFormatter):
    """커스텀 JSON 로그 포매터"""

    def add_fields(
        self,
        log_record: dict[str, Any],
        record: logging.LogRecord,
        message_dict: dict[str, Any],
    ) -> None:
        """로그 레코드에 추가 필드 삽입"""
        super().add_fields(log_record, record, message_dict)

        log_record["timestamp"] = self.formatTime(record, self.datefmt)
        log_record["level"] = record.levelname
        log_record["module"] = record.module
        log_record["function"] = record.funcName
        log_record["environment"] = settings.environment

        if record.exc_info:
            log_record["exc_info"] = self.formatException(record.exc_info)


def setup_logging(log_level: str | None = None, log_format: str | None = None) -> None:
    """
    애플리케이션 로깅 설정

    Args:
        log_level: 로그 레벨 (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_format: 로그 형식 ("json" or "text")
    """
    log_level = log_level or settings.log_level
    log_format = log_format or settings.log_format

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level))

    # 기존 핸들러 제거
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)

    formatter: logging.Formatter
    if log_format == "json":
        formatter = CustomJsonFormatter(
            "%(timestamp)s %(level)s %(name)s %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
    elif settings.environment == "development":
        formatter = ColoredFormatter()
    else:
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )

    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    # 외부 라이브러리 로그 레벨 조정
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("numexpr").setLevel(logging.WARNING)


def get_logger(name: str) -> logging.Logger:
    """
    모듈별 로거 인스턴스 생성

    Args:
        name: 로거 이름 (보통 __name__ 사용)

    Returns:
        Logger 인스턴스
    """
    return logging.getLogger(name)


def log_context(**kwargs: Any) -> dict[str, Any]:
    """
    구조화된 로그 컨텍스트 생성

    Example:
        logger.info("BSD verdict", extra=log_context(
            exponent=2,
            holds=False,
            witness_c=0.6667
        ))
    """
    return {"extra": kwargs}


# 초기 로깅 설정
setup_logging()
