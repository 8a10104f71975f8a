"""
시행 워커 풀
독립적인 하네스 시행을 프로세스 풀에 분배합니다.
결과 순서는 입력 순서를 따르므로 직렬/병렬 실행의 보고서가 동일합니다.
"""

import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

from app.backend.core.config import settings
from app.backend.core.logging import get_logger, log_context

logger = get_logger(__name__)

TaskT = TypeVar("TaskT")
ResultT = TypeVar("ResultT")


def worker_count(threads: int | None = None) -> int:
    """병렬 워커 수 (0 또는 1 이면 직렬)"""
    requested = settings.threads if threads is None else threads
    if requested <= 1:
        return 0
    return min(requested, os.cpu_count() or 1)


def run_tasks(
    fn: Callable[[TaskT], ResultT],
    tasks: Sequence[TaskT],
    threads: int | None = None,
) -> list[ResultT]:
    """
    작업 목록 실행

    Args:
        fn: 모듈 수준 함수 (프로세스 간 전달 가능해야 함)
        tasks: 작업 목록
        threads: 워커 수 상한 (기본값 BSD_LAB_THREADS)
    """
    workers = min(worker_count(threads), len(tasks))
    if workers <= 1:
        return [fn(task) for task in tasks]

    chunksize = max(1, len(tasks) // (workers * 4))
    logger.info(
        "Dispatching tasks to process pool",
        extra=log_context(tasks=len(tasks), workers=workers, chunksize=chunksize),
    )
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunksize))
