from concurrent.futures import Executor, ProcessPoolExecutor
from typing import Any, Callable, Optional, Sequence, TypeVar
import asyncio
import logging
import os

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_JOBS = 1


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """Worker count from the argument, then KSL_JOBS, then 1."""
    if jobs is None:
        jobs = int(os.getenv("KSL_JOBS", DEFAULT_JOBS))
    if jobs < 1:
        raise ValueError(f"jobs must be at least 1, got {jobs}")
    return jobs


async def gather_points(
    fn: Callable[[T], R],
    items: Sequence[T],
    max_concurrency: int = 4,
    executor: Optional[Executor] = None,
) -> list[R | BaseException]:
    """Run fn over items in an executor, at most max_concurrency at a time.

    Results come back in input order; failures are returned in place.
    """
    semaphore = asyncio.Semaphore(max_concurrency)
    loop = asyncio.get_running_loop()

    async def run_point(item: T) -> R:
        async with semaphore:
            return await loop.run_in_executor(executor, fn, item)

    tasks = [asyncio.create_task(run_point(item)) for item in items]
    results = await asyncio.gather(*tasks, return_exceptions=True)
    errors = [r for r in results if isinstance(r, BaseException)]
    if errors:
        logger.info(f"{len(errors)} of {len(items)} points failed")
    return results


def run_points(fn: Callable[[T], R], items: Sequence[T], jobs: Optional[int] = None) -> list[Any]:
    """Evaluate fn on every item, in worker processes when jobs > 1."""
    jobs = resolve_jobs(jobs)
    if jobs == 1 or len(items) <= 1:
        results: list[Any] = []
        for item in items:
            try:
                results.append(fn(item))
            except Exception as exc:
                results.append(exc)
        return results
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return asyncio.run(gather_points(fn, items, jobs, executor))
