"""Module to run independent computations with bounded concurrency"""

import asyncio
import logging
from collections.abc import Callable

from helpers import config

logger = logging.getLogger(__name__)


def create_sort_key(task: tuple[str, Callable]) -> str:
    """Sort by task name, so that submission order never depends on the caller."""
    return task[0]


async def run_concurrently(
    tasks: list[tuple[str, Callable]],
    max_concurrency: int | None = None,
) -> dict[str, object]:
    """
    Run named zero-argument callables in worker threads.

    At most max_concurrency (default config.MAX_CONCURRENCY) run at a time.
    Results are returned keyed by name in sorted-name order. The first
    exception raised by a task propagates once every task has settled.

    Args:
        tasks (list[tuple[str, Callable]]): (name, callable) pairs with unique names.
        max_concurrency (int | None): Upper bound on simultaneously running tasks.

    Returns:
        dict[str, object]: Task results keyed by name.
    """
    names = [name for name, _ in tasks]
    if len(set(names)) != len(names):
        raise ValueError(f"task names must be unique, got {names}")

    limit = max_concurrency or config.MAX_CONCURRENCY
    sem = asyncio.Semaphore(limit)

    async def run_one(name: str, fn: Callable):
        async with sem:
            logger.debug("Starting task %s", name)
            result = await asyncio.to_thread(fn)
            logger.debug("Finished task %s", name)
            return result

    if not tasks:
        logger.info("No tasks to run.")
        return {}

    sorted_tasks = sorted(tasks, key=create_sort_key)
    logger.info("Running %d tasks with at most %d at a time", len(sorted_tasks), limit)

    results = await asyncio.gather(
        *(run_one(name, fn) for name, fn in sorted_tasks),
        return_exceptions=True,
    )
    for result in results:
        if isinstance(result, BaseException):
            raise result

    return {name: result for (name, _), result in zip(sorted_tasks, results, strict=True)}
