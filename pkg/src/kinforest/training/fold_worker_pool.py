import asyncio
import logging

from dataclasses import dataclass, field
from typing import Callable, Dict, Generic, List, TypeVar


logger = logging.getLogger(__name__)

J = TypeVar("J")
R = TypeVar("R")


@dataclass
class FoldWorkerPool(Generic[J, R]):
    """Run blocking fold jobs on worker threads, `worker_count` at a time.

    Each job runs in `asyncio.to_thread`, so it gets a copy of the caller's
    context (and with it its own computation graph). Results are collected per
    job; failures are kept and reported together once every job has finished.

    Example:
    ```
    pool = FoldWorkerPool(worker=lambda fold: train_and_score(fold), worker_count=2)
    results = await pool.run([1, 2, 3, 4, 5])
    ```
    """

    # Configuration
    worker: Callable[[J], R]
    worker_count: int = field(default=1)
    task_timeout_seconds: float = field(default=3600)

    # Internal state
    jobs: "asyncio.Queue[J | object]" = field(default_factory=asyncio.Queue)
    results: Dict[int, R] = field(default_factory=dict)
    failures: Dict[int, BaseException] = field(default_factory=dict)
    _order: Dict[int, J] = field(default_factory=dict)
    _sentinel: object = field(default_factory=object)

    async def run(self, jobs: List[J]) -> List[R]:
        """Process every job and return results in submission order.

        Raises the first failure (in submission order) after all jobs are done.
        """
        if self.worker_count < 1:
            raise ValueError(f"worker_count must be at least 1, got {self.worker_count}")

        self.results.clear()
        self.failures.clear()
        self._order = dict(enumerate(jobs))
        for index in self._order:
            await self.jobs.put(index)
        for _ in range(self.worker_count):
            await self.jobs.put(self._sentinel)

        workers = [asyncio.create_task(self._worker_loop()) for _ in range(self.worker_count)]
        await asyncio.gather(*workers)

        if self.failures:
            first = min(self.failures)
            for index, error in sorted(self.failures.items()):
                logger.error("job %d failed: %s", index, error)
            raise self.failures[first]
        return [self.results[index] for index in sorted(self.results)]

    async def _worker_loop(self) -> None:
        while True:
            index = await self.jobs.get()
            if index is self._sentinel:
                self.jobs.task_done()
                break
            job = self._order[index]  # type: ignore[index]
            try:
                result = await asyncio.wait_for(asyncio.to_thread(self.worker, job), timeout=self.task_timeout_seconds)
                self.results[index] = result  # type: ignore[index]
            except Exception as e:
                self.failures[index] = e  # type: ignore[index]
            finally:
                self.jobs.task_done()


def run_jobs(worker: Callable[[J], R], jobs: List[J], worker_count: int = 1, timeout_seconds: float = 3600) -> List[R]:
    """Synchronous entry point; runs inline when only one worker is requested."""
    if worker_count <= 1:
        return [worker(job) for job in jobs]
    pool: FoldWorkerPool[J, R] = FoldWorkerPool(worker=worker, worker_count=worker_count, task_timeout_seconds=timeout_seconds)
    return asyncio.run(pool.run(jobs))
