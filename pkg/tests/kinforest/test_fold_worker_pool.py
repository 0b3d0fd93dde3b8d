import threading
import time

import pytest

from kinforest.training import FoldWorkerPool, run_jobs


def _slow_square(job: int) -> int:
    time.sleep(0.01 * (5 - job))
    return job * job


class TestFoldWorkerPool:

    @pytest.mark.asyncio
    async def test_results_keep_submission_order(self):
        pool = FoldWorkerPool(worker=_slow_square, worker_count=3)
        assert await pool.run([1, 2, 3, 4, 5]) == [1, 4, 9, 16, 25]

    @pytest.mark.asyncio
    async def test_jobs_run_off_the_event_loop_thread(self):
        loop_thread = threading.get_ident()
        pool = FoldWorkerPool(worker=lambda _: threading.get_ident(), worker_count=2)
        assert loop_thread not in await pool.run([1, 2])

    @pytest.mark.asyncio
    async def test_every_job_finishes_before_the_first_failure_is_raised(self):
        finished = []

        def worker(job: int) -> int:
            if job in (2, 4):
                raise ValueError(f"fold {job} diverged")
            finished.append(job)
            return job

        pool = FoldWorkerPool(worker=worker, worker_count=2)
        with pytest.raises(ValueError, match="fold 2 diverged"):
            await pool.run([1, 2, 3, 4, 5])
        assert sorted(finished) == [1, 3, 5]
        assert sorted(pool.failures) == [1, 3]

    @pytest.mark.asyncio
    async def test_timeout(self):
        pool = FoldWorkerPool(worker=lambda _: time.sleep(0.5), worker_count=1, task_timeout_seconds=0.05)
        with pytest.raises(TimeoutError):
            await pool.run([1])

    @pytest.mark.asyncio
    async def test_needs_a_worker(self):
        with pytest.raises(ValueError, match="at least 1"):
            await FoldWorkerPool(worker=_slow_square, worker_count=0).run([1])


class TestRunJobs:

    def test_single_worker_runs_inline(self):
        caller = threading.get_ident()
        assert run_jobs(lambda _: threading.get_ident(), [1, 2], worker_count=1) == [caller, caller]

    def test_several_workers(self):
        assert run_jobs(_slow_square, [3, 1, 2], worker_count=2) == [9, 1, 4]
