"""
异步作业调度器
CPU 密集的模拟在工作线程中执行，并发数受信号量限制，结果按提交顺序返回
"""
import asyncio
from datetime import datetime, timezone
from typing import Any, Callable, Dict, Iterable, List, Optional, TypeVar

from .config import config
from .logger import get_logger
from .models import Job, JobStatus

logger = get_logger("scheduler")

T = TypeVar("T")


class JobScheduler:
    """
    作业调度器
    支持作业状态追踪、事件回调、并发控制
    """

    def __init__(self, max_workers: Optional[int] = None, history_limit: int = 4096):
        self.max_workers = max_workers or config.get_config().max_workers
        self.history_limit = history_limit
        self._running_count = 0
        self._jobs: Dict[str, Job] = {}
        self._semaphores: Dict[int, asyncio.Semaphore] = {}
        self._callbacks: Dict[str, List[Callable]] = {
            "on_start": [],
            "on_complete": [],
            "on_error": [],
        }

    def _semaphore(self) -> asyncio.Semaphore:
        # 每个事件循环一个信号量
        loop_id = id(asyncio.get_running_loop())
        sem = self._semaphores.get(loop_id)
        if sem is None:
            sem = asyncio.Semaphore(self.max_workers)
            self._semaphores = {loop_id: sem}
        return sem

    async def run(self, name: str, func: Callable[..., T], *args: Any, **kwargs: Any) -> T:
        """在工作线程中执行 func(*args, **kwargs)"""
        job = Job(name=name)
        self._jobs[job.id] = job

        async with self._semaphore():
            job.status = JobStatus.RUNNING
            job.started_at = datetime.now(timezone.utc)
            self._running_count += 1
            await self._trigger_callbacks("on_start", job)
            try:
                result = await asyncio.to_thread(func, *args, **kwargs)
            except Exception as e:
                job.status = JobStatus.FAILED
                job.error = str(e)
                job.completed_at = datetime.now(timezone.utc)
                logger.error("job_failed", job=name, error=str(e))
                await self._trigger_callbacks("on_error", job)
                raise
            finally:
                self._running_count -= 1

            job.status = JobStatus.COMPLETED
            job.completed_at = datetime.now(timezone.utc)
            logger.debug("job_completed", job=name, elapsed=job.elapsed)
            await self._trigger_callbacks("on_complete", job)

        self._prune()
        return result

    async def map(self, name: str, func: Callable[[Any], T], items: Iterable[Any]) -> List[T]:
        """并发执行 func(item)，结果顺序与 items 一致"""
        coros = [self.run(f"{name}[{i}]", func, item) for i, item in enumerate(items)]
        return list(await asyncio.gather(*coros))

    def _prune(self) -> None:
        """只保留最近 history_limit 条记录，优先丢弃已结束的作业"""
        excess = len(self._jobs) - self.history_limit
        if excess <= 0:
            return
        finished = [
            job_id
            for job_id, job in self._jobs.items()
            if job.status in (JobStatus.COMPLETED, JobStatus.FAILED)
        ]
        for job_id in finished[:excess]:
            del self._jobs[job_id]

    def get_job(self, job_id: str) -> Optional[Job]:
        """获取作业信息"""
        return self._jobs.get(job_id)

    def get_all_jobs(self) -> List[Job]:
        return list(self._jobs.values())

    def get_jobs_by_status(self, status: JobStatus) -> List[Job]:
        """按状态获取作业"""
        return [j for j in self._jobs.values() if j.status == status]

    def on(self, event: str, callback: Callable) -> None:
        """注册事件回调"""
        if event in self._callbacks:
            self._callbacks[event].append(callback)

    async def _trigger_callbacks(self, event: str, job: Job) -> None:
        for callback in self._callbacks.get(event, []):
            try:
                if asyncio.iscoroutinefunction(callback):
                    await callback(job)
                else:
                    callback(job)
            except Exception as e:
                logger.error("callback_failed", event_name=event, error=str(e))

    @property
    def running_count(self) -> int:
        """当前运行作业数"""
        return self._running_count

    @property
    def stats(self) -> Dict[str, int]:
        counts = {status.value: 0 for status in JobStatus}
        for job in self._jobs.values():
            counts[job.status.value] += 1
        return counts
