#!/usr/bin/env python3
"""
Worker Pool
Ordered parallel execution of independent work units with run metrics

Features:
- Thread pool capped by PERCOBOUND_THREADS
- Results returned in submission order, so integer aggregation is
  independent of scheduling and worker count
- Run metrics collection
"""

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

from .config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class RunMetrics:
    """Work-unit bookkeeping"""
    batches: int = 0
    tasks: int = 0
    total_seconds: float = 0.0
    max_batch_seconds: float = 0.0
    errors: int = 0

    @property
    def avg_batch_seconds(self) -> float:
        return (self.total_seconds / self.batches) if self.batches > 0 else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "batches": self.batches,
            "tasks": self.tasks,
            "total_seconds": round(self.total_seconds, 3),
            "avg_batch_seconds": round(self.avg_batch_seconds, 3),
            "max_batch_seconds": round(self.max_batch_seconds, 3),
            "errors": self.errors,
        }


class WorkerPool:
    """
    Executes independent work units on a bounded thread pool.

    numpy and scipy release the GIL inside their kernels, which is where the
    replica and enumeration work spends its time.
    """

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max(1, max_workers or settings.THREADS)
        self.metrics = RunMetrics()
        self._lock = threading.Lock()
        logger.debug(f"Worker pool initialized with {self.max_workers} workers")

    def map_ordered(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """
        Apply fn to every item, in parallel when more than one worker is allowed.

        Args:
            fn: Function of one work unit
            items: Work units

        Returns:
            List of results in the same order as items
        """
        start_time = time.time()
        items = list(items)

        try:
            if self.max_workers == 1 or len(items) <= 1:
                results = [fn(item) for item in items]
            else:
                with ThreadPoolExecutor(max_workers=min(self.max_workers, len(items))) as executor:
                    results = list(executor.map(fn, items))
        except Exception as e:
            with self._lock:
                self.metrics.errors += 1
            logger.error(f"Work unit failed: {e}")
            raise

        elapsed = time.time() - start_time
        with self._lock:
            self.metrics.batches += 1
            self.metrics.tasks += len(items)
            self.metrics.total_seconds += elapsed
            self.metrics.max_batch_seconds = max(self.metrics.max_batch_seconds, elapsed)
        return results

    def reset_metrics(self) -> None:
        with self._lock:
            self.metrics = RunMetrics()


# Global pool instance
_worker_pool: Optional[WorkerPool] = None


def get_worker_pool() -> WorkerPool:
    """Get the shared worker pool instance"""
    global _worker_pool
    if _worker_pool is None:
        _worker_pool = WorkerPool()
    return _worker_pool
