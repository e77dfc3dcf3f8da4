"""
Job Store

Lightweight in-memory background-job system for long simulation
batches (single runs on large presets, protocol comparisons).

Submitting a job returns a ``job_id`` immediately.  The work runs in a
daemon thread and clients poll ``GET /api/jobs/{job_id}`` until it
completes.  Finished jobs are kept up to ``max_finished``; beyond that
the oldest finished ones are forgotten.
"""

from __future__ import annotations

import logging
import threading
import uuid
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Callable, Optional

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

MAX_FINISHED_JOBS = 100


class JobStatus(str, Enum):
    """Execution status of a background job."""

    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class Job(BaseModel):
    """Metadata and state for a single background job."""
    id: str
    kind: str
    status: JobStatus = JobStatus.PENDING
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None
    request_payload: dict[str, Any] = Field(default_factory=dict)
    result: Optional[dict[str, Any]] = None
    error: Optional[str] = None
    description: Optional[str] = None  # e.g. "table2 MARL vs SPMH, 5 seeds"


class JobStore:
    """Thread-safe singleton job store."""

    _instance: Optional["JobStore"] = None
    _lock = threading.Lock()

    def __new__(cls) -> "JobStore":
        with cls._lock:
            if cls._instance is None:
                cls._instance = super().__new__(cls)
                cls._instance._jobs: dict[str, Job] = {}
                cls._instance._threads: dict[str, threading.Thread] = {}
                cls._instance.max_finished = MAX_FINISHED_JOBS
            return cls._instance

    # Create & run

    def submit(
        self,
        kind: str,
        payload: dict[str, Any],
        worker_fn: Callable[[dict[str, Any]], dict[str, Any]],
        description: str = "",
    ) -> Job:
        """Submit a job for background execution.

        Parameters
        ----------
        kind : str
            Job type (``run`` or ``compare``).
        payload : dict
            The request body forwarded to *worker_fn*.
        worker_fn : callable
            Synchronous function ``(payload) → result_dict``.
            Will be called in a daemon thread.
        description : str
            Human-readable label for the job.

        Returns
        -------
        Job
            The newly created job (status = ``pending``).
        """
        job = Job(
            id=str(uuid.uuid4()),
            kind=kind,
            request_payload=payload,
            description=description,
        )

        thread = threading.Thread(
            target=self._run,
            args=(job.id, worker_fn, payload),
            daemon=True,
        )
        with self._lock:
            self._jobs[job.id] = job
            self._threads[job.id] = thread
        thread.start()

        logger.info("Job %s submitted (%s: %s).", job.id, kind, description)
        return job

    def _run(
        self,
        job_id: str,
        worker_fn: Callable[[dict[str, Any]], dict[str, Any]],
        payload: dict[str, Any],
    ) -> None:
        """Execute the worker in a background thread."""
        job = self._jobs[job_id]
        job.status = JobStatus.RUNNING
        job.started_at = datetime.now(timezone.utc)

        try:
            job.result = worker_fn(payload)
            job.status = JobStatus.COMPLETED
            logger.info("Job %s completed successfully.", job_id)
        except Exception as exc:
            job.error = f"{type(exc).__name__}: {exc}"
            job.status = JobStatus.FAILED
            logger.exception("Job %s failed: %s", job_id, exc)
        finally:
            job.completed_at = datetime.now(timezone.utc)
            with self._lock:
                self._threads.pop(job_id, None)
                self._evict_finished()

    def _evict_finished(self) -> None:
        """Drop the oldest finished jobs beyond ``max_finished``; caller holds the lock."""
        finished = [
            j for j in self._jobs.values()
            if j.status in (JobStatus.COMPLETED, JobStatus.FAILED)
        ]
        excess = len(finished) - self.max_finished
        if excess <= 0:
            return
        finished.sort(key=lambda j: (j.completed_at, j.created_at))
        for job in finished[:excess]:
            del self._jobs[job.id]
        logger.debug("Evicted %d finished job(s).", excess)

    # Queries

    def get(self, job_id: str) -> Optional[Job]:
        """Retrieve a job by ID, or ``None`` if not found."""
        return self._jobs.get(job_id)

    def list_active(self) -> list[Job]:
        """Jobs still pending or running, oldest first."""
        with self._lock:
            jobs = list(self._jobs.values())
        active = [j for j in jobs if j.status in (JobStatus.PENDING, JobStatus.RUNNING)]
        return sorted(active, key=lambda j: j.created_at)

    def wait(self, job_id: str, timeout: Optional[float] = None) -> Optional[Job]:
        """Block until the job's thread finishes (or ``timeout`` elapses)."""
        with self._lock:
            thread = self._threads.get(job_id)
        if thread is not None:
            thread.join(timeout)
        return self.get(job_id)

    def reset(self) -> None:
        """Forget every job (tests)."""
        with self._lock:
            self._jobs.clear()
            self._threads.clear()
            self.max_finished = MAX_FINISHED_JOBS
