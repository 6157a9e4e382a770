"""Submission queue ownership, job dispatch, heartbeats, and the health sweep.

The broker is the single owner of queue and backend state; every public
method takes the lock, so operations are atomic with respect to one another.
Time is always passed in explicitly, which keeps the scheduler fully
simulatable.
"""

from __future__ import annotations

import bisect
import json
import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import requests

from .domain import BackendDescriptor, BackendState, SubmissionResult, Verdict

log = logging.getLogger(__name__)

DEFAULT_SWEEP_INTERVAL = 15 * 60.0  # health check period
DEFAULT_MAX_ATTEMPTS = 2
DEFAULT_JOB_TIMEOUT = 300.0
STALENESS_FACTOR = 2.0  # tolerate one missed heartbeat


class BrokerError(RuntimeError):
    pass


@dataclass
class QueueEntry:
    submission_id: int
    enqueued_at: float
    attempts: int = 0


@dataclass(frozen=True)
class Alert:
    severity: str
    backend_id: str
    message: str
    at: float

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "backend_id": self.backend_id,
            "message": self.message,
            "at": self.at,
        }


class AlertSink(Protocol):
    def emit(self, alert: Alert) -> None: ...


class LogAlertSink:
    """Structured-log sink; also keeps alerts in memory for inspection."""

    def __init__(self):
        self.alerts: list[Alert] = []
        self._lock = threading.Lock()

    def emit(self, alert: Alert) -> None:
        with self._lock:
            self.alerts.append(alert)
        log.warning("ALERT [%s] backend=%s: %s", alert.severity, alert.backend_id, alert.message)


class WebhookAlertSink:
    """One JSON POST per alert; 5 s timeout, no retry, failures swallowed."""

    def __init__(self, url: str, timeout: float = 5.0):
        self.url = url
        self.timeout = timeout

    def emit(self, alert: Alert) -> None:
        try:
            requests.post(
                self.url,
                data=json.dumps(alert.to_dict()),
                headers={"Content-Type": "application/json"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            log.warning("webhook alert delivery failed: %s", exc)


@dataclass
class _BackendSlot:
    id: str
    address: str
    toolchains: frozenset[str]
    state: BackendState = BackendState.idle
    last_heartbeat: float = 0.0
    current_job: Optional[int] = None
    dispatched_at: Optional[float] = None
    last_assigned_at: float = -1.0
    entry: Optional[QueueEntry] = None

    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(
            id=self.id,
            address=self.address,
            state=self.state,
            toolchains=self.toolchains,
            last_heartbeat=self.last_heartbeat,
            current_job=self.current_job,
        )


@dataclass(frozen=True)
class Assignment:
    submission_id: int
    backend_id: str
    address: str
    attempts: int


@dataclass
class _JobInfo:
    toolchain_id: str
    payload: dict = field(default_factory=dict)


Finalizer = Callable[[int, SubmissionResult], bool]


class Broker:
    def __init__(
        self,
        finalize: Finalizer,
        *,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        sweep_interval: float = DEFAULT_SWEEP_INTERVAL,
        job_timeout: float = DEFAULT_JOB_TIMEOUT,
        staleness_factor: float = STALENESS_FACTOR,
    ):
        self._finalize = finalize
        self.max_attempts = max_attempts
        self.sweep_interval = sweep_interval
        self.job_timeout = job_timeout
        self.staleness_threshold = staleness_factor * sweep_interval
        self._lock = threading.RLock()
        self._queue: list[QueueEntry] = []
        self._backends: dict[str, _BackendSlot] = {}
        self._jobs: dict[int, _JobInfo] = {}
        self._finalized: set[int] = set()

    # -- registration and queue -------------------------------------------

    def register_backend(
        self, backend_id: str, address: str, toolchains: Sequence[str], now: float
    ) -> BackendDescriptor:
        with self._lock:
            slot = self._backends.get(backend_id)
            if slot is not None and slot.current_job is not None:
                # re-registration while a job is in flight: the old run is lost
                self._requeue_or_fail(slot, now, reason="backend re-registered mid-job")
            slot = _BackendSlot(
                id=backend_id,
                address=address,
                toolchains=frozenset(toolchains),
                state=BackendState.idle,
                last_heartbeat=now,
            )
            self._backends[backend_id] = slot
            log.info("backend %s registered (toolchains: %s)", backend_id, sorted(slot.toolchains))
            return slot.descriptor()

    def enqueue(self, submission_id: int, toolchain_id: str, now: float) -> int:
        """Append in submission-id order; returns the queue position."""
        with self._lock:
            if submission_id in self._jobs:
                raise BrokerError(f"submission {submission_id} already enqueued")
            if submission_id in self._finalized:
                raise BrokerError(f"submission {submission_id} already finalized")
            entry = QueueEntry(submission_id=submission_id, enqueued_at=now)
            self._insert(entry)
            self._jobs[submission_id] = _JobInfo(toolchain_id=toolchain_id)
            return self._queue.index(entry)

    def _insert(self, entry: QueueEntry) -> None:
        ids = [e.submission_id for e in self._queue]
        self._queue.insert(bisect.bisect_left(ids, entry.submission_id), entry)

    def queue_depth(self) -> int:
        with self._lock:
            return len(self._queue)

    # -- dispatch -----------------------------------------------------------

    def pick_next(self, now: float) -> Optional[Assignment]:
        """Head-of-queue entry paired with the least-recently-assigned idle,
        toolchain-compatible backend; None when nothing can be dispatched.

        Marks the backend busy atomically with removal from the queue. A
        toolchain mismatch at the head blocks the line (no reordering).
        """
        with self._lock:
            if not self._queue:
                return None
            head = self._queue[0]
            job = self._jobs[head.submission_id]
            candidates = [
                s
                for s in self._backends.values()
                if s.state is BackendState.idle and job.toolchain_id in s.toolchains
            ]
            if not candidates:
                return None
            slot = min(candidates, key=lambda s: (s.last_assigned_at, s.id))
            self._queue.pop(0)
            head.attempts += 1
            slot.state = BackendState.busy
            slot.current_job = head.submission_id
            slot.dispatched_at = now
            slot.last_assigned_at = now
            slot.entry = head
            return Assignment(
                submission_id=head.submission_id,
                backend_id=slot.id,
                address=slot.address,
                attempts=head.attempts,
            )

    def dispatch_failed(self, backend_id: str, submission_id: int, now: float) -> None:
        """The assign_job request did not go through; requeue and sideline."""
        with self._lock:
            slot = self._backends.get(backend_id)
            if slot is None or slot.current_job != submission_id:
                return
            self._requeue_or_fail(slot, now, reason="dispatch failed")
            slot.state = BackendState.unhealthy

    def abort_assignment(self, backend_id: str, submission_id: int, reason: str) -> None:
        """Permanent job-side failure (payload unbuildable): judge_error, no retry."""
        with self._lock:
            slot = self._backends.get(backend_id)
            if slot is None or slot.current_job != submission_id:
                return
            slot.current_job = None
            slot.dispatched_at = None
            slot.entry = None
            slot.state = BackendState.idle
            self._jobs.pop(submission_id, None)
            self._finalize_once(
                submission_id, SubmissionResult(verdict=Verdict.judge_error, compile_log=reason)
            )

    # -- heartbeats and sweep ------------------------------------------------

    def record_heartbeat(self, backend_id: str, status: str, now: float) -> BackendDescriptor:
        with self._lock:
            slot = self._backends.get(backend_id)
            if slot is None:
                raise BrokerError(f"unknown backend {backend_id!r}")
            slot.last_heartbeat = now
            if slot.current_job is not None:
                pass  # busy with an active job: state is broker-owned
            elif status == "idle":
                slot.state = BackendState.idle
            elif status == "busy":
                # agent claims work the broker never assigned; do not mark
                # busy (descriptor invariant couples busy to current_job)
                log.warning("backend %s reports busy without an assigned job", backend_id)
            return slot.descriptor()

    def health_sweep(self, now: float, alert_sink: Optional[AlertSink] = None) -> list[Alert]:
        """Mark stale backends unhealthy, reset stuck ones, requeue their jobs."""
        alerts: list[Alert] = []
        with self._lock:
            for slot in self._backends.values():
                if (
                    slot.state is not BackendState.unhealthy
                    and now - slot.last_heartbeat > self.staleness_threshold
                ):
                    age = now - slot.last_heartbeat
                    requeued = ""
                    if slot.current_job is not None:
                        requeued = self._requeue_or_fail(slot, now, reason="backend went silent")
                    slot.state = BackendState.unhealthy
                    alerts.append(
                        Alert(
                            "critical",
                            slot.id,
                            f"no heartbeat for {age:.0f}s (threshold {self.staleness_threshold:.0f}s)"
                            + requeued,
                            now,
                        )
                    )
                elif (
                    slot.state is BackendState.busy
                    and slot.dispatched_at is not None
                    and now - slot.dispatched_at > self.job_timeout
                ):
                    requeued = self._requeue_or_fail(slot, now, reason="job timed out on backend")
                    slot.state = BackendState.idle
                    alerts.append(
                        Alert(
                            "warning",
                            slot.id,
                            f"job exceeded {self.job_timeout:.0f}s; backend reset" + requeued,
                            now,
                        )
                    )
        for alert in alerts:
            if alert_sink is not None:
                try:
                    alert_sink.emit(alert)
                except Exception as exc:
                    log.error("alert sink failed: %s", exc)
        return alerts

    def _requeue_or_fail(self, slot: _BackendSlot, now: float, reason: str) -> str:
        """Requeue the slot's job, or finalize as judge_error past max attempts.

        Returns a suffix describing what happened (for the alert text).
        """
        submission_id = slot.current_job
        assert submission_id is not None and slot.entry is not None
        entry = slot.entry
        slot.current_job = None
        slot.dispatched_at = None
        slot.entry = None
        if entry.attempts >= self.max_attempts:
            self._finalize_once(
                submission_id,
                SubmissionResult(
                    verdict=Verdict.judge_error,
                    compile_log=f"{reason} after {entry.attempts} attempts",
                ),
            )
            self._jobs.pop(submission_id, None)
            return f"; submission {submission_id} failed as judge_error"
        self._insert(entry)
        return f"; submission {submission_id} requeued (attempt {entry.attempts + 1})"

    # -- completion ----------------------------------------------------------

    def complete_job(
        self, backend_id: str, submission_id: int, result: SubmissionResult, now: float
    ) -> bool:
        """Finalize the submission; late/duplicate results are discarded."""
        with self._lock:
            slot = self._backends.get(backend_id)
            if slot is None or slot.current_job != submission_id:
                log.info(
                    "discarding result for submission %s from %s (no longer assigned)",
                    submission_id,
                    backend_id,
                )
                return False
            slot.current_job = None
            slot.dispatched_at = None
            slot.entry = None
            slot.state = BackendState.idle
            self._jobs.pop(submission_id, None)
            return self._finalize_once(submission_id, result)

    def _finalize_once(self, submission_id: int, result: SubmissionResult) -> bool:
        if submission_id in self._finalized:
            log.info("submission %s already finalized; result discarded", submission_id)
            return False
        self._finalized.add(submission_id)
        try:
            stored = self._finalize(submission_id, result)
        except Exception:
            log.exception("finalizer failed for submission %s", submission_id)
            return False
        if not stored:
            log.info("store refused result for submission %s (already final)", submission_id)
        return stored

    # -- introspection ---------------------------------------------------------

    def backends(self) -> list[BackendDescriptor]:
        with self._lock:
            return [s.descriptor() for s in self._backends.values()]

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "queue_depth": len(self._queue),
                "queue": [e.submission_id for e in self._queue],
                "backends": [
                    {
                        "id": s.id,
                        "state": s.state.value,
                        "toolchains": sorted(s.toolchains),
                        "last_heartbeat": s.last_heartbeat,
                        "current_job": s.current_job,
                    }
                    for s in self._backends.values()
                ],
                "sweep_interval": self.sweep_interval,
            }
