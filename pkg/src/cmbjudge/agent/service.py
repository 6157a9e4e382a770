"""The agent process: accepts protocol messages, judges jobs, heartbeats.

AgentService is transport-neutral (the loopback transport calls
handle_message directly); HttpAgentLoop wraps it for agents that dial out to
a broker endpoint over HTTP.
"""

from __future__ import annotations

import logging
import shutil
import threading
import time
from pathlib import Path
from typing import Callable, Mapping, Optional

import requests

from ..domain import Problem, SubmissionResult, Verdict, result_to_dict
from ..measurement import MeasurementHarness
from ..measurement.harness import Executor
from ..transport import (
    MSG_ASSIGN_JOB,
    MSG_FETCH_RESULT,
    MSG_POLL_STATUS,
    AuthError,
    b64decode,
    check_token,
    problem_from_payload,
)
from .runner import judge_submission
from .toolchain import ToolchainConfig

log = logging.getLogger(__name__)

HarnessFactory = Callable[[Executor], MeasurementHarness]


class AgentService:
    """One job at a time; a finished result is retained until the next job
    so fetch_result can be retried (at-least-once delivery)."""

    def __init__(
        self,
        agent_id: str,
        token: str,
        toolchains: Mapping[str, ToolchainConfig],
        harness_factory: HarnessFactory,
        scratch_root: str | Path,
        *,
        sandbox_user: Optional[str] = None,
        checker_timeout: float = 30.0,
    ):
        self.agent_id = agent_id
        self.token = token
        self.toolchains = dict(toolchains)
        self.harness_factory = harness_factory
        self.scratch_root = Path(scratch_root)
        self.sandbox_user = sandbox_user
        self.checker_timeout = checker_timeout
        self._lock = threading.Lock()
        self._state = "idle"
        self._phase = ""
        self._current_job: Optional[int] = None
        self._result: Optional[tuple[int, dict]] = None
        self._worker: Optional[threading.Thread] = None

    # -- status ----------------------------------------------------------------

    def status(self) -> str:
        with self._lock:
            return self._state

    def wait_idle(self, timeout: float = 60.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            worker = self._worker
            if worker is None or not worker.is_alive():
                return True
            worker.join(timeout=0.05)
        return False

    # -- protocol ----------------------------------------------------------------

    def handle_message(self, message: dict) -> dict:
        check_token(message, self.token)
        mtype = message.get("type")
        if mtype == MSG_ASSIGN_JOB:
            return self._handle_assign(message)
        if mtype == MSG_POLL_STATUS:
            return self._handle_poll()
        if mtype == MSG_FETCH_RESULT:
            return self._handle_fetch(message)
        return {"ok": False, "error": f"unknown message type {mtype!r}"}

    def _handle_assign(self, message: dict) -> dict:
        with self._lock:
            if self._state == "busy":
                return {"ok": False, "error": "busy"}
            toolchain = self.toolchains.get(message.get("toolchain_id", ""))
            if toolchain is None:
                return {"ok": False, "error": f"toolchain {message.get('toolchain_id')!r} unavailable"}
            try:
                problem, checker_blob = problem_from_payload(message["problem"])
                source = b64decode(message["source"])
                submission_id = int(message["submission_id"])
            except (KeyError, ValueError, TypeError) as exc:
                return {"ok": False, "error": f"malformed job payload: {exc}"}
            self._state = "busy"
            self._phase = "compiling"
            self._current_job = submission_id
            self._result = None
            self._worker = threading.Thread(
                target=self._run_job,
                args=(submission_id, source, problem, toolchain, checker_blob),
                name=f"job-{submission_id}",
                daemon=True,
            )
            self._worker.start()
            return {"ok": True, "agent_id": self.agent_id}

    def _handle_poll(self) -> dict:
        with self._lock:
            has_result = self._result is not None
            return {
                "ok": True,
                "state": self._state,
                "phase": self._phase,
                "submission_id": self._current_job if self._state == "busy" else None,
                "result_for": self._result[0] if has_result else None,
            }

    def _handle_fetch(self, message: dict) -> dict:
        wanted = message.get("submission_id")
        with self._lock:
            if self._result is not None and self._result[0] == wanted:
                return {"ok": True, "submission_id": wanted, "result": self._result[1]}
            if self._state == "busy" and self._current_job == wanted:
                return {"ok": False, "error": "not ready"}
            return {"ok": False, "error": f"no result for submission {wanted!r}"}

    # -- job execution ------------------------------------------------------------

    def _run_job(
        self,
        submission_id: int,
        source: bytes,
        problem: Problem,
        toolchain: ToolchainConfig,
        checker_blob: Optional[bytes],
    ) -> None:
        # whatever happens, the agent must come back idle with a result to
        # hand over; a crashed job thread must not wedge the backend
        checker_dir = None
        try:
            checker_path = None
            if checker_blob is not None:
                checker_dir = self.scratch_root / f"job-{submission_id}-checker"
                checker_dir.mkdir(parents=True, exist_ok=True)
                artifact_name = Path(problem.checker.checker_ref or "checker").name
                checker_path = checker_dir / artifact_name
                checker_path.write_bytes(checker_blob)
                checker_path.chmod(0o755)
            with self._lock:
                self._phase = "running"
            result = judge_submission(
                source,
                problem,
                toolchain,
                job_id=submission_id,
                scratch_root=self.scratch_root,
                harness_factory=self.harness_factory,
                sandbox_user=self.sandbox_user,
                checker_path=checker_path,
                checker_timeout=self.checker_timeout,
            )
        except Exception as exc:
            log.exception("job %s failed on the agent", submission_id)
            result = SubmissionResult(Verdict.judge_error, compile_log=f"agent failure: {exc}")
        finally:
            if checker_dir is not None:
                shutil.rmtree(checker_dir, ignore_errors=True)
        with self._lock:
            self._result = (submission_id, result_to_dict(result))
            self._state = "idle"
            self._phase = "done"
            self._current_job = None
        log.info("job %s finished: %s", submission_id, result.verdict.value)


class HttpAgentLoop:
    """Dial-out loop for `cmb agent`: register, heartbeat, poll, reply."""

    def __init__(
        self,
        broker_url: str,
        service: AgentService,
        *,
        heartbeat_period: float = 5.0,
        poll_period: float = 0.5,
        register_attempts: int = 10,
        max_consecutive_failures: int = 60,
    ):
        self.base = broker_url.rstrip("/")
        self.service = service
        self.heartbeat_period = heartbeat_period
        self.poll_period = poll_period
        self.register_attempts = register_attempts
        self.max_consecutive_failures = max_consecutive_failures
        self.stop_event = threading.Event()
        self._session = requests.Session()
        self._session.headers["Authorization"] = f"Bearer {service.token}"

    def _post(self, path: str, payload: dict, timeout: float = 10.0) -> dict:
        resp = self._session.post(f"{self.base}{path}", json=payload, timeout=timeout)
        if resp.status_code == 401:
            raise AuthError("broker rejected agent token")
        resp.raise_for_status()
        return resp.json()

    def register(self) -> None:
        delay = 0.5
        for attempt in range(1, self.register_attempts + 1):
            try:
                self._post(
                    "/agents/register",
                    {
                        "agent_id": self.service.agent_id,
                        "toolchains": sorted(self.service.toolchains),
                    },
                )
                log.info("registered with broker at %s", self.base)
                return
            except AuthError:
                raise
            except requests.RequestException as exc:
                log.warning("register attempt %d failed: %s", attempt, exc)
                if self.stop_event.wait(delay):
                    raise RuntimeError("stopped during registration")
                delay = min(delay * 2, 15.0)
        raise RuntimeError(f"broker unreachable after {self.register_attempts} attempts")

    def run(self) -> None:
        self.register()
        agent_id = self.service.agent_id
        next_heartbeat = 0.0
        failures = 0
        while not self.stop_event.is_set():
            try:
                now = time.monotonic()
                if now >= next_heartbeat:
                    self._post(f"/agents/{agent_id}/heartbeat", {"status": self.service.status()})
                    next_heartbeat = now + self.heartbeat_period
                pending = self._post(f"/agents/{agent_id}/poll", {}).get("requests", [])
                for item in pending:
                    reply = self.service.handle_message(item["message"])
                    self._post(
                        f"/agents/{agent_id}/reply",
                        {"request_id": item["request_id"], "reply": reply},
                    )
                failures = 0
            except AuthError:
                log.error("authentication rejected; stopping agent")
                raise
            except requests.RequestException as exc:
                failures += 1
                log.warning("broker connection trouble (%d in a row): %s", failures, exc)
                if failures >= self.max_consecutive_failures:
                    raise RuntimeError("broker unreachable; giving up")
            self.stop_event.wait(self.poll_period)

    def stop(self) -> None:
        self.stop_event.set()
