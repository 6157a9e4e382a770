"""Wires store, broker, relay, and the dispatch loop into one service."""

from __future__ import annotations

import logging
import threading
import time
from typing import Optional

from ..broker import AlertSink, Broker
from ..config import Config
from ..domain import BackendState, SubmissionStatus, result_from_dict
from ..storage import Store, StoreError
from ..transport import (
    RelayHub,
    Transport,
    TransportError,
    make_assign_job,
    make_fetch_result,
    make_poll_status,
    problem_to_payload,
)
from .app import create_app

log = logging.getLogger(__name__)


class MultiSink:
    def __init__(self, sinks: list[AlertSink]):
        self.sinks = sinks

    def emit(self, alert) -> None:
        for sink in self.sinks:
            try:
                sink.emit(alert)
            except Exception as exc:
                log.error("alert sink %r failed: %s", sink, exc)


class DispatchLoop(threading.Thread):
    """Drives dispatch, status polling, result collection, and the sweep."""

    def __init__(
        self,
        broker: Broker,
        transport: Transport,
        store: Store,
        token: str,
        *,
        dispatch_period: float = 0.25,
        assign_timeout: float = 15.0,
        poll_timeout: float = 10.0,
        fetch_timeout: float = 30.0,
        alert_sink: Optional[AlertSink] = None,
        clock=time.time,
    ):
        super().__init__(name="dispatch-loop", daemon=True)
        self.broker = broker
        self.transport = transport
        self.store = store
        self.token = token
        self.dispatch_period = dispatch_period
        self.assign_timeout = assign_timeout
        self.poll_timeout = poll_timeout
        self.fetch_timeout = fetch_timeout
        self.alert_sink = alert_sink
        self.clock = clock
        self.stop_event = threading.Event()
        self._next_sweep = clock() + broker.sweep_interval

    def stop(self) -> None:
        self.stop_event.set()

    def run(self) -> None:
        while not self.stop_event.is_set():
            try:
                self.tick()
            except Exception:
                log.exception("dispatch tick failed")
            self.stop_event.wait(self.dispatch_period)

    def tick(self) -> None:
        now = self.clock()
        self._dispatch(now)
        self._collect(now)
        if now >= self._next_sweep:
            self.broker.health_sweep(now, self.alert_sink)
            self._next_sweep = now + self.broker.sweep_interval

    def _build_assign(self, submission_id: int) -> dict:
        sub = self.store.get_submission(submission_id)
        problem = self.store.get_problem(sub.problem_id)
        checker_blob = None
        artifact = self.store.checker_artifact_path(problem)
        if artifact is not None:
            checker_blob = artifact.read_bytes()
        return make_assign_job(
            self.token,
            submission_id,
            sub.source,
            problem.id,
            sub.toolchain_id,
            problem_to_payload(problem, checker_blob),
        )

    def _dispatch(self, now: float) -> None:
        while True:
            assignment = self.broker.pick_next(now)
            if assignment is None:
                return
            try:
                message = self._build_assign(assignment.submission_id)
            except Exception as exc:
                log.error("cannot build job %s: %s", assignment.submission_id, exc)
                self.broker.abort_assignment(
                    assignment.backend_id,
                    assignment.submission_id,
                    f"job payload unavailable: {exc}",
                )
                continue
            try:
                reply = self.transport.request(assignment.address, message, self.assign_timeout)
            except TransportError as exc:
                log.warning("assign to %s failed: %s", assignment.backend_id, exc)
                self.broker.dispatch_failed(assignment.backend_id, assignment.submission_id, now)
                continue
            if not reply.get("ok"):
                log.warning(
                    "agent %s refused job %s: %s",
                    assignment.backend_id,
                    assignment.submission_id,
                    reply.get("error"),
                )
                self.broker.dispatch_failed(assignment.backend_id, assignment.submission_id, now)
                continue
            try:
                self.store.set_submission_status(assignment.submission_id, SubmissionStatus.running)
            except StoreError:
                pass

    def _collect(self, now: float) -> None:
        for desc in self.broker.backends():
            if desc.state is not BackendState.busy or desc.current_job is None:
                continue
            try:
                reply = self.transport.request(
                    desc.address, make_poll_status(self.token), self.poll_timeout
                )
            except TransportError:
                continue  # staleness is the sweep's business
            if not reply.get("ok") or reply.get("result_for") != desc.current_job:
                continue
            try:
                fetched = self.transport.request(
                    desc.address,
                    make_fetch_result(self.token, desc.current_job),
                    self.fetch_timeout,
                )
            except TransportError:
                continue
            if not fetched.get("ok"):
                continue
            try:
                result = result_from_dict(fetched["result"])
            except (KeyError, ValueError, TypeError) as exc:
                log.error("agent %s sent a malformed result: %s", desc.id, exc)
                continue
            self.broker.complete_job(desc.id, desc.current_job, result, now)


class JudgeService:
    """Everything `cmb serve` runs: store, broker, API app, dispatch loop."""

    def __init__(self, config: Config, *, store: Optional[Store] = None):
        self.config = config
        self.store = store if store is not None else Store(config.server.store_path)
        self.broker = Broker(
            self.store.finalize_submission,
            max_attempts=config.broker.max_attempts,
            sweep_interval=config.broker.sweep_interval_seconds,
            job_timeout=config.broker.job_timeout_seconds,
        )
        self.hub = RelayHub()
        self.alert_sink = MultiSink(config.build_alert_sinks())
        self.app = create_app(
            self.store,
            self.broker,
            config.toolchains,
            agent_token=config.server.agent_token,
            relay_hub=self.hub,
            static_dir=config.server.static_dir,
        )
        self.loop = DispatchLoop(
            self.broker,
            self.hub,
            self.store,
            config.server.agent_token,
            dispatch_period=config.broker.dispatch_period_seconds,
            assign_timeout=config.broker.assign_timeout_seconds,
            fetch_timeout=config.broker.fetch_timeout_seconds,
            alert_sink=self.alert_sink,
        )

    def start(self) -> None:
        now = time.time()
        requeued = 0
        for submission_id, toolchain_id in self.store.queued_submission_ids():
            try:
                self.store.set_submission_status(submission_id, SubmissionStatus.queued)
                self.broker.enqueue(submission_id, toolchain_id, now)
                requeued += 1
            except Exception as exc:
                log.error("cannot requeue submission %s: %s", submission_id, exc)
        if requeued:
            log.info("requeued %d submissions from a previous run", requeued)
        self.loop.start()

    def stop(self) -> None:
        self.loop.stop()
        if self.loop.is_alive():
            self.loop.join(timeout=5.0)
        self.store.close()


class LocalAgentRunner(threading.Thread):
    """In-process agent pump for tests: polls the relay hub directly and
    heartbeats straight into the broker (no HTTP)."""

    def __init__(
        self,
        agent_service,
        broker: Broker,
        hub: RelayHub,
        *,
        poll_period: float = 0.05,
        heartbeat_period: float = 1.0,
        clock=time.time,
    ):
        super().__init__(name=f"local-agent-{agent_service.agent_id}", daemon=True)
        self.service = agent_service
        self.broker = broker
        self.hub = hub
        self.poll_period = poll_period
        self.heartbeat_period = heartbeat_period
        self.clock = clock
        self.stop_event = threading.Event()

    def register(self) -> None:
        self.broker.register_backend(
            self.service.agent_id,
            self.service.agent_id,
            sorted(self.service.toolchains),
            self.clock(),
        )

    def run(self) -> None:
        self.register()
        next_heartbeat = 0.0
        while not self.stop_event.is_set():
            now = self.clock()
            if now >= next_heartbeat:
                try:
                    self.broker.record_heartbeat(self.service.agent_id, self.service.status(), now)
                except Exception:
                    pass
                next_heartbeat = now + self.heartbeat_period
            for item in self.hub.poll(self.service.agent_id):
                reply = self.service.handle_message(item["message"])
                self.hub.reply(self.service.agent_id, item["request_id"], reply)
            self.stop_event.wait(self.poll_period)

    def stop(self) -> None:
        self.stop_event.set()
