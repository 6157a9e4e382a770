"""Broker <-> agent message protocol and the shipped transports.

Messages are JSON objects `{type, token, ...}`. The broker issues
request/response messages (assign_job, poll_status, fetch_result) toward an
agent; heartbeats flow from the agent to the broker. Two transports ship:

* LoopbackTransport — in-process delivery straight to a handler (tests and
  single-process deployments).
* RelayHub — server-side mailboxes for agents that dial out over HTTP: the
  agent polls its mailbox for pending requests and posts replies; the broker
  side blocks on a correlated reply with a timeout.
"""

from __future__ import annotations

import base64
import itertools
import threading
from typing import Any, Callable, Optional, Protocol

from .domain import CheckerConfig, Problem, TestCase, checker_from_dict, checker_to_dict

MSG_ASSIGN_JOB = "assign_job"
MSG_POLL_STATUS = "poll_status"
MSG_FETCH_RESULT = "fetch_result"
MSG_HEARTBEAT = "heartbeat"

REQUEST_TYPES = (MSG_ASSIGN_JOB, MSG_POLL_STATUS, MSG_FETCH_RESULT)


class TransportError(RuntimeError):
    pass


class AuthError(TransportError):
    pass


def b64encode(blob: bytes) -> str:
    return base64.b64encode(blob).decode("ascii")


def b64decode(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


def make_assign_job(
    token: str,
    submission_id: int,
    source: bytes,
    problem_id: str,
    toolchain_id: str,
    problem_data: dict,
) -> dict:
    return {
        "type": MSG_ASSIGN_JOB,
        "token": token,
        "submission_id": submission_id,
        "source": b64encode(source),
        "problem_id": problem_id,
        "toolchain_id": toolchain_id,
        "problem": problem_data,
    }


def problem_to_payload(problem: Problem, checker_artifact: Optional[bytes] = None) -> dict:
    """Self-contained problem data for assign_job (test cases inline)."""
    payload = {
        "id": problem.id,
        "title": problem.title,
        "time_limit": problem.time_limit,
        "memory_limit": problem.memory_limit,
        "output_limit": problem.output_limit,
        "checker": checker_to_dict(problem.checker),
        "goodness_label": problem.goodness_label,
        "test_cases": [
            {
                "index": c.index,
                "input": b64encode(c.input),
                "expected_output": b64encode(c.expected_output),
            }
            for c in problem.test_cases
        ],
    }
    if checker_artifact is not None:
        payload["checker_artifact"] = b64encode(checker_artifact)
    return payload


def problem_from_payload(payload: dict) -> tuple[Problem, Optional[bytes]]:
    checker: CheckerConfig = checker_from_dict(payload["checker"])
    cases = tuple(
        TestCase(
            index=int(c["index"]),
            input=b64decode(c["input"]),
            expected_output=b64decode(c["expected_output"]),
        )
        for c in payload["test_cases"]
    )
    problem = Problem(
        id=payload["id"],
        title=payload.get("title", payload["id"]),
        statement="",
        input_spec="",
        output_spec="",
        time_limit=float(payload["time_limit"]),
        memory_limit=int(payload["memory_limit"]),
        output_limit=int(payload["output_limit"]),
        checker=checker,
        test_cases=cases,
        goodness_label=payload.get("goodness_label"),
        published=True,
    )
    blob = payload.get("checker_artifact")
    return problem, (b64decode(blob) if blob is not None else None)


def make_poll_status(token: str) -> dict:
    return {"type": MSG_POLL_STATUS, "token": token}


def make_fetch_result(token: str, submission_id: int) -> dict:
    return {"type": MSG_FETCH_RESULT, "token": token, "submission_id": submission_id}


def check_token(message: dict, expected: str) -> None:
    if message.get("token") != expected:
        raise AuthError("bad or missing token")


Handler = Callable[[dict], dict]


class Transport(Protocol):
    def request(self, address: str, message: dict, timeout: float) -> dict: ...


class LoopbackTransport:
    """Delivers requests by calling the registered handler directly."""

    def __init__(self):
        self._handlers: dict[str, Handler] = {}

    def register(self, address: str, handler: Handler) -> None:
        self._handlers[address] = handler

    def unregister(self, address: str) -> None:
        self._handlers.pop(address, None)

    def request(self, address: str, message: dict, timeout: float) -> dict:
        handler = self._handlers.get(address)
        if handler is None:
            raise TransportError(f"no agent at {address!r}")
        try:
            return handler(message)
        except AuthError:
            raise
        except Exception as exc:
            raise TransportError(f"agent at {address!r} failed: {exc}") from exc


class _Pending:
    def __init__(self, request_id: int, message: dict):
        self.request_id = request_id
        self.message = message
        self.reply: Optional[dict] = None
        self.done = threading.Event()
        self.delivered = False


class RelayHub:
    """Per-agent mailboxes bridging broker-side requests to polling agents."""

    def __init__(self):
        self._lock = threading.Lock()
        self._ids = itertools.count(1)
        self._queues: dict[str, list[_Pending]] = {}
        self._inflight: dict[tuple[str, int], _Pending] = {}

    def request(self, address: str, message: dict, timeout: float) -> dict:
        pending = _Pending(next(self._ids), message)
        with self._lock:
            self._queues.setdefault(address, []).append(pending)
            self._inflight[(address, pending.request_id)] = pending
        try:
            if not pending.done.wait(timeout):
                raise TransportError(f"agent {address!r} did not reply within {timeout}s")
            assert pending.reply is not None
            return pending.reply
        finally:
            with self._lock:
                self._inflight.pop((address, pending.request_id), None)
                queue = self._queues.get(address, [])
                if pending in queue:
                    queue.remove(pending)

    def poll(self, address: str) -> list[dict[str, Any]]:
        """Pending requests for an agent; each is delivered at most once."""
        with self._lock:
            queue = self._queues.get(address, [])
            out = [
                {"request_id": p.request_id, "message": p.message}
                for p in queue
                if not p.delivered
            ]
            for p in queue:
                p.delivered = True
            return out

    def reply(self, address: str, request_id: int, reply: dict) -> bool:
        with self._lock:
            pending = self._inflight.get((address, request_id))
        if pending is None:
            return False  # broker side already timed out
        pending.reply = reply
        pending.done.set()
        return True
