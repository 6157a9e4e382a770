import threading
import time

import pytest

from cmbjudge.domain import CheckerConfig, CheckerMode, Problem, TestCase
from cmbjudge.transport import (
    AuthError,
    LoopbackTransport,
    RelayHub,
    TransportError,
    check_token,
    make_assign_job,
    make_fetch_result,
    make_poll_status,
    problem_from_payload,
    problem_to_payload,
)


def sample_problem():
    return Problem(
        id="sum",
        title="Sum",
        statement="add",
        input_spec="",
        output_spec="",
        time_limit=2.0,
        memory_limit=256,
        output_limit=1 << 20,
        checker=CheckerConfig(CheckerMode.exact),
        test_cases=(TestCase(0, b"1 2\n", b"3\n"), TestCase(1, b"\x00\xff", b"ok\n")),
    )


class TestProblemPayload:
    def test_round_trip_with_binary_cases(self):
        problem = sample_problem()
        payload = problem_to_payload(problem)
        again, blob = problem_from_payload(payload)
        assert blob is None
        assert again.test_cases == problem.test_cases
        assert again.checker == problem.checker
        assert again.limits == problem.limits

    def test_checker_artifact_carried(self):
        problem = sample_problem()
        payload = problem_to_payload(problem, checker_artifact=b"#!/bin/sh\nexit 0\n")
        _, blob = problem_from_payload(payload)
        assert blob == b"#!/bin/sh\nexit 0\n"

    def test_assign_job_shape(self):
        msg = make_assign_job("tok", 7, b"src", "sum", "c-gcc", problem_to_payload(sample_problem()))
        assert msg["type"] == "assign_job"
        assert msg["token"] == "tok"
        assert msg["submission_id"] == 7
        assert msg["problem_id"] == "sum"
        assert msg["toolchain_id"] == "c-gcc"
        assert isinstance(msg["source"], str)  # base64 text, JSON-safe


class TestCheckToken:
    def test_accept_and_reject(self):
        check_token({"token": "t"}, "t")
        with pytest.raises(AuthError):
            check_token({"token": "x"}, "t")
        with pytest.raises(AuthError):
            check_token({}, "t")


class TestLoopback:
    def test_request_reaches_handler(self):
        transport = LoopbackTransport()
        seen = []
        transport.register("a1", lambda msg: (seen.append(msg), {"ok": True})[1])
        reply = transport.request("a1", make_poll_status("t"), timeout=1.0)
        assert reply == {"ok": True}
        assert seen[0]["type"] == "poll_status"

    def test_unknown_address(self):
        with pytest.raises(TransportError, match="no agent"):
            LoopbackTransport().request("ghost", {}, timeout=1.0)

    def test_handler_exception_wrapped(self):
        transport = LoopbackTransport()

        def bad(_msg):
            raise ValueError("boom")

        transport.register("a1", bad)
        with pytest.raises(TransportError, match="boom"):
            transport.request("a1", {}, timeout=1.0)


class TestRelayHub:
    def test_request_reply_correlation(self):
        hub = RelayHub()
        replies = {}

        def broker_side():
            replies["r"] = hub.request("a1", make_fetch_result("t", 3), timeout=5.0)

        t = threading.Thread(target=broker_side)
        t.start()
        deadline = time.monotonic() + 2.0
        pending = []
        while not pending and time.monotonic() < deadline:
            pending = hub.poll("a1")
            time.sleep(0.01)
        assert pending, "request never showed up in the mailbox"
        item = pending[0]
        assert item["message"]["submission_id"] == 3
        assert hub.reply("a1", item["request_id"], {"ok": True, "result": {}})
        t.join(timeout=2.0)
        assert replies["r"]["ok"] is True

    def test_poll_delivers_each_request_once(self):
        hub = RelayHub()

        def fire_and_forget():
            try:
                hub.request("a1", {"x": 1}, timeout=0.5)
            except TransportError:
                pass  # nobody replies in this test

        threading.Thread(target=fire_and_forget, daemon=True).start()
        time.sleep(0.05)
        first = hub.poll("a1")
        second = hub.poll("a1")
        assert len(first) == 1
        assert second == []

    def test_timeout_when_agent_silent(self):
        hub = RelayHub()
        started = time.monotonic()
        with pytest.raises(TransportError, match="did not reply"):
            hub.request("a1", {}, timeout=0.2)
        assert time.monotonic() - started < 2.0

    def test_late_reply_discarded(self):
        hub = RelayHub()
        with pytest.raises(TransportError):
            hub.request("a1", {}, timeout=0.05)
        # agent answers after the broker gave up
        assert hub.reply("a1", 1, {"ok": True}) is False
