"""HttpAgentLoop behavior against a broker endpoint (requests mocked)."""

import threading

import pytest
import requests

from cmbjudge.agent import AgentService, DEFAULT_C_TOOLCHAIN, HttpAgentLoop
from cmbjudge.transport import AuthError


class FakeResponse:
    def __init__(self, status_code=200, body=None):
        self.status_code = status_code
        self._body = body if body is not None else {}

    def raise_for_status(self):
        if self.status_code >= 400:
            raise requests.HTTPError(f"status {self.status_code}")

    def json(self):
        return self._body


def make_service(tmp_path):
    return AgentService(
        "a1",
        "tok",
        {"c-gcc": DEFAULT_C_TOOLCHAIN},
        lambda executor: None,  # never judges in these tests
        tmp_path,
    )


def make_loop(service, **kwargs):
    kwargs.setdefault("poll_period", 0.01)
    kwargs.setdefault("heartbeat_period", 0.05)
    return HttpAgentLoop("http://broker.test", service, **kwargs)


class TestRegistration:
    def test_retries_with_backoff_then_gives_up(self, tmp_path, monkeypatch):
        attempts = []

        def failing_post(url, json=None, timeout=None):
            attempts.append(url)
            raise requests.ConnectionError("no route to broker")

        loop = make_loop(make_service(tmp_path), register_attempts=3)
        monkeypatch.setattr(loop._session, "post", failing_post)
        monkeypatch.setattr(loop.stop_event, "wait", lambda t: False)  # skip real sleeps
        with pytest.raises(RuntimeError, match="unreachable after 3 attempts"):
            loop.register()
        assert len(attempts) == 3

    def test_auth_rejection_stops_immediately(self, tmp_path, monkeypatch):
        loop = make_loop(make_service(tmp_path), register_attempts=5)
        monkeypatch.setattr(
            loop._session, "post", lambda url, json=None, timeout=None: FakeResponse(401)
        )
        with pytest.raises(AuthError):
            loop.register()

    def test_successful_registration_sends_toolchains(self, tmp_path, monkeypatch):
        seen = {}

        def ok_post(url, json=None, timeout=None):
            seen["url"] = url
            seen["payload"] = json
            return FakeResponse(200, {"ok": True})

        loop = make_loop(make_service(tmp_path))
        monkeypatch.setattr(loop._session, "post", ok_post)
        loop.register()
        assert seen["url"].endswith("/agents/register")
        assert seen["payload"] == {"agent_id": "a1", "toolchains": ["c-gcc"]}


class TestRunLoop:
    def test_heartbeats_polls_and_replies(self, tmp_path, monkeypatch):
        service = make_service(tmp_path)
        loop = make_loop(service)
        calls = []
        pending = [
            {"request_id": 7, "message": {"type": "poll_status", "token": "tok"}},
        ]

        def post(url, json=None, timeout=None):
            calls.append((url, json))
            if url.endswith("/poll"):
                batch, pending[:] = list(pending), []
                return FakeResponse(200, {"requests": batch})
            return FakeResponse(200, {"ok": True})

        monkeypatch.setattr(loop._session, "post", post)
        runner = threading.Thread(target=loop.run, daemon=True)
        runner.start()
        deadline = threading.Event()
        for _ in range(200):
            if any(u.endswith("/reply") for u, _ in calls):
                break
            deadline.wait(0.01)
        loop.stop()
        runner.join(timeout=2)

        urls = [u for u, _ in calls]
        assert any(u.endswith("/agents/register") for u in urls)
        assert any(u.endswith("/agents/a1/heartbeat") for u in urls)
        reply_calls = [(u, p) for u, p in calls if u.endswith("/reply")]
        assert reply_calls, "agent never replied to the pending request"
        _, payload = reply_calls[0]
        assert payload["request_id"] == 7
        assert payload["reply"]["ok"] is True
        assert payload["reply"]["state"] == "idle"

    def test_gives_up_after_consecutive_failures(self, tmp_path, monkeypatch):
        service = make_service(tmp_path)
        loop = make_loop(service, max_consecutive_failures=3)
        registered = {"done": False}

        def post(url, json=None, timeout=None):
            if url.endswith("/register") and not registered["done"]:
                registered["done"] = True
                return FakeResponse(200, {"ok": True})
            raise requests.ConnectionError("broker went away")

        monkeypatch.setattr(loop._session, "post", post)
        with pytest.raises(RuntimeError, match="giving up"):
            loop.run()
