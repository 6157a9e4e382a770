"""HTTP+JSON API: auth, problems, submissions, groups, highscores, health.

Also hosts the agent relay endpoints (register/heartbeat/poll/reply) that
bridge dial-out agents to the broker's request/response protocol.
"""

from __future__ import annotations

import logging
import time
from typing import Optional

from fastapi import FastAPI, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..agent.toolchain import ToolchainError, quick_compile
from ..broker import Broker, BrokerError
from ..domain import (
    MAX_SOURCE_BYTES,
    Group,
    GroupVisibility,
    HighscoreEntry,
    Problem,
    Submission,
    SubmissionResult,
    SubmissionStatus,
    SubmissionVisibility,
    Verdict,
    measurement_to_dict,
)
from ..storage import Conflict, NotFound, Store
from ..transport import RelayHub

log = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def unauthorized(message: str = "authentication required") -> ApiError:
    return ApiError(401, "unauthorized", message)


def forbidden(message: str = "not allowed") -> ApiError:
    return ApiError(403, "forbidden", message)


def not_found(message: str) -> ApiError:
    return ApiError(404, "not_found", message)


# -- JSON views -----------------------------------------------------------------


def _iso(dt) -> str:
    return dt.isoformat(timespec="milliseconds")


def problem_summary(p: Problem) -> dict:
    return {
        "id": p.id,
        "title": p.title,
        "time_limit": p.time_limit,
        "memory_limit": p.memory_limit,
        "output_limit": p.output_limit,
        "checker_mode": p.checker.mode.value,
        "goodness_label": p.goodness_label,
        "test_case_count": len(p.test_cases),
    }


def problem_detail(p: Problem) -> dict:
    out = problem_summary(p)
    out.update(
        {"statement": p.statement, "input_spec": p.input_spec, "output_spec": p.output_spec}
    )
    return out


def result_view(result: SubmissionResult, *, owner: bool) -> dict:
    """Owner view carries everything; the public view only what a highscore
    row would show."""
    out: dict = {"verdict": result.verdict.value, "goodness": result.goodness}
    if result.measurement is not None:
        m = result.measurement
        out.update({"time": m.wall_time, "energy": m.energy_total, "edp": m.edp})
        if owner:
            out["measurement"] = measurement_to_dict(m)
    if owner:
        if result.failed_test_index is not None:
            out["failed_test_index"] = result.failed_test_index
        out["compile_log"] = result.compile_log
    return out


def submission_owner_view(sub: Submission, username: str) -> dict:
    return {
        "id": sub.id,
        "problem_id": sub.problem_id,
        "username": username,
        "filename": sub.filename,
        "toolchain_id": sub.toolchain_id,
        "submitted_at": _iso(sub.submitted_at),
        "visibility": sub.visibility.value,
        "status": sub.status.value,
        "result": result_view(sub.result, owner=True) if sub.result else None,
    }


def submission_public_view(sub: Submission, username: str) -> dict:
    # only what a highscore row exposes
    out = {
        "id": sub.id,
        "problem_id": sub.problem_id,
        "username": username,
        "filename": sub.filename,
        "status": sub.status.value,
    }
    if sub.result is not None:
        out["result"] = result_view(sub.result, owner=False)
    return out


def highscore_row(e: HighscoreEntry, with_goodness: bool) -> dict:
    row = {
        "username": e.username,
        "time": e.time,
        "energy": e.energy,
        "edp": e.edp,
        "filename": e.filename,
        "submission_id": e.submission_id,
    }
    if with_goodness:
        row["goodness"] = e.goodness
    return row


# -- app factory ------------------------------------------------------------------


def create_app(
    store: Store,
    broker: Broker,
    toolchains: dict,
    *,
    agent_token: str,
    relay_hub: Optional[RelayHub] = None,
    clock=time.time,
    static_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="cmb-judge", docs_url=None, redoc_url=None)
    hub = relay_hub if relay_hub is not None else RelayHub()
    app.state.store = store
    app.state.broker = broker
    app.state.relay_hub = hub

    @app.exception_handler(ApiError)
    async def api_error_handler(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": {"code": exc.code, "message": exc.message}}
        )

    @app.exception_handler(NotFound)
    async def store_not_found_handler(_request: Request, exc: NotFound):
        return JSONResponse(
            status_code=404, content={"error": {"code": "not_found", "message": str(exc)}}
        )

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(part) for part in first.get("loc", ()))
        message = f"{where}: {first.get('msg', 'invalid request')}" if where else "invalid request"
        return JSONResponse(
            status_code=400, content={"error": {"code": "invalid", "message": message}}
        )

    @app.exception_handler(Exception)
    async def internal_error_handler(_request: Request, exc: Exception):
        log.exception("unhandled API error", exc_info=exc)
        return JSONResponse(
            status_code=500,
            content={"error": {"code": "internal", "message": "internal error"}},
        )

    def current_user_id(request: Request) -> int:
        auth = request.headers.get("Authorization", "")
        if not auth.startswith("Bearer "):
            raise unauthorized()
        user_id = store.resolve_session(auth.removeprefix("Bearer ").strip())
        if user_id is None:
            raise unauthorized("session expired or unknown")
        return user_id

    def optional_user_id(request: Request) -> Optional[int]:
        try:
            return current_user_id(request)
        except ApiError:
            return None

    def require_agent(request: Request) -> None:
        auth = request.headers.get("Authorization", "")
        if auth.removeprefix("Bearer ").strip() != agent_token:
            raise unauthorized("agent token required")

    # -- users & sessions ------------------------------------------------------

    @app.post("/users", status_code=201)
    def register(payload: dict):
        username = str(payload.get("username", "")).strip()
        password = str(payload.get("password", ""))
        if not username or not password:
            raise ApiError(400, "invalid", "username and password required")
        try:
            user = store.create_user(username, password)
        except Conflict as exc:
            raise ApiError(409, "conflict", str(exc))
        return {"id": user.id, "username": user.username}

    @app.post("/sessions")
    def login(payload: dict):
        user = store.authenticate(
            str(payload.get("username", "")), str(payload.get("password", ""))
        )
        if user is None:
            raise unauthorized("bad credentials")
        token, expires = store.create_session(user.id)
        return {"token": token, "expires_at": _iso(expires), "username": user.username}

    @app.delete("/sessions/current", status_code=204)
    def logout(request: Request):
        auth = request.headers.get("Authorization", "")
        if auth.startswith("Bearer "):
            store.delete_session(auth.removeprefix("Bearer ").strip())
        return None

    # -- problems ------------------------------------------------------------------

    @app.get("/problems")
    def list_problems():
        return {"problems": [problem_summary(p) for p in store.list_problems()]}

    @app.get("/problems/{problem_id}")
    def get_problem(problem_id: str):
        problem = store.get_problem(problem_id)
        if not problem.published:
            raise not_found(f"problem {problem_id!r}")
        return problem_detail(problem)

    # -- submissions ------------------------------------------------------------------

    @app.post("/problems/{problem_id}/submissions", status_code=201)
    def submit_solution(
        problem_id: str,
        request: Request,
        file: UploadFile,
        toolchain: str = Form(...),
    ):
        user_id = current_user_id(request)
        problem = store.get_problem(problem_id)
        if not problem.published:
            raise not_found(f"problem {problem_id!r}")
        tc = toolchains.get(toolchain)
        if tc is None:
            raise ApiError(400, "invalid", f"unknown toolchain {toolchain!r}")
        source = file.file.read(MAX_SOURCE_BYTES + 1)
        if len(source) > MAX_SOURCE_BYTES:
            raise ApiError(413, "too_large", f"source exceeds {MAX_SOURCE_BYTES} bytes")
        if not source:
            raise ApiError(400, "invalid", "empty source file")

        submission_id = store.create_submission(
            user_id,
            problem_id,
            file.filename or "solution",
            source,
            toolchain,
            status=SubmissionStatus.compiling,
        )
        try:
            report = quick_compile(source, tc)
        except (ToolchainError, TimeoutError) as exc:
            store.finalize_submission(
                submission_id,
                SubmissionResult(Verdict.judge_error, compile_log=str(exc)),
            )
            return {
                "id": submission_id,
                "status": "done",
                "compile": {"ok": False, "diagnostics": str(exc)},
            }
        if not report.ok:
            # fast feedback: never enters the queue
            store.finalize_submission(
                submission_id,
                SubmissionResult(Verdict.compile_error, compile_log=report.diagnostics),
            )
            return {
                "id": submission_id,
                "status": "done",
                "compile": {"ok": False, "diagnostics": report.diagnostics},
            }
        store.set_submission_status(submission_id, SubmissionStatus.queued)
        try:
            position = broker.enqueue(submission_id, toolchain, clock())
        except BrokerError as exc:
            raise ApiError(500, "internal", str(exc))
        return {
            "id": submission_id,
            "status": "queued",
            "queue_position": position,
            "compile": {"ok": True, "diagnostics": report.diagnostics},
        }

    @app.get("/submissions/{submission_id}")
    def get_submission(submission_id: int, request: Request):
        sub = store.get_submission(submission_id)
        username = store.get_user(sub.user_id).username
        user_id = optional_user_id(request)
        if user_id == sub.user_id:
            return submission_owner_view(sub, username)
        if (
            sub.visibility is SubmissionVisibility.public
            and sub.status is SubmissionStatus.done
        ):
            return submission_public_view(sub, username)
        raise forbidden("submission is private or not finalized")

    @app.patch("/submissions/{submission_id}")
    def set_visibility(submission_id: int, payload: dict, request: Request):
        user_id = current_user_id(request)
        sub = store.get_submission(submission_id)
        if sub.user_id != user_id:
            raise forbidden("only the owner can change visibility")
        raw = payload.get("visibility")
        try:
            visibility = SubmissionVisibility(raw)
        except ValueError:
            raise ApiError(400, "invalid", f"visibility must be public or private, got {raw!r}")
        store.set_visibility(submission_id, visibility)
        sub = store.get_submission(submission_id)
        return submission_owner_view(sub, store.get_user(sub.user_id).username)

    @app.get("/problems/{problem_id}/submissions/mine")
    def my_submissions(problem_id: str, request: Request):
        user_id = current_user_id(request)
        store.get_problem(problem_id)
        subs = store.list_user_submissions(user_id, problem_id)
        username = store.get_user(user_id).username
        return {"submissions": [submission_owner_view(s, username) for s in subs]}

    # -- highscores ---------------------------------------------------------------------

    @app.get("/problems/{problem_id}/highscores")
    def highscores(
        problem_id: str,
        request: Request,
        scope: str = "public",
        sort: str = "edp",
        limit: int = 50,
    ):
        problem = store.get_problem(problem_id)
        if not problem.published:
            raise not_found(f"problem {problem_id!r}")
        if sort not in ("time", "energy", "edp"):
            raise ApiError(400, "invalid", f"sort must be time, energy or edp, got {sort!r}")
        member_ids: Optional[set[int]] = None
        group_name = None
        if scope != "public":
            if not scope.startswith("group:"):
                raise ApiError(400, "invalid", f"scope must be public or group:<id>, got {scope!r}")
            try:
                group_id = int(scope.removeprefix("group:"))
            except ValueError:
                raise ApiError(400, "invalid", "group scope needs a numeric id")
            group = store.get_group(group_id)
            user_id = optional_user_id(request)
            if group.visibility is not GroupVisibility.public and not (
                user_id is not None and store.is_member(group_id, user_id)
            ):
                raise forbidden("group is unlisted")
            member_ids = store.group_member_ids(group_id)
            group_name = group.name
        entries = store.highscores(
            problem_id, member_ids=member_ids, sort_key=sort, limit=limit
        )
        with_goodness = problem.goodness_label is not None
        return {
            "problem_id": problem_id,
            "scope": scope,
            "group_name": group_name,
            "sort": sort,
            "goodness_label": problem.goodness_label,
            "entries": [highscore_row(e, with_goodness) for e in entries],
        }

    # -- groups ------------------------------------------------------------------------

    def group_view(g: Group) -> dict:
        return {
            "id": g.id,
            "name": g.name,
            "owner_id": g.owner_id,
            "visibility": g.visibility.value,
            "problem_ids": sorted(g.problem_ids),
        }

    @app.post("/groups", status_code=201)
    def create_group(payload: dict, request: Request):
        user_id = current_user_id(request)
        name = str(payload.get("name", "")).strip()
        if not name:
            raise ApiError(400, "invalid", "group name required")
        try:
            visibility = GroupVisibility(payload.get("visibility", "public"))
        except ValueError:
            raise ApiError(400, "invalid", "visibility must be public or unlisted")
        problem_ids = payload.get("problem_ids", [])
        if not isinstance(problem_ids, list):
            raise ApiError(400, "invalid", "problem_ids must be a list")
        try:
            group = store.create_group(name, user_id, visibility, [str(p) for p in problem_ids])
        except Conflict as exc:
            raise ApiError(409, "conflict", str(exc))
        return group_view(group)

    @app.get("/groups")
    def list_groups(request: Request):
        user_id = optional_user_id(request)
        groups = store.list_groups(user_id)
        out = []
        for g in groups:
            view = group_view(g)
            if user_id is not None:
                view["joined"] = store.is_member(g.id, user_id)
            out.append(view)
        return {"groups": out}

    @app.post("/groups/{group_id}/members", status_code=201)
    def join_group(group_id: int, request: Request):
        user_id = current_user_id(request)
        group = store.get_group(group_id)
        if group.visibility is not GroupVisibility.public and not store.is_member(
            group_id, user_id
        ):
            raise forbidden("group is unlisted; invitation required")
        store.join_group(group_id, user_id)  # idempotent
        return {"group_id": group_id, "user_id": user_id, "joined": True}

    # -- health -------------------------------------------------------------------------

    @app.get("/health")
    def health():
        snap = broker.snapshot()
        return {"status": "ok", **snap}

    # -- agent relay ----------------------------------------------------------------------

    @app.post("/agents/register")
    def agent_register(payload: dict, request: Request):
        require_agent(request)
        agent_id = str(payload.get("agent_id", "")).strip()
        if not agent_id:
            raise ApiError(400, "invalid", "agent_id required")
        toolchain_ids = [str(t) for t in payload.get("toolchains", [])]
        desc = broker.register_backend(agent_id, agent_id, toolchain_ids, clock())
        return {"ok": True, "agent_id": desc.id}

    @app.post("/agents/{agent_id}/heartbeat")
    def agent_heartbeat(agent_id: str, payload: dict, request: Request):
        require_agent(request)
        try:
            desc = broker.record_heartbeat(agent_id, str(payload.get("status", "idle")), clock())
        except BrokerError as exc:
            raise not_found(str(exc))
        return {"ok": True, "state": desc.state.value}

    @app.post("/agents/{agent_id}/poll")
    def agent_poll(agent_id: str, request: Request):
        require_agent(request)
        return {"requests": hub.poll(agent_id)}

    @app.post("/agents/{agent_id}/reply")
    def agent_reply(agent_id: str, payload: dict, request: Request):
        require_agent(request)
        request_id = payload.get("request_id")
        reply = payload.get("reply")
        if not isinstance(request_id, int) or not isinstance(reply, dict):
            raise ApiError(400, "invalid", "request_id and reply required")
        delivered = hub.reply(agent_id, request_id, reply)
        return {"ok": delivered}

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="frontend")

    return app
