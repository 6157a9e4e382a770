"""Embedded relational store (SQLite) for users, problems, submissions, groups.

Test-case blobs live on disk under the store directory; the database keeps
their paths. All operations are transactional; a single connection guarded by
a lock serves every thread of the service process.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import sqlite3
import threading
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional

from .domain import (
    CheckerConfig,
    CheckerMode,
    Group,
    GroupVisibility,
    HighscoreEntry,
    Problem,
    Submission,
    SubmissionResult,
    SubmissionStatus,
    SubmissionVisibility,
    TestCase,
    User,
    Verdict,
    checker_from_dict,
    checker_to_dict,
    result_from_dict,
    result_to_dict,
    utc_now,
)
from .packages import build_checker_artifact

SESSION_TTL = timedelta(hours=24)

_SCRYPT_N, _SCRYPT_R, _SCRYPT_P = 2**14, 8, 1

SORT_KEYS = ("time", "energy", "edp")

_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    username TEXT NOT NULL UNIQUE,
    credential_hash TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    user_id INTEGER NOT NULL REFERENCES users(id),
    expires_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS problems (
    id TEXT PRIMARY KEY,
    title TEXT NOT NULL,
    statement TEXT NOT NULL,
    input_spec TEXT NOT NULL DEFAULT '',
    output_spec TEXT NOT NULL DEFAULT '',
    time_limit REAL NOT NULL,
    memory_limit INTEGER NOT NULL,
    output_limit INTEGER NOT NULL,
    checker_json TEXT NOT NULL,
    goodness_label TEXT,
    published INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS test_cases (
    problem_id TEXT NOT NULL REFERENCES problems(id) ON DELETE CASCADE,
    idx INTEGER NOT NULL,
    input_path TEXT NOT NULL,
    output_path TEXT NOT NULL,
    PRIMARY KEY (problem_id, idx)
);
CREATE TABLE IF NOT EXISTS submissions (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id INTEGER NOT NULL REFERENCES users(id),
    problem_id TEXT NOT NULL REFERENCES problems(id),
    filename TEXT NOT NULL,
    source BLOB NOT NULL,
    toolchain_id TEXT NOT NULL,
    submitted_at TEXT NOT NULL,
    visibility TEXT NOT NULL,
    status TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS results (
    submission_id INTEGER PRIMARY KEY REFERENCES submissions(id),
    result_json TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS groups (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    name TEXT NOT NULL UNIQUE,
    owner_id INTEGER NOT NULL REFERENCES users(id),
    visibility TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS group_members (
    group_id INTEGER NOT NULL REFERENCES groups(id),
    user_id INTEGER NOT NULL REFERENCES users(id),
    PRIMARY KEY (group_id, user_id)
);
CREATE TABLE IF NOT EXISTS group_problems (
    group_id INTEGER NOT NULL REFERENCES groups(id),
    problem_id TEXT NOT NULL REFERENCES problems(id),
    PRIMARY KEY (group_id, problem_id)
);
CREATE INDEX IF NOT EXISTS idx_submissions_problem ON submissions(problem_id, user_id);
"""


class StoreError(RuntimeError):
    pass


class NotFound(StoreError):
    pass


class Conflict(StoreError):
    pass


def hash_credential(password: str, salt: Optional[bytes] = None) -> str:
    salt = salt if salt is not None else secrets.token_bytes(16)
    digest = hashlib.scrypt(
        password.encode("utf-8"), salt=salt, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P
    )
    return f"scrypt${salt.hex()}${digest.hex()}"

def verify_credential(password: str, stored: str) -> bool:
    try:
        _scheme, salt_hex, digest_hex = stored.split("$")
        salt = bytes.fromhex(salt_hex)
    except ValueError:
        return False
    candidate = hashlib.scrypt(
        password.encode("utf-8"), salt=salt, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P
    )
    return secrets.compare_digest(candidate.hex(), digest_hex)


def _ts(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat(timespec="milliseconds")


def _parse_ts(text: str) -> datetime:
    return datetime.fromisoformat(text)


class Store:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.blob_root = self.root / "blobs"
        self.blob_root.mkdir(exist_ok=True)
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(
            str(self.root / "judge.db"), check_same_thread=False, isolation_level=None
        )
        self._conn.row_factory = sqlite3.Row
        with self._lock:
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def _tx(self):
        return _Transaction(self._conn, self._lock)

    # -- users and sessions ---------------------------------------------------

    def create_user(self, username: str, password: str) -> User:
        if not username:
            raise StoreError("username must be non-empty")
        created = utc_now()
        with self._tx() as cur:
            try:
                cur.execute(
                    "INSERT INTO users (username, credential_hash, created_at) VALUES (?,?,?)",
                    (username, hash_credential(password), _ts(created)),
                )
            except sqlite3.IntegrityError:
                raise Conflict(f"username {username!r} taken")
            user_id = cur.lastrowid
        return User(id=user_id, username=username, credential_hash="", created_at=created)

    def authenticate(self, username: str, password: str) -> Optional[User]:
        with self._tx() as cur:
            row = cur.execute("SELECT * FROM users WHERE username = ?", (username,)).fetchone()
        if row is None or not verify_credential(password, row["credential_hash"]):
            return None
        return self._user_from_row(row)

    def get_user(self, user_id: int) -> User:
        with self._tx() as cur:
            row = cur.execute("SELECT * FROM users WHERE id = ?", (user_id,)).fetchone()
        if row is None:
            raise NotFound(f"user {user_id}")
        return self._user_from_row(row)

    @staticmethod
    def _user_from_row(row: sqlite3.Row) -> User:
        return User(
            id=row["id"],
            username=row["username"],
            credential_hash=row["credential_hash"],
            created_at=_parse_ts(row["created_at"]),
        )

    def create_session(self, user_id: int, now: Optional[datetime] = None) -> tuple[str, datetime]:
        now = now or utc_now()
        token = secrets.token_urlsafe(32)
        expires = now + SESSION_TTL
        with self._tx() as cur:
            cur.execute(
                "INSERT INTO sessions (token, user_id, expires_at) VALUES (?,?,?)",
                (token, user_id, _ts(expires)),
            )
        return token, expires

    def resolve_session(self, token: str, now: Optional[datetime] = None) -> Optional[int]:
        now = now or utc_now()
        with self._tx() as cur:
            row = cur.execute("SELECT * FROM sessions WHERE token = ?", (token,)).fetchone()
        if row is None or _parse_ts(row["expires_at"]) <= now:
            return None
        return row["user_id"]

    def delete_session(self, token: str) -> None:
        with self._tx() as cur:
            cur.execute("DELETE FROM sessions WHERE token = ?", (token,))

    # -- problems -----------------------------------------------------------------

    def install_problem(self, problem: Problem, package_root: Optional[Path] = None,
                        replace: bool = False) -> Problem:
        """Persist a problem; test-case blobs go to disk, checker gets built."""
        with self._tx() as cur:
            existing = cur.execute(
                "SELECT id FROM problems WHERE id = ?", (problem.id,)
            ).fetchone()
            if existing and not replace:
                raise Conflict(f"problem {problem.id!r} already installed")

        checker = problem.checker
        if checker.mode is CheckerMode.external:
            if package_root is None:
                raise StoreError("external checker requires the package for building")
            artifact = build_checker_artifact(
                package_root, checker.checker_ref, self.blob_root / "checkers" / problem.id
            )
            rel = artifact.relative_to(self.blob_root)
            checker = CheckerConfig(
                mode=CheckerMode.external,
                checker_ref=str(rel),
            )

        case_dir = self.blob_root / "problems" / problem.id
        case_dir.mkdir(parents=True, exist_ok=True)
        case_rows = []
        for case in problem.test_cases:
            in_path = case_dir / f"{case.index:02d}.in"
            out_path = case_dir / f"{case.index:02d}.out"
            in_path.write_bytes(case.input)
            out_path.write_bytes(case.expected_output)
            case_rows.append(
                (problem.id, case.index, str(in_path.relative_to(self.blob_root)),
                 str(out_path.relative_to(self.blob_root)))
            )

        with self._tx() as cur:
            cur.execute("DELETE FROM test_cases WHERE problem_id = ?", (problem.id,))
            cur.execute("DELETE FROM problems WHERE id = ?", (problem.id,))
            cur.execute(
                "INSERT INTO problems (id, title, statement, input_spec, output_spec,"
                " time_limit, memory_limit, output_limit, checker_json, goodness_label, published)"
                " VALUES (?,?,?,?,?,?,?,?,?,?,?)",
                (
                    problem.id,
                    problem.title,
                    problem.statement,
                    problem.input_spec,
                    problem.output_spec,
                    problem.time_limit,
                    problem.memory_limit,
                    problem.output_limit,
                    json.dumps(checker_to_dict(checker)),
                    problem.goodness_label,
                    int(problem.published),
                ),
            )
            cur.executemany(
                "INSERT INTO test_cases (problem_id, idx, input_path, output_path) VALUES (?,?,?,?)",
                case_rows,
            )
        return self.get_problem(problem.id)

    def get_problem(self, problem_id: str) -> Problem:
        with self._tx() as cur:
            row = cur.execute("SELECT * FROM problems WHERE id = ?", (problem_id,)).fetchone()
            if row is None:
                raise NotFound(f"problem {problem_id!r}")
            case_rows = cur.execute(
                "SELECT * FROM test_cases WHERE problem_id = ? ORDER BY idx", (problem_id,)
            ).fetchall()
        cases = tuple(
            TestCase(
                index=c["idx"],
                input=(self.blob_root / c["input_path"]).read_bytes(),
                expected_output=(self.blob_root / c["output_path"]).read_bytes(),
            )
            for c in case_rows
        )
        return Problem(
            id=row["id"],
            title=row["title"],
            statement=row["statement"],
            input_spec=row["input_spec"],
            output_spec=row["output_spec"],
            time_limit=row["time_limit"],
            memory_limit=row["memory_limit"],
            output_limit=row["output_limit"],
            checker=checker_from_dict(json.loads(row["checker_json"])),
            test_cases=cases,
            goodness_label=row["goodness_label"],
            published=bool(row["published"]),
        )

    def list_problems(self, published_only: bool = True) -> list[Problem]:
        with self._tx() as cur:
            rows = cur.execute(
                "SELECT id FROM problems" + (" WHERE published = 1" if published_only else "")
                + " ORDER BY id"
            ).fetchall()
        return [self.get_problem(r["id"]) for r in rows]

    def checker_artifact_path(self, problem: Problem) -> Optional[Path]:
        if problem.checker.mode is not CheckerMode.external:
            return None
        return self.blob_root / problem.checker.checker_ref

    # -- submissions -----------------------------------------------------------------

    def create_submission(
        self,
        user_id: int,
        problem_id: str,
        filename: str,
        source: bytes,
        toolchain_id: str,
        *,
        visibility: SubmissionVisibility = SubmissionVisibility.public,
        status: SubmissionStatus = SubmissionStatus.compiling,
        submitted_at: Optional[datetime] = None,
    ) -> int:
        submitted_at = submitted_at or utc_now()
        with self._tx() as cur:
            cur.execute(
                "INSERT INTO submissions (user_id, problem_id, filename, source, toolchain_id,"
                " submitted_at, visibility, status) VALUES (?,?,?,?,?,?,?,?)",
                (
                    user_id,
                    problem_id,
                    filename,
                    source,
                    toolchain_id,
                    _ts(submitted_at),
                    visibility.value,
                    status.value,
                ),
            )
            return cur.lastrowid

    def get_submission(self, submission_id: int) -> Submission:
        with self._tx() as cur:
            row = cur.execute(
                "SELECT * FROM submissions WHERE id = ?", (submission_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"submission {submission_id}")
            result_row = cur.execute(
                "SELECT result_json FROM results WHERE submission_id = ?", (submission_id,)
            ).fetchone()
        result = result_from_dict(json.loads(result_row["result_json"])) if result_row else None
        return Submission(
            id=row["id"],
            user_id=row["user_id"],
            problem_id=row["problem_id"],
            filename=row["filename"],
            source=row["source"],
            toolchain_id=row["toolchain_id"],
            submitted_at=_parse_ts(row["submitted_at"]),
            visibility=SubmissionVisibility(row["visibility"]),
            status=SubmissionStatus(row["status"]),
            result=result,
        )

    def set_submission_status(self, submission_id: int, status: SubmissionStatus) -> None:
        if status is SubmissionStatus.done:
            raise StoreError("use finalize_submission to mark done")
        with self._tx() as cur:
            updated = cur.execute(
                "UPDATE submissions SET status = ? WHERE id = ? AND status NOT IN ('done','failed')",
                (status.value, submission_id),
            ).rowcount
        if not updated:
            raise StoreError(f"submission {submission_id} is final or missing")

    def finalize_submission(self, submission_id: int, result: SubmissionResult) -> bool:
        """Attach the result and mark done; refuses to overwrite. Returns
        False when a result already exists (late/duplicate delivery)."""
        with self._tx() as cur:
            row = cur.execute(
                "SELECT id FROM submissions WHERE id = ?", (submission_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"submission {submission_id}")
            try:
                cur.execute(
                    "INSERT INTO results (submission_id, result_json) VALUES (?,?)",
                    (submission_id, json.dumps(result_to_dict(result))),
                )
            except sqlite3.IntegrityError:
                return False
            cur.execute(
                "UPDATE submissions SET status = 'done' WHERE id = ?", (submission_id,)
            )
        return True

    def set_visibility(self, submission_id: int, visibility: SubmissionVisibility) -> None:
        with self._tx() as cur:
            updated = cur.execute(
                "UPDATE submissions SET visibility = ? WHERE id = ?",
                (visibility.value, submission_id),
            ).rowcount
        if not updated:
            raise NotFound(f"submission {submission_id}")

    def list_user_submissions(self, user_id: int, problem_id: Optional[str] = None) -> list[Submission]:
        query = "SELECT id FROM submissions WHERE user_id = ?"
        args: list = [user_id]
        if problem_id is not None:
            query += " AND problem_id = ?"
            args.append(problem_id)
        query += " ORDER BY id"
        with self._tx() as cur:
            rows = cur.execute(query, args).fetchall()
        return [self.get_submission(r["id"]) for r in rows]

    def queued_submission_ids(self) -> list[tuple[int, str]]:
        """Submissions to re-enqueue after a restart, in id order."""
        with self._tx() as cur:
            rows = cur.execute(
                "SELECT id, toolchain_id FROM submissions WHERE status IN ('queued','running')"
                " ORDER BY id"
            ).fetchall()
        return [(r["id"], r["toolchain_id"]) for r in rows]

    # -- highscores ---------------------------------------------------------------

    def highscores(
        self,
        problem_id: str,
        *,
        member_ids: Optional[set[int]] = None,
        sort_key: str = "edp",
        limit: int = 50,
    ) -> list[HighscoreEntry]:
        """Best (minimal-EDP) accepted public submission per user, sorted
        ascending by sort_key with ties broken by submission id."""
        if sort_key not in SORT_KEYS:
            raise StoreError(f"sort key must be one of {SORT_KEYS}")
        with self._tx() as cur:
            rows = cur.execute(
                "SELECT s.id, s.user_id, s.filename, u.username, r.result_json"
                " FROM submissions s JOIN results r ON r.submission_id = s.id"
                " JOIN users u ON u.id = s.user_id"
                " WHERE s.problem_id = ? AND s.visibility = 'public' AND s.status = 'done'"
                " ORDER BY s.id",
                (problem_id,),
            ).fetchall()
        best: dict[int, HighscoreEntry] = {}
        for row in rows:
            if member_ids is not None and row["user_id"] not in member_ids:
                continue
            result = result_from_dict(json.loads(row["result_json"]))
            if result.verdict is not Verdict.accepted or result.measurement is None:
                continue
            entry = HighscoreEntry(
                username=row["username"],
                time=result.measurement.wall_time,
                energy=result.measurement.energy_total,
                edp=result.measurement.edp,
                filename=row["filename"],
                submission_id=row["id"],
                goodness=result.goodness,
            )
            current = best.get(row["user_id"])
            if current is None or (entry.edp, entry.submission_id) < (current.edp, current.submission_id):
                best[row["user_id"]] = entry
        key = {"time": lambda e: e.time, "energy": lambda e: e.energy, "edp": lambda e: e.edp}[sort_key]
        ordered = sorted(best.values(), key=lambda e: (key(e), e.submission_id))
        return ordered[: max(0, limit)]

    # -- groups -----------------------------------------------------------------

    def create_group(
        self,
        name: str,
        owner_id: int,
        visibility: GroupVisibility,
        problem_ids: Iterable[str],
    ) -> Group:
        problem_ids = list(problem_ids)
        with self._tx() as cur:
            for pid in problem_ids:
                if cur.execute("SELECT 1 FROM problems WHERE id = ?", (pid,)).fetchone() is None:
                    raise NotFound(f"problem {pid!r}")
            try:
                cur.execute(
                    "INSERT INTO groups (name, owner_id, visibility) VALUES (?,?,?)",
                    (name, owner_id, visibility.value),
                )
            except sqlite3.IntegrityError:
                raise Conflict(f"group name {name!r} taken")
            group_id = cur.lastrowid
            cur.execute(
                "INSERT INTO group_members (group_id, user_id) VALUES (?,?)",
                (group_id, owner_id),
            )
            cur.executemany(
                "INSERT INTO group_problems (group_id, problem_id) VALUES (?,?)",
                [(group_id, pid) for pid in problem_ids],
            )
        return self.get_group(group_id)

    def get_group(self, group_id: int) -> Group:
        with self._tx() as cur:
            row = cur.execute("SELECT * FROM groups WHERE id = ?", (group_id,)).fetchone()
            if row is None:
                raise NotFound(f"group {group_id}")
            pids = cur.execute(
                "SELECT problem_id FROM group_problems WHERE group_id = ?", (group_id,)
            ).fetchall()
        return Group(
            id=row["id"],
            name=row["name"],
            owner_id=row["owner_id"],
            visibility=GroupVisibility(row["visibility"]),
            problem_ids=frozenset(p["problem_id"] for p in pids),
        )

    def join_group(self, group_id: int, user_id: int) -> None:
        """Idempotent membership insert."""
        self.get_group(group_id)
        with self._tx() as cur:
            cur.execute(
                "INSERT OR IGNORE INTO group_members (group_id, user_id) VALUES (?,?)",
                (group_id, user_id),
            )

    def group_member_ids(self, group_id: int) -> set[int]:
        self.get_group(group_id)
        with self._tx() as cur:
            rows = cur.execute(
                "SELECT user_id FROM group_members WHERE group_id = ?", (group_id,)
            ).fetchall()
        return {r["user_id"] for r in rows}

    def list_groups(self, user_id: Optional[int] = None) -> list[Group]:
        """Public groups plus (when user_id given) the caller's memberships."""
        with self._tx() as cur:
            rows = cur.execute("SELECT id, visibility FROM groups ORDER BY id").fetchall()
            member_of = set()
            if user_id is not None:
                member_of = {
                    r["group_id"]
                    for r in cur.execute(
                        "SELECT group_id FROM group_members WHERE user_id = ?", (user_id,)
                    ).fetchall()
                }
        out = []
        for row in rows:
            if row["visibility"] == GroupVisibility.public.value or row["id"] in member_of:
                out.append(self.get_group(row["id"]))
        return out

    def is_member(self, group_id: int, user_id: int) -> bool:
        with self._tx() as cur:
            return (
                cur.execute(
                    "SELECT 1 FROM group_members WHERE group_id = ? AND user_id = ?",
                    (group_id, user_id),
                ).fetchone()
                is not None
            )

    # -- admin ---------------------------------------------------------------------

    def is_empty(self) -> bool:
        with self._tx() as cur:
            for table in ("users", "problems", "submissions", "groups"):
                if cur.execute(f"SELECT 1 FROM {table} LIMIT 1").fetchone():
                    return False
        return True

    def wipe(self) -> None:
        with self._tx() as cur:
            for table in (
                "sessions",
                "results",
                "submissions",
                "group_problems",
                "group_members",
                "groups",
                "test_cases",
                "problems",
                "users",
            ):
                cur.execute(f"DELETE FROM {table}")
            # reset AUTOINCREMENT counters; the table only exists after a
            # first insert, so a fresh store has nothing to reset
            if cur.execute(
                "SELECT 1 FROM sqlite_master WHERE name = 'sqlite_sequence'"
            ).fetchone():
                cur.execute("DELETE FROM sqlite_sequence")
        import shutil

        shutil.rmtree(self.blob_root, ignore_errors=True)
        self.blob_root.mkdir(exist_ok=True)


class _Transaction:
    def __init__(self, conn: sqlite3.Connection, lock: threading.RLock):
        self._conn = conn
        self._lock = lock

    def __enter__(self) -> sqlite3.Cursor:
        self._lock.acquire()
        self._conn.execute("BEGIN")
        return self._conn.cursor()

    def __exit__(self, exc_type, exc, tb) -> None:
        try:
            if exc_type is None:
                self._conn.execute("COMMIT")
            else:
                self._conn.execute("ROLLBACK")
        finally:
            self._lock.release()
