"""Canonical data model shared by every other module.

All types here are immutable value objects; constructors raise DomainError on
invariant violations so an instance that exists is always well-formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Mapping, Optional

MAX_SOURCE_BYTES = 1024 * 1024  # per-submission source cap

# Relative tolerance for derived-value identities (edp = energy * time etc.)
REL_IDENTITY_TOL = 1e-9


class DomainError(ValueError):
    """An invariant of the data model was violated."""


def rel_close(a: float, b: float, rel: float = REL_IDENTITY_TOL) -> bool:
    if a == b:
        return True
    scale = max(abs(a), abs(b))
    return abs(a - b) <= rel * scale


def utc_now() -> datetime:
    # Millisecond precision everywhere; sub-ms digits truncated on purpose.
    now = datetime.now(timezone.utc)
    return now.replace(microsecond=(now.microsecond // 1000) * 1000)


class Verdict(str, Enum):
    accepted = "accepted"
    wrong_answer = "wrong_answer"
    compile_error = "compile_error"
    runtime_error = "runtime_error"
    time_limit = "time_limit"
    output_limit = "output_limit"
    judge_error = "judge_error"


#: Verdicts that point at a concrete failing test case.
TEST_FAILURE_VERDICTS = frozenset(
    {Verdict.wrong_answer, Verdict.runtime_error, Verdict.time_limit, Verdict.output_limit}
)


class SubmissionStatus(str, Enum):
    queued = "queued"
    compiling = "compiling"
    running = "running"
    done = "done"
    failed = "failed"


class SubmissionVisibility(str, Enum):
    public = "public"
    private = "private"


class CheckerMode(str, Enum):
    exact = "exact"
    float_tokens = "float_tokens"
    external = "external"


class GroupVisibility(str, Enum):
    public = "public"
    unlisted = "unlisted"


class BackendState(str, Enum):
    idle = "idle"
    busy = "busy"
    unhealthy = "unhealthy"


@dataclass(frozen=True)
class CheckerConfig:
    mode: CheckerMode
    abs_tol: Optional[float] = None
    rel_tol: Optional[float] = None
    checker_ref: Optional[str] = None

    def __post_init__(self) -> None:
        has_tol = self.abs_tol is not None or self.rel_tol is not None
        if self.mode is CheckerMode.float_tokens:
            if not has_tol:
                raise DomainError("float_tokens checker requires abs_tol/rel_tol")
            for name, tol in (("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)):
                if tol is not None and (not math.isfinite(tol) or tol < 0):
                    raise DomainError(f"{name} must be finite and >= 0")
        elif has_tol:
            raise DomainError("tolerance present without float mode")
        if self.mode is CheckerMode.external:
            if not self.checker_ref:
                raise DomainError("external checker requires checker_ref")
        elif self.checker_ref:
            raise DomainError("checker_ref present without external mode")


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    index: int
    input: bytes
    expected_output: bytes

    def __post_init__(self) -> None:
        if self.index < 0:
            raise DomainError("test case index must be >= 0")


@dataclass(frozen=True)
class ResourceLimits:
    time_limit: float  # seconds, per test case
    memory_limit: int  # MiB
    output_limit: int  # bytes

    def __post_init__(self) -> None:
        if not (self.time_limit > 0 and math.isfinite(self.time_limit)):
            raise DomainError("time_limit must be > 0")
        if self.memory_limit <= 0:
            raise DomainError("memory_limit must be > 0")
        if self.output_limit <= 0:
            raise DomainError("output_limit must be > 0")


@dataclass(frozen=True)
class Problem:
    id: str
    title: str
    statement: str
    input_spec: str
    output_spec: str
    time_limit: float
    memory_limit: int
    output_limit: int
    checker: CheckerConfig
    test_cases: tuple[TestCase, ...]
    goodness_label: Optional[str] = None
    published: bool = False

    def __post_init__(self) -> None:
        ResourceLimits(self.time_limit, self.memory_limit, self.output_limit)
        if not self.id:
            raise DomainError("problem id must be non-empty")
        if not self.test_cases:
            raise DomainError("test_cases empty")
        for want, case in enumerate(self.test_cases):
            if case.index != want:
                raise DomainError("test case indices must be contiguous from 0")
        if self.goodness_label is not None and self.checker.mode is not CheckerMode.external:
            raise DomainError("goodness_label requires an external checker")

    @property
    def limits(self) -> ResourceLimits:
        return ResourceLimits(self.time_limit, self.memory_limit, self.output_limit)


@dataclass(frozen=True)
class PrepRecord:
    cache_cleared: bool
    warmup_reached: bool
    start_temp: float
    warmup_duration: float
    # Event timestamps on the harness clock; filled in by the measurement
    # harness so the prep-before-start ordering stays checkable afterwards.
    started_at: Optional[float] = None
    finished_at: Optional[float] = None

    def __post_init__(self) -> None:
        if self.warmup_duration < 0:
            raise DomainError("warmup_duration must be >= 0")
        if not math.isfinite(self.start_temp):
            raise DomainError("start_temp must be finite")


@dataclass(frozen=True)
class MeasurementResult:
    wall_time: float
    energy_total: float
    energy_per_rail: Mapping[str, float]
    edp: float
    t_start: float
    t_end: float
    prep: PrepRecord

    def __post_init__(self) -> None:
        if not self.wall_time > 0:
            raise DomainError("wall_time must be > 0")
        if not rel_close(self.wall_time, self.t_end - self.t_start):
            raise DomainError("wall_time must equal t_end - t_start")
        if self.energy_total < 0:
            raise DomainError("energy_total must be >= 0")
        total = math.fsum(self.energy_per_rail.values())
        if not rel_close(self.energy_total, total):
            raise DomainError("energy_total must equal the sum over rails")
        if not rel_close(self.edp, self.energy_total * self.wall_time):
            raise DomainError("edp must equal energy_total * wall_time")
        object.__setattr__(self, "energy_per_rail", dict(self.energy_per_rail))


@dataclass(frozen=True)
class SubmissionResult:
    verdict: Verdict
    measurement: Optional[MeasurementResult] = None
    goodness: Optional[float] = None
    compile_log: str = ""
    failed_test_index: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.measurement is not None) != (self.verdict is Verdict.accepted):
            raise DomainError("measurement present iff verdict accepted")
        if (self.failed_test_index is not None) != (self.verdict in TEST_FAILURE_VERDICTS):
            raise DomainError("failed_test_index present iff verdict is a per-test failure")
        if self.goodness is not None and self.verdict is not Verdict.accepted:
            raise DomainError("goodness only accompanies accepted verdicts")


@dataclass(frozen=True)
class Submission:
    id: int
    user_id: int
    problem_id: str
    filename: str
    source: bytes
    toolchain_id: str
    submitted_at: datetime
    visibility: SubmissionVisibility
    status: SubmissionStatus
    result: Optional[SubmissionResult] = None

    def __post_init__(self) -> None:
        if len(self.source) > MAX_SOURCE_BYTES:
            raise DomainError("source exceeds size cap")
        if (self.status is SubmissionStatus.done) != (self.result is not None):
            raise DomainError("status done iff result present")

    def finalized(self, result: SubmissionResult) -> "Submission":
        return replace(self, status=SubmissionStatus.done, result=result)


@dataclass(frozen=True)
class User:
    id: int
    username: str
    credential_hash: str
    created_at: datetime

    def __post_init__(self) -> None:
        if not self.username:
            raise DomainError("username must be non-empty")


@dataclass(frozen=True)
class Group:
    id: int
    name: str
    owner_id: int
    visibility: GroupVisibility
    problem_ids: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class HighscoreEntry:
    username: str
    time: float
    energy: float
    edp: float
    filename: str
    submission_id: int
    goodness: Optional[float] = None

    def __post_init__(self) -> None:
        if not rel_close(self.edp, self.energy * self.time):
            raise DomainError("edp must equal energy * time")


@dataclass(frozen=True)
class BackendDescriptor:
    id: str
    address: str
    state: BackendState
    toolchains: frozenset[str]
    last_heartbeat: float
    current_job: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.current_job is not None) != (self.state is BackendState.busy):
            raise DomainError("current_job present iff state busy")


# --- JSON-friendly converters -------------------------------------------------
#
# Storage and the wire protocol both persist results; keeping the converters
# next to the types guarantees a single canonical encoding.


def prep_to_dict(prep: PrepRecord) -> dict:
    return {
        "cache_cleared": prep.cache_cleared,
        "warmup_reached": prep.warmup_reached,
        "start_temp": prep.start_temp,
        "warmup_duration": prep.warmup_duration,
        "started_at": prep.started_at,
        "finished_at": prep.finished_at,
    }


def prep_from_dict(d: Mapping) -> PrepRecord:
    return PrepRecord(
        cache_cleared=bool(d["cache_cleared"]),
        warmup_reached=bool(d["warmup_reached"]),
        start_temp=float(d["start_temp"]),
        warmup_duration=float(d["warmup_duration"]),
        started_at=d.get("started_at"),
        finished_at=d.get("finished_at"),
    )


def measurement_to_dict(m: MeasurementResult) -> dict:
    return {
        "wall_time": m.wall_time,
        "energy_total": m.energy_total,
        "energy_per_rail": dict(m.energy_per_rail),
        "edp": m.edp,
        "t_start": m.t_start,
        "t_end": m.t_end,
        "prep": prep_to_dict(m.prep),
    }


def measurement_from_dict(d: Mapping) -> MeasurementResult:
    return MeasurementResult(
        wall_time=float(d["wall_time"]),
        energy_total=float(d["energy_total"]),
        energy_per_rail={k: float(v) for k, v in d["energy_per_rail"].items()},
        edp=float(d["edp"]),
        t_start=float(d["t_start"]),
        t_end=float(d["t_end"]),
        prep=prep_from_dict(d["prep"]),
    )


def result_to_dict(r: SubmissionResult) -> dict:
    return {
        "verdict": r.verdict.value,
        "measurement": measurement_to_dict(r.measurement) if r.measurement else None,
        "goodness": r.goodness,
        "compile_log": r.compile_log,
        "failed_test_index": r.failed_test_index,
    }


def result_from_dict(d: Mapping) -> SubmissionResult:
    measurement = d.get("measurement")
    return SubmissionResult(
        verdict=Verdict(d["verdict"]),
        measurement=measurement_from_dict(measurement) if measurement else None,
        goodness=d.get("goodness"),
        compile_log=d.get("compile_log") or "",
        failed_test_index=d.get("failed_test_index"),
    )


def checker_to_dict(c: CheckerConfig) -> dict:
    out: dict = {"mode": c.mode.value}
    if c.abs_tol is not None:
        out["abs_tol"] = c.abs_tol
    if c.rel_tol is not None:
        out["rel_tol"] = c.rel_tol
    if c.checker_ref is not None:
        out["checker_ref"] = c.checker_ref
    return out


def checker_from_dict(d: Mapping) -> CheckerConfig:
    return CheckerConfig(
        mode=CheckerMode(d["mode"]),
        abs_tol=d.get("abs_tol"),
        rel_tol=d.get("rel_tol"),
        checker_ref=d.get("checker_ref"),
    )
