"""Deterministic demo dataset: users, groups, three problems, sample rows."""

from __future__ import annotations

import math
from datetime import datetime, timezone
from pathlib import Path

from ..domain import (
    GroupVisibility,
    MeasurementResult,
    PrepRecord,
    SubmissionResult,
    SubmissionVisibility,
    Verdict,
)
from ..packages import validate_problem_package
from ..storage import Conflict, Store

PROBLEMS_ROOT = Path(__file__).parent / "problems"
SOLUTIONS_ROOT = Path(__file__).parent / "solutions"

DEMO_PASSWORD = "demo-pass"
DEMO_USERS = ("alice", "bob", "carol")
DEMO_GROUP = "demo-course"

# watts per rail of the default synthetic provider; demo rows pretend a run
# under that provider so energy = 3 W x time exactly
_RAIL_WATTS = {"big_cpu": 1.5, "little_cpu": 0.6, "gpu": 0.6, "dram": 0.3}

_T0 = datetime(2026, 1, 5, 12, 0, 0, tzinfo=timezone.utc)


def _accepted(time_s: float, goodness: float | None = None) -> SubmissionResult:
    per_rail = {rail: watts * time_s for rail, watts in _RAIL_WATTS.items()}
    energy = math.fsum(per_rail.values())
    return SubmissionResult(
        Verdict.accepted,
        measurement=MeasurementResult(
            wall_time=time_s,
            energy_total=energy,
            energy_per_rail=per_rail,
            edp=energy * time_s,
            t_start=0.0,
            t_end=time_s,
            prep=PrepRecord(
                cache_cleared=False, warmup_reached=True, start_temp=55.0, warmup_duration=0.0
            ),
        ),
        goodness=goodness,
    )


def _identity_tour_goodness() -> float:
    # identity tour over the 5-city demo instance
    return 11.0 + math.hypot(2.0, 2.0) + math.hypot(2.0, 1.0)


def seed_demo(store: Store, *, force: bool = False) -> dict:
    """Install demo problems, users, a group, and sample submissions.

    Deterministic: reseeding with force produces an identical dataset.
    """
    if not store.is_empty():
        if not force:
            raise Conflict("store is not empty; pass force to reseed")
        store.wipe()

    problems = []
    for name in ("sum", "mean-series", "unit-tour"):
        problem = validate_problem_package(PROBLEMS_ROOT / name)
        store.install_problem(problem, PROBLEMS_ROOT / name, replace=True)
        problems.append(problem.id)

    users = {name: store.create_user(name, DEMO_PASSWORD) for name in DEMO_USERS}

    group = store.create_group(
        DEMO_GROUP, users["alice"].id, GroupVisibility.public, problems
    )
    store.join_group(group.id, users["carol"].id)

    sum_source = (SOLUTIONS_ROOT / "sum.c").read_bytes()
    tour_source = (SOLUTIONS_ROOT / "unit_tour.c").read_bytes()

    def add(user, problem_id, filename, source, result, minute):
        sid = store.create_submission(
            users[user].id,
            problem_id,
            filename,
            source,
            "c-gcc",
            visibility=SubmissionVisibility.public,
            submitted_at=_T0.replace(minute=minute),
        )
        store.finalize_submission(sid, result)
        return sid

    submissions = [
        add("alice", "sum", "sum_fast.c", sum_source, _accepted(1.84), 0),
        add("bob", "sum", "sum_v1.c", sum_source, _accepted(2.31), 1),
        add("carol", "sum", "naive_sum.c", sum_source, _accepted(2.58), 2),
        add(
            "bob",
            "sum",
            "sum_late.c",
            sum_source,
            SubmissionResult(Verdict.wrong_answer, failed_test_index=1),
            3,
        ),
        add(
            "alice",
            "unit-tour",
            "identity_tour.c",
            tour_source,
            _accepted(0.92, goodness=_identity_tour_goodness()),
            4,
        ),
    ]

    return {
        "users": list(DEMO_USERS),
        "password": DEMO_PASSWORD,
        "problems": problems,
        "group": {"id": group.id, "name": group.name, "members": ["alice", "carol"]},
        "submissions": len(submissions),
    }
