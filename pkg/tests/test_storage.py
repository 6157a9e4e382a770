from pathlib import Path

import pytest

from cmbjudge.domain import (
    GroupVisibility,
    MeasurementResult,
    PrepRecord,
    SubmissionResult,
    SubmissionStatus,
    SubmissionVisibility,
    Verdict,
)
from cmbjudge.packages import validate_problem_package
from cmbjudge.storage import Conflict, NotFound, Store, StoreError

DEMO = Path(__file__).resolve().parents[1] / "src/cmbjudge/demo/problems"


@pytest.fixture
def store(tmp_path):
    s = Store(tmp_path / "data")
    yield s
    s.close()


def accepted_result(time_s=2.0, energy_j=6.0, goodness=None):
    return SubmissionResult(
        Verdict.accepted,
        measurement=MeasurementResult(
            wall_time=time_s,
            energy_total=energy_j,
            energy_per_rail={"cpu": energy_j},
            edp=energy_j * time_s,
            t_start=0.0,
            t_end=time_s,
            prep=PrepRecord(False, True, 55.0, 0.0),
        ),
        goodness=goodness,
    )


def submit(store, user_id, problem_id="sum", filename="a.c", **kwargs):
    return store.create_submission(user_id, problem_id, filename, b"int main(){}", "c-gcc", **kwargs)


class TestUsers:
    def test_create_and_authenticate(self, store):
        user = store.create_user("ada", "hunter2")
        assert user.id == 1
        assert store.authenticate("ada", "hunter2").id == 1
        assert store.authenticate("ada", "wrong") is None
        assert store.authenticate("ghost", "x") is None

    def test_duplicate_username(self, store):
        store.create_user("ada", "x")
        with pytest.raises(Conflict):
            store.create_user("ada", "y")

    def test_monotone_ids(self, store):
        ids = [store.create_user(f"u{i}", "pw").id for i in range(3)]
        assert ids == sorted(ids)


class TestSessions:
    def test_round_trip(self, store):
        user = store.create_user("ada", "pw")
        token, expires = store.create_session(user.id)
        assert store.resolve_session(token) == user.id
        store.delete_session(token)
        assert store.resolve_session(token) is None

    def test_expiry(self, store):
        from datetime import timedelta

        user = store.create_user("ada", "pw")
        token, expires = store.create_session(user.id)
        assert store.resolve_session(token, now=expires + timedelta(seconds=1)) is None


class TestProblems:
    def test_install_and_fetch(self, store):
        problem = validate_problem_package(DEMO / "sum")
        stored = store.install_problem(problem, DEMO / "sum")
        assert stored.id == "sum"
        fetched = store.get_problem("sum")
        assert fetched.test_cases == problem.test_cases
        assert fetched.checker == problem.checker

    def test_reinstall_requires_replace(self, store):
        problem = validate_problem_package(DEMO / "sum")
        store.install_problem(problem, DEMO / "sum")
        with pytest.raises(Conflict):
            store.install_problem(problem, DEMO / "sum")
        store.install_problem(problem, DEMO / "sum", replace=True)

    def test_external_checker_built_at_install(self, store):
        problem = validate_problem_package(DEMO / "unit-tour")
        stored = store.install_problem(problem, DEMO / "unit-tour")
        artifact = store.checker_artifact_path(stored)
        assert artifact is not None and artifact.exists()
        assert artifact.stat().st_mode & 0o111

    def test_list_published_only(self, store):
        from dataclasses import replace

        problem = validate_problem_package(DEMO / "sum")
        store.install_problem(replace(problem, published=False), DEMO / "sum")
        assert store.list_problems() == []
        assert len(store.list_problems(published_only=False)) == 1


class TestSubmissions:
    @pytest.fixture(autouse=True)
    def setup(self, store):
        self.user = store.create_user("ada", "pw")
        store.install_problem(validate_problem_package(DEMO / "sum"), DEMO / "sum")

    def test_lifecycle(self, store):
        sid = submit(store, self.user.id)
        sub = store.get_submission(sid)
        assert sub.status is SubmissionStatus.compiling
        store.set_submission_status(sid, SubmissionStatus.queued)
        store.set_submission_status(sid, SubmissionStatus.running)
        assert store.finalize_submission(sid, accepted_result())
        done = store.get_submission(sid)
        assert done.status is SubmissionStatus.done
        assert done.result.verdict is Verdict.accepted

    def test_finalize_refuses_overwrite(self, store):
        sid = submit(store, self.user.id)
        assert store.finalize_submission(sid, accepted_result())
        assert store.finalize_submission(sid, accepted_result(time_s=1.0)) is False
        assert store.get_submission(sid).result.measurement.wall_time == 2.0

    def test_status_update_after_final_rejected(self, store):
        sid = submit(store, self.user.id)
        store.finalize_submission(sid, accepted_result())
        with pytest.raises(StoreError):
            store.set_submission_status(sid, SubmissionStatus.running)

    def test_queued_reload(self, store):
        a = submit(store, self.user.id)
        b = submit(store, self.user.id)
        store.set_submission_status(a, SubmissionStatus.queued)
        store.set_submission_status(b, SubmissionStatus.running)
        c = submit(store, self.user.id)
        store.finalize_submission(c, accepted_result())
        assert store.queued_submission_ids() == [(a, "c-gcc"), (b, "c-gcc")]

    def test_persistence_round_trip(self, store, tmp_path):
        sid = submit(store, self.user.id)
        store.finalize_submission(sid, accepted_result(goodness=None))
        before = store.get_submission(sid)
        reopened = Store(store.root)
        try:
            after = reopened.get_submission(sid)
            assert after == before
            assert reopened.get_problem("sum") == store.get_problem("sum")
        finally:
            reopened.close()


class TestHighscores:
    @pytest.fixture(autouse=True)
    def setup(self, store):
        store.install_problem(validate_problem_package(DEMO / "sum"), DEMO / "sum")
        self.users = {name: store.create_user(name, "pw") for name in ("ada", "bob", "cyd")}

    def add_accepted(self, store, username, time_s, energy_j, filename="a.c", visibility=SubmissionVisibility.public):
        sid = submit(store, self.users[username].id, filename=filename, visibility=visibility)
        store.finalize_submission(sid, accepted_result(time_s, energy_j))
        return sid

    def test_one_row_per_user_minimal_edp(self, store):
        self.add_accepted(store, "ada", 2.0, 5.0)  # edp 10
        best = self.add_accepted(store, "ada", 2.0, 4.0)  # edp 8
        rows = store.highscores("sum", sort_key="edp")
        assert len(rows) == 1
        assert rows[0].submission_id == best
        assert rows[0].edp == 8.0

    def test_sort_keys(self, store):
        self.add_accepted(store, "ada", 3.0, 1.0)  # edp 3
        self.add_accepted(store, "bob", 1.0, 2.0)  # edp 2
        self.add_accepted(store, "cyd", 2.0, 3.0)  # edp 6
        by_time = [e.username for e in store.highscores("sum", sort_key="time")]
        by_energy = [e.username for e in store.highscores("sum", sort_key="energy")]
        by_edp = [e.username for e in store.highscores("sum", sort_key="edp")]
        assert by_time == ["bob", "cyd", "ada"]
        assert by_energy == ["ada", "bob", "cyd"]
        assert by_edp == ["bob", "ada", "cyd"]

    def test_tie_broken_by_submission_id(self, store):
        first = self.add_accepted(store, "ada", 2.0, 3.0)
        second = self.add_accepted(store, "bob", 2.0, 3.0)
        rows = store.highscores("sum", sort_key="edp")
        assert [e.submission_id for e in rows] == [first, second]

    def test_private_and_unaccepted_excluded(self, store):
        self.add_accepted(store, "ada", 2.0, 3.0, visibility=SubmissionVisibility.private)
        sid = submit(store, self.users["bob"].id)
        store.finalize_submission(sid, SubmissionResult(Verdict.wrong_answer, failed_test_index=0))
        assert store.highscores("sum") == []

    def test_member_filter(self, store):
        self.add_accepted(store, "ada", 2.0, 3.0)
        self.add_accepted(store, "bob", 1.0, 3.0)
        members = {self.users["ada"].id}
        rows = store.highscores("sum", member_ids=members)
        assert [e.username for e in rows] == ["ada"]

    def test_visibility_toggle_round_trip(self, store):
        sid = self.add_accepted(store, "ada", 2.0, 3.0)
        before = store.highscores("sum")
        store.set_visibility(sid, SubmissionVisibility.private)
        assert store.highscores("sum") == []
        store.set_visibility(sid, SubmissionVisibility.public)
        assert store.highscores("sum") == before

    def test_limit(self, store):
        for i, name in enumerate(self.users):
            self.add_accepted(store, name, 1.0 + i, 1.0)
        assert len(store.highscores("sum", limit=2)) == 2


class TestGroups:
    @pytest.fixture(autouse=True)
    def setup(self, store):
        store.install_problem(validate_problem_package(DEMO / "sum"), DEMO / "sum")
        self.owner = store.create_user("own", "pw")
        self.member = store.create_user("mem", "pw")

    def test_owner_is_member(self, store):
        group = store.create_group("course", self.owner.id, GroupVisibility.public, ["sum"])
        assert store.is_member(group.id, self.owner.id)
        assert group.problem_ids == frozenset({"sum"})

    def test_duplicate_name(self, store):
        store.create_group("course", self.owner.id, GroupVisibility.public, [])
        with pytest.raises(Conflict):
            store.create_group("course", self.member.id, GroupVisibility.public, [])

    def test_join_idempotent(self, store):
        group = store.create_group("course", self.owner.id, GroupVisibility.public, [])
        store.join_group(group.id, self.member.id)
        store.join_group(group.id, self.member.id)
        assert store.group_member_ids(group.id) == {self.owner.id, self.member.id}

    def test_unknown_problem_rejected(self, store):
        with pytest.raises(NotFound):
            store.create_group("course", self.owner.id, GroupVisibility.public, ["ghost"])

    def test_listing_hides_unlisted_from_nonmembers(self, store):
        store.create_group("open", self.owner.id, GroupVisibility.public, [])
        store.create_group("hidden", self.owner.id, GroupVisibility.unlisted, [])
        names_for_member = {g.name for g in store.list_groups(self.member.id)}
        names_for_owner = {g.name for g in store.list_groups(self.owner.id)}
        assert names_for_member == {"open"}
        assert names_for_owner == {"open", "hidden"}


def test_wipe_resets_ids(store):
    store.create_user("ada", "pw")
    store.wipe()
    assert store.is_empty()
    assert store.create_user("new", "pw").id == 1
