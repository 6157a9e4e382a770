import math
import sys

import pytest

from cmbjudge.domain import ResourceLimits
from cmbjudge.measurement import (
    ExponentialThermal,
    FixedThermal,
    MeasurementError,
    MeasurementHarness,
    NullStressor,
    PowerSample,
    PowerTrace,
    PrepPolicy,
    ReplaySensor,
    ScriptedClock,
    SyntheticSensor,
    clear_cache,
    replay_harness,
    warm_up,
)

LIMITS = ResourceLimits(time_limit=5.0, memory_limit=512, output_limit=1 << 20)
SIM_POLICY = PrepPolicy(cache_mode="simulate")


class RecordingStressor:
    def __init__(self):
        self.events = []

    def start(self):
        self.events.append("start")

    def stop(self):
        self.events.append("stop")


class TestClearCache:
    def test_simulation_is_noop(self, caplog):
        with caplog.at_level("INFO"):
            assert clear_cache(SIM_POLICY) is False
        assert any("simulated" in r.message for r in caplog.records)

    def test_real_policy_success(self):
        assert clear_cache(PrepPolicy(cache_mode="real", cache_command=("true",))) is True

    def test_real_policy_failure_is_nonfatal(self):
        assert clear_cache(PrepPolicy(cache_mode="real", cache_command=("false",))) is False

    def test_missing_hook_is_nonfatal(self):
        policy = PrepPolicy(cache_mode="real", cache_command=("/no/such/binary",))
        assert clear_cache(policy) is False


class TestWarmUp:
    def test_already_in_band(self, virtual_clock):
        stressor = RecordingStressor()
        prep = warm_up(
            FixedThermal(55.0), stressor, 55.0, 2.0, 10.0,
            clock=virtual_clock, sleep=virtual_clock.sleep,
        )
        assert prep.warmup_reached is True
        assert prep.warmup_duration == pytest.approx(0.0, abs=1e-9)
        assert prep.start_temp == 55.0
        assert stressor.events == ["start", "stop"]

    def test_timeout_reported_not_raised(self, virtual_clock):
        stressor = RecordingStressor()
        prep = warm_up(
            FixedThermal(30.0), stressor, 55.0, 1.0, 1.0,
            poll=0.25, clock=virtual_clock, sleep=virtual_clock.sleep,
        )
        assert prep.warmup_reached is False
        assert prep.warmup_duration >= 1.0
        assert stressor.events == ["start", "stop"]

    def test_exponential_model_reaches_band_at_closed_form_time(self, virtual_clock):
        # start 40, steady 70, tau 2: crosses 54 degrees at 2*ln(30/16)
        model = ExponentialThermal(40.0, 70.0, 2.0, clock=virtual_clock)
        poll = 0.05
        expected = model.time_to_reach(54.0)
        assert expected == pytest.approx(2.0 * math.log(30.0 / 16.0), rel=1e-12)
        prep = warm_up(
            model, NullStressor(), 55.0, 1.0, 60.0,
            poll=poll, clock=virtual_clock, sleep=virtual_clock.sleep,
        )
        assert prep.warmup_reached is True
        assert abs(prep.warmup_duration - expected) <= 2 * poll
        assert 54.0 <= prep.start_temp <= 56.0

    def test_stressor_stopped_on_thermal_failure(self, virtual_clock):
        class BrokenThermal:
            def read_temp(self):
                raise RuntimeError("sensor gone")

        stressor = RecordingStressor()
        with pytest.raises(RuntimeError):
            warm_up(BrokenThermal(), stressor, 55.0, 1.0, 1.0,
                    clock=virtual_clock, sleep=virtual_clock.sleep)
        assert stressor.events == ["start", "stop"]


def make_harness(watts=3.0, **kwargs):
    kwargs.setdefault("sampling_period", 0.002)
    return MeasurementHarness(
        SyntheticSensor({"cpu": watts}),
        FixedThermal(55.0),
        SIM_POLICY,
        **kwargs,
    )


class TestRunMeasured:
    def test_sleep_under_constant_power(self):
        harness = make_harness(3.0)
        run = harness.run_measured(
            [sys.executable, "-c", "import time; time.sleep(0.3)"], limits=LIMITS
        )
        m = run.measurement
        assert m.wall_time == pytest.approx(0.3, abs=0.25)
        assert m.energy_total == pytest.approx(3.0 * m.wall_time, rel=1e-6)
        assert m.edp == pytest.approx(m.energy_total * m.wall_time, rel=1e-12)
        assert run.exit_status == 0

    def test_stdout_captured(self):
        harness = make_harness()
        run = harness.run_measured(["echo", "hello"], limits=LIMITS)
        assert run.stdout == b"hello\n"

    def test_protocol_ordering(self):
        harness = make_harness()
        run = harness.run_measured(["true"], limits=LIMITS)
        m = run.measurement
        assert m.prep.started_at < m.prep.finished_at < m.t_start < m.t_end
        lo, hi = run.trace.span()
        assert lo <= m.t_start and m.t_end <= hi

    def test_time_limit_flagged(self):
        harness = make_harness()
        limits = ResourceLimits(time_limit=0.1, memory_limit=512, output_limit=1 << 20)
        run = harness.run_measured(
            [sys.executable, "-c", "while True: pass"], limits=limits
        )
        assert run.outcome.timed_out
        assert run.outcome.wall_time >= 0.1

    def test_nonzero_exit_reported_not_raised(self):
        harness = make_harness()
        run = harness.run_measured(["false"], limits=LIMITS)
        assert run.exit_status == 1

    def test_exclusive_harness(self):
        harness = make_harness()
        harness._busy.acquire()
        try:
            with pytest.raises(MeasurementError, match="exclusive"):
                harness.run_measured(["true"], limits=LIMITS)
        finally:
            harness._busy.release()

    def test_sensor_usable_after_executor_failure(self):
        harness = make_harness()
        with pytest.raises(Exception):
            harness.run_measured(["/no/such/program"], limits=LIMITS)
        run = harness.run_measured(["true"], limits=LIMITS)
        assert run.exit_status == 0


class TestReplayDeterminism:
    def trace(self):
        return PowerTrace(
            ["cpu"],
            [
                PowerSample(0.0, {"cpu": 1.0}),
                PowerSample(1.0, {"cpu": 3.0}),
                PowerSample(2.0, {"cpu": 2.0}),
            ],
        )

    def test_replay_integrates_full_span(self):
        harness = replay_harness(self.trace())
        run = harness.run_measured(["true"], limits=LIMITS)
        assert run.measurement.energy_total == pytest.approx(4.5, rel=1e-12)
        assert run.measurement.wall_time == pytest.approx(2.0, rel=1e-12)
        assert run.measurement.edp == pytest.approx(9.0, rel=1e-12)

    def test_bit_identical_across_runs(self):
        results = []
        for _ in range(3):
            harness = replay_harness(self.trace())
            run = harness.run_measured(["true"], limits=LIMITS)
            results.append(run.measurement)
        assert results[0] == results[1] == results[2]

    def test_one_replay_harness_measures_many_runs(self):
        # the per-run clock factory resets the window for every call
        harness = replay_harness(self.trace())
        runs = [harness.run_measured(["true"], limits=LIMITS) for _ in range(3)]
        assert all(r.measurement.energy_total == pytest.approx(4.5, rel=1e-12) for r in runs)
        assert runs[0].measurement == runs[1].measurement == runs[2].measurement

    def test_scripted_clock_sequencing(self):
        harness = MeasurementHarness(
            ReplaySensor(self.trace()),
            FixedThermal(55.0),
            SIM_POLICY,
            clock=ScriptedClock([-0.2, -0.1, 0.0, 2.0]),
            prep_clock=ScriptedClock([0.0]),
            prep_sleep=lambda _s: None,
        )
        run = harness.run_measured(["true"], limits=LIMITS)
        m = run.measurement
        assert (m.prep.started_at, m.prep.finished_at) == (-0.2, -0.1)
        assert (m.t_start, m.t_end) == (0.0, 2.0)

    def test_window_outside_replay_span_fails(self):
        harness = MeasurementHarness(
            ReplaySensor(self.trace()),
            FixedThermal(55.0),
            SIM_POLICY,
            clock=ScriptedClock([5.0, 5.1, 5.2, 5.3]),
            prep_clock=ScriptedClock([0.0]),
            prep_sleep=lambda _s: None,
        )
        with pytest.raises(MeasurementError, match="cover"):
            harness.run_measured(["true"], limits=LIMITS)
