"""Measured execution: cache clear, thermal warm-up, sampling, timestamps, EDP.

The run protocol is fixed: clear cache, warm up, start sampling, take t_start,
execute the command under its limits, take t_end, stop sampling, integrate
power over [t_start, t_end], compute EDP. Energy outside the execution window
(warm-up, compilation) is deliberately excluded.
"""

from __future__ import annotations

import logging
import subprocess
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional, Protocol, Sequence

from ..domain import MeasurementResult, PrepRecord, ResourceLimits
from ..process import RunOutcome, run_limited
from .sensors import SensorProvider
from .thermal import ThermalProvider
from .trace import PowerTrace, compute_edp, integrate_energy

log = logging.getLogger(__name__)

Clock = Callable[[], float]
Sleep = Callable[[float], None]

EVENT_NUDGE = 1e-9  # enforced minimum spacing between recorded event times

DEFAULT_LIMITS = ResourceLimits(time_limit=60.0, memory_limit=1024, output_limit=16 * 1024 * 1024)


class MeasurementError(RuntimeError):
    pass


@dataclass(frozen=True)
class PrepPolicy:
    cache_mode: str = "simulate"  # "simulate" or "real"
    cache_command: tuple[str, ...] = ("sh", "-c", "sync && sysctl -q vm.drop_caches=3")
    target_celsius: float = 55.0
    band_celsius: float = 2.0
    warmup_timeout: float = 120.0
    warmup_poll: float = 0.05

    def __post_init__(self) -> None:
        if self.cache_mode not in ("simulate", "real"):
            raise ValueError("cache_mode must be 'simulate' or 'real'")


class Stressor(Protocol):
    def start(self) -> None: ...

    def stop(self) -> None: ...


class NullStressor:
    def start(self) -> None:
        pass

    def stop(self) -> None:
        pass


class BusyStressor:
    """Spins worker threads to put load on the host during warm-up."""

    def __init__(self, threads: int = 2):
        self._count = threads
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def start(self) -> None:
        self._stop.clear()

        def burn() -> None:
            x = 0
            while not self._stop.is_set():
                x = (x * 1103515245 + 12345) % (1 << 31)

        self._threads = [
            threading.Thread(target=burn, daemon=True) for _ in range(self._count)
        ]
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=1.0)
        self._threads = []


class ScriptedClock:
    """Returns scripted values in order, then repeats the last one."""

    def __init__(self, values: Sequence[float]):
        if not values:
            raise ValueError("scripted clock needs at least one value")
        self._values = list(values)
        self._i = 0

    def __call__(self) -> float:
        v = self._values[self._i]
        if self._i < len(self._values) - 1:
            self._i += 1
        return v


def clear_cache(policy: PrepPolicy) -> bool:
    """Run the configured cache-clear hook; False when simulated or failed."""
    if policy.cache_mode == "simulate":
        log.info("cache clear simulated (no-op)")
        return False
    try:
        proc = subprocess.run(
            list(policy.cache_command),
            stdout=subprocess.DEVNULL,
            stderr=subprocess.PIPE,
            timeout=30,
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        log.warning("cache clear hook failed: %s", exc)
        return False
    if proc.returncode != 0:
        log.warning(
            "cache clear hook exited %d: %s",
            proc.returncode,
            proc.stderr.decode(errors="replace").strip(),
        )
        return False
    return True


def warm_up(
    thermal: ThermalProvider,
    stressor: Stressor,
    target: float,
    band: float,
    timeout: float,
    *,
    poll: float = 0.05,
    clock: Clock = time.monotonic,
    sleep: Sleep = time.sleep,
    cache_cleared: bool = False,
) -> PrepRecord:
    """Stress the host until its temperature is within target +/- band.

    A timeout is reported in the record, never raised; the stressor is stopped
    on every path.
    """
    lo, hi = target - band, target + band
    started = clock()
    stressor.start()
    try:
        while True:
            temp = thermal.read_temp()
            now = clock()
            if lo <= temp <= hi:
                return PrepRecord(
                    cache_cleared=cache_cleared,
                    warmup_reached=True,
                    start_temp=temp,
                    warmup_duration=now - started,
                )
            if now - started >= timeout:
                return PrepRecord(
                    cache_cleared=cache_cleared,
                    warmup_reached=False,
                    start_temp=temp,
                    warmup_duration=now - started,
                )
            sleep(poll)
    finally:
        stressor.stop()


class Executor(Protocol):
    def execute(self, argv: Sequence[str], stdin: bytes, limits: ResourceLimits) -> RunOutcome: ...


class LocalExecutor:
    """Plain limited execution in the current directory and environment."""

    def execute(self, argv: Sequence[str], stdin: bytes, limits: ResourceLimits) -> RunOutcome:
        return run_limited(
            argv,
            stdin,
            time_limit=limits.time_limit,
            memory_limit_mib=limits.memory_limit,
            output_limit_bytes=limits.output_limit,
        )


@dataclass(frozen=True)
class MeasuredRun:
    measurement: MeasurementResult
    stdout: bytes
    exit_status: int
    outcome: RunOutcome
    trace: PowerTrace


class MeasurementHarness:
    """Runs one command at a time under the full measurement protocol.

    Exclusive: a harness instance refuses overlapping runs. Sensor sampling
    runs concurrently with the measured process; everything else is
    sequential.
    """

    def __init__(
        self,
        sensor: SensorProvider,
        thermal: ThermalProvider,
        policy: PrepPolicy,
        *,
        executor: Optional[Executor] = None,
        stressor: Optional[Stressor] = None,
        clock: Clock = time.monotonic,
        clock_factory: Optional[Callable[[], Clock]] = None,
        prep_clock: Optional[Clock] = None,
        prep_sleep: Sleep = time.sleep,
        sampling_period: float = 0.01,
    ):
        self.sensor = sensor
        self.thermal = thermal
        self.policy = policy
        self.executor = executor or LocalExecutor()
        self.stressor = stressor if stressor is not None else NullStressor()
        # Event timestamps come from the run clock (exactly four reads per
        # run, so a scripted clock stays predictable); warm-up polling runs on
        # its own timer so its loop count cannot desynchronize the script.
        # clock_factory, when given, supplies a fresh clock per run: that is
        # what lets replay harnesses measure any number of runs.
        self.clock = clock
        self.clock_factory = clock_factory
        self.prep_clock = prep_clock if prep_clock is not None else time.monotonic
        self.prep_sleep = prep_sleep
        self.sampling_period = sampling_period
        self._busy = threading.Lock()

    @staticmethod
    def _next_event(clock: Clock, after: float) -> float:
        t = clock()
        return t if t > after else after + EVENT_NUDGE

    def run_measured(
        self,
        argv: Sequence[str],
        stdin: bytes = b"",
        limits: ResourceLimits = DEFAULT_LIMITS,
    ) -> MeasuredRun:
        if not self._busy.acquire(blocking=False):
            raise MeasurementError("harness is exclusive: a measurement is already running")
        try:
            return self._run(argv, stdin, limits)
        finally:
            self._busy.release()

    def _run(self, argv: Sequence[str], stdin: bytes, limits: ResourceLimits) -> MeasuredRun:
        policy = self.policy
        clock = self.clock_factory() if self.clock_factory is not None else self.clock
        prep_started = clock()
        cleared = clear_cache(policy)
        prep = warm_up(
            self.thermal,
            self.stressor,
            policy.target_celsius,
            policy.band_celsius,
            policy.warmup_timeout,
            poll=policy.warmup_poll,
            clock=self.prep_clock,
            sleep=self.prep_sleep,
            cache_cleared=cleared,
        )
        prep_finished = self._next_event(clock, prep_started)
        prep = replace(prep, started_at=prep_started, finished_at=prep_finished)

        self.sensor.start_sampling(self.sampling_period)
        try:
            t_start = self._next_event(clock, prep_finished)
            outcome = self.executor.execute(argv, stdin, limits)
            t_end = self._next_event(clock, t_start)
        except Exception:
            # leave the sensor usable for the next run
            try:
                self.sensor.stop()
            except Exception:
                pass
            raise
        trace = self.sensor.stop()

        if not trace.covers(t_start, t_end):
            raise MeasurementError(
                "trace does not cover the measurement window "
                f"[{t_start}, {t_end}] (span {trace.span() if len(trace) >= 2 else 'n/a'})"
            )
        per_rail, total = integrate_energy(trace, t_start, t_end)
        wall = t_end - t_start
        measurement = MeasurementResult(
            wall_time=wall,
            energy_total=total,
            energy_per_rail=per_rail,
            edp=compute_edp(total, wall),
            t_start=t_start,
            t_end=t_end,
            prep=prep,
        )
        return MeasuredRun(
            measurement=measurement,
            stdout=outcome.stdout,
            exit_status=outcome.exit_status,
            outcome=outcome,
            trace=trace,
        )


def replay_clock(trace: PowerTrace) -> ScriptedClock:
    """Clock for replay runs: prep events just before the span, then the span.

    Produces deterministic measurements: t_start lands on the first sample and
    t_end on the last, so the whole recorded trace is integrated.
    """
    t0, t1 = trace.span()
    return ScriptedClock([t0 - 2e-3, t0 - 1e-3, t0, t1])


def replay_harness(
    trace: PowerTrace,
    *,
    executor: Optional[Executor] = None,
    policy: Optional[PrepPolicy] = None,
) -> MeasurementHarness:
    """Fully deterministic harness around a recorded trace.

    The command still runs for real (stdout/exit status are live) but every
    number in the MeasurementResult is a pure function of the trace, so
    repeated runs are bit-identical.
    """
    from .sensors import ReplaySensor
    from .thermal import FixedThermal

    policy = policy or PrepPolicy()
    return MeasurementHarness(
        ReplaySensor(trace),
        FixedThermal(policy.target_celsius),
        policy,
        executor=executor,
        clock_factory=lambda: replay_clock(trace),
        prep_clock=ScriptedClock([0.0]),
        prep_sleep=lambda _s: None,
    )
