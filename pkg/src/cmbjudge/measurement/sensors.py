"""Pluggable power-sample sources.

Three providers ship: replay (a trace file), synthetic (constant or piecewise
model), and file (hwmon-style text files holding instantaneous watts). The
sampling providers guarantee the returned trace spans at least
[start_sampling call, stop call]: one sample is taken synchronously inside
each of the two calls.
"""

from __future__ import annotations

import threading
import time
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from .trace import PowerSample, PowerTrace, read_trace_csv

Clock = Callable[[], float]

MIN_T_STEP = 1e-9  # nudge applied when the clock has not advanced between samples


class SensorError(RuntimeError):
    pass


class SensorProvider(Protocol):
    def rails(self) -> tuple[str, ...]: ...

    def start_sampling(self, period: float) -> None: ...

    def stop(self) -> PowerTrace: ...


class _PollingSensor:
    """Shared sampler loop: poll `_read()` every period on a worker thread."""

    def __init__(self, rails: Sequence[str], clock: Clock = time.monotonic):
        self._rails = tuple(rails)
        self._clock = clock
        self._samples: list[PowerSample] = []
        self._stop_event = threading.Event()
        self._thread: threading.Thread | None = None
        self._error: Exception | None = None
        self._active = False

    def rails(self) -> tuple[str, ...]:
        return self._rails

    def _read(self, t: float) -> dict[str, float]:
        raise NotImplementedError

    def _take_sample(self) -> None:
        t = self._clock()
        if self._samples and t <= self._samples[-1].t:
            t = self._samples[-1].t + MIN_T_STEP
        try:
            watts = self._read(t)
        except Exception as exc:  # surfaced at stop(); the run must not hang
            if self._error is None:
                self._error = exc
            return
        self._samples.append(PowerSample(t, watts))

    def start_sampling(self, period: float) -> None:
        if self._active:
            raise SensorError("sampling already in progress")
        if period <= 0:
            raise SensorError("sampling period must be > 0")
        self._samples = []
        self._error = None
        self._stop_event.clear()
        self._active = True
        self._take_sample()

        def loop() -> None:
            while not self._stop_event.wait(period):
                self._take_sample()

        self._thread = threading.Thread(target=loop, name="power-sampler", daemon=True)
        self._thread.start()

    def stop(self) -> PowerTrace:
        if not self._active:
            raise SensorError("sampler not running")
        self._stop_event.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None
        self._take_sample()
        self._active = False
        if self._error is not None:
            raise SensorError(f"sampling failed: {self._error}") from self._error
        return PowerTrace(self._rails, self._samples)


def constant_model(watts: float) -> Callable[[float], float]:
    return lambda _elapsed: watts


def piecewise_model(points: Sequence[tuple[float, float]]) -> Callable[[float], float]:
    """Piecewise-linear watts over elapsed seconds; clamped at the ends."""
    pts = sorted((float(t), float(w)) for t, w in points)
    if not pts:
        raise SensorError("piecewise model needs at least one point")

    def model(elapsed: float) -> float:
        if elapsed <= pts[0][0]:
            return pts[0][1]
        for (t0, w0), (t1, w1) in zip(pts, pts[1:]):
            if elapsed <= t1:
                return w0 + (w1 - w0) * (elapsed - t0) / (t1 - t0)
        return pts[-1][1]

    return model


class SyntheticSensor(_PollingSensor):
    """Models each rail as watts = f(elapsed seconds since start_sampling)."""

    def __init__(
        self,
        models: Mapping[str, float | Callable[[float], float]],
        clock: Clock = time.monotonic,
    ):
        super().__init__(tuple(models), clock)
        self._models = {
            rail: (constant_model(m) if isinstance(m, (int, float)) else m)
            for rail, m in models.items()
        }
        self._origin = 0.0

    def start_sampling(self, period: float) -> None:
        self._origin = self._clock()
        super().start_sampling(period)

    def _read(self, t: float) -> dict[str, float]:
        elapsed = t - self._origin
        return {rail: float(model(elapsed)) for rail, model in self._models.items()}


class FileSensor(_PollingSensor):
    """Polls one text file per rail; each file holds one decimal number (watts)."""

    def __init__(self, rail_paths: Mapping[str, str | Path], clock: Clock = time.monotonic):
        super().__init__(tuple(rail_paths), clock)
        self._paths = {rail: Path(p) for rail, p in rail_paths.items()}

    def _read(self, t: float) -> dict[str, float]:
        watts = {}
        for rail, path in self._paths.items():
            raw = path.read_text(encoding="utf-8").strip()
            watts[rail] = float(raw)
        return watts


class ReplaySensor:
    """Returns a pre-recorded trace; sampling calls only gate the lifecycle."""

    def __init__(self, trace: PowerTrace):
        self._trace = trace
        self._active = False

    @classmethod
    def from_csv(cls, path: str | Path) -> "ReplaySensor":
        return cls(read_trace_csv(path))

    @property
    def trace(self) -> PowerTrace:
        return self._trace

    def rails(self) -> tuple[str, ...]:
        return self._trace.rails

    def start_sampling(self, period: float) -> None:
        if self._active:
            raise SensorError("sampling already in progress")
        self._active = True

    def stop(self) -> PowerTrace:
        if not self._active:
            raise SensorError("sampler not running")
        self._active = False
        return self._trace
