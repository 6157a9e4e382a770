"""Power traces: timestamped per-rail samples, CSV round-trip, energy integration.

A trace's time axis and the harness timestamps share one monotonic clock
domain (the origin is arbitrary, as with any monotonic clock), which is what
makes "the trace covers the measurement window" a checkable statement.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class TraceError(ValueError):
    """Malformed trace data or an invalid integration window."""


@dataclass(frozen=True)
class PowerSample:
    t: float
    watts_per_rail: Mapping[str, float]


class PowerTrace:
    """Immutable series of power samples, strictly increasing in t."""

    def __init__(self, rails: Sequence[str], samples: Iterable[PowerSample]):
        rails = tuple(rails)
        if not rails:
            raise TraceError("trace needs at least one rail")
        if len(set(rails)) != len(rails):
            raise TraceError("duplicate rail names")
        samples = tuple(samples)
        rail_set = set(rails)
        prev_t = -math.inf
        for s in samples:
            if not math.isfinite(s.t):
                raise TraceError("sample time must be finite")
            if s.t <= prev_t:
                raise TraceError("sample times must be strictly increasing")
            prev_t = s.t
            if set(s.watts_per_rail) != rail_set:
                raise TraceError("rail set must be identical across samples")
            for rail, w in s.watts_per_rail.items():
                if not math.isfinite(w) or w < 0:
                    raise TraceError(f"wattage for rail {rail!r} must be finite and >= 0")
        self.rails = rails
        self.samples = samples
        self._ts = tuple(s.t for s in samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PowerTrace):
            return NotImplemented
        return self.rails == other.rails and self.samples == other.samples

    def span(self) -> tuple[float, float]:
        if len(self.samples) < 2:
            raise TraceError("fewer than 2 samples")
        return self._ts[0], self._ts[-1]

    def covers(self, t_start: float, t_end: float) -> bool:
        if len(self.samples) < 2:
            return False
        lo, hi = self.span()
        return lo <= t_start and t_end <= hi

    def watts_at(self, rail: str, t: float) -> float:
        """Linear interpolation between bracketing samples."""
        if rail not in self.rails:
            raise TraceError(f"unknown rail {rail!r}")
        ts = self._ts
        if not ts or t < ts[0] or t > ts[-1]:
            raise TraceError("time outside trace span")
        i = bisect_left(ts, t)
        if i < len(ts) and ts[i] == t:
            return self.samples[i].watts_per_rail[rail]
        lo, hi = self.samples[i - 1], self.samples[i]
        frac = (t - lo.t) / (hi.t - lo.t)
        w0 = lo.watts_per_rail[rail]
        w1 = hi.watts_per_rail[rail]
        return w0 + frac * (w1 - w0)


def integrate_energy(
    trace: PowerTrace, t_start: float, t_end: float
) -> tuple[dict[str, float], float]:
    """Trapezoidal per-rail energy over [t_start, t_end], plus the total.

    Window endpoints are linearly interpolated between bracketing samples, so
    splitting a window at any interior point is exactly additive (up to float
    rounding).
    """
    if len(trace) < 2:
        raise TraceError("fewer than 2 samples")
    if not (t_start < t_end):
        raise TraceError("integration window must have t_start < t_end")
    lo, hi = trace.span()
    if t_start < lo or t_end > hi:
        raise TraceError(
            f"window [{t_start}, {t_end}] outside trace span [{lo}, {hi}]"
        )

    ts = trace._ts
    first = bisect_right(ts, t_start)
    last = bisect_left(ts, t_end)
    times = [t_start, *ts[first:last], t_end]

    per_rail: dict[str, float] = {}
    for rail in trace.rails:
        watts = [trace.watts_at(rail, t) for t in times]
        area = 0.0
        for i in range(len(times) - 1):
            area += (watts[i] + watts[i + 1]) * 0.5 * (times[i + 1] - times[i])
        per_rail[rail] = area
    return per_rail, math.fsum(per_rail.values())


def compute_edp(energy: float, wall_time: float) -> float:
    """Energy-delay product in joule-seconds: energy * wall_time."""
    if not (wall_time > 0 and math.isfinite(wall_time)):
        raise ValueError("wall_time must be > 0")
    if energy < 0 or not math.isfinite(energy):
        raise ValueError("energy must be finite and >= 0")
    return energy * wall_time


# --- CSV trace files ----------------------------------------------------------
#
# Format: header `t_seconds,<rail1>_w,<rail2>_w,...`, one row per sample,
# t strictly increasing, `.` decimal separator. Floats are written with
# repr() so a write/read cycle is bit-exact.

_HEADER_T = "t_seconds"
_RAIL_SUFFIX = "_w"


def write_trace_csv(trace: PowerTrace, path: str | Path) -> None:
    lines = [",".join([_HEADER_T, *(f"{rail}{_RAIL_SUFFIX}" for rail in trace.rails)])]
    for s in trace.samples:
        cells = [repr(s.t)] + [repr(s.watts_per_rail[rail]) for rail in trace.rails]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trace_csv(path: str | Path) -> PowerTrace:
    text = Path(path).read_text(encoding="utf-8")
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise TraceError("empty trace file")
    header = rows[0].split(",")
    if header[0] != _HEADER_T or len(header) < 2:
        raise TraceError("trace header must be t_seconds,<rail>_w,...")
    rails = []
    for col in header[1:]:
        if not col.endswith(_RAIL_SUFFIX) or col == _RAIL_SUFFIX:
            raise TraceError(f"rail column {col!r} must end in {_RAIL_SUFFIX!r}")
        rails.append(col[: -len(_RAIL_SUFFIX)])
    samples = []
    for lineno, row in enumerate(rows[1:], start=2):
        cells = row.split(",")
        if len(cells) != len(header):
            raise TraceError(f"line {lineno}: expected {len(header)} columns")
        try:
            t = float(cells[0])
            watts = {rail: float(cell) for rail, cell in zip(rails, cells[1:])}
        except ValueError as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
        samples.append(PowerSample(t, watts))
    return PowerTrace(rails, samples)
