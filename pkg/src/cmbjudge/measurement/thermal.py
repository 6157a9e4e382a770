"""Temperature sources for the warm-up step."""

from __future__ import annotations

import math
import time
from typing import Callable, Protocol

Clock = Callable[[], float]


class ThermalProvider(Protocol):
    def read_temp(self) -> float: ...


class FixedThermal:
    """Always reports the configured temperature (simulation / no sensor)."""

    def __init__(self, celsius: float):
        self._celsius = float(celsius)

    def read_temp(self) -> float:
        return self._celsius


class ExponentialThermal:
    """Exponential approach toward a steady-state temperature under load.

    T(t) = steady + (start - steady) * exp(-t / time_constant), with t counted
    from construction on the supplied clock.
    """

    def __init__(
        self,
        start_celsius: float,
        steady_celsius: float,
        time_constant: float,
        clock: Clock = time.monotonic,
    ):
        if time_constant <= 0:
            raise ValueError("time_constant must be > 0")
        self._start = float(start_celsius)
        self._steady = float(steady_celsius)
        self._tau = float(time_constant)
        self._clock = clock
        self._t0 = clock()

    def read_temp(self) -> float:
        elapsed = max(0.0, self._clock() - self._t0)
        return self._steady + (self._start - self._steady) * math.exp(-elapsed / self._tau)

    def time_to_reach(self, temp: float) -> float:
        """Closed-form time until T(t) crosses `temp` (inf if never)."""
        num = temp - self._steady
        den = self._start - self._steady
        if den == 0:
            return 0.0 if temp == self._steady else math.inf
        ratio = num / den
        if ratio <= 0:
            return math.inf  # crossed only asymptotically or never
        if ratio >= 1:
            return 0.0
        return -self._tau * math.log(ratio)
