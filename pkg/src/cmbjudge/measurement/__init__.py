from .harness import (
    BusyStressor,
    LocalExecutor,
    MeasuredRun,
    MeasurementError,
    MeasurementHarness,
    NullStressor,
    PrepPolicy,
    ScriptedClock,
    clear_cache,
    replay_clock,
    replay_harness,
    warm_up,
)
from .sensors import (
    FileSensor,
    ReplaySensor,
    SensorError,
    SensorProvider,
    SyntheticSensor,
    constant_model,
    piecewise_model,
)
from .thermal import ExponentialThermal, FixedThermal, ThermalProvider
from .trace import (
    PowerSample,
    PowerTrace,
    TraceError,
    compute_edp,
    integrate_energy,
    read_trace_csv,
    write_trace_csv,
)

__all__ = [
    "BusyStressor",
    "ExponentialThermal",
    "FileSensor",
    "FixedThermal",
    "LocalExecutor",
    "MeasuredRun",
    "MeasurementError",
    "MeasurementHarness",
    "NullStressor",
    "PowerSample",
    "PowerTrace",
    "PrepPolicy",
    "ReplaySensor",
    "ScriptedClock",
    "SensorError",
    "SensorProvider",
    "SyntheticSensor",
    "ThermalProvider",
    "TraceError",
    "clear_cache",
    "compute_edp",
    "constant_model",
    "integrate_energy",
    "piecewise_model",
    "read_trace_csv",
    "replay_clock",
    "replay_harness",
    "warm_up",
    "write_trace_csv",
]
