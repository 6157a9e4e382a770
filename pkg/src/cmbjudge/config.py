"""Deployment configuration: one YAML file covering server, broker,
measurement, sensor/thermal providers, toolchains, and alert sinks.

Every key has a default; `cmb serve` with a two-line config is a working
single-host deployment with the synthetic sensor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .agent.toolchain import DEFAULT_C_TOOLCHAIN, ToolchainConfig, ToolchainError
from .broker import AlertSink, LogAlertSink, WebhookAlertSink
from .measurement import (
    ExponentialThermal,
    FileSensor,
    FixedThermal,
    PrepPolicy,
    ReplaySensor,
    SensorProvider,
    SyntheticSensor,
)
from .measurement.thermal import ThermalProvider

log = logging.getLogger(__name__)

DEFAULT_SYNTHETIC_RAILS = {"big_cpu": 1.5, "little_cpu": 0.6, "gpu": 0.6, "dram": 0.3}


class ConfigError(ValueError):
    pass


@dataclass
class ServerConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8765
    store_path: str = "./judge-data"
    agent_token: str = "change-me"
    static_dir: Optional[str] = None  # optional built frontend to serve at /


@dataclass
class BrokerConfig:
    sweep_interval_seconds: float = 900.0
    max_attempts: int = 2
    job_timeout_seconds: float = 300.0
    dispatch_period_seconds: float = 0.25
    assign_timeout_seconds: float = 15.0
    fetch_timeout_seconds: float = 30.0


@dataclass
class MeasurementConfig:
    sampling_period_seconds: float = 0.01
    warmup_target_celsius: float = 55.0
    warmup_band_celsius: float = 2.0
    warmup_timeout_seconds: float = 120.0
    warmup_poll_seconds: float = 0.05
    cache_mode: str = "simulate"
    cache_command: list[str] = field(
        default_factory=lambda: ["sh", "-c", "sync && sysctl -q vm.drop_caches=3"]
    )

    def prep_policy(self) -> PrepPolicy:
        return PrepPolicy(
            cache_mode=self.cache_mode,
            cache_command=tuple(self.cache_command),
            target_celsius=self.warmup_target_celsius,
            band_celsius=self.warmup_band_celsius,
            warmup_timeout=self.warmup_timeout_seconds,
            warmup_poll=self.warmup_poll_seconds,
        )


@dataclass
class SensorConfig:
    provider: str = "synthetic"  # synthetic | replay | file
    rails: dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_SYNTHETIC_RAILS))
    trace_path: Optional[str] = None  # replay
    rail_files: dict[str, str] = field(default_factory=dict)  # file provider, explicit map
    rail_file_pattern: Optional[str] = None  # file provider, '{rail}' placeholder

    def build(self) -> SensorProvider:
        if self.provider == "synthetic":
            return SyntheticSensor(self.rails)
        if self.provider == "replay":
            if not self.trace_path:
                raise ConfigError("sensor.trace_path required for the replay provider")
            return ReplaySensor.from_csv(self.trace_path)
        if self.provider == "file":
            paths = dict(self.rail_files)
            if not paths and self.rail_file_pattern:
                if "{rail}" not in self.rail_file_pattern:
                    raise ConfigError("sensor.rail_file_pattern must contain {rail}")
                names = list(self.rails) if self.rails else []
                if not names:
                    raise ConfigError("sensor.rails must name the rails for the pattern")
                paths = {rail: self.rail_file_pattern.format(rail=rail) for rail in names}
            if not paths:
                raise ConfigError(
                    "file provider needs sensor.rail_files or sensor.rail_file_pattern"
                )
            return FileSensor(paths)
        raise ConfigError(f"unknown sensor provider {self.provider!r}")


@dataclass
class ThermalConfig:
    provider: str = "fixed"  # fixed | exponential
    fixed_celsius: float = 55.0
    start_celsius: float = 40.0
    steady_celsius: float = 70.0
    time_constant_seconds: float = 2.0

    def build(self) -> ThermalProvider:
        if self.provider == "fixed":
            return FixedThermal(self.fixed_celsius)
        if self.provider == "exponential":
            return ExponentialThermal(
                self.start_celsius, self.steady_celsius, self.time_constant_seconds
            )
        raise ConfigError(f"unknown thermal provider {self.provider!r}")


@dataclass
class AgentConfig:
    id: str = "agent-1"
    heartbeat_period_seconds: float = 5.0
    poll_period_seconds: float = 0.5
    register_attempts: int = 10
    scratch_root: str = "/tmp/cmb-agent"
    sandbox_user: Optional[str] = None
    checker_timeout_seconds: float = 30.0


@dataclass
class Config:
    server: ServerConfig = field(default_factory=ServerConfig)
    broker: BrokerConfig = field(default_factory=BrokerConfig)
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    thermal: ThermalConfig = field(default_factory=ThermalConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    toolchains: dict[str, ToolchainConfig] = field(
        default_factory=lambda: {DEFAULT_C_TOOLCHAIN.id: DEFAULT_C_TOOLCHAIN}
    )
    alert_sinks: list[dict[str, Any]] = field(default_factory=list)

    def build_alert_sinks(self) -> list[AlertSink]:
        sinks: list[AlertSink] = []
        for spec in self.alert_sinks:
            kind = spec.get("type", "log")
            if kind == "log":
                sinks.append(LogAlertSink())
            elif kind == "webhook":
                url = spec.get("url")
                if not url:
                    raise ConfigError("webhook alert sink needs a url")
                sinks.append(WebhookAlertSink(url, timeout=float(spec.get("timeout", 5.0))))
            else:
                raise ConfigError(f"unknown alert sink type {kind!r}")
        if not sinks:
            sinks.append(LogAlertSink())
        return sinks


def _apply(dc: Any, data: dict[str, Any], section: str) -> None:
    for key, value in data.items():
        if not hasattr(dc, key):
            raise ConfigError(f"unknown key {section}.{key}")
        setattr(dc, key, value)


def _parse_toolchains(raw: Any) -> dict[str, ToolchainConfig]:
    if raw is None:
        return {}
    if not isinstance(raw, list):
        raise ConfigError("toolchains must be a list")
    out: dict[str, ToolchainConfig] = {}
    for item in raw:
        try:
            tc = ToolchainConfig(
                id=item["id"],
                compile_command=tuple(item["compile"]),
                run_command=tuple(item["run"]),
                check_command=tuple(item["check"]) if item.get("check") else None,
                env_allowlist=frozenset(item.get("env", ["PATH", "HOME", "LANG"])),
                source_suffix=item.get("source_suffix", ".c"),
            )
        except (KeyError, TypeError, ToolchainError) as exc:
            raise ConfigError(f"bad toolchain entry {item!r}: {exc}")
        out[tc.id] = tc
    return out


def load_config(path: str | Path | None = None, overrides: Optional[dict] = None) -> Config:
    """Load YAML config; missing file or sections fall back to defaults."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config {path}: {exc}")
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config root must be a mapping")
        data = loaded
    if overrides:
        data = {**data, **overrides}

    cfg = Config()
    known = {"server", "broker", "measurement", "sensor", "thermal", "agent", "toolchains", "alerts"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    for section in ("server", "broker", "measurement", "thermal", "agent"):
        if section in data and data[section] is not None:
            if not isinstance(data[section], dict):
                raise ConfigError(f"section {section!r} must be a mapping")
            _apply(getattr(cfg, section), data[section], section)

    if "sensor" in data and data["sensor"] is not None:
        _apply(cfg.sensor, data["sensor"], "sensor")
    else:
        log.warning("no sensor section configured; defaulting to the synthetic provider")

    cfg.toolchains = _parse_toolchains(data.get("toolchains"))
    if not cfg.toolchains:
        cfg.toolchains = {DEFAULT_C_TOOLCHAIN.id: DEFAULT_C_TOOLCHAIN}

    alerts = data.get("alerts")
    if alerts is not None:
        if not isinstance(alerts, list):
            raise ConfigError("alerts must be a list")
        cfg.alert_sinks = alerts

    _validate(cfg)
    return cfg


def _validate(cfg: Config) -> None:
    errors = []
    if cfg.broker.sweep_interval_seconds <= 0:
        errors.append("broker.sweep_interval_seconds must be > 0")
    if cfg.broker.max_attempts < 1:
        errors.append("broker.max_attempts must be >= 1")
    if cfg.measurement.sampling_period_seconds <= 0:
        errors.append("measurement.sampling_period_seconds must be > 0")
    if cfg.measurement.cache_mode not in ("simulate", "real"):
        errors.append("measurement.cache_mode must be 'simulate' or 'real'")
    if not (0 < cfg.server.listen_port < 65536):
        errors.append("server.listen_port out of range")
    if errors:
        raise ConfigError("; ".join(errors))
