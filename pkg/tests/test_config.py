import pytest

from cmbjudge.config import ConfigError, load_config
from cmbjudge.measurement import FileSensor, SyntheticSensor
from cmbjudge.measurement.thermal import ExponentialThermal, FixedThermal


def write(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text)
    return path


class TestLoadConfig:
    def test_defaults_without_file(self):
        cfg = load_config(None)
        assert cfg.server.listen_port == 8765
        assert cfg.broker.sweep_interval_seconds == 900.0
        assert cfg.measurement.sampling_period_seconds == 0.01
        assert cfg.measurement.warmup_target_celsius == 55.0
        assert "c-gcc" in cfg.toolchains

    def test_missing_sensor_section_warns_and_defaults(self, tmp_path, caplog):
        path = write(tmp_path, "server:\n  listen_port: 9000\n")
        with caplog.at_level("WARNING"):
            cfg = load_config(path)
        assert isinstance(cfg.sensor.build(), SyntheticSensor)
        assert any("synthetic" in r.message for r in caplog.records)

    def test_full_file(self, tmp_path):
        path = write(
            tmp_path,
            """
server:
  listen_host: 0.0.0.0
  listen_port: 9100
  store_path: /tmp/x
  agent_token: s3cret
broker:
  sweep_interval_seconds: 60
  max_attempts: 3
measurement:
  sampling_period_seconds: 0.02
  cache_mode: real
  cache_command: ["true"]
sensor:
  provider: synthetic
  rails:
    big: 2.0
    little: 1.0
thermal:
  provider: exponential
  start_celsius: 40
  steady_celsius: 70
  time_constant_seconds: 2
agent:
  id: node-7
  sandbox_user: nobody
toolchains:
  - id: c-gcc
    compile: ["gcc", "-O2", "{source}", "-o", "{output}"]
    check: ["gcc", "-fsyntax-only", "{source}"]
    run: ["{artifact}"]
    env: ["PATH"]
alerts:
  - type: log
  - type: webhook
    url: http://alerts.example/hook
""",
        )
        cfg = load_config(path)
        assert cfg.server.agent_token == "s3cret"
        assert cfg.broker.max_attempts == 3
        assert cfg.measurement.prep_policy().cache_mode == "real"
        assert isinstance(cfg.thermal.build(), ExponentialThermal)
        assert cfg.agent.sandbox_user == "nobody"
        assert cfg.toolchains["c-gcc"].env_allowlist == frozenset({"PATH"})
        sinks = cfg.build_alert_sinks()
        assert len(sinks) == 2

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config sections"):
            load_config(write(tmp_path, "serverr:\n  x: 1\n"))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown key server.portt"):
            load_config(write(tmp_path, "server:\n  portt: 1\n"))

    def test_malformed_yaml(self, tmp_path):
        with pytest.raises(ConfigError, match="malformed"):
            load_config(write(tmp_path, "server: [unclosed\n"))

    def test_bad_values_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="sweep_interval"):
            load_config(write(tmp_path, "broker:\n  sweep_interval_seconds: 0\n"))
        with pytest.raises(ConfigError, match="cache_mode"):
            load_config(write(tmp_path, "measurement:\n  cache_mode: maybe\n"))

    def test_bad_toolchain_rejected(self, tmp_path):
        cfg_text = """
toolchains:
  - id: broken
    compile: ["gcc", "-o", "{output}"]
    run: ["{artifact}"]
"""
        with pytest.raises(ConfigError, match="bad toolchain"):
            load_config(write(tmp_path, cfg_text))

    def test_replay_sensor_needs_trace(self, tmp_path):
        cfg = load_config(write(tmp_path, "sensor:\n  provider: replay\n"))
        with pytest.raises(ConfigError, match="trace_path"):
            cfg.sensor.build()

    def test_file_sensor(self, tmp_path):
        watts = tmp_path / "cpu.txt"
        watts.write_text("1.5")
        cfg = load_config(
            write(tmp_path, f"sensor:\n  provider: file\n  rail_files:\n    cpu: {watts}\n")
        )
        assert isinstance(cfg.sensor.build(), FileSensor)

    def test_file_sensor_path_pattern(self, tmp_path):
        for rail in ("big", "little"):
            (tmp_path / f"{rail}_w.txt").write_text("1.0")
        cfg = load_config(
            write(
                tmp_path,
                "sensor:\n"
                "  provider: file\n"
                f"  rail_file_pattern: '{tmp_path}/{{rail}}_w.txt'\n"
                "  rails:\n    big:\n    little:\n",
            )
        )
        sensor = cfg.sensor.build()
        assert isinstance(sensor, FileSensor)
        assert sensor.rails() == ("big", "little")

    def test_file_sensor_pattern_requires_rail_placeholder(self, tmp_path):
        cfg = load_config(
            write(
                tmp_path,
                "sensor:\n  provider: file\n  rail_file_pattern: /sys/power\n  rails:\n    big:\n",
            )
        )
        with pytest.raises(ConfigError, match="rail"):
            cfg.sensor.build()

    def test_fixed_thermal_default(self):
        cfg = load_config(None)
        assert isinstance(cfg.thermal.build(), FixedThermal)
