"""Single TOML configuration file wiring every module's settings together.

Paths inside the file resolve relative to the file's own directory, so a
checkout runs from anywhere. Every tunable named by the stack lives here;
code defaults match the shipped ``config.toml``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from voicebridge.asr_gateway import EndpointConfig
from voicebridge.lexicon import LexiconConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["ConfigError", "BackendSettings", "BusSettings", "GlobalConfig", "load_config"]

ENV_CONFIG_VAR = "VOICEBRIDGE_CONFIG"
DEFAULT_CONFIG_PATH = "config.toml"


class ConfigError(ValueError):
    """Configuration file missing, unparsable, or self-inconsistent."""


@dataclass(frozen=True)
class BackendSettings:
    kind: str = "replay"  # replay | subprocess | http
    replay_file: Path | None = None
    command: tuple[str, ...] = ()
    url: str = ""
    deadline_s: float = 10.0

    def __post_init__(self) -> None:
        if self.kind not in ("replay", "subprocess", "http"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "replay" and self.replay_file is None:
            raise ConfigError("replay backend needs backend.replay_file")
        if self.kind == "subprocess" and not self.command:
            raise ConfigError("subprocess backend needs backend.command")
        if self.kind == "http" and not self.url:
            raise ConfigError("http backend needs backend.url")


@dataclass(frozen=True)
class BusSettings:
    tcp_port: int = 7420
    ws_port: int = 7421
    dashboard_port: int = 7422
    dashboard_root: Path | None = None

    def __post_init__(self) -> None:
        ports = [self.tcp_port, self.ws_port, self.dashboard_port]
        if len(set(ports)) != len(ports):
            raise ConfigError(f"bus ports must be distinct, got {ports}")


@dataclass(frozen=True)
class GlobalConfig:
    lexicon: LexiconConfig
    endpoint: EndpointConfig
    backend: BackendSettings
    chain_file: Path
    scenario_file: Path
    bus: BusSettings
    sim_tick: float = 0.01
    audio_file: Path | None = None  # stream source for audio backends

    def __post_init__(self) -> None:
        if self.sim_tick <= 0:
            raise ConfigError("robot.tick must be > 0")
        for label, path in (("chain file", self.chain_file), ("scenario file", self.scenario_file)):
            if not Path(path).is_file():
                raise ConfigError(f"{label} not found: {path}")


def _resolve(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else base / path


def config_path_from_env(cli_value: str | None) -> Path:
    """--config beats $VOICEBRIDGE_CONFIG beats ./config.toml."""
    if cli_value:
        return Path(cli_value)
    return Path(os.environ.get(ENV_CONFIG_VAR, DEFAULT_CONFIG_PATH))


def load_config(path: str | Path) -> GlobalConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    base = path.parent
    try:
        lex = data.get("lexicon", {})
        lexicon = LexiconConfig(threshold=float(lex.get("threshold", 0.6)))

        ep = data.get("endpointing", {})
        endpoint = EndpointConfig(
            energy_threshold=float(ep.get("energy_threshold", 0.02)),
            min_silence_ms=int(ep.get("min_silence_ms", 700)),
            max_utterance_ms=int(ep.get("max_utterance_ms", 10_000)),
        )

        be = data.get("backend", {})
        backend = BackendSettings(
            kind=str(be.get("kind", "replay")),
            replay_file=_resolve(base, be.get("replay_file")),
            command=tuple(be.get("command", ())),
            url=str(be.get("url", "")),
            deadline_s=float(be.get("deadline_s", 10.0)),
        )

        robot = data.get("robot", {})
        chain_file = _resolve(base, robot.get("chain_file", "configs/chain.toml"))
        scenario_file = _resolve(
            base, robot.get("scenario_file", "configs/scenario.toml")
        )

        bus_data = data.get("bus", {})
        dash_root = _resolve(base, bus_data.get("dashboard_root"))
        bus = BusSettings(
            tcp_port=int(bus_data.get("tcp_port", 7420)),
            ws_port=int(bus_data.get("ws_port", 7421)),
            dashboard_port=int(bus_data.get("dashboard_port", 7422)),
            dashboard_root=dash_root,
        )

        return GlobalConfig(
            lexicon=lexicon,
            endpoint=endpoint,
            backend=backend,
            chain_file=chain_file,
            scenario_file=scenario_file,
            bus=bus,
            sim_tick=float(robot.get("tick", 0.01)),
            audio_file=_resolve(base, data.get("audio", {}).get("file")),
        )
    except (ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc
