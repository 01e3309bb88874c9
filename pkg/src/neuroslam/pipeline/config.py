"""Run configuration and its flat ``key = value`` file format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..attractor import AttractorConfig
from ..geometry import CameraIntrinsics
from ..local_view import LocalViewConfig
from ..vo.window import VOConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MapConfig:
    robust_delta: float = 1.0
    angle_scale: float = 1.0
    max_iterations: int = 100

    def __post_init__(self):
        if not (self.robust_delta > 0 and self.angle_scale > 0 and self.max_iterations > 0):
            raise ValueError("map parameters must be positive")


@dataclass(frozen=True)
class RunConfig:
    dataset: Path | None = None
    output: Path = Path("out")
    seed: int = 0
    intrinsics: CameraIntrinsics | None = None  # None: read calib.txt next to the images
    attractor: AttractorConfig = field(default_factory=AttractorConfig)
    local_view: LocalViewConfig = field(default_factory=LocalViewConfig)
    vo: VOConfig = field(default_factory=VOConfig)
    map: MapConfig = field(default_factory=MapConfig)
    experience_threshold: float = 0.8  # rad of torus-phase distance
    cue_weight: float = 10.0
    max_frames: int | None = None

    def __post_init__(self):
        if not self.experience_threshold > 0:
            raise ValueError("experience_threshold must be positive")
        if not self.cue_weight > 0:
            raise ValueError("cue_weight must be positive")


_SECTIONS = {
    "attractor": AttractorConfig,
    "local_view": LocalViewConfig,
    "vo": VOConfig,
    "map": MapConfig,
    "intrinsics": CameraIntrinsics,
}
_TOP_LEVEL = {"dataset", "output", "seed", "experience_threshold", "cue_weight", "max_frames"}


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("none", "null"):
        return None
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _coerce(name: str, value, default):
    if value is None or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected true/false, got {value!r}")
        return value
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if isinstance(default, Path):
        return Path(str(value))
    if isinstance(default, (int, float)) and not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    return value


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Apply ``key = value`` lines to ``base``; unknown keys raise ConfigError."""
    base = base or RunConfig()
    top: dict = {}
    sections: dict[str, dict] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
        key, val = key.strip(), _parse_scalar(val.strip())
        section, dot, name = key.partition(".")
        if dot:
            if section not in _SECTIONS:
                raise ConfigError(f"line {n}: unknown section {section!r}")
            names = {f.name for f in dataclasses.fields(_SECTIONS[section])}
            if name not in names:
                raise ConfigError(f"line {n}: unknown key {key!r}")
            sections.setdefault(section, {})[name] = val
        else:
            if key not in _TOP_LEVEL:
                raise ConfigError(f"line {n}: unknown key {key!r}")
            top[key] = val
    updates: dict = {}
    for key, val in top.items():
        default = getattr(base, key)
        if key == "dataset" and val is not None:
            val = Path(str(val))
        updates[key] = _coerce(key, val, default if default is not None else None)
    for section, vals in sections.items():
        current = getattr(base, section)
        if current is None:
            missing = {f.name for f in dataclasses.fields(CameraIntrinsics)} - set(vals)
            if missing:
                raise ConfigError(f"intrinsics section needs all of its keys; missing "
                                  f"{sorted(missing)}")
            try:
                updates[section] = CameraIntrinsics(**vals)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"intrinsics: {exc}") from None
            continue
        coerced = {k: _coerce(f"{section}.{k}", v, getattr(current, k)) for k, v in vals.items()}
        try:
            updates[section] = dataclasses.replace(current, **coerced)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}: {exc}") from None
    try:
        return dataclasses.replace(base, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    return parse_config_text(Path(path).read_text(), base)


def config_to_text(cfg: RunConfig) -> str:
    """Inverse of ``parse_config_text`` for every non-None field."""
    lines = []
    for key in sorted(_TOP_LEVEL):
        val = getattr(cfg, key)
        if val is not None:
            lines.append(f"{key} = {val}")
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        if obj is None:
            continue
        for f in dataclasses.fields(obj):
            val = getattr(obj, f.name)
            lines.append(f"{section}.{f.name} = {'none' if val is None else repr(val)}")
    return "\n".join(lines) + "\n"
