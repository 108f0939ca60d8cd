"""Run configuration: one YAML file drives every pipeline stage.

Top-level keys: seed, comm (antennas, beams, noise, ...), scenario,
radar, detect, training, and an optional objects list giving explicit
trajectories for direct frame synthesis.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from isac_ident.dataset import ScenarioConfig
from isac_ident.radar_detect import DetectConfig
from isac_ident.radar_frontend import RadarConfig
from isac_ident.scene import CommConfig, SceneObject
from isac_ident.solvers import TrainConfig


class ConfigError(ValueError):
    """Configuration file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    comm: CommConfig = field(default_factory=CommConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    radar: RadarConfig = field(default_factory=lambda: RadarConfig(noise_floor=1000.0))
    detect: DetectConfig = field(default_factory=lambda: DetectConfig(
        cfar_pfa=1e-6, dbscan_min_pts=5, cfar_floor_frac=5e-4))
    training: TrainConfig = field(default_factory=TrainConfig)
    objects: tuple[SceneObject, ...] = ()


_COMM_KEYS = {
    "antennas": "n_antennas",
    "beams": "n_beams",
    "tx_gain": "tx_gain",
    "noise": "noise_var",
    "paths": "n_paths",
    "spacing": "element_spacing",
}

_SCENARIO_KEYS = {
    "sequences": "n_sequences",
    "samples_per_sequence": "samples_per_sequence",
    "candidates": "candidates_range",
    "misalignment_deg": "misalignment_deg",
    "angle_noise_deg": "angle_noise_deg",
    "distortion_deg": "distortion_deg",
    "frame_rate": "frame_rate_hz",
    "seed": "seed",
}


def _build(cls, raw: dict, key_map: dict | None, section: str):
    key_map = key_map or {f.name: f.name for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in key_map:
            raise ConfigError(f"unknown key {section}.{key}")
        if isinstance(value, list):
            value = tuple(value)
        if isinstance(value, str):
            # YAML 1.1 reads unsigned exponents like 1.0e13 as strings
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(f"{section}.{key} must be numeric, got {value!r}") from None
        kwargs[key_map[key]] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section} section: {exc}") from None


def _build_objects(raw) -> tuple[SceneObject, ...]:
    objects = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"objects[{i}] must be a mapping")
        try:
            objects.append(SceneObject(
                id=int(entry.get("id", i)),
                position=tuple(entry["position"]),
                velocity=tuple(entry.get("velocity", (0.0, 0.0))),
                reflectivity=float(entry.get("reflectivity", 1.0)),
                is_comm_user=bool(entry.get("comm_user", False)),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid objects[{i}]: {exc}") from None
    return tuple(objects)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a mapping")
    known = {"seed", "comm", "scenario", "radar", "detect", "training", "objects"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(unknown))}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    scenario_raw = dict(raw.get("scenario", {}))
    scenario_raw.setdefault("seed", seed)
    training_raw = dict(raw.get("training", {}))
    training_raw.setdefault("seed", seed)
    defaults = RunConfig()
    return RunConfig(
        seed=seed,
        comm=_build(CommConfig, raw.get("comm", {}), _COMM_KEYS, "comm"),
        scenario=_build(ScenarioConfig, scenario_raw, _SCENARIO_KEYS, "scenario"),
        radar=_build(RadarConfig, {"noise_floor": defaults.radar.noise_floor,
                                   **raw.get("radar", {})}, None, "radar"),
        detect=_build(DetectConfig, {"cfar_pfa": defaults.detect.cfar_pfa,
                                     "dbscan_min_pts": defaults.detect.dbscan_min_pts,
                                     "cfar_floor_frac": defaults.detect.cfar_floor_frac,
                                     **raw.get("detect", {})}, None, "detect"),
        training=_build(TrainConfig, training_raw, None, "training"),
        objects=_build_objects(raw.get("objects", [])),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw or {})


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of config_from_dict: a plain dict in the file schema."""
    def section(obj, key_map=None):
        key_map = key_map or {f.name: f.name for f in fields(obj)}
        out = {}
        for key, attr in key_map.items():
            value = getattr(obj, attr)
            out[key] = list(value) if isinstance(value, tuple) else value
        return out

    return {
        "seed": cfg.seed,
        "comm": section(cfg.comm, _COMM_KEYS),
        "scenario": section(cfg.scenario, _SCENARIO_KEYS),
        "radar": section(cfg.radar),
        "detect": section(cfg.detect),
        "training": section(cfg.training),
        "objects": [
            {"id": o.id, "position": list(o.position), "velocity": list(o.velocity),
             "reflectivity": o.reflectivity, "comm_user": o.is_comm_user}
            for o in cfg.objects
        ],
    }


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    """Copy of the config with the root seed (and derived seeds) replaced."""
    scenario = ScenarioConfig(**{**_as_kwargs(cfg.scenario), "seed": seed})
    training = TrainConfig(**{**_as_kwargs(cfg.training), "seed": seed})
    return RunConfig(seed=seed, comm=cfg.comm, scenario=scenario, radar=cfg.radar,
                     detect=cfg.detect, training=training, objects=cfg.objects)


def _as_kwargs(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}
