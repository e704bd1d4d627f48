"""Single-file run configuration with strict key checking.

One JSON document configures every stage (field parameters, scene generation,
agent limits, rollout settings); CLI flags override file values.  Unknown
keys are rejected so a config file fully describes a reproducible run.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .field import FieldParams
from .scene import PerlinConfig, SceneGenConfig
from .sim import AgentModel, RolloutConfig, default_agent

_AGENT_KEYS = {
    "root_height",
    "crouch_range",
    "max_speed",
    "max_crouch_rate",
    "max_lateral_offset",
    "max_lean_rate",
    "clearance_radius",
    "crouch_gain",
    "crouch_deadband",
    "crouch_restore",
    "lean_gain",
    "lean_restore",
}


@dataclass
class RunConfig:
    field_params: FieldParams = field(default_factory=FieldParams)
    scene: SceneGenConfig = field(default_factory=SceneGenConfig)
    agent: AgentModel = field(default_factory=default_agent)
    rollout: RolloutConfig = field(default_factory=RolloutConfig)

    def effective_dict(self) -> dict:
        """Full dump of every setting, defaults included."""
        scene = dataclasses.asdict(self.scene)
        scene["perlin"] = dataclasses.asdict(self.scene.perlin)
        agent = {k: getattr(self.agent, k) for k in sorted(_AGENT_KEYS)}
        agent["crouch_range"] = list(self.agent.crouch_range)
        return {
            "field": dataclasses.asdict(self.field_params),
            "scene": scene,
            "agent": agent,
            "rollout": dataclasses.asdict(self.rollout),
        }


def _build_section(cls, data: dict, section: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    try:
        return cls(**data)
    except Exception as exc:
        raise ConfigError(f"bad [{section}] config: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    unknown = set(data) - {"field", "scene", "agent", "rollout"}
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")

    field_params = _build_section(FieldParams, dict(data.get("field", {})), "field")

    scene_data = dict(data.get("scene", {}))
    if "perlin" in scene_data:
        scene_data["perlin"] = _build_section(
            PerlinConfig, dict(scene_data["perlin"]), "scene.perlin"
        )
    if "room" in scene_data:
        scene_data["room"] = tuple(scene_data["room"])
    for key in ("passage_sched", "overhead_sched", "hurdle_sched"):
        if key in scene_data:
            scene_data[key] = tuple(scene_data[key])
    scene = _build_section(SceneGenConfig, scene_data, "scene")

    agent_data = dict(data.get("agent", {}))
    unknown = set(agent_data) - _AGENT_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in [agent]: {sorted(unknown)}")
    if "crouch_range" in agent_data:
        agent_data["crouch_range"] = tuple(agent_data["crouch_range"])
    try:
        agent = default_agent(**agent_data)
    except Exception as exc:
        raise ConfigError(f"bad [agent] config: {exc}") from exc

    rollout = _build_section(RolloutConfig, dict(data.get("rollout", {})), "rollout")
    return RunConfig(field_params=field_params, scene=scene, agent=agent, rollout=rollout)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(data)
