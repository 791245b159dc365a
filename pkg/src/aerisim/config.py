"""Experiment configuration: schema, defaults, profiles, resolution.

Config documents are YAML or JSON mappings mirroring the dataclass tree
below. Unknown keys are rejected. ``resolve()`` emits every consumed
parameter with a provenance tag so no hidden default exists: "default"
for values backed by the reference setup, "assumption" for values the
model had to pin itself, "override" for anything the document changed.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .aoi import TrafficParams
from .channel import ChannelParams
from .geometry import NetworkTopology
from .noma import PowerLimits


def dbm_to_watt(dbm: float) -> float:
    return 10 ** (dbm / 10.0) / 1000.0


# fields whose default value is our own pin rather than a reported one
_ASSUMED = {
    "topology.num_uavs",
    "topology.arena_size",
    "topology.carrier_frequency",
    "topology.slot_duration",
    "topology.spawn_radius",
    "channel.ref_path_gain",
    "channel.ref_path_gain_los",
    "channel.pathloss_exp_nlos",
    "channel.pathloss_exp_los",
    "channel.single_exponent",
    "channel.single_exponent_value",
    "channel.noise_power",
    "traffic.poisson_rate",
    "traffic.packet_size",
    "noma.cluster_size",
    "env.candidate_width",
    "env.reward_variant",
    "env.per_element_phases",
    "env.interference_from_earlier",
    "env.force_beta",
    "env.delta_gain",
    "agent.ddqn_lr",
    "agent.discount",
    "agent.actor_lr",
    "agent.critic_lr",
    "agent.ppo_epochs",
    "agent.gae_lambda",
    "agent.grad_clip",
    "agent.init_log_std",
    "agent.eps_start",
    "agent.eps_end",
    "agent.eps_decay_fraction",
    "agent.target_update_period",
    "agent.ddqn_update_period",
    "run.episodes",
    "run.slots_per_episode",
    "run.eval_episodes",
}


@dataclass
class TopologyConfig:
    num_users: int = 20
    num_uavs: int = 2
    num_antennas: int = 2
    uav_altitude: float = 50.0
    num_elements: int = 100
    element_spacing_over_wavelength: float = 0.5
    coverage_radius: float = 400.0
    min_uav_separation: float = 8.0
    max_speed: float = 10.0
    spawn_radius: float = 30.0     # UAVs launch from a depot by the receiver
    slot_duration: float = 0.1     # 100 s is available but breaks the arena scale
    arena_size: float = 400.0      # square side, centered on the receiver
    cu_position: tuple = (0.0, 0.0, 10.0)
    carrier_frequency: float = 2e9


@dataclass
class ChannelConfig:
    ref_path_gain: float = 1e-3
    ref_path_gain_los: float = 0.24
    pathloss_exp_nlos: float = 3.4
    pathloss_exp_los: float = 2.6
    rician_k: float = 3.0
    noise_power: float = 1e-13
    bandwidth: float = 200e3
    single_exponent: bool = False
    single_exponent_value: float = 2.7


@dataclass
class TrafficConfig:
    poisson_rate: float = 0.45
    packet_size: float = 40_000.0


@dataclass
class NomaConfig:
    num_subcarriers: int = 4
    cluster_size: int = 2
    power_mask_dbm: float = 5.0
    power_max_dbm: float = 20.0


@dataclass
class EnvConfig:
    candidate_width: int = 4
    reward_variant: str = "max"
    per_element_phases: bool = False
    interference_from_earlier: bool = False
    force_beta: float | None = None    # no-RIS baseline nulls the reflectors
    delta_gain: float = 0.25           # learned step as a fraction of max speed


@dataclass
class AgentConfig:
    hidden_sizes: tuple = (400, 30)
    discount: float = 0.95
    tau: float = 0.01
    replay_capacity: int = 10000
    batch_size: int = 128
    ddqn_lr: float = 1e-4
    actor_lr: float = 1e-4
    critic_lr: float = 3e-4
    clip_epsilon: float = 0.2
    gae_lambda: float = 0.95
    ppo_epochs: int = 4
    grad_clip: float = 1.0
    init_log_std: float = -2.0
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_decay_fraction: float = 0.2
    target_update_period: int = 1
    ddqn_update_period: int = 1


@dataclass
class RunConfig:
    episodes: int = 300
    slots_per_episode: int = 120
    eval_episodes: int = 20
    seeds: tuple = (0, 1, 2, 3, 4)
    policy: str = "ours"
    sweep_axis: str = "none"           # none | num_users | max_power
    sweep_values: tuple = ()
    out_dir: str = "runs"
    workers: int = 1
    write_traces: bool = False


@dataclass
class ExperimentConfig:
    profile: str = "desk"
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    noma: NomaConfig = field(default_factory=NomaConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    run: RunConfig = field(default_factory=RunConfig)

    # -- derived views ------------------------------------------------

    def channel_params(self) -> ChannelParams:
        c = self.channel
        return ChannelParams(
            ref_path_gain=c.ref_path_gain,
            ref_path_gain_los=c.ref_path_gain_los,
            pathloss_exp_nlos=c.pathloss_exp_nlos,
            pathloss_exp_los=c.pathloss_exp_los,
            rician_k=c.rician_k,
            noise_power=c.noise_power,
            bandwidth=c.bandwidth,
            single_exponent=c.single_exponent,
            single_exponent_value=c.single_exponent_value,
        )

    def traffic_params(self) -> TrafficParams:
        return TrafficParams(
            poisson_rate=self.traffic.poisson_rate, packet_size=self.traffic.packet_size
        )

    def power_limits(self) -> PowerLimits:
        n = self.noma
        return PowerLimits(
            cluster_size=n.cluster_size,
            power_mask=dbm_to_watt(n.power_mask_dbm),
            power_max=dbm_to_watt(n.power_max_dbm),
        )

    def build_topology(self, user_positions: np.ndarray) -> NetworkTopology:
        t = self.topology
        return NetworkTopology(
            user_positions=user_positions,
            cu_position=np.asarray(t.cu_position, dtype=float),
            num_antennas=t.num_antennas,
            num_uavs=t.num_uavs,
            uav_altitude=t.uav_altitude,
            num_elements=t.num_elements,
            element_spacing_over_wavelength=t.element_spacing_over_wavelength,
            coverage_radius=t.coverage_radius,
            min_uav_separation=t.min_uav_separation,
            max_speed=t.max_speed,
            slot_duration=t.slot_duration,
        )


_PROFILES: dict[str, dict] = {
    # small enough for laptop-scale acceptance runs
    "desk": {
        "topology": {"num_users": 6, "num_uavs": 2, "num_elements": 16},
        "noma": {"num_subcarriers": 2, "cluster_size": 2},
        "traffic": {"poisson_rate": 0.45, "packet_size": 40_000.0},
        "run": {"episodes": 300, "slots_per_episode": 120},
    },
    # reference-scale setup; hours of wall clock
    "paper": {
        "topology": {"num_users": 20, "num_uavs": 2, "num_elements": 100},
        "noma": {"num_subcarriers": 4, "cluster_size": 2},
        "run": {"episodes": 4000, "slots_per_episode": 600},
    },
}


class ConfigError(ValueError):
    pass


def _apply(obj: Any, doc: dict, path: str, overrides: set[str]) -> None:
    valid = {f.name: f for f in fields(obj)}
    for key, value in doc.items():
        here = f"{path}.{key}" if path else key
        if key not in valid:
            raise ConfigError(f"unknown config key: {here}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"{here} must be a mapping")
            _apply(current, value, here, overrides)
        else:
            if isinstance(current, tuple) and isinstance(value, list):
                value = tuple(value)
            setattr(obj, key, value)
            overrides.add(here)


def load_config(
    doc: dict | None = None, path: str | Path | None = None, profile: str | None = None
) -> tuple[ExperimentConfig, set[str]]:
    """Build a config from an optional document, applying a profile first.

    Returns the config and the set of dotted keys the document overrode.
    """
    if path is not None:
        doc = yaml.safe_load(Path(path).read_text())
    doc = dict(doc or {})
    profile = profile or doc.pop("profile", "desk")
    if profile not in _PROFILES:
        raise ConfigError(f"unknown profile: {profile}")
    cfg = ExperimentConfig(profile=profile)
    profile_overrides: set[str] = set()
    _apply(cfg, _PROFILES[profile], "", profile_overrides)
    overrides: set[str] = set()
    _apply(cfg, doc, "", overrides)
    return cfg, overrides


def resolve(cfg: ExperimentConfig, overrides: set[str] | None = None) -> dict:
    """Flatten the config to {dotted key: {value, source}} plus the profile."""
    overrides = overrides or set()
    out: dict[str, Any] = {"profile": cfg.profile, "parameters": {}}

    def walk(obj: Any, path: str) -> None:
        for f in fields(obj):
            here = f"{path}.{f.name}" if path else f.name
            value = getattr(obj, f.name)
            if dataclasses.is_dataclass(value):
                walk(value, here)
            else:
                if here in overrides:
                    source = "override"
                elif here in _ASSUMED:
                    source = "assumption"
                else:
                    source = "default"
                if isinstance(value, tuple):
                    value = list(value)
                out["parameters"][here] = {"value": value, "source": source}

    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            walk(value, f.name)
    return out


def write_resolved(cfg: ExperimentConfig, overrides: set[str], out_path: str | Path) -> None:
    Path(out_path).write_text(json.dumps(resolve(cfg, overrides), indent=2, sort_keys=True) + "\n")
