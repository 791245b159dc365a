"""Uplink NOMA network simulator with IRS-carrying UAVs and a hybrid
discrete/continuous reinforcement-learning resource allocator."""

from .aoi import AoiState, TrafficParams, generate_traffic, objective_aaoi, step_aoi, step_reward
from .channel import (
    ChannelParams,
    ChannelRealization,
    ReflectionConfig,
    compose_effective_channel,
    sample_direct_channel,
    sample_ue_uav_channel,
    uav_cu_channel,
)
from .config import ExperimentConfig, load_config, resolve
from .env import EnvState, UplinkEnv, subset_table
from .geometry import NetworkTopology, UavPose, check_pose, project_uav_move
from .noma import (
    LinkDecision,
    PowerLimits,
    SicOrder,
    all_rates,
    build_sic_order,
    sinr,
    user_rate,
    validate_decision,
)
from .train import AgentBundle, Trainer

__all__ = [
    "AoiState", "TrafficParams", "generate_traffic", "objective_aaoi", "step_aoi", "step_reward",
    "ChannelParams", "ChannelRealization", "ReflectionConfig", "compose_effective_channel",
    "sample_direct_channel", "sample_ue_uav_channel", "uav_cu_channel",
    "ExperimentConfig", "load_config", "resolve",
    "EnvState", "UplinkEnv", "subset_table",
    "NetworkTopology", "UavPose", "check_pose", "project_uav_move",
    "LinkDecision", "PowerLimits", "SicOrder", "all_rates", "build_sic_order",
    "sinr", "user_rate", "validate_decision",
    "AgentBundle", "Trainer",
]
