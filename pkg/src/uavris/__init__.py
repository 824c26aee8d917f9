"""Dual-RIS (ground + UAV mounted) wireless simulator and RL environment."""

from .scenario import (ConfigError, LinkAngles, Position3, ScenarioConfig,
                       check_mobility, dbm_to_watts, link_angles,
                       link_distance, load_config, propose_move)
from .channel import (ChannelSet, JitterDraw, cascaded_pathloss,
                      direct_pathloss, los_matrix, mix_rician, realize_channels,
                      sample_jitter, sample_nlos, steering_vector)
from .signal_model import (BeamMatrix, PhaseConfig, RateReport,
                           effective_dl_channel, episode_rates, matched_solution,
                           phase_matrix, project_power, rate, sinr)
from .env import Action, Environment, StateObs, StepResult, run_episode
from .oracle import oracle_exhaustive

__all__ = [
    "ConfigError", "LinkAngles", "Position3", "ScenarioConfig",
    "check_mobility", "dbm_to_watts", "link_angles", "link_distance",
    "load_config", "propose_move",
    "ChannelSet", "JitterDraw", "cascaded_pathloss", "direct_pathloss",
    "los_matrix", "mix_rician", "realize_channels", "sample_jitter",
    "sample_nlos", "steering_vector",
    "BeamMatrix", "PhaseConfig", "RateReport", "effective_dl_channel",
    "episode_rates", "matched_solution", "phase_matrix", "project_power",
    "rate", "sinr",
    "Action", "Environment", "StateObs", "StepResult", "run_episode",
    "oracle_exhaustive",
]

__version__ = "0.1.0"
