"""Soft actor-critic trainer with a sparse-attention actor."""

from .attention import FRFN, assa_fuse, dsa, dsa_weights, ssa, ssa_weights
from .bridge_client import BridgeClient, BridgeError
from .losses import (min_q, policy_loss, polyak_update, q_loss, q_targets,
                     td_errors, value_loss)
from .networks import (ActorOutput, AstaferActor, Critic, EnvSpec, MlpActor,
                       ValueNet, make_actor)
from .replay import ReplayRecord, RPERBuffer, rper_range
from .train import (TINY_SCENARIO, TrainConfig, Trainer, TrainingDiverged,
                    TrainResult, random_rollouts, train)

__all__ = [
    "FRFN", "assa_fuse", "dsa", "dsa_weights", "ssa", "ssa_weights",
    "BridgeClient", "BridgeError",
    "min_q", "policy_loss", "polyak_update", "q_loss", "q_targets",
    "td_errors", "value_loss",
    "ActorOutput", "AstaferActor", "Critic", "EnvSpec", "MlpActor",
    "ValueNet", "make_actor",
    "ReplayRecord", "RPERBuffer", "rper_range",
    "TINY_SCENARIO", "TrainConfig", "Trainer", "TrainingDiverged",
    "TrainResult", "random_rollouts", "train",
]

__version__ = "0.1.0"
