"""Curriculum-scheduled PPO for crossing an unsignalized four-way intersection."""
from .bandit import BanditConfig, BanditState, arm_probabilities, init_weights
from .config import RunConfig, TrainerConfig, desk_profile, load_yaml, smoke_profile
from .estimator import CurriculumDrivingAgent
from .evaluation import EvalReport, run_eval
from .mdp import Action, IntersectionTask, Outcome, RewardConfig, TaskConfig
from .ppo_trainer import MetricsLog, train

__version__ = "0.1.0"

__all__ = [
    "Action", "BanditConfig", "BanditState", "CurriculumDrivingAgent", "EvalReport",
    "IntersectionTask", "MetricsLog", "Outcome", "RewardConfig", "RunConfig", "TaskConfig",
    "TrainerConfig", "arm_probabilities", "desk_profile", "init_weights", "load_yaml",
    "run_eval", "smoke_profile", "train",
]
