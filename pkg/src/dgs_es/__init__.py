"""Directional Gaussian smoothing evolution strategy (DGS-ES)."""

from .directions import init_frame, orthonormalize, perturb_frame, sample_radii
from .envs import RolloutObjective, make_env, rollout
from .gradient import GradientEstimate, dgs_directional_derivative, dgs_gradient, es_gradient_mc
from .objective import EvaluationError, FunctionObjective, ObjectiveHandle
from .optimizer import (
    AdamState, TrainerConfig, TrainingAborted, TrainingHistory, adam_step, dgs_es_train,
    vanilla_es_train,
)
from .parallel import Evaluator
from .policy import ActionSpec, MlpPolicy, param_count
from .quadrature import QuadratureRule, build_gauss_hermite
from .synthetic import synthetic_objective

__version__ = "0.1.0"

__all__ = [
    "ActionSpec", "AdamState", "EvaluationError", "Evaluator", "FunctionObjective",
    "GradientEstimate", "MlpPolicy", "ObjectiveHandle", "QuadratureRule", "RolloutObjective",
    "TrainerConfig", "TrainingAborted", "TrainingHistory", "adam_step", "build_gauss_hermite",
    "dgs_directional_derivative", "dgs_es_train", "dgs_gradient", "es_gradient_mc", "init_frame",
    "make_env", "orthonormalize", "param_count", "perturb_frame", "rollout", "sample_radii",
    "synthetic_objective", "vanilla_es_train",
]
