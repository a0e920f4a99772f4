"""Eye contact detection from landmarks, gaze estimates and unsupervised labels."""
from ._jit import backend_name
from .classifier import EyeContactModel, SvmHyperParams, predict, train_svm
from .evaluation import ExperimentConfig, mcc, run_cross_experiment, run_within_experiment
from .pipeline import ClusterParams, FrameRecord, VisibilityCategory, process_frame
from .synthgen import GeneratorConfig, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "ClusterParams",
    "EyeContactModel",
    "ExperimentConfig",
    "FrameRecord",
    "GeneratorConfig",
    "SvmHyperParams",
    "VisibilityCategory",
    "backend_name",
    "generate_dataset",
    "mcc",
    "predict",
    "process_frame",
    "run_cross_experiment",
    "run_within_experiment",
    "train_svm",
]
