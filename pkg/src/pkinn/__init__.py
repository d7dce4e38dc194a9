"""Physics-informed networks for two-compartment pharmacokinetics and closed-form recovery of their dynamics."""

from .dynamics import NoisyDataset, PKParameters, Trajectory, integrate, rhs, simulate_dataset, split_train_test
from .model import PKINNModel, TrainConfig, build_model, predict, train

__all__ = [
    "NoisyDataset",
    "PKINNModel",
    "PKParameters",
    "TrainConfig",
    "Trajectory",
    "build_model",
    "integrate",
    "predict",
    "rhs",
    "simulate_dataset",
    "split_train_test",
    "train",
]
