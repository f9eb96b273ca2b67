"""Trainer for the grasp-patch classifier.

Fits the same 8-layer conv/BN/ReLU + GAP + 1x1-head architecture the
inference engine runs, using SGD with momentum and a stepped learning-rate
schedule, then exports weights in the engine's binary format.
"""

from .data import EmptyManifestError, SingleClassDatasetError, load_manifest
from .export import ArchitectureMismatchError, ParityReport, export_weights, parity_check
from .model import GraspNet, patches_to_tensor
from .train import DivergenceError, TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "GraspNet",
    "patches_to_tensor",
    "TrainConfig",
    "TrainResult",
    "train",
    "export_weights",
    "parity_check",
    "ParityReport",
    "load_manifest",
    "EmptyManifestError",
    "SingleClassDatasetError",
    "ArchitectureMismatchError",
    "DivergenceError",
    "__version__",
]
