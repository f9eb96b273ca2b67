"""Two-stage grasp-rectangle detection.

Stage one, a particle-swarm candidate estimator, searches the 5-D space of
oriented grasp rectangles in an image; stage two, a pluggable grasp-quality
scorer (a from-scratch CNN or a synthetic oracle), drives the search.
"""

from .geometry import GraspRect, angle_diff, corners, rect_iou, rect_match
from .imaging import estimate_object_scale, extract_patch, gray_histogram, preprocess
from .nn import WeightsBundle, forward, load_weights, random_weights, save_weights
from .pso import (
    InitFailedError,
    MultigraspResult,
    ScoredGrasp,
    SearchResult,
    SwarmConfig,
    multigrasp,
    search,
)
from .scorer import CnnScorer, MaxScorer, Scorer, SyntheticScorer
from .dataset import GraspExample, evaluate, extract_labeled_patches, load_cornell, rect_from_vertices

__version__ = "0.1.0"

__all__ = [
    "GraspRect",
    "angle_diff",
    "corners",
    "rect_iou",
    "rect_match",
    "preprocess",
    "extract_patch",
    "gray_histogram",
    "estimate_object_scale",
    "WeightsBundle",
    "forward",
    "load_weights",
    "save_weights",
    "random_weights",
    "SwarmConfig",
    "SearchResult",
    "ScoredGrasp",
    "MultigraspResult",
    "InitFailedError",
    "search",
    "multigrasp",
    "Scorer",
    "CnnScorer",
    "SyntheticScorer",
    "MaxScorer",
    "GraspExample",
    "load_cornell",
    "extract_labeled_patches",
    "evaluate",
    "rect_from_vertices",
    "__version__",
]
