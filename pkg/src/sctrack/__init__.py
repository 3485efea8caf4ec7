"""Simultaneous classification and tracking over LiDAR point-cloud streams."""

from .association import AssociationConfig, associate, hungarian
from .classification import (
    CLASSES,
    GeometricClassifier,
    IdealOracle,
    NoisyOracle,
    NoisyOracleConfig,
    match_to_ground_truth,
)
from .evaluation import EnergyModel, EvalReport, average_precision, efficiency_ratio, energy_ratio, prc
from .fusion import FusionConfig, FusionState, fuse, is_independent, observe
from .geometry import Box, bev_iou
from .lifecycle import LifecycleConfig, LifecycleState, Tracker, step_accurate, step_efficient
from .pipeline import PipelineConfig, run, sweep
from .scene import Frame, GroundTruthObject, ObjectSpec, SyntheticScenario, generate_synthetic, to_world
from .segmentation import Proposal, SegmentationConfig, segment
from .tracking import NoiseConfig, TrackState

__version__ = "0.1.0"
