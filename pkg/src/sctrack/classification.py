"""Proposal classifiers behind a common, metered interface.

Beliefs are plain numpy 4-vectors over :data:`CLASSES`. Three classifiers
stand in for a learned network: an ideal ground-truth oracle, a noisy oracle
driven by a confusion matrix, and a size-rule baseline.
"""

from __future__ import annotations

import math
import threading
import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Box, bev_iou
from .scene import CLASSES, GroundTruthObject
from .segmentation import Proposal

N_CLASSES = len(CLASSES)
UNMATCHED_BELIEF = (0.7, 0.1, 0.1, 0.1)


def class_index(label: str) -> int:
    return CLASSES.index(label)


def make_belief(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.shape != (N_CLASSES,):
        raise ValueError(f"belief must have {N_CLASSES} entries")
    if np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"not a probability vector: {p}")
    return p


def peaked_belief(index: int, peak: float) -> np.ndarray:
    """``peak`` on ``index`` and the remaining mass split evenly."""
    p = np.full(N_CLASSES, (1.0 - peak) / (N_CLASSES - 1))
    p[index] = peak
    return p


def uniform_belief() -> np.ndarray:
    return np.full(N_CLASSES, 1.0 / N_CLASSES)


def best_ground_truth_match(box: Box, gt_list: Sequence[GroundTruthObject], min_iou: float):
    """Return ``(object, iou)`` for the highest-IoU ground truth at or above ``min_iou``, else None."""
    best, best_iou = None, -1.0
    for gt in gt_list:
        iou = bev_iou(box, gt.box)
        if iou > best_iou:
            best, best_iou = gt, iou
    if best is None or best_iou < min_iou or best_iou <= 0:
        return None
    return best, best_iou


def match_to_ground_truth(proposal, gt_list: Sequence[GroundTruthObject], min_iou: float = 0.1) -> str | None:
    box = proposal.box if hasattr(proposal, "box") else proposal
    hit = best_ground_truth_match(box, gt_list, min_iou)
    return None if hit is None else hit[0].class_label


@dataclass
class ClassificationContext:
    """Per-frame side information for oracle classifiers (sensor-frame ground truth)."""

    frame_index: int = 0
    ground_truth: Sequence[GroundTruthObject] = ()


@dataclass
class ClassifierStats:
    invocation_count: int = 0
    per_frame: dict = field(default_factory=lambda: defaultdict(int))
    latency_ms: float = 0.0

    def __post_init__(self):
        self._lock = threading.Lock()

    def record(self, frame_index: int, latency_ms: float) -> None:
        with self._lock:
            self.invocation_count += 1
            self.per_frame[frame_index] += 1
            self.latency_ms += latency_ms


class Classifier:
    """Base class: subclasses implement :meth:`_predict`; :meth:`classify` meters every call."""

    # a frame's worth of classification on the reference CPU, split over ~10 proposals
    latency_per_call_ms: float = 26.0

    def __init__(self, latency_per_call_ms: float | None = None):
        self.stats = ClassifierStats()
        if latency_per_call_ms is not None:
            self.latency_per_call_ms = latency_per_call_ms

    def classify(self, proposal: Proposal, context: ClassificationContext | None = None) -> np.ndarray:
        if proposal.point_count < 1:
            raise ValueError("cannot classify an empty proposal")
        ctx = context or ClassificationContext()
        belief = self._predict(proposal, ctx)
        self.stats.record(ctx.frame_index, self.latency_per_call_ms)
        return belief

    def _predict(self, proposal: Proposal, context: ClassificationContext) -> np.ndarray:
        raise NotImplementedError


class IdealOracle(Classifier):
    """Returns a one-hot belief on the overlapping ground-truth class."""

    def __init__(self, min_iou: float = 0.1, latency_per_call_ms: float | None = None):
        super().__init__(latency_per_call_ms)
        self.min_iou = min_iou

    def _predict(self, proposal, context):
        label = match_to_ground_truth(proposal, context.ground_truth, self.min_iou)
        if label is None:
            return np.array(UNMATCHED_BELIEF)
        b = np.zeros(N_CLASSES)
        b[class_index(label)] = 1.0
        return b


@dataclass
class NoisyOracleConfig:
    confusion: list = field(
        default_factory=lambda: [
            [0.80, 0.05, 0.10, 0.05],
            [0.05, 0.90, 0.00, 0.05],
            [0.15, 0.00, 0.70, 0.15],
            [0.05, 0.05, 0.10, 0.80],
        ]
    )
    peak: float = 0.7
    distance_decay: float = 0.0  # per metre beyond reference_range
    reference_range: float = 10.0
    seed: int = 0
    min_iou: float = 0.1

    def __post_init__(self):
        m = np.asarray(self.confusion, dtype=float)
        if m.shape != (N_CLASSES, N_CLASSES) or np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1) > 1e-9):
            raise ValueError("confusion must be a 4x4 row-stochastic matrix")
        if not 1.0 / N_CLASSES < self.peak <= 1.0:
            raise ValueError("peak must lie in (0.25, 1]")
        if self.distance_decay < 0:
            raise ValueError("distance_decay must be non-negative")


class NoisyOracle(Classifier):
    """Ground-truth oracle corrupted by a confusion matrix and range-dependent blur.

    The emitted class is drawn from the confusion row of the true class
    (background when nothing overlaps). The draw is seeded from
    ``(seed, frame, object)``, so repeated calls on the same view agree and
    different modes see the same detector output.
    """

    def __init__(self, config: NoisyOracleConfig | None = None, latency_per_call_ms: float | None = None):
        super().__init__(latency_per_call_ms)
        self.config = config or NoisyOracleConfig()
        self._confusion = np.asarray(self.config.confusion, dtype=float)

    def _object_key(self, proposal, hit) -> int:
        if hit is not None:
            return int(hit[0].track_id) + 1
        cm = np.round(np.asarray(proposal.centroid[:2]) * 100).astype(np.int64)
        return (zlib.crc32(cm.tobytes()) << 1) | 1

    def _predict(self, proposal, context):
        cfg = self.config
        hit = best_ground_truth_match(proposal.box, context.ground_truth, cfg.min_iou)
        true_idx = 0 if hit is None else class_index(hit[0].class_label)
        rng = np.random.default_rng([cfg.seed, context.frame_index, self._object_key(proposal, hit)])
        emitted = int(rng.choice(N_CLASSES, p=self._confusion[true_idx]))
        belief = peaked_belief(emitted, cfg.peak)
        dist = math.hypot(proposal.centroid[0], proposal.centroid[1])
        lam = min(1.0, cfg.distance_decay * max(0.0, dist - cfg.reference_range))
        return (1.0 - lam) * belief + lam * uniform_belief()


class GeometricClassifier(Classifier):
    """Size-rule baseline on the fitted box."""

    def __init__(self, confidence: float = 0.6, latency_per_call_ms: float | None = None):
        super().__init__(latency_per_call_ms)
        self.confidence = confidence

    @staticmethod
    def rule(box: Box) -> str:
        if box.l <= 1.2 and box.h >= 1.0:
            return "pedestrian"
        if 1.2 < box.l <= 2.5 and box.h >= 1.0:
            return "cyclist"
        if 2.5 < box.l <= 7.0:
            return "car"
        return "background"

    def _predict(self, proposal, context):
        return peaked_belief(class_index(self.rule(proposal.box)), self.confidence)


def build_classifier(config: dict | None = None) -> Classifier:
    """Construct a classifier from the ``classifier`` section of a pipeline config."""
    cfg = dict(config or {})
    kind = cfg.pop("type", "ideal")
    latency = cfg.pop("latency_per_call_ms", None)
    if kind == "ideal":
        return IdealOracle(latency_per_call_ms=latency, **cfg)
    if kind == "noisy":
        return NoisyOracle(NoisyOracleConfig(**cfg), latency_per_call_ms=latency)
    if kind == "geometric":
        return GeometricClassifier(latency_per_call_ms=latency, **cfg)
    raise ValueError(f"unknown classifier type {kind!r}")
