"""Accuracy and efficiency metrics: PR curves, AP/mAP, classifier-call ratio,
tracklet lifespan, tracker diagnostics and the energy model."""

from __future__ import annotations

import csv
import json
import warnings
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import Box, bev_iou
from .scene import CLASSES, GroundTruthObject

EVAL_CLASSES = ("car", "pedestrian", "cyclist")
DEFAULT_IOU_THRESHOLDS = {"car": 0.5, "pedestrian": 0.25, "cyclist": 0.25}


@dataclass(frozen=True, eq=False)
class Detection:
    frame_index: int
    box: Box
    scores: np.ndarray  # belief over CLASSES
    track_id: int | None = None
    proposal_index: int | None = None


def prc(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthObject],
    iou_threshold: float,
    class_label: str,
) -> list[tuple[float, float]]:
    """Precision-recall points for one class, one point per distinct confidence.

    Detections are scored by their belief in ``class_label`` and matched
    greedily, highest confidence first, to unclaimed ground truth of that
    class in the same frame. Equal confidences are ordered by higher best
    IoU, then by input order.
    """
    c = CLASSES.index(class_label)
    gt_by_frame: dict[int, list[GroundTruthObject]] = defaultdict(list)
    for g in ground_truth:
        if g.class_label == class_label:
            gt_by_frame[g.frame_index].append(g)
    n_gt = sum(len(v) for v in gt_by_frame.values())
    if n_gt == 0:
        warnings.warn(f"no ground truth for class {class_label!r}; recall undefined")
        return []

    scored = []
    for idx, d in enumerate(detections):
        conf = float(d.scores[c])
        if conf <= 0:
            continue
        ious = [bev_iou(d.box, g.box) for g in gt_by_frame.get(d.frame_index, [])]
        scored.append((conf, ious, idx, d.frame_index))
    scored.sort(key=lambda s: (-s[0], -max(s[1], default=0.0), s[2]))

    claimed: dict[int, set] = defaultdict(set)
    flags = []
    for conf, ious, _, frame in scored:
        best, best_iou = None, iou_threshold
        for k, iou in enumerate(ious):
            if k not in claimed[frame] and iou >= best_iou and (best is None or iou > best_iou):
                best, best_iou = k, iou
        if best is not None:
            claimed[frame].add(best)
        flags.append((conf, best is not None))

    curve = []
    tp = fp = 0
    for k, (conf, hit) in enumerate(flags):
        tp += hit
        fp += not hit
        if k + 1 < len(flags) and flags[k + 1][0] == conf:
            continue
        curve.append((tp / n_gt, tp / (tp + fp)))
    return curve


def average_precision(curve: Sequence[tuple[float, float]]) -> float:
    """Area under the monotone precision envelope (all-points interpolation)."""
    if len(curve) == 0:
        warnings.warn("empty precision-recall curve; AP set to 0")
        return 0.0
    pts = sorted(curve, key=lambda rp: rp[0])
    recall = np.array([0.0] + [r for r, _ in pts])
    precision = np.array([0.0] + [p for _, p in pts])
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    return float(np.sum(np.diff(recall) * envelope[1:]))


def efficiency_ratio(n_proposed: int, n_conventional: int) -> float:
    """Classifier calls of the tracking framework over those of per-frame detection."""
    if n_conventional <= 0:
        raise ZeroDivisionError("conventional classifier count is zero; ratio undefined")
    return n_proposed / n_conventional


def lifespan(frames_by_id: Mapping[int, Iterable[int]]) -> dict:
    """Mean number of frames per tracklet, plus the per-id breakdown."""
    lengths = {k: len(set(v)) for k, v in frames_by_id.items()}
    mean = float(np.mean(list(lengths.values()))) if lengths else 0.0
    return {"mean": mean, "count": len(lengths), "per_id": lengths}


def gt_lifespan(ground_truth: Iterable[GroundTruthObject]) -> dict:
    frames: dict[int, set] = defaultdict(set)
    for g in ground_truth:
        frames[g.track_id].add(g.frame_index)
    return lifespan(frames)


@dataclass(frozen=True)
class EnergyModel:
    e_seg: float
    e_class: float
    n_obj: float
    n_bg: float
    n_go: float
    m_frames: int = 1

    def __post_init__(self):
        if min(self.e_seg, self.e_class, self.n_go, self.m_frames) <= 0 or self.n_obj + self.n_bg <= 0:
            raise ValueError("energy model parameters must be positive")

    def conventional(self) -> float:
        return self.m_frames * self.e_seg + self.m_frames * (self.n_obj + self.n_bg) * self.e_class

    def with_tracking(self) -> float:
        return self.m_frames * self.e_seg + self.m_frames / self.n_go * (self.n_obj + self.n_bg) * self.e_class


def energy_ratio(model: EnergyModel) -> float:
    """Energy of per-frame detection divided by energy with tracking; tends to ``n_go``."""
    return model.conventional() / model.with_tracking()


def tracker_diagnostics(coverage: Iterable[tuple[int, int]]) -> tuple[int, int]:
    """Count ``(mis_associations, discontinuities)`` from ``(track_id, gt_id)`` pairs.

    A GT object covered by k system tracks adds k - 1 discontinuities; a system
    track covering two or more GT ids counts as one mis-association.
    """
    tracks_per_gt: dict[int, set] = defaultdict(set)
    gts_per_track: dict[int, set] = defaultdict(set)
    for track_id, gt_id in coverage:
        tracks_per_gt[gt_id].add(track_id)
        gts_per_track[track_id].add(gt_id)
    discontinuities = sum(len(v) - 1 for v in tracks_per_gt.values())
    mis = sum(1 for v in gts_per_track.values() if len(v) >= 2)
    return mis, discontinuities


@dataclass
class EvalReport:
    mode: str
    prc: dict = field(default_factory=dict)
    ap: dict = field(default_factory=dict)
    map: float = 0.0
    beta: float = 1.0
    n_proposed: int = 0
    n_conventional: int = 0
    n_go: float = 0.0
    gt_n_go: float = 0.0
    births: int = 0
    keyframes: int = 0
    keyframes_per_track: float = 0.0
    mis_associations: int = 0
    discontinuities: int = 0
    frames: int = 0
    energy: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prc"] = {k: [list(p) for p in v] for k, v in self.prc.items()}
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def evaluate_detections(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthObject],
    iou_thresholds: Mapping[str, float] = DEFAULT_IOU_THRESHOLDS,
    classes: Sequence[str] = EVAL_CLASSES,
) -> tuple[dict, dict, float]:
    """Per-class PR curves and AP, and their mean over classes that have ground truth."""
    curves, aps = {}, {}
    for cls in classes:
        if not any(g.class_label == cls for g in ground_truth):
            continue
        curves[cls] = prc(detections, ground_truth, iou_thresholds[cls], cls)
        aps[cls] = average_precision(curves[cls])
    mean_ap = float(np.mean(list(aps.values()))) if aps else 0.0
    return curves, aps, mean_ap


def write_prc_csv(path, curve: Sequence[tuple[float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["recall", "precision"])
        for r, p in curve:
            w.writerow([repr(float(r)), repr(float(p))])


def plot_prc_svg(path, curves: Mapping[str, Sequence[tuple[float, float]]], title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 4))
    for name, curve in curves.items():
        if curve:
            r, p = zip(*curve)
            ax.step(r, p, where="post", label=name)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.legend(loc="lower left")
    fig.savefig(path, format="svg")
    plt.close(fig)
