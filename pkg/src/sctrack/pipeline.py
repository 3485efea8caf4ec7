"""End-to-end runs over a sequence in one of three modes, plus parameter sweeps.

``det_only`` classifies every proposal every frame; ``efficient`` classifies
only proposals the tracker cannot explain; ``accurate`` also fuses keyframe
classifications of uncertain tracks until they are confident.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .association import AssociationConfig
from .classification import ClassificationContext, best_ground_truth_match, build_classifier
from .evaluation import (
    DEFAULT_IOU_THRESHOLDS,
    EnergyModel,
    EvalReport,
    efficiency_ratio,
    energy_ratio,
    evaluate_detections,
    gt_lifespan,
    lifespan,
    plot_prc_svg,
    tracker_diagnostics,
    write_prc_csv,
)
from .fusion import FusionConfig
from .geometry import points_in_box
from .lifecycle import MODES, LifecycleConfig, Tracker
from .scene import load_source, to_sensor
from .segmentation import Proposal, SegmentationConfig, proposal_to_world, segment
from .tracking import NoiseConfig

log = logging.getLogger(__name__)

SEGMENTATION_MS_PER_FRAME = 31.0
SWEEP_PARAMS = ("range", "alpha_indep", "start_frames")


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, frame_index: int, cause: Exception):
        super().__init__(f"frame {frame_index}: {type(cause).__name__}: {cause}")
        self.frame_index = frame_index
        self.cause = cause


@dataclass(frozen=True)
class EvaluationConfig:
    iou_thresholds: dict = field(default_factory=lambda: dict(DEFAULT_IOU_THRESHOLDS))
    gt_match_iou: float = 0.1  # proposal <-> GT identity for ideal tracking and diagnostics
    long_lived_frames: int = 20


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "efficient"
    ideal_detector: bool = False
    ideal_tracker: bool = False
    region_of_interest: float = 70.0
    seed: int = 0
    workers: int = 1
    output_dir: str | None = None
    plots: bool = False
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    classifier: dict = field(default_factory=lambda: {"type": "ideal"})
    tracker: NoiseConfig = field(default_factory=NoiseConfig)
    association: AssociationConfig = field(default_factory=AssociationConfig)
    lifecycle: LifecycleConfig = field(default_factory=LifecycleConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.region_of_interest > 0:
            raise ConfigError("region_of_interest must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    _NESTED = {
        "segmentation": SegmentationConfig,
        "tracker": NoiseConfig,
        "association": AssociationConfig,
        "lifecycle": LifecycleConfig,
        "fusion": FusionConfig,
        "evaluation": EvaluationConfig,
    }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            for key, typ in cls._NESTED.items():
                if key in data and isinstance(data[key], dict):
                    section = dict(data[key])
                    for k, v in section.items():
                        if isinstance(v, list):
                            section[k] = tuple(v)
                    data[key] = typ(**section)
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_updates(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class RunResult:
    report: EvalReport
    events: list
    tracks: list
    detections: list
    ground_truth: list


def _ideal_proposals(frame, gt_sensor, roi):
    """Ground-truth boxes as proposals, carrying the cloud points that fall inside them."""
    proposals, ids = [], []
    for g in gt_sensor:
        if math.hypot(g.box.x, g.box.y) > roi:
            continue
        mask = points_in_box(frame.points, g.box, tol=0.1)
        if not mask.any():
            continue
        pts = frame.points[mask]
        proposals.append(Proposal(g.box, pts.mean(axis=0), int(mask.sum()), pts))
        ids.append(g.track_id)
    return proposals, ids


def _visible_gt(frame, gt_world, gt_sensor, roi):
    keep = []
    for gw, gs in zip(gt_world, gt_sensor):
        if math.hypot(gs.box.x, gs.box.y) <= roi and points_in_box(frame.points, gs.box, tol=0.1).any():
            keep.append(gw)
    return keep


def run(config: PipelineConfig, source) -> RunResult:
    """Process a sequence frame by frame and evaluate it.

    The conventional classifier count used for the efficiency ratio is the
    number of proposals seen, so a single pass yields both counts.
    """
    roi = config.region_of_interest
    seg_cfg = dataclasses.replace(config.segmentation, region_of_interest_range=roi)
    clf_cfg = dict(config.classifier)
    if clf_cfg.get("type") == "noisy":
        clf_cfg.setdefault("seed", config.seed)
    classifier = build_classifier(clf_cfg)
    lifecycle = dataclasses.replace(config.lifecycle, mode=config.mode)
    tracker = Tracker(lifecycle, config.association, config.tracker, config.fusion)
    ev_cfg = config.evaluation

    events, detections, eval_gt, coverage = [], [], [], []
    n_conventional = frames = 0
    frame_index = -1
    iterator = iter(load_source(source))
    while True:
        try:
            item = next(iterator)
        except StopIteration:
            break
        except Exception as exc:
            raise PipelineError(frame_index + 1, exc) from exc
        frame, gt_world = item
        frame_index = frame.index
        try:
            gt_sensor = [to_sensor(frame, g) for g in gt_world]
            if config.ideal_detector:
                proposals, gt_ids = _ideal_proposals(frame, gt_sensor, roi)
            else:
                proposals = segment(frame, seg_cfg)
                gt_ids = None
                if config.ideal_tracker:
                    gt_ids = []
                    for p in proposals:
                        hit = best_ground_truth_match(p.box, gt_sensor, ev_cfg.gt_match_iou)
                        gt_ids.append(None if hit is None else hit[0].track_id)
                    # one identity per object: the largest overlapping proposal keeps it
                    seen = set()
                    for i in sorted(range(len(proposals)), key=lambda i: -proposals[i].point_count):
                        if gt_ids[i] in seen:
                            gt_ids[i] = None
                        elif gt_ids[i] is not None:
                            seen.add(gt_ids[i])
            world = [proposal_to_world(frame, p) for p in proposals]
            ctx = ClassificationContext(frame.index, gt_sensor)
            rep = tracker.process_frame(
                frame.index,
                world,
                lambda i: classifier.classify(proposals[i], ctx),
                timestamp=frame.timestamp,
                gt_ids=gt_ids if config.ideal_tracker else None,
            )
        except Exception as exc:
            raise PipelineError(frame.index, exc) from exc
        n_conventional += len(proposals)
        frames += 1
        events.extend(rep.events)
        detections.extend(rep.detections)
        eval_gt.extend(_visible_gt(frame, gt_world, gt_sensor, roi))
        for d in rep.detections:
            hit = best_ground_truth_match(d.box, gt_world, ev_cfg.gt_match_iou)
            if hit is not None:
                coverage.append((d.track_id, hit[0].track_id))

    report = _build_report(config, tracker, classifier, detections, eval_gt, coverage, n_conventional, frames)
    result = RunResult(report, events, tracker.all_tracks(), detections, eval_gt)
    if config.output_dir:
        write_outputs(result, config.output_dir, plots=config.plots)
    return result


def _build_report(config, tracker, classifier, detections, eval_gt, coverage, n_conventional, frames) -> EvalReport:
    curves, aps, mean_ap = evaluate_detections(detections, eval_gt, config.evaluation.iou_thresholds)
    tracks = tracker.all_tracks()
    n_go = lifespan({t.id: t.frames for t in tracks})["mean"] if tracks else 0.0
    long_lived = [
        t for t in tracks if t.fusion is not None and len(t.frames) >= config.evaluation.long_lived_frames
    ]
    kf_per_track = float(np.mean([len(t.fusion.keyframes) for t in long_lived])) if long_lived else 0.0
    mis, disc = tracker_diagnostics(coverage)
    n_p = tracker.classifier_calls
    beta = efficiency_ratio(n_p, n_conventional) if n_conventional else 1.0

    lat = classifier.latency_per_call_ms
    seg_ms = frames * SEGMENTATION_MS_PER_FRAME
    energy = {
        "segmentation_ms": seg_ms,
        "classification_ms": n_p * lat,
        "det_only_classification_ms": n_conventional * lat,
        "measured_ratio": (seg_ms + n_conventional * lat) / (seg_ms + n_p * lat) if frames else 1.0,
    }
    if frames and n_conventional and n_go >= 1:
        model = EnergyModel(SEGMENTATION_MS_PER_FRAME, lat, n_conventional / frames, 0.0, n_go, frames)
        energy["model_ratio"] = energy_ratio(model)
        energy["model_asymptote_n_go"] = n_go

    return EvalReport(
        mode=config.mode,
        prc={k: [tuple(map(float, p)) for p in v] for k, v in curves.items()},
        ap={k: float(v) for k, v in aps.items()},
        map=float(mean_ap),
        beta=float(beta),
        n_proposed=int(n_p),
        n_conventional=int(n_conventional),
        n_go=float(n_go),
        gt_n_go=float(gt_lifespan(eval_gt)["mean"]),
        births=int(tracker.births),
        keyframes=int(sum(len(t.fusion.keyframes) for t in tracks if t.fusion is not None)),
        keyframes_per_track=kf_per_track,
        mis_associations=int(mis),
        discontinuities=int(disc),
        frames=int(frames),
        energy=energy,
    )


def write_outputs(result: RunResult, out_dir, plots: bool = False) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.report.to_json(out / "report.json")
    with open(out / "events.jsonl", "w") as fh:
        for ev in result.events:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")
    for cls, curve in result.report.prc.items():
        write_prc_csv(out / f"prc_{cls}.csv", curve)
        if plots:
            plot_prc_svg(out / f"prc_{cls}.svg", {result.report.mode: curve}, title=cls)
    return out


def _config_for(config: PipelineConfig, param: str, value) -> PipelineConfig:
    if param == "range":
        return config.with_updates(region_of_interest=float(value))
    if param == "alpha_indep":
        return config.with_updates(fusion=dataclasses.replace(config.fusion, alpha_indep=float(value)))
    if param == "start_frames":
        return config.with_updates(fusion=dataclasses.replace(config.fusion, start_frames=int(value)))
    raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {param!r}")


def _sweep_one(args):
    cfg, source = args
    rep = run(cfg, source).report
    return rep


def sweep(config: PipelineConfig, param: str, values: Sequence[Any], source) -> list[dict]:
    """One run per value with a shared seed; returns rows of (value, beta, mAP, ...)."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    base = config.with_updates(output_dir=None)
    configs = [_config_for(base, param, v) for v in values]
    if not isinstance(source, (str, Path)) and not dataclasses.is_dataclass(source):
        source = list(source)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            reports = list(pool.map(_sweep_one, [(c, source) for c in configs]))
    else:
        reports = [_sweep_one((c, source)) for c in configs]
    rows = []
    for v, rep in zip(values, reports):
        row = {"value": v, "beta": rep.beta, "map": rep.map, "keyframes": rep.keyframes,
               "n_proposed": rep.n_proposed, "n_conventional": rep.n_conventional}
        row.update({f"ap_{k}": a for k, a in rep.ap.items()})
        rows.append(row)
    if config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(out / "sweep.csv", rows, param)
    return rows


def write_sweep_csv(path, rows: list[dict], param: str) -> None:
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow(r)
