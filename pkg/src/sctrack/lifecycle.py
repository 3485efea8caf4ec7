"""Track lifecycle state machines and per-frame orchestration.

Two machines govern a proposal/object. The efficient machine only
distinguishes tracked from lost objects; the accurate machine additionally
splits tracked and lost objects into classified and unclassified ones,
running keyframe fusion on the unclassified ones until they are confident.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .association import AssociationConfig, AssociationResult, associate, cost
from .classification import CLASSES
from .evaluation import Detection
from .fusion import FusionConfig, FusionState, observe
from .geometry import Box
from .tracking import NoiseConfig, TrackState, initialize, predict, update

MODES = ("det_only", "efficient", "accurate")


class LifecycleState(str, enum.Enum):
    NEW_PROPOSAL = "NewProposal"
    MATCHED_PROPOSAL = "MatchedProposal"
    UNMATCHED_PROPOSAL = "UnmatchedProposal"
    TRACKED = "Tracked"
    TRACKED_UNCLASSIFIED = "TrackedUnclassified"
    TRACKED_CLASSIFIED = "TrackedClassified"
    LOST = "Lost"
    LOST_UNCLASSIFIED = "LostUnclassified"
    LOST_CLASSIFIED = "LostClassified"
    DELETED = "Deleted"


class FsmInput(str, enum.Enum):
    A1 = "a1"
    A2 = "a2"
    A3 = "a3"
    A4 = "a4"
    A5 = "a5"
    A6 = "a6"
    A7 = "a7"
    A8 = "a8"
    A9 = "a9"
    A10 = "a10"
    A11 = "a11"
    A12 = "a12"
    A13 = "a13"
    A14 = "a14"


S, A = LifecycleState, FsmInput

EFFICIENT_TRANSITIONS = {
    (S.NEW_PROPOSAL, A.A1): S.MATCHED_PROPOSAL,  # associated with a tracked object
    (S.NEW_PROPOSAL, A.A2): S.UNMATCHED_PROPOSAL,  # not associated
    (S.UNMATCHED_PROPOSAL, A.A3): S.TRACKED,  # classified, new track
    (S.MATCHED_PROPOSAL, A.A4): S.TRACKED,  # location update
    (S.MATCHED_PROPOSAL, A.A5): S.TRACKED,  # label propagated
    (S.TRACKED, A.A4): S.TRACKED,
    (S.TRACKED, A.A6): S.LOST,
    (S.LOST, A.A7): S.TRACKED,
    (S.LOST, A.A8): S.LOST,
    (S.LOST, A.A9): S.DELETED,
}

ACCURATE_TRANSITIONS = {
    (S.NEW_PROPOSAL, A.A1): S.MATCHED_PROPOSAL,
    (S.NEW_PROPOSAL, A.A2): S.UNMATCHED_PROPOSAL,
    (S.UNMATCHED_PROPOSAL, A.A3): S.TRACKED_UNCLASSIFIED,  # uncertain confidence
    (S.UNMATCHED_PROPOSAL, A.A4): S.TRACKED_CLASSIFIED,  # distinct confidence
    (S.MATCHED_PROPOSAL, A.A5): S.TRACKED_UNCLASSIFIED,
    (S.MATCHED_PROPOSAL, A.A6): S.TRACKED_CLASSIFIED,
    (S.TRACKED_CLASSIFIED, A.A7): S.TRACKED_CLASSIFIED,
    (S.TRACKED_UNCLASSIFIED, A.A8): S.TRACKED_CLASSIFIED,  # fused confidence high
    (S.TRACKED_UNCLASSIFIED, A.A9): S.TRACKED_UNCLASSIFIED,
    (S.TRACKED_CLASSIFIED, A.A10): S.LOST_CLASSIFIED,
    (S.LOST_CLASSIFIED, A.A11): S.TRACKED_CLASSIFIED,
    (S.TRACKED_UNCLASSIFIED, A.A12): S.LOST_UNCLASSIFIED,
    (S.LOST_UNCLASSIFIED, A.A13): S.TRACKED_UNCLASSIFIED,
    (S.LOST_CLASSIFIED, A.A14): S.DELETED,
    (S.LOST_UNCLASSIFIED, A.A14): S.DELETED,
}

EFFICIENT_STATES = frozenset({s for pair in EFFICIENT_TRANSITIONS.items() for s in (pair[0][0], pair[1])})
ACCURATE_STATES = frozenset({s for pair in ACCURATE_TRANSITIONS.items() for s in (pair[0][0], pair[1])})

TRACKED_STATES = frozenset({S.TRACKED, S.TRACKED_UNCLASSIFIED, S.TRACKED_CLASSIFIED})
LOST_STATES = frozenset({S.LOST, S.LOST_UNCLASSIFIED, S.LOST_CLASSIFIED})


class IllegalTransition(ValueError):
    pass


def _step(table, machine: str, state: LifecycleState, inp: FsmInput) -> LifecycleState:
    try:
        return table[(LifecycleState(state), FsmInput(inp))]
    except (KeyError, ValueError):
        raise IllegalTransition(f"{machine} machine has no transition for ({state}, {inp})") from None


def step_efficient(state: LifecycleState, inp: FsmInput) -> LifecycleState:
    return _step(EFFICIENT_TRANSITIONS, "efficient", state, inp)


def step_accurate(state: LifecycleState, inp: FsmInput) -> LifecycleState:
    return _step(ACCURATE_TRANSITIONS, "accurate", state, inp)


def step_for_mode(mode: str):
    return step_accurate if mode == "accurate" else step_efficient


@dataclass(frozen=True)
class LifecycleConfig:
    max_lost_frames: int = 3
    promotion_threshold: float = 0.9
    mode: str = "efficient"

    def __post_init__(self):
        if self.max_lost_frames < 1:
            raise ValueError("max_lost_frames must be >= 1")
        if not 0.25 < self.promotion_threshold <= 1.0:
            raise ValueError("promotion_threshold must lie in (0.25, 1]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(eq=False)
class Track:
    id: int
    state: LifecycleState
    kf: TrackState
    belief: np.ndarray
    anchor_box: Box  # last associated proposal box, world frame
    anchor_pos: np.ndarray  # filter position right after that association
    point_count: int
    birth_frame: int
    last_frame: int
    consecutive_missed: int = 0
    fusion: FusionState | None = None
    gt_id: int | None = None
    frames: list = field(default_factory=list)

    @property
    def box(self) -> Box:
        """Last associated box moved along with the filter's prediction."""
        dx, dy = self.kf.position - self.anchor_pos
        return self.anchor_box.translated(float(dx), float(dy))

    @property
    def label(self) -> str:
        return CLASSES[int(np.argmax(self.belief))]

    @property
    def classified(self) -> bool:
        return self.state in (S.TRACKED_CLASSIFIED, S.LOST_CLASSIFIED)


@dataclass
class FrameReport:
    frame_index: int
    events: list
    classifier_calls: int
    detections: list  # evaluation.Detection, world frame
    assignments: list  # (proposal_idx, track_id)
    births: int = 0
    keyframe_calls: int = 0


class Tracker:
    """World state (track table) driven one frame at a time.

    ``process_frame`` takes world-frame proposals and a ``classify(i)``
    callback that runs the classifier on proposal ``i``. Passing ``gt_ids``
    switches to ideal association by ground-truth identity.
    """

    def __init__(
        self,
        lifecycle: LifecycleConfig = LifecycleConfig(),
        association: AssociationConfig = AssociationConfig(),
        noise: NoiseConfig = NoiseConfig(),
        fusion: FusionConfig = FusionConfig(),
    ):
        self.config = lifecycle
        self.mode = lifecycle.mode
        self.association = association
        self.noise = noise
        self.fusion_config = fusion
        self.step = step_for_mode(self.mode)
        self.tracks: list[Track] = []
        self.finished: list[Track] = []
        self.next_id = 0
        self.last_timestamp: float | None = None
        self.classifier_calls = 0
        self.births = 0
        self.keyframe_calls = 0

    # -- helpers --------------------------------------------------------

    def _fire(self, events, frame_index, track, inp, entity="track", **extra):
        if entity == "track":
            new = self.step(track.state, inp)
            events.append(
                {"frame": frame_index, "entity": entity, "track": track.id, "input": inp.value,
                 "from": track.state.value, "to": new.value, **extra}
            )
            track.state = new
        else:
            events.append({"frame": frame_index, "entity": entity, "track": track.id, "input": inp.value, **extra})

    def predict(self, timestamp: float | None) -> None:
        if timestamp is None or self.last_timestamp is None:
            dt = self.noise.dt
        else:
            dt = timestamp - self.last_timestamp
        if timestamp is not None:
            self.last_timestamp = timestamp
        if dt <= 0:
            return
        for t in self.tracks:
            t.kf = predict(t.kf, dt, self.noise)

    def _associate(self, proposals, gt_ids) -> AssociationResult:
        if gt_ids is None:
            return associate(proposals, self.tracks, self.association)
        result = AssociationResult()
        by_gt = {t.gt_id: j for j, t in enumerate(self.tracks) if t.gt_id is not None}
        used = set()
        free_props = []
        for i, g in enumerate(gt_ids):
            j = by_gt.get(g) if g is not None else None
            if j is not None and j not in used:
                used.add(j)
                result.matches.append((i, j, cost(proposals[i], self.tracks[j], self.association)))
            elif g is None:
                free_props.append(i)
            else:
                result.unmatched_proposals.append(i)
        # clutter without identity falls back to cost-based association among identity-less tracks
        free_tracks = [j for j, t in enumerate(self.tracks) if t.gt_id is None]
        sub = associate([proposals[i] for i in free_props], [self.tracks[j] for j in free_tracks], self.association)
        for a, b, c in sub.matches:
            used.add(free_tracks[b])
            result.matches.append((free_props[a], free_tracks[b], c))
        result.unmatched_proposals += [free_props[a] for a in sub.unmatched_proposals]
        result.unmatched_proposals.sort()
        result.unmatched_tracks = [j for j in range(len(self.tracks)) if j not in used]
        return result

    # -- main entry -------------------------------------------------------

    def process_frame(
        self,
        frame_index: int,
        proposals: Sequence,
        classify: Callable[[int], np.ndarray],
        timestamp: float | None = None,
        gt_ids: Sequence[int | None] | None = None,
    ) -> FrameReport:
        """Advance the world state by one frame and report what happened."""
        events: list = []
        detections: list = []
        assignments: list = []
        calls_before = self.classifier_calls
        births_before, kf_before = self.births, self.keyframe_calls

        def run_classifier(i: int) -> np.ndarray:
            self.classifier_calls += 1
            return np.asarray(classify(i), dtype=float)

        self.predict(timestamp)
        result = self._associate(proposals, gt_ids)
        thr = self.config.promotion_threshold

        for i, j, breakdown in result.matches:
            track, prop = self.tracks[j], proposals[i]
            was_lost = track.state in LOST_STATES
            belief = None
            if self.mode == "det_only":
                belief = run_classifier(i)
            if self.mode == "accurate":
                if track.classified:
                    self._fire(events, frame_index, track, A.A6, entity="proposal", proposal=i)
                    self._fire(events, frame_index, track, A.A11 if was_lost else A.A7)
                else:
                    self._fire(events, frame_index, track, A.A5, entity="proposal", proposal=i)
                    self._fire(events, frame_index, track, A.A13 if was_lost else A.A9)
            else:
                self._fire(events, frame_index, track, A.A1, entity="proposal", proposal=i)
                self._fire(events, frame_index, track, A.A5, entity="proposal", proposal=i)
                self._fire(events, frame_index, track, A.A7 if was_lost else A.A4)
            track.kf = update(track.kf, prop.centroid, self.noise)
            track.anchor_box = prop.box
            track.anchor_pos = track.kf.position.copy()
            track.point_count = prop.point_count
            track.consecutive_missed = 0
            track.last_frame = frame_index
            track.frames.append(frame_index)
            if belief is not None:
                track.belief = belief
            if self.mode == "accurate" and not track.classified:
                self._fuse(events, frame_index, track, prop, lambda i=i: run_classifier(i))
            assignments.append((i, track.id))
            detections.append(Detection(frame_index, prop.box, track.belief.copy(), track.id, i))

        for i in result.unmatched_proposals:
            prop = proposals[i]
            belief = run_classifier(i)
            self.births += 1
            track = Track(
                id=self.next_id,
                state=S.NEW_PROPOSAL,
                kf=initialize(prop.centroid, self.noise),
                belief=belief,
                anchor_box=prop.box,
                anchor_pos=np.asarray(prop.centroid[:2], dtype=float).copy(),
                point_count=prop.point_count,
                birth_frame=frame_index,
                last_frame=frame_index,
                gt_id=None if gt_ids is None else gt_ids[i],
                frames=[frame_index],
            )
            self.next_id += 1
            self._fire(events, frame_index, track, A.A2, proposal=i)
            if self.mode == "accurate":
                distinct = belief.max() >= thr
                self._fire(events, frame_index, track, A.A4 if distinct else A.A3)
                if not distinct:
                    track.fusion = FusionState.from_config(self.fusion_config)
                    self._fuse(events, frame_index, track, prop, None, likelihood=belief)
            else:
                self._fire(events, frame_index, track, A.A3)
            self.tracks.append(track)
            assignments.append((i, track.id))
            detections.append(Detection(frame_index, prop.box, track.belief.copy(), track.id, i))

        for j in result.unmatched_tracks:
            self._miss(events, frame_index, self.tracks[j])

        alive = []
        for t in self.tracks:
            (self.finished if t.state == S.DELETED else alive).append(t)
        self.tracks = alive
        return FrameReport(
            frame_index,
            events,
            self.classifier_calls - calls_before,
            detections,
            assignments,
            births=self.births - births_before,
            keyframe_calls=self.keyframe_calls - kf_before,
        )

    def _fuse(self, events, frame_index, track: Track, prop, classify, likelihood=None):
        res = observe(
            track.fusion, frame_index, prop.point_count, classify,
            self.fusion_config, self.config.promotion_threshold, likelihood=likelihood,
        )
        if res.classifier_called:
            self.keyframe_calls += 1
        if res.keyframe is not None:
            track.belief = track.fusion.posterior.copy()
            events.append(
                {"frame": frame_index, "entity": "fusion", "track": track.id,
                 "point_count": res.keyframe.point_count,
                 "likelihood": [float(v) for v in res.keyframe.likelihood],
                 "posterior": [float(v) for v in track.fusion.posterior]}
            )
        if res.promoted:
            self._fire(events, frame_index, track, A.A8)

    def _miss(self, events, frame_index, track: Track) -> None:
        n = self.config.max_lost_frames
        if track.state in TRACKED_STATES:
            track.consecutive_missed = 1
            if self.mode == "accurate":
                self._fire(events, frame_index, track, A.A10 if track.classified else A.A12)
            else:
                self._fire(events, frame_index, track, A.A6)
        else:
            track.consecutive_missed += 1
            if track.consecutive_missed < n and self.mode != "accurate":
                self._fire(events, frame_index, track, A.A8)
        if track.consecutive_missed >= n:
            self._fire(events, frame_index, track, A.A14 if self.mode == "accurate" else A.A9)

    def all_tracks(self) -> list[Track]:
        return sorted(self.finished + self.tracks, key=lambda t: t.id)


def replay_events(events, mode: str = "efficient") -> dict[int, LifecycleState]:
    """Re-run the logged track transitions and return each track's final state."""
    step = step_for_mode(mode)
    states: dict[int, LifecycleState] = {}
    for ev in events:
        if ev.get("entity") != "track":
            continue
        tid = ev["track"]
        cur = states.get(tid, S.NEW_PROPOSAL)
        if cur.value != ev["from"]:
            raise IllegalTransition(f"track {tid}: log says {ev['from']}, replay is at {cur.value}")
        states[tid] = step(cur, FsmInput(ev["input"]))
    return states
