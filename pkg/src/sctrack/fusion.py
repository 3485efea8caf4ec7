"""Keyframe selection and recursive Bayesian fusion of classifier outputs.

A track's class posterior is the normalised product of the prior and the
likelihoods of its keyframes. An observation becomes a keyframe only when
its point count differs enough from the previous keyframe's; otherwise it
is treated as a repeat of that view and left out of the product.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .classification import N_CLASSES, uniform_belief

log = logging.getLogger(__name__)

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class FusionConfig:
    alpha_indep: float = 0.2
    start_frames: int = 3
    prior: tuple = (0.25, 0.25, 0.25, 0.25)

    def __post_init__(self):
        if self.alpha_indep < 0:
            raise ValueError("alpha_indep must be non-negative")
        if self.start_frames < 0:
            raise ValueError("start_frames must be non-negative")
        p = np.asarray(self.prior, dtype=float)
        if p.shape != (N_CLASSES,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ValueError("prior must be a probability vector")


@dataclass(frozen=True)
class KeyframeRecord:
    frame_index: int
    point_count: int
    likelihood: np.ndarray = field(compare=False)


@dataclass
class FusionState:
    posterior: np.ndarray = field(default_factory=uniform_belief)
    keyframes: list = field(default_factory=list)
    frames_observed: int = 0
    promoted: bool = False
    degenerate_events: int = 0

    @classmethod
    def from_config(cls, config: FusionConfig) -> "FusionState":
        return cls(posterior=np.asarray(config.prior, dtype=float).copy())


class ObserveResult(NamedTuple):
    keyframe: KeyframeRecord | None
    promoted: bool
    classifier_called: bool


def is_independent(prev_count: int, cur_count: int, alpha_indep: float) -> bool:
    """True when the relative point-count change reaches ``alpha_indep``."""
    if prev_count < 1:
        raise ValueError("prev_count must be >= 1")
    return abs(cur_count - prev_count) / prev_count >= alpha_indep


def fuse_direct(posterior: np.ndarray, likelihood: np.ndarray) -> np.ndarray | None:
    """Element-wise product, renormalised; None when the product vanishes."""
    prod = np.asarray(posterior, dtype=float) * np.asarray(likelihood, dtype=float)
    total = prod.sum()
    if total <= 0:
        return None
    return prod / total


def fuse(posterior: np.ndarray, likelihood: np.ndarray) -> np.ndarray:
    """Bayes update ``posterior * likelihood`` computed in log space.

    Components are floored at 1e-12 before the log so one zero likelihood
    cannot annihilate a class. If the exact product is all zero the
    posterior is returned unchanged and a warning is logged.
    """
    post = np.asarray(posterior, dtype=float)
    lik = np.asarray(likelihood, dtype=float)
    if not np.any(post * lik > 0):
        log.warning("degenerate fusion: posterior %s and likelihood %s share no support", post, lik)
        return post.copy()
    logp = np.log(np.maximum(post, LOG_FLOOR)) + np.log(np.maximum(lik, LOG_FLOOR))
    logp -= logp.max()
    p = np.exp(logp)
    return p / p.sum()


def observe(
    state: FusionState,
    frame_index: int,
    point_count: int,
    classify: Callable[[], np.ndarray],
    config: FusionConfig = FusionConfig(),
    promotion_threshold: float = 0.9,
    likelihood: np.ndarray | None = None,
) -> ObserveResult:
    """Feed one associated observation of an unclassified track.

    ``classify`` is called only when the observation becomes a keyframe,
    unless ``likelihood`` is already known (the birth classification), in
    which case it is reused. The first ``start_frames`` observations are
    skipped. Once promoted the posterior is frozen.
    """
    if state.promoted:
        return ObserveResult(None, True, False)
    state.frames_observed += 1
    if state.frames_observed <= config.start_frames:
        return ObserveResult(None, False, False)
    if state.keyframes and not is_independent(state.keyframes[-1].point_count, point_count, config.alpha_indep):
        return ObserveResult(None, False, False)
    called = likelihood is None
    lik = np.asarray(classify() if called else likelihood, dtype=float)
    if not np.any(state.posterior * lik > 0):
        state.degenerate_events += 1
    state.posterior = fuse(state.posterior, lik)
    record = KeyframeRecord(frame_index, int(point_count), lik)
    state.keyframes.append(record)
    state.promoted = bool(state.posterior.max() >= promotion_threshold)
    return ObserveResult(record, state.promoted, called)
