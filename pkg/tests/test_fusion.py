import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sctrack.fusion import FusionConfig, FusionState, fuse, fuse_direct, is_independent, observe

belief_st = st.lists(st.floats(0.001, 1.0), min_size=4, max_size=4).map(lambda v: np.array(v) / sum(v))


def test_is_independent_examples():
    assert is_independent(400, 500, 0.2)
    assert not is_independent(400, 400, 1e-9)
    assert is_independent(400, 400, 0.0)
    assert is_independent(500, 400, 0.2)  # shrinking counts as well
    with pytest.raises(ValueError):
        is_independent(0, 5, 0.2)


def test_fuse_uniform_prior_is_identity():
    assert fuse(np.full(4, 0.25), [0.7, 0.1, 0.1, 0.1]) == pytest.approx([0.7, 0.1, 0.1, 0.1])


def test_fuse_self():
    b = np.array([0.7, 0.1, 0.1, 0.1])
    assert fuse(b, b) == pytest.approx(np.array([0.49, 0.01, 0.01, 0.01]) / 0.52)
    assert fuse(b, b)[0] == pytest.approx(0.9423, abs=1e-4)


def test_fuse_uniform_likelihood_keeps_posterior():
    b = np.array([0.4, 0.3, 0.2, 0.1])
    assert fuse(b, np.full(4, 0.25)) == pytest.approx(b)


def test_fuse_degenerate_returns_posterior(caplog):
    b = np.array([1.0, 0.0, 0.0, 0.0])
    with caplog.at_level(logging.WARNING):
        out = fuse(b, [0.0, 1.0, 0.0, 0.0])
    assert out.tolist() == b.tolist()
    assert "degenerate" in caplog.text


@given(belief_st, belief_st)
def test_fuse_normalized_and_matches_direct(p, q):
    out = fuse(p, q)
    assert abs(out.sum() - 1) < 1e-9
    assert np.allclose(out, fuse_direct(p, q), atol=1e-9)


@given(st.lists(belief_st, min_size=1, max_size=8), st.randoms())
def test_fuse_order_invariant(liks, rnd):
    def fold(seq):
        p = np.full(4, 0.25)
        for q in seq:
            p = fuse(p, q)
        return p

    shuffled = list(liks)
    rnd.shuffle(shuffled)
    assert np.allclose(fold(liks), fold(shuffled), atol=1e-9)


@given(st.lists(belief_st, min_size=1, max_size=10))
def test_monotone_evidence(liks):
    # force a common argmax on class 2
    p = np.full(4, 0.25)
    for q in liks:
        q = q.copy()
        q[2] = q.max() + 0.1
        q /= q.sum()
        new = fuse(p, q)
        assert new[2] >= p[2] - 1e-12
        p = new


class Counter:
    def __init__(self, lik):
        self.lik = np.asarray(lik, float)
        self.calls = 0

    def __call__(self):
        self.calls += 1
        return self.lik


def test_start_frames_are_skipped():
    clf = Counter([0.1, 0.1, 0.7, 0.1])
    state = FusionState()
    results = [observe(state, k, 100 + 50 * k, clf, FusionConfig(start_frames=3)) for k in range(3)]
    assert clf.calls == 0 and all(r.keyframe is None for r in results)
    observe(state, 3, 400, clf, FusionConfig(start_frames=3))
    assert clf.calls == 1


def test_identical_views_fuse_once():
    clf = Counter([0.1, 0.1, 0.7, 0.1])
    state = FusionState()
    cfg = FusionConfig(start_frames=0)
    for k in range(20):
        observe(state, k, 300, clf, cfg)
    assert clf.calls == 1 and len(state.keyframes) == 1
    assert state.posterior == pytest.approx([0.1, 0.1, 0.7, 0.1])


def test_dependent_frames_leave_posterior_alone():
    clf = Counter([0.1, 0.1, 0.7, 0.1])
    state = FusionState()
    cfg = FusionConfig(start_frames=0, alpha_indep=0.5)
    observe(state, 0, 100, clf, cfg)
    before = state.posterior.copy()
    for k, n in enumerate([120, 90, 140, 60], start=1):
        observe(state, k, n, clf, cfg)
        assert np.array_equal(state.posterior, before)


def test_ten_keyframes_concentrate():
    clf = Counter([0.15, 0.15, 0.55, 0.15])
    state = FusionState()
    cfg = FusionConfig(start_frames=0, alpha_indep=0.2)
    for k in range(10):
        observe(state, k, int(100 * 1.5**k), clf, cfg, promotion_threshold=1.0)
    assert clf.calls == 10
    residual = 3 * (0.15 / 0.55) ** 10 / (1 + 3 * (0.15 / 0.55) ** 10)
    assert 1 - state.posterior[2] == pytest.approx(residual, rel=1e-9)
    assert state.posterior[2] > 0.999


def test_promotion_freezes_posterior():
    clf = Counter([0.05, 0.05, 0.85, 0.05])
    state = FusionState()
    cfg = FusionConfig(start_frames=0, alpha_indep=0.0)
    first = observe(state, 0, 100, clf, cfg, promotion_threshold=0.9)
    assert not first.promoted
    second = observe(state, 1, 100, clf, cfg, promotion_threshold=0.9)
    assert second.promoted
    frozen = state.posterior.copy()
    third = observe(state, 2, 500, clf, cfg)
    assert third.promoted and not third.classifier_called
    assert clf.calls == 2 and np.array_equal(state.posterior, frozen)


def test_birth_likelihood_reused_without_call():
    clf = Counter([0.25] * 4)
    state = FusionState()
    res = observe(state, 0, 100, clf, FusionConfig(start_frames=0), likelihood=np.array([0.1, 0.1, 0.7, 0.1]))
    assert clf.calls == 0 and not res.classifier_called and res.keyframe is not None


def test_config_validation():
    with pytest.raises(ValueError):
        FusionConfig(alpha_indep=-0.1)
    with pytest.raises(ValueError):
        FusionConfig(prior=(0.5, 0.5, 0.5, 0.5))
