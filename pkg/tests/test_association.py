from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sctrack.association import AssociationConfig, associate, cost, hungarian
from sctrack.geometry import Box
from sctrack.lifecycle import LifecycleConfig, Tracker
from sctrack.scenarios import crossing_scenario
from sctrack.scene import generate_synthetic
from sctrack.segmentation import proposal_to_world, segment

from .oracles import brute_force_assignment_cost


@dataclass
class Obj:
    box: Box
    point_count: int


def unit(x=0.0, y=0.0, n=100, l=1.0):
    return Obj(Box(x, y, 0, l, 1, 1, 0), n)


def test_cost_identical_is_zero():
    assert cost(unit(), unit()).total == 0.0


def test_cost_disjoint_is_gated():
    c = cost(unit(), unit(x=10))
    assert c.total == pytest.approx(2.0)
    assert c.total > AssociationConfig().t_da


def test_cost_hand_example():
    # IoU 0.8, 10 points apart, volumes 0.5 m^3 apart: 2*0.2 + 0.01*10 + 0.1*0.5
    a = Obj(Box(0, 0, 0, 1, 1, 1, 0), 100)
    b = Obj(Box(1 / 9, 0, 0, 1, 1, 1.5, 0), 110)  # overlap 8/9 over union 10/9
    c = cost(a, b)
    assert c.iou == pytest.approx(0.8)
    assert c.total == pytest.approx(0.55)


def test_hungarian_examples():
    assert hungarian(1 - np.eye(3)) == [(0, 0), (1, 1), (2, 2)]
    assert hungarian([[4.2]]) == [(0, 0)]
    assert hungarian(np.zeros((0, 3))) == []


def test_hungarian_rectangular():
    c = np.array([[5.0, 1.0, 9.0], [1.0, 5.0, 9.0]])
    assert hungarian(c) == [(0, 1), (1, 0)]
    assert sorted(hungarian(c.T)) == [(0, 1), (1, 0)]


def test_hungarian_rejects_non_finite():
    with pytest.raises(ValueError):
        hungarian([[np.inf]])


@given(
    arrays(
        np.float64,
        st.tuples(st.integers(1, 6), st.integers(1, 6)),
        elements=st.floats(-100, 100, allow_nan=False, allow_infinity=False),
    )
)
def test_hungarian_optimal_vs_brute_force(c):
    pairs = hungarian(c)
    assert len(pairs) == min(c.shape)
    assert len({i for i, _ in pairs}) == len({j for _, j in pairs}) == len(pairs)
    assert sum(c[i, j] for i, j in pairs) == pytest.approx(brute_force_assignment_cost(c), abs=1e-9)


def test_associate_no_tracks():
    r = associate([unit(), unit(5)], [])
    assert r.matches == [] and r.unmatched_proposals == [0, 1]


def test_associate_exact_overlap():
    r = associate([unit()], [unit()])
    assert r.pairs() == {(0, 0)}


def test_associate_gates_expensive_pairs():
    r = associate([unit(), unit(x=30)], [unit(x=0.05), unit(x=-30)])
    assert r.pairs() == {(0, 0)}
    assert r.unmatched_proposals == [1] and r.unmatched_tracks == [1]
    assert all(b.total <= 0.95 for _, _, b in r.matches)


@given(
    st.lists(
        st.tuples(st.integers(-5, 5), st.integers(-5, 5), st.integers(20, 80)),
        min_size=1,
        max_size=6,
        unique_by=lambda t: t[:2],
    ),
    st.randoms(),
)
def test_associate_permutation_equivariant(specs, rnd):
    # distinct cells 2 m apart so no two assignments tie
    props = [unit(2.0 * x, 2.0 * y, n) for x, y, n in specs]
    tracks = [unit(2.0 * x + 0.1, 2.0 * y, n + 3) for x, y, n in specs]
    order = list(range(len(props)))
    rnd.shuffle(order)
    base = {(i, j) for i, j, _ in associate(props, tracks).matches}
    shuffled = associate([props[k] for k in order], tracks)
    assert {(order[i], j) for i, j, _ in shuffled.matches} == base


def _crossing_trial(seed):
    """Track two pedestrians walking past each other; True if identities never swap."""
    tracker = Tracker(LifecycleConfig(mode="efficient"))
    owner: dict[int, int] = {}
    for frame, gt in generate_synthetic(crossing_scenario(seed)):
        props = [proposal_to_world(frame, p) for p in segment(frame)]
        rep = tracker.process_frame(frame.index, props, lambda i: np.full(4, 0.25), frame.timestamp)
        for i, track_id in rep.assignments:
            nearest = min(gt, key=lambda g: np.hypot(g.box.x - props[i].centroid[0], g.box.y - props[i].centroid[1]))
            if owner.setdefault(track_id, nearest.track_id) != nearest.track_id:
                return False
    return True


@pytest.mark.slow
def test_crossing_paths_keep_identity():
    ok = sum(_crossing_trial(seed) for seed in range(100))
    assert ok >= 95
