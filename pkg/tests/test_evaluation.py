import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sctrack.evaluation import (
    Detection,
    EnergyModel,
    EvalReport,
    average_precision,
    efficiency_ratio,
    energy_ratio,
    evaluate_detections,
    gt_lifespan,
    lifespan,
    prc,
    tracker_diagnostics,
    write_prc_csv,
)
from sctrack.geometry import Box
from sctrack.scene import GroundTruthObject

from .oracles import interpolated_ap


def car_box(x, y=0.0):
    return Box(x, y, 0, 4.5, 1.8, 1.5, 0)


def gt(frame, tid, x, cls="car"):
    return GroundTruthObject(frame, tid, cls, car_box(x))


def det(frame, x, conf, cls_index=1):
    s = np.full(4, (1 - conf) / 3)
    s[cls_index] = conf
    return Detection(frame, car_box(x), s)


def test_prc_perfect_detector():
    truth = [gt(0, 0, 10), gt(0, 1, 20), gt(1, 0, 11)]
    dets = [det(0, 10, 0.9), det(0, 20, 0.9), det(1, 11, 0.9)]
    curve = prc(dets, truth, 0.5, "car")
    assert curve == [(1.0, 1.0)]
    assert average_precision(curve) == 1.0


def test_prc_all_false():
    curve = prc([det(0, 50, 0.9), det(0, 70, 0.6)], [gt(0, 0, 10)], 0.5, "car")
    assert all(p == 0 for _, p in curve)
    assert average_precision(curve) == 0.0


def test_prc_hand_sweep():
    truth = [gt(0, 0, 10), gt(0, 1, 30)]
    dets = [det(0, 10, 0.9), det(0, 60, 0.8), det(0, 30, 0.7)]
    curve = prc(dets, truth, 0.5, "car")
    assert curve == pytest.approx([(0.5, 1.0), (0.5, 0.5), (1.0, 2 / 3)])


def test_prc_no_ground_truth_warns():
    with pytest.warns(UserWarning):
        assert prc([det(0, 10, 0.9)], [], 0.5, "car") == []


def test_prc_duplicate_detection_is_false_positive():
    curve = prc([det(0, 10, 0.9), det(0, 10.1, 0.8)], [gt(0, 0, 10)], 0.5, "car")
    assert curve == [(1.0, 1.0), (1.0, 0.5)]


def test_prc_ties_stable_under_permutation():
    truth = [gt(0, 0, 10)]
    good, shifted = det(0, 10, 0.8), det(0, 11.5, 0.8)  # both above 0.5 IoU, the first better
    assert prc([good, shifted], truth, 0.5, "car") == prc([shifted, good], truth, 0.5, "car")


def test_ap_examples():
    assert average_precision([(1.0, 1.0)]) == 1.0
    assert average_precision([(0.5, 1.0), (1.0, 0.5)]) == pytest.approx(0.75)
    with pytest.warns(UserWarning):
        assert average_precision([]) == 0.0


@st.composite
def ranked_scene(draw):
    """Detections at strictly falling confidence; each is a fresh TP or a far-away FP."""
    n_gt = draw(st.integers(1, 6))
    hits = draw(st.lists(st.booleans(), min_size=1, max_size=12))
    kept, tp = [], 0
    for h in hits:
        if h and tp == n_gt:
            continue
        tp += h
        kept.append(h)
    dets, next_gt = [], 0
    for k, h in enumerate(kept):
        if h:
            x, next_gt = 10.0 * next_gt, next_gt + 1
        else:
            x = 1000.0 + 10 * k
        dets.append(det(0, x, 0.95 - 0.05 * k))
    truth = [gt(0, i, 10.0 * i) for i in range(n_gt)]
    return dets, truth, kept, n_gt


@given(ranked_scene())
def test_ap_matches_interpolation_oracle(scene):
    dets, truth, hits, n_gt = scene
    ap = average_precision(prc(dets, truth, 0.5, "car"))
    assert 0.0 <= ap <= 1.0
    assert ap == pytest.approx(interpolated_ap(hits, n_gt), abs=1e-12)


@given(ranked_scene())
def test_adding_lowest_fp_never_raises_ap(scene):
    dets, truth, _, _ = scene
    base = average_precision(prc(dets, truth, 0.5, "car"))
    worse = average_precision(prc(dets + [det(0, 5000, 0.01)], truth, 0.5, "car"))
    assert worse <= base + 1e-12


def test_efficiency_ratio():
    assert efficiency_ratio(250, 250) == 1.0
    assert efficiency_ratio(1, 100) == 0.01
    with pytest.raises(ZeroDivisionError):
        efficiency_ratio(3, 0)


def test_lifespan_examples():
    assert lifespan({0: range(10)})["mean"] == 10
    assert lifespan({0: range(4), 1: range(6)})["mean"] == 5
    truth = [gt(f, 0, 10) for f in range(4)] + [gt(f, 1, 20) for f in range(6)]
    assert gt_lifespan(truth)["mean"] == 5


def test_energy_examples():
    assert energy_ratio(EnergyModel(1.0, 3.0, 5, 2, 1.0, 7)) == pytest.approx(1.0)
    m = EnergyModel(e_seg=1.0, e_class=100.0, n_obj=15, n_bg=5, n_go=10, m_frames=50)
    assert energy_ratio(m) == pytest.approx(2001 / 201)
    assert abs(energy_ratio(m) - 10) / 10 < 0.005
    with pytest.raises(ValueError):
        EnergyModel(0.0, 1.0, 1, 1, 1.0)


@given(st.floats(0.01, 1e3), st.floats(0.01, 1e3), st.integers(1, 50), st.floats(1.0, 200.0), st.floats(1.0, 200.0))
def test_energy_bounds_and_monotone(e_seg, e_class, n, n_go, extra):
    a = EnergyModel(e_seg, e_class, n, 0, n_go, 10)
    b = EnergyModel(e_seg, e_class, n, 0, n_go + extra, 10)
    assert 1 - 1e-12 <= energy_ratio(a) <= n_go * (1 + 1e-12)
    assert energy_ratio(b) >= energy_ratio(a) - 1e-12


def test_tracker_diagnostics_examples():
    assert tracker_diagnostics([(1, 1), (2, 2), (1, 1)]) == (0, 0)
    assert tracker_diagnostics([(1, 9), (2, 9), (3, 9)]) == (0, 2)
    assert tracker_diagnostics([(4, 5), (4, 7)]) == (1, 0)


def test_evaluate_detections_skips_absent_classes():
    curves, aps, mean_ap = evaluate_detections([det(0, 10, 0.9)], [gt(0, 0, 10)])
    assert set(aps) == {"car"} and mean_ap == 1.0


def test_report_and_csv_serialisation(tmp_path):
    r = EvalReport(mode="efficient", prc={"car": [(0.5, 1.0)]}, ap={"car": 0.5}, map=0.5, beta=0.1)
    d = json.loads(r.to_json(tmp_path / "r.json"))
    assert d["prc"]["car"] == [[0.5, 1.0]] and d["beta"] == 0.1
    assert json.loads((tmp_path / "r.json").read_text()) == d
    write_prc_csv(tmp_path / "c.csv", [(0.5, 1.0), (1.0, 2 / 3)])
    rows = (tmp_path / "c.csv").read_text().splitlines()
    assert rows[0] == "recall,precision" and math.isclose(float(rows[2].split(",")[1]), 2 / 3)
