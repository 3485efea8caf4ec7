import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sctrack.geometry import Box, points_in_box
from sctrack.scene import Frame, ObjectSpec, SyntheticScenario, generate_synthetic, to_sensor
from sctrack.segmentation import SegmentationConfig, cluster, fit_box, remove_ground, segment

from .oracles import union_find_clusters


def flat_ground(rng, n=4000, extent=20.0, z=-1.73):
    xy = rng.uniform(-extent, extent, (n, 2))
    return np.column_stack([xy, np.full(n, z)])


def block(center, size, n, rng):
    return np.asarray(center) + (rng.random((n, 3)) - 0.5) * np.asarray(size)


def test_all_ground_is_removed(rng):
    assert remove_ground(flat_ground(rng)).shape == (0, 3)


def test_empty_frame(rng):
    assert remove_ground(np.zeros((0, 3))).shape == (0, 3)
    assert segment(Frame(0, 0.0, np.zeros((0, 3)))) == []


def test_ground_removal_keeps_object_above_margin(rng):
    ground = flat_ground(rng)
    obj = block((5, 5, -1.73 + 0.75), (1, 1, 1.5), 400, rng)
    kept = remove_ground(np.vstack([ground, obj]))
    expected = np.count_nonzero(obj[:, 2] > -1.73 + 0.3)
    assert len(kept) == expected
    assert np.all(kept[:, 2] > -1.73 + 0.3)


def test_ground_removal_handles_slope(rng):
    # piecewise constant cells follow a gentle slope
    xy = rng.uniform(-20, 20, (8000, 2))
    ground = np.column_stack([xy, 0.02 * xy[:, 0]])
    assert len(remove_ground(ground)) == 0


def test_two_blobs_two_segments(rng):
    pts = np.vstack([block((0, 0, 0), (0.2, 0.2, 0.2), 5, rng), block((10, 0, 0), (0.2, 0.2, 0.2), 5, rng)])
    assert len(cluster(pts, 0.5)) == 2


def test_single_point_cluster():
    groups = cluster(np.array([[1.0, 2.0, 3.0]]), 0.5)
    assert [g.tolist() for g in groups] == [[0]]


def test_cluster_rejects_non_positive_distance():
    with pytest.raises(ValueError):
        cluster(np.zeros((3, 3)), 0.0)


@pytest.mark.parametrize("seed", range(3))
def test_cluster_matches_union_find(seed):
    pts = np.random.default_rng(seed).uniform(0, 6, (200, 3)) * [1, 1, 0.2]
    ours = {frozenset(g.tolist()) for g in cluster(pts, 0.5)}
    assert ours == union_find_clusters(pts, 0.5)


@given(arrays(np.float64, st.tuples(st.integers(1, 80), st.just(3)), elements=st.floats(-5, 5)), st.floats(0.05, 2.0))
def test_cluster_is_partition(pts, d):
    groups = cluster(pts, d)
    flat = np.concatenate(groups)
    assert sorted(flat.tolist()) == list(range(len(pts)))


@given(
    arrays(np.float64, st.tuples(st.integers(1, 60), st.just(3)), elements=st.floats(-5, 5)),
    st.floats(0.05, 1.0),
    st.floats(1.0, 3.0),
)
def test_cluster_monotone_in_distance(pts, d, factor):
    assert len(cluster(pts, d * factor)) <= len(cluster(pts, d))


def test_fit_box_axis_aligned_rectangle():
    pts = np.array([[0, 0, 0], [2, 0, 0], [2, 1, 1], [0, 1, 1]], float)
    b = fit_box(pts)
    assert (b.x, b.y, b.z, b.l, b.w, b.h, b.theta) == pytest.approx((1, 0.5, 0.5, 2, 1, 1, 0), abs=1e-12)


def test_fit_box_rotated_rectangle():
    corners = Box(0, 0, 0, 2, 1, 1, math.radians(30)).corners_bev()
    b = fit_box(np.column_stack([corners, np.zeros(4)]))
    assert (b.l, b.w) == pytest.approx((2, 1), abs=1e-9)
    assert abs(b.theta - math.radians(30)) < 1e-6


def test_fit_box_floors_degenerate_extents():
    b = fit_box(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float))
    assert b.w == pytest.approx(0.05) and b.h == pytest.approx(0.05)
    assert b.l == pytest.approx(2.0)


@given(arrays(np.float64, st.tuples(st.integers(1, 60), st.just(3)), elements=st.floats(-20, 20)))
def test_fit_box_contains_points(pts):
    b = fit_box(pts, tie_tolerance=0.05)
    assert b.l >= b.w > 0 and b.h > 0
    assert -math.pi / 2 < b.theta <= math.pi / 2
    assert points_in_box(pts, b, tol=1e-6).all()


def _three_objects(**kw):
    # headings oblique to the line of sight so two faces are visible; a single
    # face fits a box thinner than min_w and is filtered out
    objects = [
        ObjectSpec("car", (4.5, 1.8, 1.5), 0, 1, (0, 0), (12, 4, 1.1)),
        ObjectSpec("pedestrian", (0.8, 0.6, 1.75), 0, 1, (0, 0), (8, -5, 0.2)),
        ObjectSpec("cyclist", (1.8, 0.6, 1.7), 0, 1, (0, 0), (-10, 2, -0.6)),
    ]
    return SyntheticScenario(1, objects, ground_extent=30.0, seed=2, **kw)


def test_segment_three_objects():
    ((frame, gt),) = generate_synthetic(_three_objects())
    props = segment(frame)
    assert len(props) == 3
    dists = [p.distance for p in props]
    assert dists == sorted(dists)
    for p in props:
        assert p.point_count == len(p.points) >= 10
        assert points_in_box(p.points, p.box, tol=1e-6).all()
        assert points_in_box(p.centroid[None, :], p.box, tol=1e-6)[0]


def test_segment_fits_match_ground_truth():
    from sctrack.geometry import bev_iou

    ((frame, gt),) = generate_synthetic(_three_objects())
    props = segment(frame)
    for g in gt:
        best = max(bev_iou(p.box, to_sensor(frame, g.box)) for p in props)
        assert best > 0.3


def test_long_wall_is_rejected(rng):
    wall = np.column_stack([rng.uniform(0, 50, 3000), np.full(3000, 6.0), rng.uniform(-1.4, 0.5, 3000)])
    frame = Frame(0, 0.0, np.vstack([flat_ground(rng, extent=40), wall]))
    assert segment(frame) == []


def test_region_of_interest_filter():
    ((frame, _),) = generate_synthetic(_three_objects())
    props = segment(frame, SegmentationConfig(region_of_interest_range=11.0))
    assert len(props) == 2
    assert all(p.distance <= 11.0 for p in props)


def test_config_validation():
    with pytest.raises(ValueError):
        SegmentationConfig(min_l=5, max_l=1)
    with pytest.raises(ValueError):
        SegmentationConfig(cluster_distance=0)


def _oracle_segment_count(points, cfg):
    above = remove_ground(points, cfg)
    count = 0
    for group in union_find_clusters(above, cfg.cluster_distance):
        if len(group) < cfg.min_points:
            continue
        b = fit_box(above[sorted(group)], cfg.box_tie_tolerance)
        if cfg.min_l <= b.l <= cfg.max_l and cfg.min_w <= b.w <= cfg.max_w and cfg.min_h <= b.h <= cfg.max_h:
            count += 1
    return count


@given(
    st.lists(
        st.tuples(st.floats(-15, 15), st.floats(-15, 15), st.floats(0.2, 3.0), st.floats(0.2, 2.0),
                  st.floats(0.2, 2.0), st.integers(3, 20)),
        max_size=6,
    ),
    st.integers(0, 2**16),
)
def test_segment_count_matches_brute_force(blobs, seed):
    rng = np.random.default_rng(seed)
    grid = np.stack(np.meshgrid(np.arange(-18, 19, 3.0), np.arange(-18, 19, 3.0)), -1).reshape(-1, 2)
    parts = [np.column_stack([grid, np.full(len(grid), -1.73)])]
    for x, y, l, w, h, n in blobs:
        parts.append(block((x, y, -1.73 + 0.35 + h / 2), (l, w, h), n, rng))
    pts = np.vstack(parts)
    assert len(pts) <= 300
    cfg = SegmentationConfig()
    assert len(segment(Frame(0, 0.0, pts), cfg)) == _oracle_segment_count(pts, cfg)
