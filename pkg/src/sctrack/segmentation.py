"""Class-agnostic proposal generation: ground removal, Euclidean clustering,
size filtering and minimum-area box fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry import Box, min_area_rect
from .scene import Frame, to_world

MIN_EXTENT = 0.05


@dataclass(frozen=True)
class SegmentationConfig:
    ground_cell_size: float = 4.0
    ground_margin: float = 0.3
    ground_percentile: float = 5.0
    cluster_distance: float = 0.5
    min_points: int = 10
    box_tie_tolerance: float = 0.05
    min_l: float = 0.2
    max_l: float = 12.0
    min_w: float = 0.2
    max_w: float = 6.0
    min_h: float = 0.3
    max_h: float = 3.5
    region_of_interest_range: float = 70.0

    def __post_init__(self):
        for name in ("ground_cell_size", "ground_margin", "cluster_distance", "region_of_interest_range"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.min_points < 1:
            raise ValueError("min_points must be >= 1")
        for lo, hi in (("min_l", "max_l"), ("min_w", "max_w"), ("min_h", "max_h")):
            if not 0 < getattr(self, lo) < getattr(self, hi):
                raise ValueError(f"need 0 < {lo} < {hi}")


@dataclass(frozen=True, eq=False)
class Proposal:
    box: Box
    centroid: np.ndarray
    point_count: int
    points: np.ndarray

    @property
    def distance(self) -> float:
        """BEV range of the box centre from the sensor origin."""
        return math.hypot(self.box.x, self.box.y)


def proposal_to_world(pose_or_frame, proposal: Proposal) -> Proposal:
    return replace(
        proposal,
        box=to_world(pose_or_frame, proposal.box),
        centroid=to_world(pose_or_frame, proposal.centroid),
        points=to_world(pose_or_frame, proposal.points),
    )


def ground_heights(points: np.ndarray, config: SegmentationConfig):
    """Per-point ground height from a constant plane per BEV cell.

    The plane height of a cell is a low percentile of the z values in it,
    which tolerates object points sharing the cell.
    """
    cells = np.floor(points[:, :2] / config.ground_cell_size).astype(np.int64)
    _, cell_id = np.unique(cells, axis=0, return_inverse=True)
    cell_id = cell_id.ravel()
    order = np.lexsort((points[:, 2], cell_id))
    sorted_ids = cell_id[order]
    starts = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
    counts = np.diff(np.r_[starts, len(order)])
    rank = np.floor(config.ground_percentile / 100.0 * (counts - 1)).astype(np.int64)
    heights = points[order[starts + rank], 2]
    return heights[cell_id]


def remove_ground(points, config: SegmentationConfig = SegmentationConfig()) -> np.ndarray:
    """Drop points at or below their cell's ground height plus ``ground_margin``."""
    if isinstance(points, Frame):
        points = points.points
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return pts
    keep = pts[:, 2] > ground_heights(pts, config) + config.ground_margin
    return pts[keep]


def cluster(points: np.ndarray, cluster_distance: float) -> list[np.ndarray]:
    """Single-linkage Euclidean clustering.

    Two points share a segment iff a chain of points with consecutive gaps
    ``<= cluster_distance`` joins them. Segments are ordered by their
    smallest member index.
    """
    if cluster_distance <= 0:
        raise ValueError("cluster_distance must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        return []
    pairs = cKDTree(pts).query_pairs(cluster_distance, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    order = np.argsort(labels, kind="stable")
    splits = np.flatnonzero(np.diff(labels[order])) + 1
    groups = np.split(order, splits)
    return sorted(groups, key=lambda g: int(g[0]))


def fit_box(points: np.ndarray, tie_tolerance: float = 0.0) -> Box:
    """Minimum-area oriented box of the BEV projection, heights from z extremes.

    Degenerate (collinear or single-point) extents are floored at 5 cm. See
    :func:`min_area_rect` for ``tie_tolerance``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("fit_box needs at least one point")
    cx, cy, length, width, theta = min_area_rect(pts[:, :2], tie_tolerance)
    zmin, zmax = float(pts[:, 2].min()), float(pts[:, 2].max())
    return Box(
        cx, cy, 0.5 * (zmin + zmax),
        max(length, MIN_EXTENT), max(width, MIN_EXTENT), max(zmax - zmin, MIN_EXTENT),
        theta,
    )


def _within_bounds(box: Box, config: SegmentationConfig) -> bool:
    return (
        config.min_l <= box.l <= config.max_l
        and config.min_w <= box.w <= config.max_w
        and config.min_h <= box.h <= config.max_h
    )


def segment(frame: Frame | np.ndarray, config: SegmentationConfig = SegmentationConfig()) -> list[Proposal]:
    """Run ground removal, clustering, filtering and box fitting on one frame.

    Proposals are sensor-frame and sorted by distance to the sensor.
    """
    points = frame.points if isinstance(frame, Frame) else np.asarray(frame, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        return []
    obstacles = remove_ground(points, config)
    proposals = []
    for idx in cluster(obstacles, config.cluster_distance):
        if len(idx) < config.min_points:
            continue
        member = obstacles[idx]
        box = fit_box(member, config.box_tie_tolerance)
        if not _within_bounds(box, config):
            continue
        if math.hypot(box.x, box.y) > config.region_of_interest_range:
            continue
        proposals.append(Proposal(box, member.mean(axis=0), len(idx), member))
    proposals.sort(key=lambda p: p.distance)
    return proposals
