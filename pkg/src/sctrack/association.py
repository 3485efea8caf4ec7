"""Proposal-to-track data association.

The assignment cost of proposal ``i`` and track ``j`` is

    C_ij = alpha * (1 - I_ij) - beta * N_ij - gamma * S_ij

with ``I`` the BEV IoU, ``N = -|count_i - count_j|`` and
``S = -|volume_i - volume_j|``. An optimal assignment is found with the
Hungarian algorithm and pairs costing more than ``t_da`` are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import bev_iou

__all__ = [
    "AssociationConfig",
    "AssociationResult",
    "CostBreakdown",
    "associate",
    "bev_iou",
    "cost",
    "cost_matrix",
    "hungarian",
]


@dataclass(frozen=True)
class AssociationConfig:
    alpha: float = 2.0
    beta: float = 0.01
    gamma: float = 0.1
    t_da: float = 0.95

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("association weights must be non-negative")


@dataclass(frozen=True)
class CostBreakdown:
    iou: float
    count_term: float
    size_term: float
    total: float


@dataclass
class AssociationResult:
    matches: list = field(default_factory=list)  # (proposal_idx, track_idx, CostBreakdown)
    unmatched_proposals: list = field(default_factory=list)
    unmatched_tracks: list = field(default_factory=list)

    def pairs(self) -> set:
        return {(i, j) for i, j, _ in self.matches}


def cost(proposal, track, config: AssociationConfig = AssociationConfig()) -> CostBreakdown:
    """Three-term cost between anything exposing ``box`` and ``point_count``."""
    iou = bev_iou(proposal.box, track.box)
    n = -abs(proposal.point_count - track.point_count)
    s = -abs(proposal.box.volume - track.box.volume)
    total = config.alpha * (1.0 - iou) - config.beta * n - config.gamma * s
    return CostBreakdown(iou, n, s, total)


def cost_matrix(proposals: Sequence, tracks: Sequence, config: AssociationConfig = AssociationConfig()):
    """Return the cost matrix and the per-cell breakdowns."""
    breakdown = [[cost(p, t, config) for t in tracks] for p in proposals]
    matrix = np.array([[b.total for b in row] for row in breakdown], dtype=float).reshape(len(proposals), len(tracks))
    return matrix, breakdown


def _hungarian_square(c: np.ndarray) -> np.ndarray:
    """Shortest augmenting path Hungarian method, O(n^3). Returns column for each row."""
    n = c.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j]: row matched to column j (1-based, 0 = free)
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = c[i0 - 1] - u[i0] - v[1:]
            cols = np.flatnonzero(free) + 1
            better = cur[cols - 1] < minv[cols]
            minv[cols[better]] = cur[cols - 1][better]
            way[cols[better]] = j0
            j1 = cols[np.argmin(minv[cols])]
            delta = minv[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assignment = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        assignment[p[j] - 1] = j - 1
    return assignment


def hungarian(cost_matrix) -> list[tuple[int, int]]:
    """Minimum-cost assignment for a rectangular matrix.

    Returns ``min(rows, cols)`` ``(row, col)`` pairs sorted by row. The matrix
    is padded to square with a constant above every real entry; padded pairs
    are dropped.
    """
    c = np.asarray(cost_matrix, dtype=float)
    if c.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    rows, cols = c.shape
    if rows == 0 or cols == 0:
        return []
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix entries must be finite")
    n = max(rows, cols)
    sentinel = float(np.abs(c).max()) * 2.0 + 1.0
    square = np.full((n, n), sentinel)
    square[:rows, :cols] = c
    assignment = _hungarian_square(square)
    return [(i, int(j)) for i, j in enumerate(assignment) if i < rows and j < cols]


def associate(proposals: Sequence, tracks: Sequence, config: AssociationConfig = AssociationConfig()) -> AssociationResult:
    """Optimal assignment of proposals to (already predicted) tracks, gated by ``t_da``."""
    result = AssociationResult()
    if not proposals or not tracks:
        result.unmatched_proposals = list(range(len(proposals)))
        result.unmatched_tracks = list(range(len(tracks)))
        return result
    matrix, breakdown = cost_matrix(proposals, tracks, config)
    matched_p, matched_t = set(), set()
    for i, j in hungarian(matrix):
        if matrix[i, j] <= config.t_da:
            result.matches.append((i, j, breakdown[i][j]))
            matched_p.add(i)
            matched_t.add(j)
    result.unmatched_proposals = [i for i in range(len(proposals)) if i not in matched_p]
    result.unmatched_tracks = [j for j in range(len(tracks)) if j not in matched_t]
    return result
