"""Planar geometry shared by segmentation, association and evaluation.

Boxes are oriented 3D boxes ``(x, y, z, l, w, h, theta)`` whose footprint is
a rectangle in the x-y plane (bird's-eye view, BEV). ``theta`` is the
direction of the ``l`` side measured from the x axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def wrap_half_pi(a: float) -> float:
    """Wrap an angle to (-pi/2, pi/2]; used for boxes with 180 degree symmetry."""
    return math.pi / 2 - (math.pi / 2 - a) % math.pi


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    z: float
    l: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        if not (self.l > 0 and self.w > 0 and self.h > 0):
            raise ValueError(f"box dimensions must be positive, got {self.l}, {self.w}, {self.h}")

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h

    @property
    def area_bev(self) -> float:
        return self.l * self.w

    @property
    def center_bev(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def corners_bev(self) -> np.ndarray:
        """Footprint corners, counter-clockwise, shape (4, 2)."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        hl, hw = self.l / 2, self.w / 2
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.x, self.y])

    def translated(self, dx: float, dy: float) -> "Box":
        return Box(self.x + dx, self.y + dy, self.z, self.l, self.w, self.h, self.theta)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.l, self.w, self.h, self.theta])

    @classmethod
    def from_array(cls, a) -> "Box":
        return cls(*(float(v) for v in a))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain. Returns CCW hull vertices without repeats.

    Collinear inputs give the two extreme points; a single point gives itself.
    """
    pts = np.unique(np.asarray(points, dtype=float)[:, :2], axis=0)
    if len(pts) <= 2:
        return pts
    pts = [tuple(p) for p in pts]  # np.unique already sorts lexicographically
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def min_area_rect(points: np.ndarray, tie_tolerance: float = 0.0) -> tuple[float, float, float, float, float]:
    """Minimum-area enclosing rectangle via rotating calipers over hull edges.

    Returns ``(cx, cy, length, width, theta)`` with ``length >= width`` and
    ``theta`` the direction of the long side in (-pi/2, pi/2].

    With ``tie_tolerance > 0``, every hull-edge rectangle whose area is within
    that relative margin of the minimum competes, and the one whose edges the
    points hug most closely wins. An L-shaped scan of two box faces has a
    triangular hull, for which the leg- and hypotenuse-aligned rectangles
    have the same area; only the former is the object.
    """
    pts = np.asarray(points, dtype=float)[:, :2]
    hull = convex_hull(pts)
    if len(hull) == 1:
        return float(hull[0, 0]), float(hull[0, 1]), 0.0, 0.0, 0.0
    if len(hull) == 2:
        d = hull[1] - hull[0]
        mid = hull.mean(axis=0)
        return float(mid[0]), float(mid[1]), float(np.hypot(*d)), 0.0, wrap_half_pi(math.atan2(d[1], d[0]))

    edges = np.roll(hull, -1, axis=0) - hull
    angles = np.arctan2(edges[:, 1], edges[:, 0])
    u = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    v = np.stack([-u[:, 1], u[:, 0]], axis=1)
    pu = hull @ u.T  # (n_pts, n_edges)
    pv = hull @ v.T
    ext_u = pu.max(axis=0) - pu.min(axis=0)
    ext_v = pv.max(axis=0) - pv.min(axis=0)
    areas = ext_u * ext_v
    k = int(np.argmin(areas))
    if tie_tolerance > 0:
        candidates = np.flatnonzero(areas <= areas[k] * (1.0 + tie_tolerance))
        if len(candidates) > 1:
            qu, qv = pts @ u[candidates].T, pts @ v[candidates].T
            gap = np.minimum(
                np.minimum(qu - pu[:, candidates].min(axis=0), pu[:, candidates].max(axis=0) - qu),
                np.minimum(qv - pv[:, candidates].min(axis=0), pv[:, candidates].max(axis=0) - qv),
            )
            k = int(candidates[np.argmin(gap.mean(axis=0))])
    mu = 0.5 * (pu[:, k].max() + pu[:, k].min())
    mv = 0.5 * (pv[:, k].max() + pv[:, k].min())
    center = mu * u[k] + mv * v[k]
    if ext_u[k] >= ext_v[k]:
        length, width, theta = ext_u[k], ext_v[k], angles[k]
    else:
        length, width, theta = ext_v[k], ext_u[k], angles[k] + math.pi / 2
    return float(center[0]), float(center[1]), float(length), float(width), wrap_half_pi(float(theta))


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area; positive for CCW polygons."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clipping of ``subject`` by the convex CCW polygon ``clip``."""
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        a, b = clip[i], clip[(i + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]

        def side(p):
            return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

        inp, output = output, []
        prev = inp[-1]
        s_prev = side(prev)
        for cur in inp:
            s_cur = side(cur)
            if s_cur >= 0:
                if s_prev < 0:
                    t = s_prev / (s_prev - s_cur)
                    output.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
                output.append(cur)
            elif s_prev >= 0:
                t = s_prev / (s_prev - s_cur)
                output.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            prev, s_prev = cur, s_cur
    return np.array(output, dtype=float).reshape(-1, 2)


def bev_iou(a: Box, b: Box) -> float:
    """Intersection over union of the two oriented footprints."""
    area_a, area_b = a.area_bev, b.area_bev
    if area_a <= 0 or area_b <= 0:
        return 0.0
    # cheap reject on circumscribed circles
    r = 0.5 * (math.hypot(a.l, a.w) + math.hypot(b.l, b.w))
    if (a.x - b.x) ** 2 + (a.y - b.y) ** 2 > r * r:
        return 0.0
    inter = max(polygon_area(clip_convex(a.corners_bev(), b.corners_bev())), 0.0)
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def points_in_box(points: np.ndarray, box: Box, tol: float = 0.0) -> np.ndarray:
    """Boolean mask of points (N, 3) inside ``box`` grown by ``tol`` on every side."""
    pts = np.asarray(points, dtype=float)
    c, s = math.cos(box.theta), math.sin(box.theta)
    dx, dy = pts[:, 0] - box.x, pts[:, 1] - box.y
    lu = c * dx + s * dy
    lv = -s * dx + c * dy
    return (
        (np.abs(lu) <= box.l / 2 + tol)
        & (np.abs(lv) <= box.w / 2 + tol)
        & (np.abs(pts[:, 2] - box.z) <= box.h / 2 + tol)
    )
