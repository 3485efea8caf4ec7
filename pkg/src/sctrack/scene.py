"""Sequence input: KITTI-format readers, planar ego transforms, and a synthetic
scene generator so experiments run without external data."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .geometry import Box, wrap_angle

CLASSES = ("background", "car", "pedestrian", "cyclist")

_KITTI_TYPES = {"Car": "car", "Pedestrian": "pedestrian", "Cyclist": "cyclist"}
_KITTI_NAMES = {"car": "Car", "pedestrian": "Pedestrian", "cyclist": "Cyclist", "background": "Misc"}

# velodyne (x fwd, y left, z up) -> camera (x right, y down, z fwd)
STANDARD_VELO_TO_CAM = np.array(
    [[0.0, -1.0, 0.0, 0.0], [0.0, 0.0, -1.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
)


class FormatError(ValueError):
    pass


class DataError(ValueError):
    pass


class LabelParseError(ValueError):
    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


@dataclass(frozen=True, eq=False)
class Frame:
    index: int
    timestamp: float
    points: np.ndarray  # (N, 3), sensor frame
    ego_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class GroundTruthObject:
    frame_index: int
    track_id: int
    class_label: str
    box: Box


# --------------------------------------------------------------------------
# planar transforms


def _pose_of(pose_or_frame) -> tuple[float, float, float]:
    if isinstance(pose_or_frame, Frame):
        return pose_or_frame.ego_pose
    return tuple(pose_or_frame)


def _apply(pose, obj, inverse: bool):
    px, py, ph = pose
    c, s = math.cos(ph), math.sin(ph)
    if isinstance(obj, GroundTruthObject):
        return replace(obj, box=_apply(pose, obj.box, inverse))
    if isinstance(obj, Box):
        x, y = _apply(pose, np.array([obj.x, obj.y]), inverse)
        dth = -ph if inverse else ph
        return Box(float(x), float(y), obj.z, obj.l, obj.w, obj.h, wrap_angle(obj.theta + dth))
    arr = np.asarray(obj, dtype=float)
    out = arr.copy()
    xy = arr[..., :2]
    if inverse:
        dx, dy = xy[..., 0] - px, xy[..., 1] - py
        out[..., 0] = c * dx + s * dy
        out[..., 1] = -s * dx + c * dy
    else:
        out[..., 0] = px + c * xy[..., 0] - s * xy[..., 1]
        out[..., 1] = py + s * xy[..., 0] + c * xy[..., 1]
    return out


def to_world(pose_or_frame, obj):
    """Map a point array, :class:`Box` or ground-truth object from sensor to world frame.

    Only x, y and heading change; z and box dimensions are kept.
    """
    return _apply(_pose_of(pose_or_frame), obj, inverse=False)


def to_sensor(pose_or_frame, obj):
    """Inverse of :func:`to_world`."""
    return _apply(_pose_of(pose_or_frame), obj, inverse=True)


# --------------------------------------------------------------------------
# KITTI readers


def read_point_cloud(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) % 16:
        raise FormatError(f"{path}: length {len(raw)} is not a multiple of 16 bytes")
    pts = np.frombuffer(raw, dtype="<f4").reshape(-1, 4)
    if not np.all(np.isfinite(pts)):
        raise DataError(f"{path}: non-finite values in point cloud")
    return pts[:, :3].astype(float)


def write_point_cloud(path, points: np.ndarray, reflectance=None) -> None:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    refl = np.zeros(len(pts)) if reflectance is None else np.asarray(reflectance, dtype=float)
    data = np.column_stack([pts, refl]).astype("<f4")
    Path(path).write_bytes(data.tobytes())


def read_calib(path) -> np.ndarray:
    """Return the 4x4 velodyne-to-(rectified)-camera transform from a KITTI calib file."""
    entries = {}
    for line in Path(path).read_text().splitlines():
        if ":" in line:
            key, vals = line.split(":", 1)
        elif line.strip():
            key, _, vals = line.strip().partition(" ")
        else:
            continue
        try:
            entries[key.strip()] = np.array([float(v) for v in vals.split()])
        except ValueError:
            continue
    tr = entries.get("Tr_velo_to_cam", entries.get("Tr_velo_cam"))
    if tr is None or tr.size != 12:
        raise FormatError(f"{path}: missing Tr_velo_to_cam (3x4)")
    m = np.eye(4)
    m[:3, :4] = tr.reshape(3, 4)
    r0 = entries.get("R0_rect", entries.get("R_rect"))
    if r0 is not None and r0.size == 9:
        rect = np.eye(4)
        rect[:3, :3] = r0.reshape(3, 3)
        m = rect @ m
    return m


def write_calib(path, velo_to_cam: np.ndarray = STANDARD_VELO_TO_CAM) -> None:
    vals = " ".join(f"{v:.12e}" for v in np.asarray(velo_to_cam)[:3, :4].ravel())
    Path(path).write_text(f"R0_rect: {' '.join(['1', '0', '0', '0', '1', '0', '0', '0', '1'])}\nTr_velo_to_cam: {vals}\n")


def read_tracking_labels(path, calib: np.ndarray) -> list[GroundTruthObject]:
    """Parse a KITTI tracking label file into sensor-frame objects.

    Types other than Car, Pedestrian and Cyclist become ``background``;
    ``DontCare`` rows are dropped.
    """
    cam_to_velo = np.linalg.inv(np.asarray(calib, dtype=float))
    objects = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) < 17:
            raise LabelParseError(path, line_no, f"expected >= 17 fields, got {len(fields)}")
        try:
            frame, track_id = int(fields[0]), int(fields[1])
            kind = fields[2]
            h, w, l, cx, cy, cz, rot_y = (float(v) for v in fields[10:17])
        except ValueError as exc:
            raise LabelParseError(path, line_no, str(exc)) from None
        if kind == "DontCare":
            continue
        if not (h > 0 and w > 0 and l > 0):
            raise LabelParseError(path, line_no, "non-positive box dimensions")
        bottom = cam_to_velo @ np.array([cx, cy, cz, 1.0])
        box = Box(
            float(bottom[0]), float(bottom[1]), float(bottom[2]) + h / 2, l, w, h,
            wrap_angle(-rot_y - math.pi / 2),
        )
        objects.append(GroundTruthObject(frame, track_id, _KITTI_TYPES.get(kind, "background"), box))
    return objects


def format_tracking_label(obj: GroundTruthObject, velo_to_cam: np.ndarray = STANDARD_VELO_TO_CAM) -> str:
    b = obj.box
    cam = np.asarray(velo_to_cam) @ np.array([b.x, b.y, b.z - b.h / 2, 1.0])
    rot_y = wrap_angle(-b.theta - math.pi / 2)
    return (
        f"{obj.frame_index} {obj.track_id} {_KITTI_NAMES[obj.class_label]} 0 0 -10 -1 -1 -1 -1 "
        f"{b.h:.6f} {b.w:.6f} {b.l:.6f} {cam[0]:.6f} {cam[1]:.6f} {cam[2]:.6f} {rot_y:.6f}"
    )


def read_poses(path) -> dict[int, tuple[float, float, float]]:
    poses = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip() == "frame":
                continue
            poses[int(row[0])] = (float(row[1]), float(row[2]), wrap_angle(float(row[3])))
    return poses


# --------------------------------------------------------------------------
# sequence directories


def _first_existing(root: Path, *candidates) -> Path | None:
    for c in candidates:
        p = root / c
        if p.is_file():
            return p
        if p.is_dir():
            files = sorted(p.glob("*.txt"))
            if files:
                return files[0]
    return None


def iter_sequence(directory) -> Iterator[tuple[Frame, list[GroundTruthObject]]]:
    """Yield ``(frame, world-frame ground truth)`` from a sequence directory.

    Layout: ``velodyne/NNNNNN.bin``, ``labels.txt`` (or ``label_02/``),
    ``calib.txt`` (or ``calib/``), optional ``poses.csv`` and ``times.txt``.
    """
    root = Path(directory)
    velo = root / "velodyne"
    if not velo.is_dir():
        raise FileNotFoundError(f"{root}: no velodyne/ directory")
    clouds = sorted(velo.glob("*.bin"))
    label_path = _first_existing(root, "labels.txt", "label_02")
    calib_path = _first_existing(root, "calib.txt", "calib")
    calib = read_calib(calib_path) if calib_path else STANDARD_VELO_TO_CAM
    gt_by_frame: dict[int, list[GroundTruthObject]] = {}
    if label_path:
        for obj in read_tracking_labels(label_path, calib):
            gt_by_frame.setdefault(obj.frame_index, []).append(obj)
    poses = read_poses(root / "poses.csv") if (root / "poses.csv").is_file() else {}
    times = None
    if (root / "times.txt").is_file():
        times = [float(t) for t in (root / "times.txt").read_text().split()]
    for path in clouds:
        idx = int(path.stem)
        pose = poses.get(idx, (0.0, 0.0, 0.0))
        ts = times[idx] if times is not None and idx < len(times) else 0.1 * idx
        try:
            pts = read_point_cloud(path)
        except ValueError as exc:
            raise type(exc)(f"frame {idx}: {exc}") from None
        frame = Frame(idx, ts, pts, pose)
        yield frame, [to_world(pose, o) for o in gt_by_frame.get(idx, [])]


def write_sequence(directory, sequence: Sequence[tuple[Frame, list[GroundTruthObject]]]) -> Path:
    """Write frames and world-frame ground truth in the layout read by :func:`iter_sequence`."""
    root = Path(directory)
    (root / "velodyne").mkdir(parents=True, exist_ok=True)
    write_calib(root / "calib.txt")
    labels, poses, times = [], ["frame,x,y,heading"], []
    for frame, gt in sequence:
        write_point_cloud(root / "velodyne" / f"{frame.index:06d}.bin", frame.points)
        for obj in gt:
            labels.append(format_tracking_label(to_sensor(frame, obj)))
        x, y, h = frame.ego_pose
        poses.append(f"{frame.index},{x!r},{y!r},{h!r}")
        times.append(repr(frame.timestamp))
    (root / "labels.txt").write_text("\n".join(labels) + ("\n" if labels else ""))
    (root / "poses.csv").write_text("\n".join(poses) + "\n")
    (root / "times.txt").write_text("\n".join(times) + "\n")
    return root


# --------------------------------------------------------------------------
# synthetic scenes


@dataclass
class ObjectSpec:
    class_label: str
    size: tuple[float, float, float]  # l, w, h
    spawn_frame: int
    despawn_frame: int
    velocity: tuple[float, float] = (0.0, 0.0)  # world frame, m/s
    pose: tuple[float, float, float] = (10.0, 0.0, 0.0)  # x, y, heading at spawn

    def __post_init__(self):
        self.size = tuple(float(v) for v in self.size)
        self.velocity = tuple(float(v) for v in self.velocity)
        self.pose = tuple(float(v) for v in self.pose)
        if self.class_label not in CLASSES:
            raise ValueError(f"unknown class {self.class_label!r}")
        if self.despawn_frame <= self.spawn_frame:
            raise ValueError("despawn_frame must be greater than spawn_frame")
        if min(self.size) <= 0:
            raise ValueError("object size must be positive")


@dataclass
class SyntheticScenario:
    duration_frames: int
    objects: list[ObjectSpec] = field(default_factory=list)
    ground_extent: float = 40.0  # half-width of the square ground patch, m
    ground_density: float = 2.0  # ground points per m^2
    object_density: float = 6000.0  # points on a 1 m^2 face, facing the sensor at 1 m
    max_object_points: int = 1500
    sensor_range: float = 60.0
    sensor_height: float = 1.73
    noise_std: float = 0.02
    frame_interval: float = 0.1
    ego_velocity: tuple[float, float] = (0.0, 0.0)
    ego_heading: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.objects = [o if isinstance(o, ObjectSpec) else ObjectSpec(**o) for o in self.objects]
        self.ego_velocity = tuple(float(v) for v in self.ego_velocity)
        if self.sensor_range <= 0:
            raise ValueError("sensor_range must be positive")
        if self.duration_frames < 0:
            raise ValueError("duration_frames must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticScenario":
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "SyntheticScenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def object_box(spec: ObjectSpec, frame_index: int, scenario: SyntheticScenario) -> Box:
    """World-frame box of ``spec`` at ``frame_index``; base sits on the ground."""
    t = (frame_index - spec.spawn_frame) * scenario.frame_interval
    l, w, h = spec.size
    x0, y0, heading = spec.pose
    ground_z = -scenario.sensor_height  # world z shares the sensor's vertical datum
    return Box(x0 + spec.velocity[0] * t, y0 + spec.velocity[1] * t, ground_z + h / 2, l, w, h, wrap_angle(heading))


def _faces(box: Box):
    """Yield (center, normal, axis1, axis2) for the four sides and the top; axes are half-extents."""
    c, s = math.cos(box.theta), math.sin(box.theta)
    fwd = np.array([c, s, 0.0])
    left = np.array([-s, c, 0.0])
    up = np.array([0.0, 0.0, 1.0])
    center = np.array([box.x, box.y, box.z])
    hl, hw, hh = box.l / 2, box.w / 2, box.h / 2
    for sign in (1.0, -1.0):
        yield center + sign * hl * fwd, sign * fwd, hw * left, hh * up
        yield center + sign * hw * left, sign * left, hl * fwd, hh * up
    yield center + hh * up, up, hl * fwd, hw * left


def render_object(box: Box, scenario: SyntheticScenario, rng: np.random.Generator) -> np.ndarray:
    """Sample points on the faces of a sensor-frame box that face the sensor.

    Expected count per face is ``density * area * cos(incidence) / range^2``,
    rounded stochastically and capped at ``max_object_points`` overall.
    """
    faces, expected = [], []
    for center, normal, a1, a2 in _faces(box):
        dist = float(np.linalg.norm(center))
        cos_inc = float(np.dot(normal, -center)) / max(dist, 1e-9)
        if cos_inc <= 0:
            continue
        area = 4.0 * np.linalg.norm(a1) * np.linalg.norm(a2)
        faces.append((center, a1, a2))
        expected.append(scenario.object_density * area * cos_inc / max(dist, 1.0) ** 2)
    expected = np.array(expected)
    total = expected.sum()
    if total > scenario.max_object_points:
        expected *= scenario.max_object_points / total
    counts = np.floor(expected + rng.random(len(expected))).astype(int)
    if counts.sum() == 0:
        counts[int(np.argmax(expected))] = 1
    chunks = []
    for (center, a1, a2), n in zip(faces, counts):
        uv = rng.uniform(-1.0, 1.0, size=(n, 2))
        chunks.append(center + uv[:, :1] * a1 + uv[:, 1:] * a2)
    return np.concatenate(chunks, axis=0)


def ego_pose_at(scenario: SyntheticScenario, frame_index: int) -> tuple[float, float, float]:
    t = frame_index * scenario.frame_interval
    vx, vy = scenario.ego_velocity
    return (vx * t, vy * t, wrap_angle(scenario.ego_heading))


def iter_synthetic(scenario: SyntheticScenario) -> Iterator[tuple[Frame, list[GroundTruthObject]]]:
    """Lazily render the scenario; see :func:`generate_synthetic`."""
    rng = np.random.default_rng(scenario.seed)
    side = 2.0 * scenario.ground_extent
    n_ground = int(round(scenario.ground_density * side * side))
    for k in range(scenario.duration_frames):
        pose = ego_pose_at(scenario, k)
        ground = np.column_stack(
            [
                rng.uniform(-scenario.ground_extent, scenario.ground_extent, size=(n_ground, 2)),
                np.full(n_ground, -scenario.sensor_height),
            ]
        )
        ground = ground[np.hypot(ground[:, 0], ground[:, 1]) <= scenario.sensor_range]
        chunks = [ground]
        gt = []
        for track_id, spec in enumerate(scenario.objects):
            if not (spec.spawn_frame <= k < spec.despawn_frame):
                continue
            world_box = object_box(spec, k, scenario)
            gt.append(GroundTruthObject(k, track_id, spec.class_label, world_box))
            local = to_sensor(pose, world_box)
            if math.hypot(local.x, local.y) > scenario.sensor_range:
                continue
            chunks.append(render_object(local, scenario, rng))
        points = np.concatenate(chunks, axis=0)
        if scenario.noise_std > 0:
            points = points + rng.normal(0.0, scenario.noise_std, size=points.shape)
        yield Frame(k, k * scenario.frame_interval, points, pose), gt


def generate_synthetic(scenario: SyntheticScenario) -> list[tuple[Frame, list[GroundTruthObject]]]:
    """Render every frame of ``scenario`` as ``(Frame, world-frame ground truth)``.

    Deterministic for a given seed. Objects past ``sensor_range`` keep their
    ground-truth entry but emit no points.
    """
    return list(iter_synthetic(scenario))


def load_source(source) -> Iterator[tuple[Frame, list[GroundTruthObject]]]:
    """Open a sequence from a directory, a scenario JSON path, or a scenario object."""
    if isinstance(source, SyntheticScenario):
        return iter_synthetic(source)
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        if path.is_dir():
            return iter_sequence(path)
        if path.suffix == ".json":
            return iter_synthetic(SyntheticScenario.from_json(path))
        raise FileNotFoundError(f"{path}: not a sequence directory or scenario JSON")
    return iter(source)
