"""Ready-made synthetic scenarios used by the tests, scripts and CLI examples."""

from __future__ import annotations

import math

import numpy as np

from .scene import ObjectSpec, SyntheticScenario

SIZES = {
    "car": (4.5, 1.8, 1.5),
    "pedestrian": (0.8, 0.6, 1.75),
    "cyclist": (1.8, 0.6, 1.7),
}
SPEEDS = {"car": (6.0, 12.0), "pedestrian": (0.8, 1.6), "cyclist": (3.0, 6.0), "background": (0.0, 0.0)}
BACKGROUND_SIZES = [(0.35, 0.3, 2.6), (1.6, 1.0, 1.1), (3.0, 0.5, 1.2), (0.9, 0.9, 0.9)]

# Noisy oracle whose confidence fades to uniform between 10 m and 30 m.
DECAYING_ORACLE = {"type": "noisy", "peak": 0.35, "distance_decay": 0.05, "reference_range": 10.0}


def lifespan_scenario(lifespan: int, n_objects: int = 8, seed: int = 0) -> SyntheticScenario:
    """``n_objects`` static objects on a ring, each alive for exactly ``lifespan`` frames, staggered."""
    classes = ["car", "pedestrian", "cyclist", "background"]
    objects = []
    for k in range(n_objects):
        ang = 2 * math.pi * k / n_objects
        cls = classes[k % len(classes)]
        size = SIZES.get(cls, BACKGROUND_SIZES[0])
        spawn = 2 * k
        objects.append(
            ObjectSpec(cls, size, spawn, spawn + lifespan, (0.0, 0.0), (15 * math.cos(ang), 15 * math.sin(ang), ang + 0.6))
        )
    return SyntheticScenario(
        duration_frames=2 * n_objects + lifespan + 5, objects=objects, ground_extent=20.0, seed=seed
    )


def crossing_scenario(seed: int = 0, duration: int = 40) -> SyntheticScenario:
    """Two pedestrians walking towards each other past the sensor on parallel, close paths."""
    rng = np.random.default_rng(seed)
    y0 = 8.0 + rng.uniform(-1, 1)
    gap = 1.6 + rng.uniform(0, 0.4)
    speed = rng.uniform(1.0, 1.6)
    start = speed * duration * 0.1 / 2
    objects = [
        ObjectSpec("pedestrian", SIZES["pedestrian"], 0, duration, (speed, 0.0), (6 - start, y0, 0.0)),
        ObjectSpec("pedestrian", SIZES["pedestrian"], 0, duration, (-speed, 0.0), (6 + start, y0 + gap, math.pi)),
    ]
    return SyntheticScenario(duration_frames=duration, objects=objects, ground_extent=20.0, seed=seed)


def range_scenario(seed: int = 0, n_objects: int = 10, duration: int = 200) -> SyntheticScenario:
    """Long-lived objects driving past a static sensor along lanes close to it."""
    rng = np.random.default_rng(seed)
    objects = []
    for k in range(n_objects):
        cls = ["car", "cyclist"][k % 2]
        lo, hi = SPEEDS[cls]
        speed = rng.uniform(lo, hi) * (1 if k % 4 < 2 else -1)
        lane = (3.0 + 2.5 * (k % 3)) * (1 if speed > 0 else -1)
        spawn = int(rng.integers(0, duration // 4))
        x0 = -75.0 if speed > 0 else 75.0
        objects.append(ObjectSpec(cls, SIZES[cls], spawn, duration, (speed, 0.0), (x0, lane, 0.0 if speed > 0 else math.pi)))
    return SyntheticScenario(
        duration_frames=duration, objects=objects, ground_extent=75.0, ground_density=0.3,
        sensor_range=80.0, seed=seed,
    )


def benchmark_scenario(seed: int = 0, duration: int = 100) -> SyntheticScenario:
    """Urban-like drive for accuracy runs.

    The ego moves slowly along +x past parked cars, same-direction traffic,
    a bike lane, pedestrians on the sidewalks and static clutter, so relative
    motion stays moderate and frame-to-frame point counts change gradually.
    """
    rng = np.random.default_rng(seed)
    ego_speed = 2.0

    def parked():
        return -rng.uniform(9.0, 11.0), 0.0, 0.0

    def moving():
        return rng.uniform(4.5, 6.0), ego_speed + rng.uniform(-1.5, 1.5), 0.0

    def cyclist():
        return -rng.uniform(3.5, 4.5), rng.uniform(1.5, 3.5), 0.0

    def walker():
        heading = rng.choice([0.0, math.pi]) if rng.random() < 0.7 else rng.uniform(-math.pi, math.pi)
        return rng.choice([-1.0, 1.0]) * rng.uniform(12.0, 16.0), rng.uniform(0.5, 1.3), heading

    def clutter():
        return rng.choice([-1.0, 1.0]) * rng.uniform(12.0, 18.0), 0.0, rng.uniform(-math.pi, math.pi)

    plan = [("car", parked, 3), ("car", moving, 3), ("cyclist", cyclist, 5), ("pedestrian", walker, 8), ("background", clutter, 10)]
    placed: list[tuple[np.ndarray, np.ndarray, float]] = []
    objects = []
    for cls, draw, n in plan:
        k = tries = 0
        while k < n:
            tries += 1
            if tries > 10_000:
                raise RuntimeError(f"cannot place {n} {cls} objects without overlap")
            lateral, speed, heading = draw()
            x0 = rng.uniform(0.0, 35.0)
            vel = np.array([speed * math.cos(heading), speed * math.sin(heading)])
            size = SIZES[cls] if cls != "background" else BACKGROUND_SIZES[int(rng.integers(len(BACKGROUND_SIZES)))]
            pos = np.array([x0, lateral])
            radius = 0.5 * math.hypot(size[0], size[1])
            if any(_min_gap(pos, vel, p, v, duration) < radius + r + 1.0 for p, v, r in placed):
                continue
            placed.append((pos, vel, radius))
            objects.append(ObjectSpec(cls, size, 0, duration, tuple(vel), (x0, lateral, heading)))
            k += 1
    return SyntheticScenario(
        duration_frames=duration, objects=objects, ground_extent=45.0, ground_density=1.0,
        object_density=15000.0, sensor_range=45.0, ego_velocity=(ego_speed, 0.0), seed=seed,
    )


def _min_gap(p1, v1, p2, v2, duration, dt=0.1) -> float:
    t = np.arange(duration) * dt
    d = (p1 - p2)[None, :] + (v1 - v2)[None, :] * t[:, None]
    return float(np.min(np.hypot(d[:, 0], d[:, 1])))
