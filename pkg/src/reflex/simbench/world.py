"""Time-indexed obstacle state, scene-cloud rendering, and ground-truth collision / success checks."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from reflex.geometry import PointCloud, matrix_to_quat, quat_angle, rng_stream
from reflex.kinematics import Kinematics, RobotModel, forward_kinematics, sphere_centers
from reflex.simbench.scene import Ball, Box, SceneSpec

POS_TOL = 0.01
ANG_TOL_DEG = 15.0


def active_obstacles(spec: SceneSpec, t: float, trigger: float | None = None) -> list:
    """(primitive, center, obstacle id) for everything present at time ``t`` (s).

    Static obstacles have ids 0..n_static-1, dynamic ones follow.
    """
    out = [(p, np.asarray(p.center), i) for i, p in enumerate(spec.static_obstacles)]
    base = len(spec.static_obstacles)
    for j, ob in enumerate(spec.dynamic_obstacles):
        c = ob.script.position(t, trigger)
        if c is not None:
            out.append((ob.shape, c, base + j))
    return out


def _allocate(areas: np.ndarray, n: int) -> np.ndarray:
    """Split ``n`` points proportionally to ``areas`` (largest remainder, ties to lower index)."""
    quota = n * areas / areas.sum()
    counts = np.floor(quota).astype(int)
    rest = n - counts.sum()
    order = np.lexsort((np.arange(len(areas)), -(quota - counts)))
    counts[order[:rest]] += 1
    return counts


class SceneRenderer:
    """Renders scene clouds for one (spec, n, seed).

    Each obstacle owns a fixed bank of body-frame surface samples drawn once
    from its own RNG stream; a frame takes the first k samples of every
    present obstacle (k area-proportional) and places them at the obstacle's
    current pose. Static geometry therefore renders identically frame to
    frame and moving geometry moves rigidly, like a fixed depth sensor.
    """

    def __init__(self, spec: SceneSpec, n: int = 2048, seed: int = 0, noise_sigma: float = 0.0):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.spec = spec
        self.n = int(n)
        self.seed = int(seed)
        self.noise_sigma = float(noise_sigma)
        shapes = list(spec.static_obstacles) + [ob.shape for ob in spec.dynamic_obstacles]
        self._areas = np.array([s.area() for s in shapes])
        self._banks = [s.sample_surface(rng_stream(self.seed, 0xC1, i), self.n) for i, s in enumerate(shapes)]

    def render(self, t: float, tick: int = 0, trigger: float | None = None) -> PointCloud:
        active = active_obstacles(self.spec, t, trigger)
        if not active:
            return PointCloud(np.zeros((0, 3)), tick)
        ids = np.array([i for _, _, i in active])
        counts = _allocate(self._areas[ids], self.n)
        pts = np.concatenate([self._banks[i][:k] + c for (_, c, i), k in zip(active, counts)])
        if self.noise_sigma > 0:
            pts = pts + rng_stream(self.seed, 0xC2, tick).normal(0.0, self.noise_sigma, pts.shape)
        return PointCloud(pts, tick)


def render_scene_cloud(
    spec: SceneSpec, t: float, n: int = 2048, seed: int = 0, noise_sigma: float = 0.0, trigger: float | None = None, tick: int = 0
) -> PointCloud:
    return SceneRenderer(spec, n, seed, noise_sigma).render(t, tick, trigger)


class CollisionResult(NamedTuple):
    colliding: bool
    clearance: float


def sphere_clearance(centers: np.ndarray, radii: np.ndarray, obstacles) -> float:
    """Signed minimum distance between robot spheres and obstacle primitives (inf if none)."""
    best = np.inf
    for shape, c, _ in obstacles:
        if isinstance(shape, Box):
            d = shape.signed_distance(centers, c) - radii
        elif isinstance(shape, Ball):
            d = np.linalg.norm(centers - c, axis=1) - radii - shape.radius
        else:
            raise TypeError(f"unsupported primitive {shape!r}")
        best = min(best, float(d.min()))
    return best


def check_collision(
    model: RobotModel, q, spec: SceneSpec, t: float, trigger: float | None = None, kin: Kinematics | None = None
) -> CollisionResult:
    if kin is None:
        kin = forward_kinematics(model, q)
    clr = sphere_clearance(sphere_centers(model, kin), model.sphere_radius, active_obstacles(spec, t, trigger))
    return CollisionResult(clr < 0.0, clr)


class SuccessResult(NamedTuple):
    reached: bool
    pos_err: float
    ang_err: float


def pose_error(model: RobotModel, q, goal_position, goal_quat_wxyz, kin: Kinematics | None = None) -> tuple[float, float]:
    """End-effector position error (m) and geodesic orientation error (deg)."""
    if kin is None:
        kin = forward_kinematics(model, q)
    pos_err = float(np.linalg.norm(kin.ee[:3, 3] - np.asarray(goal_position)))
    ang_err = float(np.degrees(quat_angle(matrix_to_quat(kin.ee[:3, :3]), goal_quat_wxyz)))
    return pos_err, ang_err


def check_success(model: RobotModel, q, goal_position, goal_quat_wxyz, kin: Kinematics | None = None) -> SuccessResult:
    pos_err, ang_err = pose_error(model, q, goal_position, goal_quat_wxyz, kin)
    return SuccessResult(pos_err <= POS_TOL and ang_err <= ANG_TOL_DEG, pos_err, ang_err)
