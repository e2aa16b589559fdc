"""Scene description: primitive obstacles, motion scripts and the serialisable SceneSpec."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from reflex.errors import RejectedInput
from reflex.geometry import uniform_sphere_dirs

FAMILIES = ("SE", "SAO", "FDO", "GB", "DGB")


def _vec(v, n=3) -> tuple:
    arr = np.asarray(v, dtype=float).reshape(n)
    if not np.all(np.isfinite(arr)):
        raise RejectedInput("non-finite coordinate")
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its center and half extents."""

    center: tuple
    half: tuple

    kind = "box"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "half", _vec(self.half))
        if min(self.half) <= 0:
            raise RejectedInput("box half extents must be positive")

    def area(self) -> float:
        a, b, c = (2 * h for h in self.half)
        return 2 * (a * b + b * c + a * c)

    def sample_surface(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` area-uniform offsets from the center, on the box surface."""
        h = np.array(self.half)
        face_area = np.array([h[1] * h[2], h[1] * h[2], h[0] * h[2], h[0] * h[2], h[0] * h[1], h[0] * h[1]])
        face = rng.choice(6, size=n, p=face_area / face_area.sum())
        u = rng.uniform(-1.0, 1.0, size=(n, 3)) * h
        axis = face // 2
        sign = np.where(face % 2 == 0, -1.0, 1.0)
        u[np.arange(n), axis] = sign * h[axis]
        return u

    def signed_distance(self, x: np.ndarray, center=None) -> np.ndarray:
        c = np.asarray(self.center if center is None else center)
        h = np.array(self.half)
        d = np.abs(np.asarray(x) - c) - h
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(np.max(d, axis=-1), 0.0)
        return outside + inside

    def to_dict(self) -> dict:
        return {"kind": "box", "center": list(self.center), "half": list(self.half)}


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    kind = "sphere"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        if not self.radius > 0:
            raise RejectedInput("sphere radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    def area(self) -> float:
        return 4.0 * np.pi * self.radius**2

    def sample_surface(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.radius * uniform_sphere_dirs(rng, n)

    def signed_distance(self, x: np.ndarray, center=None) -> np.ndarray:
        c = np.asarray(self.center if center is None else center)
        return np.linalg.norm(np.asarray(x) - c, axis=-1) - self.radius

    def to_dict(self) -> dict:
        return {"kind": "sphere", "center": list(self.center), "radius": self.radius}


def primitive_from_dict(d: dict):
    if d["kind"] == "box":
        return Box(d["center"], d["half"])
    if d["kind"] == "sphere":
        return Ball(d["center"], d["radius"])
    raise RejectedInput(f"unknown primitive kind {d['kind']!r}")


SCRIPT_KINDS = ("appear", "random_waypoints", "goal_block", "post_goal_approach")


@dataclass(frozen=True)
class MotionScript:
    """How a dynamic obstacle's center evolves; times in seconds.

    appear             -- hidden until ``t_appear``, then static at ``pose``.
    random_waypoints   -- starts at ``waypoints[0]`` at ``t_start`` and visits the
                          rest in order at constant ``speed``, then stays put.
                          ``waypoints`` are drawn from ``region`` with
                          ``resample_seed`` at generation time and stored.
    goal_block         -- present at ``pose`` during [t_block, t_unblock).
    post_goal_approach -- hidden until ``delay`` seconds after the robot first
                          reaches its goal, then moves from ``start`` with
                          constant ``velocity`` for ``duration`` and stops.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCRIPT_KINDS:
            raise RejectedInput(f"unknown motion script kind {self.kind!r}")
        p = self.params
        for key in ("t_appear", "t_block", "t_unblock", "delay", "duration", "t_start"):
            if key in p and p[key] < 0:
                raise RejectedInput(f"{key} must be >= 0")
        if p.get("speed", 0.0) < 0:
            raise RejectedInput("speed must be >= 0")
        if self.kind == "random_waypoints":
            wps = np.asarray(p["waypoints"], dtype=float)
            lo, hi = np.asarray(p["region"], dtype=float)
            if np.any(wps[1:-1] < lo - 1e-12) or np.any(wps[1:-1] > hi + 1e-12):
                raise RejectedInput("interior waypoints must lie inside the region")
            if len(wps) < 2:
                raise RejectedInput("random_waypoints needs at least two waypoints")
            legs = np.linalg.norm(np.diff(wps, axis=0), axis=1)
            object.__setattr__(self, "_legs", legs)

    def position(self, t: float, trigger: float | None = None):
        """Center at time ``t`` (s), or None while the obstacle is absent.

        ``trigger`` is the time the robot first reached its goal, if it has.
        """
        p = self.params
        if self.kind == "appear":
            return np.asarray(p["pose"], dtype=float) if t >= p["t_appear"] else None
        if self.kind == "goal_block":
            return np.asarray(p["pose"], dtype=float) if p["t_block"] <= t < p["t_unblock"] else None
        if self.kind == "post_goal_approach":
            if trigger is None or t < trigger + p["delay"]:
                return None
            tau = min(t - trigger - p["delay"], p["duration"])
            return np.asarray(p["start"], dtype=float) + tau * np.asarray(p["velocity"], dtype=float)
        wps = np.asarray(p["waypoints"], dtype=float)
        if p["speed"] == 0:
            return wps[0]
        s = max(t - p.get("t_start", 0.0), 0.0) * p["speed"]
        for i, leg in enumerate(self._legs):
            if s <= leg:
                return wps[i] + (wps[i + 1] - wps[i]) * (s / leg if leg > 0 else 0.0)
            s -= leg
        return wps[-1]

    def motion_end(self) -> float:
        """Time after which the script never changes again (inf if it waits on a trigger)."""
        p = self.params
        if self.kind == "appear":
            return p["t_appear"]
        if self.kind == "goal_block":
            return p["t_unblock"]
        if self.kind == "post_goal_approach":
            return float("inf")
        if p["speed"] == 0:
            return 0.0
        return p.get("t_start", 0.0) + float(np.sum(self._legs)) / p["speed"]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": _jsonable(self.params)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


@dataclass(frozen=True)
class DynamicObstacle:
    shape: Box | Ball
    script: MotionScript

    def to_dict(self) -> dict:
        return {"shape": self.shape.to_dict(), "script": self.script.to_dict()}


@dataclass(frozen=True, eq=False)
class SceneSpec:
    family: str
    seed: int
    static_obstacles: tuple
    dynamic_obstacles: tuple
    q_start: tuple
    q_g: tuple
    goal_position: tuple
    goal_quat_wxyz: tuple

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise RejectedInput(f"unknown family {self.family!r}")
        object.__setattr__(self, "static_obstacles", tuple(self.static_obstacles))
        object.__setattr__(self, "dynamic_obstacles", tuple(self.dynamic_obstacles))
        object.__setattr__(self, "q_start", _vec(self.q_start, 7))
        object.__setattr__(self, "q_g", _vec(self.q_g, 7))
        object.__setattr__(self, "goal_position", _vec(self.goal_position))
        object.__setattr__(self, "goal_quat_wxyz", _vec(self.goal_quat_wxyz, 4))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "seed": self.seed,
            "q_start": list(self.q_start),
            "q_g": list(self.q_g),
            "goal_pose": {"position": list(self.goal_position), "quat_wxyz": list(self.goal_quat_wxyz)},
            "static_obstacles": [o.to_dict() for o in self.static_obstacles],
            "dynamic_obstacles": [o.to_dict() for o in self.dynamic_obstacles],
        }

    @classmethod
    def from_dict(cls, d: dict) -> SceneSpec:
        try:
            return cls(
                family=d["family"],
                seed=int(d["seed"]),
                static_obstacles=tuple(primitive_from_dict(o) for o in d["static_obstacles"]),
                dynamic_obstacles=tuple(
                    DynamicObstacle(primitive_from_dict(o["shape"]), MotionScript(o["script"]["kind"], o["script"]["params"]))
                    for o in d["dynamic_obstacles"]
                ),
                q_start=d["q_start"],
                q_g=d["q_g"],
                goal_position=d["goal_pose"]["position"],
                goal_quat_wxyz=d["goal_pose"]["quat_wxyz"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RejectedInput(f"malformed scene spec: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> SceneSpec:
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RejectedInput(f"scene file is not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> SceneSpec:
        return cls.from_json(Path(path).read_text())

    def static_after(self, t: float, trigger: float | None) -> bool:
        """True when no obstacle changes at any time >= t, given the goal-reach time ``trigger``."""
        for ob in self.dynamic_obstacles:
            p = ob.script.params
            if ob.script.kind == "post_goal_approach":
                if trigger is None or trigger + p["delay"] + p["duration"] > t:
                    return False
            elif ob.script.motion_end() > t:
                return False
        return True
