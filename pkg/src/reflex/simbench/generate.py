"""Seeded scenario generators for the five task families and a brute-force feasibility oracle.

Families are structural analogues of a dynamic-reaching benchmark:

SE   static clutter (boxes, shelf-like slabs, pillars) with an oracle-verified path
SAO  SE plus one obstacle that pops up on the straight-line joint path
FDO  light static clutter plus 1-3 spheres flying through the workspace
GB   SE plus a box that swallows the goal end-effector position
DGB  light static clutter; after the goal is first reached a sphere sweeps
     through it and leaves, so the robot has to dodge and come back
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from reflex.errors import RejectedInput
from reflex.geometry import matrix_to_quat, rng_stream
from reflex.kinematics import RobotModel, forward_kinematics, load_model, sphere_centers
from reflex.simbench.scene import FAMILIES, Ball, Box, DynamicObstacle, MotionScript, SceneSpec
from reflex.simbench.world import sphere_clearance

READY = np.array([0.0, -0.3, 0.0, -2.2, 0.0, 2.0, 0.785])
SPREAD = np.array([1.2, 0.6, 0.6, 0.6, 0.8, 0.5, 1.0])
WORKSPACE = (np.array([-0.2, -0.9, -0.05]), np.array([1.1, 0.9, 1.2]))

_FAMILY_ID = {f: i for i, f in enumerate(FAMILIES)}


class GenerationError(RuntimeError):
    """No valid scene could be produced for a (family, seed)."""


@dataclass(frozen=True)
class Difficulty:
    """Knobs of the generators (lengths in m, speeds in m/s, times in s)."""

    n_static: tuple = (3, 8)
    n_static_lite: tuple = (0, 2)
    min_goal_travel: float = 0.3
    margin: float = 0.02
    resamples: int = 100
    rrt_iters: int = 1500
    edge_step: float = 0.05
    # nominal joint speed fraction of the policies; used to time the SAO pop-up
    speed_scale: float = 0.5
    sao_time: tuple = (0.25, 0.6)
    fdo_count: tuple = (1, 3)
    fdo_radius: tuple = (0.05, 0.09)
    fdo_speed: tuple = (1.5, 2.5)
    fdo_legs: tuple = (2, 3)
    fdo_spread: float = 0.12
    fdo_start: tuple = (0.0, 1.0)
    dgb_radius: tuple = (0.05, 0.08)
    dgb_speed: tuple = (1.2, 2.0)
    dgb_offset: float = 0.04
    dgb_delay: tuple = (0.2, 0.6)
    dgb_run: float = 0.6

    @classmethod
    def from_dict(cls, d: dict) -> Difficulty:
        names = {f.name for f in fields(cls)}
        bad = set(d) - names
        if bad:
            raise RejectedInput(f"unknown difficulty fields {sorted(bad)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


DEFAULT_DIFFICULTY = Difficulty()


# --- collision helpers -------------------------------------------------------


def config_clearance(model: RobotModel, q, obstacles) -> float:
    """Clearance of the sphere model at ``q`` against ``[(primitive, center), ...]``."""
    kin = forward_kinematics(model, q)
    return sphere_clearance(sphere_centers(model, kin), model.sphere_radius, [(p, c, 0) for p, c in obstacles])


def _static(obstacles) -> list:
    return [(p, np.asarray(p.center)) for p in obstacles]


def edge_free(model: RobotModel, obstacles, qa, qb, margin: float = 0.0, step: float = 0.05) -> bool:
    """Check the joint-space segment qa -> qb at resolution ``step`` (rad, max-norm)."""
    qa, qb = np.asarray(qa, float), np.asarray(qb, float)
    n = max(1, int(np.ceil(np.max(np.abs(qb - qa)) / step)))
    for s in np.linspace(0.0, 1.0, n + 1):
        if config_clearance(model, qa + s * (qb - qa), obstacles) < margin:
            return False
    return True


def _steer(qa, qb, max_step):
    d = qb - qa
    n = np.linalg.norm(d)
    return qb if n <= max_step else qa + d * (max_step / n)


def feasible_path(
    model: RobotModel, obstacles, q_start, q_goal, rng: np.random.Generator, iters: int = 1500, step: float = 0.05, margin: float = 0.0
) -> list | None:
    """Brute-force feasibility oracle: straight line first, then RRT-Connect.

    Returns a list of configurations from ``q_start`` to ``q_goal`` whose
    edges are collision-free at resolution ``step``, or None.
    """
    q_start, q_goal = np.asarray(q_start, float), np.asarray(q_goal, float)
    if config_clearance(model, q_start, obstacles) < margin or config_clearance(model, q_goal, obstacles) < margin:
        return None
    if edge_free(model, obstacles, q_start, q_goal, margin, step):
        return [q_start, q_goal]
    trees = [([q_start], [-1]), ([q_goal], [-1])]
    extend = 0.4

    def nearest(tree, q):
        nodes = np.asarray(tree[0])
        return int(np.argmin(np.linalg.norm(nodes - q, axis=1)))

    def add(tree, q, parent):
        tree[0].append(q)
        tree[1].append(parent)
        return len(tree[0]) - 1

    def path_to_root(tree, i):
        out = []
        while i >= 0:
            out.append(tree[0][i])
            i = tree[1][i]
        return out

    for _ in range(iters):
        target = rng.uniform(model.lower, model.upper)
        a, b = trees
        i = nearest(a, target)
        q_new = _steer(a[0][i], target, extend)
        if not edge_free(model, obstacles, a[0][i], q_new, margin, step):
            trees.reverse()
            continue
        ia = add(a, q_new, i)
        # greedily connect the other tree toward the new node
        j = nearest(b, q_new)
        while True:
            q_next = _steer(b[0][j], q_new, extend)
            if not edge_free(model, obstacles, b[0][j], q_next, margin, step):
                break
            j = add(b, q_next, j)
            if np.array_equal(q_next, q_new):
                pa = path_to_root(a, ia)[::-1]
                pb = path_to_root(b, j)[1:]
                path = pa + pb
                if not np.array_equal(path[0], q_start):
                    path = path[::-1]
                return path
        trees.reverse()
    return None


# --- sampling ----------------------------------------------------------------


def _ee(model, q):
    return forward_kinematics(model, q).ee


def _config_ok(model, q) -> bool:
    ee = _ee(model, q)[:3, 3]
    if not (0.15 <= ee[2] <= 0.85 and ee[0] >= 0.25 and abs(ee[1]) <= 0.6):
        return False
    centers = sphere_centers(model, forward_kinematics(model, q))
    # keep the arm above the table plane and in front of the base column
    return bool(np.all(centers[model.sphere_link >= 2, 2] >= 0.05))


def sample_config(model: RobotModel, rng: np.random.Generator) -> np.ndarray:
    for _ in range(1000):
        q = np.clip(READY + rng.uniform(-1.0, 1.0, 7) * SPREAD, model.lower, model.upper)
        if _config_ok(model, q):
            return q
    raise GenerationError("could not sample a workspace configuration")


def sample_pair(model: RobotModel, rng: np.random.Generator, min_travel: float):
    for _ in range(1000):
        qs, qg = sample_config(model, rng), sample_config(model, rng)
        if np.linalg.norm(_ee(model, qs)[:3, 3] - _ee(model, qg)[:3, 3]) >= min_travel:
            return qs, qg
    raise GenerationError("could not sample a start/goal pair")


def sample_box(rng: np.random.Generator) -> Box:
    kind = rng.integers(3)
    if kind == 0:  # block
        half = rng.uniform(0.04, 0.12, 3)
    elif kind == 1:  # shelf-like slab
        half = np.array([rng.uniform(0.12, 0.25), rng.uniform(0.15, 0.35), rng.uniform(0.01, 0.02)])
    else:  # pillar
        half = np.array([rng.uniform(0.03, 0.06), rng.uniform(0.03, 0.06), rng.uniform(0.15, 0.35)])
    center = np.array([rng.uniform(0.3, 0.85), rng.uniform(-0.6, 0.6), rng.uniform(0.0, 0.9)])
    return Box(center, half)


def _clutter(model, rng, q_pts, count, margin, keep_line=False, diff=DEFAULT_DIFFICULTY) -> list:
    """Up to ``count`` boxes clear of the configurations ``q_pts`` (and of their joining line if asked)."""
    boxes = []
    for _ in range(40 * max(count, 1)):
        if len(boxes) == count:
            break
        b = sample_box(rng)
        if np.hypot(b.center[0], b.center[1]) < 0.25:
            continue
        obs = [(b, np.asarray(b.center))]
        if any(config_clearance(model, q, obs) < margin for q in q_pts):
            continue
        if keep_line and not edge_free(model, obs, q_pts[0], q_pts[1], margin, diff.edge_step):
            continue
        boxes.append(b)
    return boxes


def _goal_pose(model, q_g):
    T = _ee(model, q_g)
    return T[:3, 3].copy(), matrix_to_quat(T[:3, :3])


def _spec(family, seed, statics, dynamics, qs, qg, model) -> SceneSpec:
    pos, quat = _goal_pose(model, qg)
    return SceneSpec(family, int(seed), tuple(statics), tuple(dynamics), qs, qg, pos, quat)


def _se_base(model, rng, diff, lite: bool):
    """One attempt at (statics, q_start, q_goal), or None.

    Lite scenes keep the straight joint path clear; full scenes must pass the
    feasibility oracle.
    """
    qs, qg = sample_pair(model, rng, diff.min_goal_travel)
    lo, hi = diff.n_static_lite if lite else diff.n_static
    count = int(rng.integers(lo, hi + 1))
    boxes = _clutter(model, rng, [qs, qg], count, diff.margin, keep_line=lite, diff=diff)
    if len(boxes) < lo:
        return None
    if lite or feasible_path(model, _static(boxes), qs, qg, rng, diff.rrt_iters, diff.edge_step) is not None:
        return boxes, qs, qg
    return None


def _ee_path(model, qs, qg, n=20):
    return np.array([_ee(model, qs + s * (qg - qs))[:3, 3] for s in np.linspace(0, 1, n + 1)])


def _in_workspace(p) -> bool:
    return bool(np.all(p >= WORKSPACE[0]) and np.all(p <= WORKSPACE[1]))


def _sao(model, rng, diff, statics, qs, qg):
    """One box popping up on the straight joint path partway through the motion."""
    step = model.vel * diff.speed_scale  # rad/s per joint at the nominal pace
    duration = float(np.max(np.abs(qg - qs) / step))
    s = rng.uniform(0.45, 0.8)
    p = _ee(model, qs + s * (qg - qs))[:3, 3]
    t_appear = max(0.0, rng.uniform(*diff.sao_time) * duration)
    box = Box(p + rng.uniform(-0.02, 0.02, 3), rng.uniform(0.04, 0.08, 3))
    return [DynamicObstacle(box, MotionScript("appear", {"t_appear": t_appear, "pose": list(box.center)}))]


def _fdo(model, rng, diff, qs, qg):
    """Spheres entering from outside, weaving across the straight-line end-effector path, then leaving."""
    path = _ee_path(model, qs, qg)
    lo = np.maximum(path.min(axis=0) - diff.fdo_spread, WORKSPACE[0])
    hi = np.minimum(path.max(axis=0) + diff.fdo_spread, WORKSPACE[1])
    out = []
    for _ in range(int(rng.integers(diff.fdo_count[0], diff.fdo_count[1] + 1))):
        radius = rng.uniform(*diff.fdo_radius)
        speed = rng.uniform(*diff.fdo_speed)
        legs = int(rng.integers(diff.fdo_legs[0], diff.fdo_legs[1] + 1))
        # interior waypoints hug the path so the sphere really crosses it
        anchors = path[rng.integers(0, len(path), legs)]
        inner = np.clip(anchors + rng.uniform(-diff.fdo_spread, diff.fdo_spread, (legs, 3)), lo, hi)
        away = []
        for end in (inner[0], inner[-1]):
            ang = rng.uniform(-np.pi / 2, np.pi / 2)
            d = np.array([np.cos(ang), np.sin(ang), rng.uniform(-0.2, 0.3)])
            away.append(end + 0.9 * d / np.linalg.norm(d))
        wps = np.vstack([away[0], inner, away[1]])
        script = MotionScript(
            "random_waypoints",
            {
                "speed": speed,
                "region": [list(lo), list(hi)],
                "resample_seed": int(rng.integers(2**31)),
                "waypoints": wps.tolist(),
                "t_start": rng.uniform(*diff.fdo_start),
            },
        )
        out.append(DynamicObstacle(Ball(wps[0], radius), script))
    return out


def _gb(model, rng, qg):
    """A box around the goal end-effector position that stays all episode."""
    p = _ee(model, qg)[:3, 3]
    half = rng.uniform(0.05, 0.1, 3)
    return Box(p + rng.uniform(-0.5, 0.5, 3) * half, half)


def _dgb(model, rng, diff, qg):
    """A sphere that sweeps sideways through the goal after the goal is first reached."""
    ee = _ee(model, qg)[:3, 3]
    radial = np.array([ee[0], ee[1], 0.0])
    radial /= np.linalg.norm(radial)
    side = np.array([-radial[1], radial[0], 0.0]) * rng.choice([-1.0, 1.0])
    tilt = rng.uniform(-0.5, 0.5)
    w = side * np.cos(tilt) + np.array([0.0, 0.0, np.sin(tilt)])
    perp = np.cross(w, radial)
    perp /= np.linalg.norm(perp)
    aim = ee + rng.uniform(-diff.dgb_offset, diff.dgb_offset) * perp
    speed = rng.uniform(*diff.dgb_speed)
    start = aim + diff.dgb_run * w
    script = MotionScript(
        "post_goal_approach",
        {
            "delay": rng.uniform(*diff.dgb_delay),
            "start": list(start),
            "velocity": list(-speed * w),
            "duration": 2.0 * diff.dgb_run / speed,
        },
    )
    return DynamicObstacle(Ball(start, rng.uniform(*diff.dgb_radius)), script)


def generate_scenario(
    family: str, seed: int, difficulty: Difficulty = DEFAULT_DIFFICULTY, model: RobotModel | None = None
) -> SceneSpec:
    """Deterministic scene for ``(family, seed)``."""
    family = family.upper()
    if family not in FAMILIES:
        raise RejectedInput(f"unknown family {family!r}; choose from {FAMILIES}")
    model = model or load_model()
    rng = rng_stream(seed, 0x5CE, _FAMILY_ID[family])
    diff = difficulty
    lite = family in ("FDO", "DGB")
    try:
        for _ in range(diff.resamples):
            base = _se_base(model, rng, diff, lite)
            if base is None:
                continue
            statics, qs, qg = base
            if family == "SE":
                return _spec(family, seed, statics, [], qs, qg, model)
            if family == "SAO":
                return _spec(family, seed, statics, _sao(model, rng, diff, statics, qs, qg), qs, qg, model)
            if family == "GB":
                blocker = _gb(model, rng, qg)
                if config_clearance(model, qs, [(blocker, np.asarray(blocker.center))]) < diff.margin:
                    continue
                return _spec(family, seed, [*statics, blocker], [], qs, qg, model)
            if family == "FDO":
                dyn = _fdo(model, rng, diff, qs, qg)
                if any(config_clearance(model, qs, [(d.shape, np.asarray(d.script.position(0.0)))]) < diff.margin for d in dyn):
                    continue
                return _spec(family, seed, statics, dyn, qs, qg, model)
            return _spec(family, seed, statics, [_dgb(model, rng, diff, qg)], qs, qg, model)
    except GenerationError as exc:
        raise GenerationError(f"{family}: {exc} (seed={seed})") from exc
    raise GenerationError(f"{family}: feasibility oracle failed after {diff.resamples} resamples (seed={seed})")
