"""Downstream policy interface (scene cloud, robot cloud, joints, goal -> chunk of joint deltas) and two baselines.

A learned model slots in by implementing ``plan(PolicyInput) -> ActionChunk``
and registering a factory under a name. The harness executes only the first
delta of each chunk and re-plans every tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy.spatial import cKDTree

from reflex import rmp
from reflex.errors import RejectedInput
from reflex.geometry import PointCloud
from reflex.kinematics import RobotModel, forward_kinematics, point_jacobians, sphere_centers, surface_distances

CHUNK_LEN = 10
N_SCENE = 2048
N_ROBOT = 256
BOUND_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ActionChunk:
    deltas: np.ndarray

    def __post_init__(self):
        d = np.array(self.deltas, dtype=float)
        if d.ndim != 2 or d.shape[1] != 7:
            raise RejectedInput("action chunk must be an (S, 7) array")
        d.setflags(write=False)
        object.__setattr__(self, "deltas", d)

    def __len__(self):
        return self.deltas.shape[0]

    @property
    def first(self) -> np.ndarray:
        return self.deltas[0]

    def within(self, step_limit) -> bool:
        return bool(np.all(np.abs(self.deltas) <= np.asarray(step_limit) * (1 + BOUND_TOL)))


@dataclass(frozen=True, eq=False)
class PolicyInput:
    scene_cloud: PointCloud
    robot_cloud: PointCloud
    q_c: np.ndarray
    q_goal: np.ndarray


class Policy(Protocol):
    name: str
    step_limit: np.ndarray
    chunk_len: int

    def plan(self, inp: PolicyInput) -> ActionChunk: ...


class PolicyFault(RuntimeError):
    """A policy returned an invalid chunk or failed internally."""


def clipped_step(q, q_goal, step_limit) -> np.ndarray:
    """Straight-line joint step toward ``q_goal``, scaled so no joint exceeds its per-tick limit."""
    e = np.asarray(q_goal, dtype=float) - q
    ratio = np.abs(e) / step_limit
    k = int(np.argmax(ratio))
    if ratio[k] <= 1.0:
        return e
    step = e / ratio[k]
    step[k] = np.copysign(step_limit[k], e[k])
    return step


def baseline_interpolator(inp: PolicyInput, step_limit, chunk_len: int = CHUNK_LEN) -> ActionChunk:
    """Follow the joint-space line q_c -> q_goal at the per-tick limit; ignores both clouds."""
    step_limit = np.asarray(step_limit, dtype=float)
    q = np.array(inp.q_c, dtype=float)
    deltas = np.empty((chunk_len, q.shape[0]))
    for s in range(chunk_len):
        deltas[s] = clipped_step(q, inp.q_goal, step_limit)
        q = q + deltas[s]
    return ActionChunk(deltas)


def _scale_into(delta, step_limit):
    ratio = float(np.max(np.abs(delta) / step_limit))
    return delta / ratio if ratio > 1.0 else delta


def _repulsion_terms(model: RobotModel, q, points: np.ndarray, params: rmp.RmpParams, k: int, tree=None):
    """Task-space repulsors from the ``k`` scene points nearest the robot surface.

    Returns ``(J_r, f_r, M_r)`` with one row / entry per active repulsor
    (closing speed taken as zero). Only points inside the metric cutoff can
    contribute, so when a KD-tree over ``points`` is given, distances are
    computed just for points within that reach of some robot sphere.
    """
    n = q.shape[0]
    none = (np.zeros((0, n)), np.zeros(0), np.zeros(0))
    if points.shape[0] == 0:
        return none
    kin = forward_kinematics(model, q)
    centers = sphere_centers(model, kin)
    if tree is not None:
        reach = np.sqrt(params.r) * (1 + 1e-9) + 1e-12
        hits = tree.query_ball_point(centers, model.sphere_radius + reach, return_sorted=False)
        cand = np.unique(np.concatenate([np.asarray(h, dtype=int) for h in hits]))
        if cand.size == 0:
            return none
    else:
        cand = np.arange(points.shape[0])
    pts = points[cand]
    dist = surface_distances(centers, model.sphere_radius, pts)
    owner = np.argmin(dist, axis=1)
    d = dist[np.arange(pts.shape[0]), owner]
    # nearest k, ties broken by original point index so the choice is deterministic
    near = np.lexsort((cand, d))[: min(k, pts.shape[0])]
    near = near[(d[near] < 0) | (d[near] ** 2 <= params.r)]
    if near.size == 0:
        return none
    x_obs = pts[near]
    sph = owner[near]
    v = x_obs - centers[sph]
    norm = np.linalg.norm(v, axis=1, keepdims=True)
    norm[norm < 1e-12] = 1.0
    x_p = centers[sph] + model.sphere_radius[sph, None] * v / norm
    J_p = point_jacobians(kin, x_p, model.sphere_link[sph])
    diff = x_p - x_obs
    J_r = 2.0 * np.einsum("ka,kaj->kj", diff, J_p)
    task = [rmp.repulsor_task(float(dd @ dd), 0.0, params) for dd in diff]
    f_r = np.array([t[0] for t in task])
    M_r = np.array([t[1] for t in task])
    keep = (M_r > 0.0) & np.any(J_r != 0.0, axis=1)
    return J_r[keep], f_r[keep], M_r[keep]


def repulsive_rmps(model: RobotModel, q, points: np.ndarray, params: rmp.RmpParams, k: int) -> list:
    """Pulled-back repulsors (zero closing speed) from the ``k`` scene points nearest the robot surface."""
    J_r, f_r, M_r = _repulsion_terms(model, np.asarray(q, dtype=float), points, params, k)
    return [rmp.pullback(f, M, J) for J, f, M in zip(J_r, f_r, M_r)]


def baseline_repulsive(
    inp: PolicyInput,
    params: rmp.RmpParams,
    model: RobotModel,
    step_limit,
    dt: float,
    chunk_len: int = CHUNK_LEN,
    k: int = 8,
) -> ActionChunk:
    """Goal-seeking chunk deflected away from nearby scene geometry.

    Static repulsors from the ``k`` scene points nearest the robot surface are
    evaluated once, at the chunk's start configuration. Each sub-step's
    interpolator step, expressed as the acceleration producing it over one
    tick, is blended with them by metric-weighted combination; the blend is
    turned back into a displacement and scaled into the per-tick limit. With
    no repulsor active the result is the interpolator's chunk.

    A rank-one pullback of (f, M) through row J has joint metric M J J^T and
    M J J^T f_joint = M f J, so the blend needs a single 7x7 pseudoinverse.
    """
    if k < 1:
        raise RejectedInput("k must be >= 1")
    step_limit = np.asarray(step_limit, dtype=float)
    q = np.array(inp.q_c, dtype=float)
    pts = inp.scene_cloud.points
    M_r = np.zeros(0)
    if pts.shape[0]:
        tree = cKDTree(pts, balanced_tree=False, compact_nodes=False)
        J_r, f_r, M_r = _repulsion_terms(model, q, pts, params, k, tree)
    if M_r.size:
        M_inv = rmp.pinv(params.mu_g * np.eye(q.shape[0]) + np.einsum("k,ki,kj->ij", M_r, J_r, J_r))
        push = (M_r * f_r) @ J_r
    deltas = np.empty((chunk_len, q.shape[0]))
    for s in range(chunk_len):
        step = clipped_step(q, inp.q_goal, step_limit)
        if M_r.size:
            qddot = M_inv @ (params.mu_g * step / dt**2 + push)
            step = _scale_into(qddot * dt**2, step_limit)
        deltas[s] = step
        q = q + step
    return ActionChunk(deltas)


@dataclass
class InterpolatorPolicy:
    step_limit: np.ndarray
    chunk_len: int = CHUNK_LEN
    name: str = "interpolator"

    def plan(self, inp: PolicyInput) -> ActionChunk:
        return baseline_interpolator(inp, self.step_limit, self.chunk_len)


@dataclass
class RepulsivePolicy:
    model: RobotModel
    step_limit: np.ndarray
    dt: float
    params: rmp.RmpParams = field(default_factory=lambda: REPULSIVE_DEFAULTS)
    k: int = 8
    chunk_len: int = CHUNK_LEN
    name: str = "repulsive"

    def plan(self, inp: PolicyInput) -> ActionChunk:
        return baseline_repulsive(inp, self.params, self.model, self.step_limit, self.dt, self.chunk_len, self.k)


# Short-range static repulsion: 10 cm cutoff, 5 cm decay (x_r is a squared distance).
REPULSIVE_DEFAULTS = rmp.RmpParams(k_p=20.0, ell_p=0.0025, mu_r=50.0, ell_m=0.0025, r=0.01)

PolicyFactory = Callable[..., Policy]


def step_limit_for(model: RobotModel, dt: float, speed_scale: float) -> np.ndarray:
    return model.vel * dt * speed_scale


def _make_interpolator(model, dt, speed_scale, **_):
    return InterpolatorPolicy(step_limit_for(model, dt, speed_scale))


def _make_repulsive(model, dt, speed_scale, repulsive_params=None, **_):
    return RepulsivePolicy(model, step_limit_for(model, dt, speed_scale), dt, repulsive_params or REPULSIVE_DEFAULTS)


REGISTRY: dict[str, PolicyFactory] = {
    "interpolator": _make_interpolator,
    "repulsive": _make_repulsive,
}


def make_policy(name: str, model: RobotModel, dt: float, speed_scale: float = 0.5, **kw) -> Policy:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise RejectedInput(f"unknown policy {name!r}; choose from {sorted(REGISTRY)}") from None
    return factory(model=model, dt=dt, speed_scale=speed_scale, **kw)


def plan_chunk(policy: Policy, inp: PolicyInput, n_scene: int | None = N_SCENE, n_robot: int | None = N_ROBOT) -> ActionChunk:
    """Validate the input, call the policy, validate the chunk it returns.

    A scene cloud may be empty (nothing to see); otherwise cloud sizes must
    match the configured counts.
    """
    if n_scene is not None and len(inp.scene_cloud) not in (0, n_scene):
        raise RejectedInput(f"scene cloud has {len(inp.scene_cloud)} points, expected {n_scene}")
    if n_robot is not None and len(inp.robot_cloud) != n_robot:
        raise RejectedInput(f"robot cloud has {len(inp.robot_cloud)} points, expected {n_robot}")
    try:
        chunk = policy.plan(inp)
    except RejectedInput:
        raise
    except Exception as exc:  # policy-internal failure is an episode-level fault
        raise PolicyFault(f"{policy.name}: {exc}") from exc
    if len(chunk) != policy.chunk_len or not np.all(np.isfinite(chunk.deltas)):
        raise PolicyFault(f"{policy.name}: malformed chunk")
    if not chunk.within(policy.step_limit):
        raise PolicyFault(f"{policy.name}: chunk exceeds the per-tick velocity bound")
    return chunk
