"""Closed-loop episode runner and suite aggregation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from reflex import dcp
from reflex.errors import NumericalFault, RejectedInput
from reflex.kinematics import JointState, RobotModel, forward_kinematics, robot_point_cloud
from reflex.perception import DEFAULT_TAU_DYN
from reflex.policy import Policy, PolicyFault, PolicyInput, plan_chunk
from reflex.rmp import RmpParams
from reflex.simbench.scene import SceneSpec
from reflex.simbench.world import SceneRenderer, check_collision, check_success


@dataclass(frozen=True)
class SimConfig:
    rate_hz: float = 50.0
    horizon: int = 1000
    n_scene: int = 2048
    n_robot: int = 256
    tau_dyn: float = DEFAULT_TAU_DYN
    noise_sigma: float = 0.0
    # stop once nothing can change any more (reached, world static, robot and virtual goal at rest)
    early_stop: bool = True

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz

    def __post_init__(self):
        if self.horizon < 1:
            raise RejectedInput("horizon must be >= 1")
        if self.rate_hz <= 0:
            raise RejectedInput("rate_hz must be positive")


@dataclass
class EpisodeReport:
    family: str
    seed: int
    policy: str
    dcp_rmp: bool
    reached: bool = False
    collided: bool = False
    success: bool = False
    min_clearance: float = float("inf")
    ticks_to_reach: int | None = None
    ticks: int = 0
    faulted: bool = False
    fault: str | None = None
    trajectory: list | None = None

    def to_json(self) -> str:
        """One JSON line; infinite clearance (nothing in the scene) is written as null."""
        d = asdict(self)
        if d["trajectory"] is None:
            del d["trajectory"]
        if not np.isfinite(d["min_clearance"]):
            d["min_clearance"] = None
        return json.dumps(d, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> EpisodeReport:
        d = json.loads(line)
        if d.get("min_clearance") is None:
            d["min_clearance"] = float("inf")
        return cls(**d)


def step_robot(model: RobotModel, q, qdot, delta, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Track one commanded joint delta under velocity, acceleration and position limits."""
    v = np.clip(np.asarray(delta) / dt, qdot - model.acc * dt, qdot + model.acc * dt)
    v = np.clip(v, -model.vel, model.vel)
    q_new = q + v * dt
    hit = (q_new < model.lower) | (q_new > model.upper)
    if np.any(hit):
        q_new = np.clip(q_new, model.lower, model.upper)
        v = np.where(hit, 0.0, v)
    return q_new, v


def run_episode(
    spec: SceneSpec,
    policy: Policy,
    use_dcp_rmp: bool,
    params: RmpParams,
    model: RobotModel,
    sim: SimConfig = SimConfig(),
    render_seed: int | None = None,
    log_trajectory: bool = False,
    on_tick: Callable[[dict], None] | None = None,
) -> EpisodeReport:
    """Run one closed-loop episode and report reach / collision outcomes.

    Each tick: render the scene cloud, sample the robot cloud, propose a goal
    (if enabled), plan a chunk, execute its first delta, then check collision
    and success against the world at the next tick.
    """
    report = EpisodeReport(spec.family, spec.seed, policy.name, bool(use_dcp_rmp))
    try:
        _run(spec, policy, use_dcp_rmp, params, model, sim, render_seed, log_trajectory, on_tick, report)
    except (NumericalFault, PolicyFault, FloatingPointError) as exc:
        report.faulted = True
        report.fault = f"{type(exc).__name__}: {exc}"
        report.success = False
    return report


def _run(spec, policy, use_dcp_rmp, params, model, sim, render_seed, log_trajectory, on_tick, report):
    dt = sim.dt
    seed = spec.seed if render_seed is None else render_seed
    renderer = SceneRenderer(spec, sim.n_scene, seed, sim.noise_sigma)
    q_g = np.array(spec.q_g)
    q = np.array(spec.q_start)
    qdot = np.zeros(7)
    state = dcp.reset(q_g)
    trigger = None  # time of first reach
    traj = [] if log_trajectory else None
    dgb = spec.family == "DGB"
    at_goal = False

    col = check_collision(model, q, spec, 0.0)
    report.min_clearance = col.clearance
    report.collided = col.colliding
    for t in range(sim.horizon):
        now = t * dt
        cloud = renderer.render(now, t, trigger)
        kin = forward_kinematics(model, q)
        robot_cloud = robot_point_cloud(model, q, sim.n_robot, seed, kin, t)
        if use_dcp_rmp:
            q_goal, state = dcp.propose_goal(state, cloud, model, JointState(q, qdot), q_g, params, dt, sim.tau_dyn)
        else:
            q_goal = q_g
        chunk = plan_chunk(policy, PolicyInput(cloud, robot_cloud, q.copy(), q_goal), sim.n_scene, sim.n_robot)
        q, qdot = step_robot(model, q, qdot, chunk.first, dt)
        if not np.all(np.isfinite(q)):
            raise NumericalFault("robot state became non-finite")

        nxt = (t + 1) * dt
        kin = forward_kinematics(model, q)
        col = check_collision(model, q, spec, nxt, trigger, kin)
        report.min_clearance = min(report.min_clearance, col.clearance)
        report.collided |= col.colliding
        ok = check_success(model, q, spec.goal_position, spec.goal_quat_wxyz, kin)
        at_goal = ok.reached
        if ok.reached and not report.reached:
            report.reached = True
            report.ticks_to_reach = t + 1
            trigger = nxt
        report.ticks = t + 1

        if traj is not None:
            traj.append([float(v) for v in q])
        if on_tick is not None:
            rec = {"tick": t, "q": [float(v) for v in q], "q_goal": [float(v) for v in q_goal], "clearance": col.clearance}
            if use_dcp_rmp and state.info is not None:
                rec.update(state.info.record(t, q_goal))
            else:
                rec.update({"x_r": None, "xdot_r": None, "M_r": None, "n_dynamic": 0})
            on_tick(rec)

        if sim.early_stop and report.reached and _settled(spec, nxt, trigger, q, qdot, q_g, q_goal, state, use_dcp_rmp, at_goal):
            break

    report.trajectory = traj
    report.success = report.reached and not report.collided and (at_goal or not dgb)


SETTLE_TOL = 1e-9


def _settled(spec, t, trigger, q, qdot, q_g, q_goal, state, use_dcp_rmp, at_goal) -> bool:
    if not at_goal or not spec.static_after(t, trigger):
        return False
    if np.max(np.abs(qdot)) > SETTLE_TOL or np.max(np.abs(q_goal - q)) > SETTLE_TOL:
        return False
    if use_dcp_rmp:
        return bool(np.max(np.abs(state.qdot_mg)) <= SETTLE_TOL and np.max(np.abs(state.q_mg - q_g)) <= SETTLE_TOL)
    return True


@dataclass(frozen=True)
class SuiteSummary:
    episodes: int
    reach_rate: float
    collision_rate: float
    success_rate: float
    mean_min_clearance: float
    faults: int


def aggregate(reports) -> SuiteSummary:
    """Percent rates over non-faulted episodes; faulted episodes are only counted."""
    reports = list(reports)
    if not reports:
        raise RejectedInput("aggregate needs at least one report")
    ok = [r for r in reports if not r.faulted]
    n = len(ok)
    faults = len(reports) - n
    if n == 0:
        return SuiteSummary(len(reports), 0.0, 0.0, 0.0, float("nan"), faults)
    reach = 100.0 * sum(r.reached for r in ok) / n
    coll = 100.0 * sum(r.collided for r in ok) / n
    succ = 100.0 * sum(r.success for r in ok) / n
    mean_clr = math.fsum(r.min_clearance for r in ok) / n  # exact sum: independent of report order
    return SuiteSummary(len(reports), reach, coll, succ, mean_clr, faults)
