"""Per-tick goal proposal: repel a virtual joint goal from the closest moving scene point.

The modified goal is a second-order particle in joint space. Each tick it is
pulled toward the original goal by an attractor evaluated at the particle's
own state, pushed by a repulsor built from the closest *dynamic* scene point
to the physical robot, integrated forward and clamped to joint limits. The
result replaces the raw goal handed to the downstream policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from reflex import rmp
from reflex.errors import NumericalFault, RejectedInput
from reflex.geometry import PointCloud
from reflex.kinematics import JointState, RobotModel, forward_kinematics, point_jacobian
from reflex.perception import DEFAULT_TAU_DYN, DynamicPointSet, closest_dynamic_to_robot, extract_dynamic_points


@dataclass(frozen=True, eq=False)
class TickInfo:
    """Diagnostics of one proposal step; x_r and friends are None when nothing was repelled."""

    n_dynamic: int
    x_r: float | None = None
    xdot_r: float | None = None
    f_r: float | None = None
    M_r: float | None = None
    x_obs: np.ndarray | None = None

    def record(self, tick: int, q_mg) -> dict:
        return {
            "tick": tick,
            "x_r": self.x_r,
            "xdot_r": self.xdot_r,
            "M_r": self.M_r,
            "n_dynamic": self.n_dynamic,
            "q_mg": [float(v) for v in q_mg],
        }


@dataclass(frozen=True, eq=False)
class GoalProposalState:
    q_mg: np.ndarray
    qdot_mg: np.ndarray
    prev_cloud: PointCloud | None = None
    prev_x_r: float | None = None
    info: TickInfo | None = None


def reset(q_g) -> GoalProposalState:
    q_g = np.array(q_g, dtype=float)
    return GoalProposalState(q_g, np.zeros_like(q_g))


def propose_goal(
    state: GoalProposalState,
    scene: PointCloud,
    model: RobotModel,
    robot_state: JointState,
    q_g,
    params: rmp.RmpParams,
    dt_tick: float,
    tau_dyn: float = DEFAULT_TAU_DYN,
) -> tuple[np.ndarray, GoalProposalState]:
    """Advance the virtual goal by one control tick; returns (q_mg, new_state)."""
    if dt_tick <= 0:
        raise RejectedInput("dt_tick must be positive")
    q_g = np.asarray(q_g, dtype=float)

    if len(scene) == 0:
        # nothing in view: no motion to compare against, and the next frame starts fresh
        dyn = DynamicPointSet.empty(first_frame=True)
    else:
        dyn = extract_dynamic_points(state.prev_cloud, scene, tau_dyn)
    kin = forward_kinematics(model, robot_state.q)
    hit = closest_dynamic_to_robot(dyn, model, robot_state.q, kin)

    policies = [rmp.attractor(state.q_mg, state.qdot_mg, q_g, params)]
    x_r = None
    info = TickInfo(len(dyn))
    if hit is not None:
        J_p = point_jacobian(model, robot_state.q, hit.x_p, kin)
        diff = hit.x_p.position - hit.x_obs
        x_r = float(diff @ diff)
        J_r = rmp.repulsor_jacobian(hit.x_p.position, hit.x_obs, J_p)
        xdot_r = 0.0 if state.prev_x_r is None else (x_r - state.prev_x_r) / dt_tick
        f_r, M_r = rmp.repulsor_task(x_r, xdot_r, params)
        if M_r > 0.0:
            policies.append(rmp.pullback(f_r, M_r, J_r))
        info = TickInfo(len(dyn), x_r, xdot_r, f_r, M_r, hit.x_obs)

    # non-finite input is reported as a fault below rather than as a warning
    with np.errstate(invalid="ignore", over="ignore"):
        qddot = rmp.combine(policies)
        q_mg, qdot_mg = rmp.euler_integrate(state.q_mg, state.qdot_mg, qddot, params)
    if not (np.all(np.isfinite(q_mg)) and np.all(np.isfinite(qdot_mg))):
        raise NumericalFault("goal proposal produced a non-finite state")
    clamped = (q_mg < model.lower) | (q_mg > model.upper)
    if np.any(clamped):
        q_mg = np.clip(q_mg, model.lower, model.upper)
        qdot_mg = np.where(clamped, 0.0, qdot_mg)

    new_state = GoalProposalState(q_mg, qdot_mg, scene if len(scene) else None, x_r, info)
    return q_mg.copy(), new_state
