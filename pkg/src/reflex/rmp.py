"""Riemannian motion policy primitives: goal attractor, point repulsor, pullback, combination, integration.

The repulsor lives in a one-dimensional task space whose coordinate is the
*squared* distance between a robot surface point and an obstacle point, so
every length scale (``ell_p``, ``ell_d``, ``ell_m``, ``r``) is in m^2.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import NamedTuple

import numpy as np

from reflex.errors import RejectedInput

PINV_RCOND = 1e-10


@dataclass(frozen=True)
class RmpParams:
    k_g: float = 36.0
    k_d: float = 12.0
    mu_g: float = 1.0
    k_p: float = 8.0
    ell_p: float = 0.05
    k_v: float = 10.0
    l_v: float = 0.1
    ell_d: float = 0.05
    eps_d: float = 1e-3
    mu_r: float = 20.0
    ell_m: float = 0.05
    eps_m: float = 1e-3
    r: float = 0.25
    n_int: int = 5
    dt_int: float = 0.004

    def __post_init__(self):
        for name in ("ell_p", "l_v", "ell_d", "ell_m", "eps_d", "eps_m", "r", "mu_g", "dt_int"):
            if not getattr(self, name) > 0:
                raise RejectedInput(f"RmpParams.{name} must be > 0")
        if self.mu_r < 0:
            raise RejectedInput("RmpParams.mu_r must be >= 0")
        if int(self.n_int) != self.n_int or self.n_int < 1:
            raise RejectedInput("RmpParams.n_int must be an integer >= 1")
        object.__setattr__(self, "n_int", int(self.n_int))

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RmpParams:
        unknown = set(d) - set(cls.field_names())
        if unknown:
            raise RejectedInput(f"unknown RmpParams field(s): {sorted(unknown)}")
        return cls(**d)

    def with_overrides(self, **kw) -> RmpParams:
        unknown = set(kw) - set(self.field_names())
        if unknown:
            raise RejectedInput(f"unknown RmpParams field(s): {sorted(unknown)}")
        return replace(self, **kw)


class JointSpaceRmp(NamedTuple):
    f: np.ndarray
    M: np.ndarray


class TaskSpaceRepulsor(NamedTuple):
    x_r: float
    xdot_r: float
    J_r: np.ndarray


def pinv(A: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse, singular values below 1e-10 * sigma_max treated as zero."""
    return np.linalg.pinv(A, rcond=PINV_RCOND)


def attractor(q, qdot, q_g, params: RmpParams) -> JointSpaceRmp:
    q = np.asarray(q, dtype=float)
    f = params.k_g * (np.asarray(q_g, dtype=float) - q) - params.k_d * np.asarray(qdot, dtype=float)
    return JointSpaceRmp(f, params.mu_g * np.eye(q.shape[0]))


def closing_gate(xdot_r: float, l_v: float) -> float:
    """``1 - 1/(1 + exp(-xdot/l_v))``: ~1 while closing in, ~0 while receding, exactly 1/2 at rest."""
    # written as a logistic of -xdot/l_v, evaluated without overflow for large |xdot|
    z = -xdot_r / l_v
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


def cutoff(x_r: float, r: float) -> float:
    """Metric cutoff: (x_r - r)^2 / r^2 inside the radius, 0 beyond it."""
    return (x_r - r) ** 2 / r**2 if x_r <= r else 0.0


def repulsor_task(x_r: float, xdot_r: float, params: RmpParams) -> tuple[float, float]:
    """Task-space repulsive acceleration ``f_r`` and scalar metric ``M_r``."""
    if x_r < 0:
        raise RejectedInput("x_r is a squared distance and must be >= 0")
    gate = closing_gate(xdot_r, params.l_v)
    f_r = params.k_p * np.exp(-x_r / params.ell_p) - params.k_v * gate * xdot_r / (x_r / params.ell_d + params.eps_d)
    M_r = gate * cutoff(x_r, params.r) * params.mu_r / (x_r / params.ell_m + params.eps_m)
    return float(f_r), float(M_r)


def repulsor_jacobian(x_p, x_obs, J_p) -> np.ndarray:
    """Gradient of ``|x_p(q) - x_obs|^2`` w.r.t. q, as a length-7 row."""
    return 2.0 * (np.asarray(x_p, dtype=float) - np.asarray(x_obs, dtype=float)) @ np.asarray(J_p, dtype=float)


def pullback(f_task: float, M_task: float, J_r) -> JointSpaceRmp:
    """Pull a 1-D task-space (f, M) pair back to joint space through the 1x7 Jacobian ``J_r``."""
    J = np.asarray(J_r, dtype=float).reshape(1, -1)
    if not np.all(np.isfinite(J)):
        raise RejectedInput("J_r contains non-finite values")
    n = J.shape[1]
    if M_task == 0.0 or not np.any(J):
        return JointSpaceRmp(np.zeros(n), np.zeros((n, n)))
    M = M_task * (J.T @ J)
    f = pinv(M) @ (J.T[:, 0] * (M_task * f_task))
    return JointSpaceRmp(f, M)


def combine(rmps) -> np.ndarray:
    """Metric-weighted combination: pinv(sum M_i) @ sum(M_i f_i)."""
    rmps = list(rmps)
    if not rmps:
        raise RejectedInput("combine needs at least one policy")
    M = sum(r.M for r in rmps)
    b = sum(r.M @ r.f for r in rmps)
    if not np.any(M):
        return np.zeros_like(b, dtype=float)
    return pinv(M) @ b


def euler_integrate(q, qdot, qddot, params: RmpParams) -> tuple[np.ndarray, np.ndarray]:
    """Semi-implicit Euler for ``n_int`` sub-steps of ``dt_int`` under a constant ``qddot``."""
    q = np.array(q, dtype=float)
    qdot = np.array(qdot, dtype=float)
    qddot = np.asarray(qddot, dtype=float)
    dt = params.dt_int
    for _ in range(params.n_int):
        qdot = qdot + qddot * dt
        q = q + qdot * dt
    return q, qdot
