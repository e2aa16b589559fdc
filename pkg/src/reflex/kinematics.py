"""Forward kinematics, point Jacobians and a sphere surface model for a 7-DoF revolute arm.

Joints are described URDF-style: each carries a fixed parent-to-joint transform
(translation + quaternion) and a rotation axis in its own frame. Link ``j``
(1..7) is the frame after rotating joint ``j``; link 0 is the fixed base.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from reflex.errors import RejectedInput
from reflex.geometry import PointCloud, quat_to_matrix, rng_stream, uniform_sphere_dirs

N_JOINTS = 7


@dataclass(frozen=True)
class Joint:
    origin_xyz: tuple
    origin_quat_wxyz: tuple
    axis: tuple


@dataclass(frozen=True)
class Sphere:
    link: int
    center: tuple
    radius: float


@dataclass(frozen=True, eq=False)
class RobotModel:
    joints: tuple
    flange_xyz: tuple
    flange_quat_wxyz: tuple
    lower: np.ndarray
    upper: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    spheres: tuple
    name: str = "robot"
    # derived arrays, filled in __post_init__
    _fixed: np.ndarray = field(init=False, repr=False)
    _axes: np.ndarray = field(init=False, repr=False)
    _flange: np.ndarray = field(init=False, repr=False)
    sphere_link: np.ndarray = field(init=False, repr=False)
    sphere_center: np.ndarray = field(init=False, repr=False)
    sphere_radius: np.ndarray = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.joints) != N_JOINTS:
            raise RejectedInput(f"expected {N_JOINTS} joints, got {len(self.joints)}")
        fixed = np.zeros((N_JOINTS, 4, 4))
        axes = np.zeros((N_JOINTS, 3))
        for j, jt in enumerate(self.joints):
            axis = np.asarray(jt.axis, dtype=float)
            if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
                raise RejectedInput(f"joint {j + 1} axis is not unit-norm")
            axes[j] = axis
            fixed[j] = _transform(jt.origin_xyz, jt.origin_quat_wxyz)
        lims = {}
        for name in ("lower", "upper", "vel", "acc"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (N_JOINTS,):
                raise RejectedInput(f"limits.{name} must have {N_JOINTS} entries")
            arr.setflags(write=False)
            lims[name] = arr
        if np.any(lims["lower"] >= lims["upper"]):
            raise RejectedInput("every joint needs lower < upper")
        if np.any(lims["vel"] <= 0) or np.any(lims["acc"] <= 0):
            raise RejectedInput("velocity and acceleration limits must be positive")
        if not self.spheres:
            raise RejectedInput("model needs at least one collision sphere")
        links = np.array([s.link for s in self.spheres], dtype=int)
        radii = np.array([s.radius for s in self.spheres], dtype=float)
        if np.any(links < 0) or np.any(links > N_JOINTS):
            raise RejectedInput("sphere link index out of range 0..7")
        if np.any(radii <= 0):
            raise RejectedInput("sphere radius must be positive")
        centers = np.array([s.center for s in self.spheres], dtype=float).reshape(-1, 3)
        for arr in (fixed, axes, links, radii, centers):
            arr.setflags(write=False)
        for k, v in lims.items():
            object.__setattr__(self, k, v)
        object.__setattr__(self, "_fixed", fixed)
        object.__setattr__(self, "_axes", axes)
        object.__setattr__(self, "_flange", _transform(self.flange_xyz, self.flange_quat_wxyz))
        object.__setattr__(self, "sphere_link", links)
        object.__setattr__(self, "sphere_center", centers)
        object.__setattr__(self, "sphere_radius", radii)
        object.__setattr__(self, "_cache", {})

    @property
    def n_spheres(self) -> int:
        return len(self.spheres)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "joints": [
                {"origin_xyz": list(j.origin_xyz), "origin_quat_wxyz": list(j.origin_quat_wxyz), "axis": list(j.axis)}
                for j in self.joints
            ],
            "flange": {"origin_xyz": list(self.flange_xyz), "origin_quat_wxyz": list(self.flange_quat_wxyz)},
            "limits": {k: getattr(self, k).tolist() for k in ("lower", "upper", "vel", "acc")},
            "spheres": [{"link": s.link, "center": list(s.center), "radius": s.radius} for s in self.spheres],
        }

    @classmethod
    def from_dict(cls, d: dict) -> RobotModel:
        try:
            joints = tuple(
                Joint(tuple(j["origin_xyz"]), tuple(j["origin_quat_wxyz"]), tuple(j["axis"])) for j in d["joints"]
            )
            lim = d["limits"]
            spheres = tuple(Sphere(int(s["link"]), tuple(s["center"]), float(s["radius"])) for s in d["spheres"])
            return cls(
                joints=joints,
                flange_xyz=tuple(d["flange"]["origin_xyz"]),
                flange_quat_wxyz=tuple(d["flange"]["origin_quat_wxyz"]),
                lower=lim["lower"],
                upper=lim["upper"],
                vel=lim["vel"],
                acc=lim["acc"],
                spheres=spheres,
                name=d.get("name", "robot"),
            )
        except (KeyError, TypeError) as exc:
            raise RejectedInput(f"malformed robot model: {exc}") from exc


class JointState(NamedTuple):
    q: np.ndarray
    qdot: np.ndarray


class SurfacePoint(NamedTuple):
    position: np.ndarray
    link: int
    sphere: int


class Kinematics(NamedTuple):
    """Result of :func:`forward_kinematics`.

    ``links[j]`` is the world transform of link frame ``j`` (0 = base);
    ``origins[j-1]`` and ``axes[j-1]`` are joint ``j``'s world origin and unit axis.
    """

    links: np.ndarray
    ee: np.ndarray
    origins: np.ndarray
    axes: np.ndarray


def load_model(path: str | Path | None = None) -> RobotModel:
    """Load a robot model JSON file; ``None`` loads the bundled Franka Panda model."""
    if path is None:
        text = resources.files("reflex.data").joinpath("panda.json").read_text()
    else:
        text = Path(path).read_text()
    return RobotModel.from_dict(json.loads(text))


def _transform(xyz, quat_wxyz) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = quat_to_matrix(quat_wxyz)
    T[:3, 3] = xyz
    return T


def _check_q(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (N_JOINTS,):
        raise RejectedInput(f"q must be a {N_JOINTS}-vector")
    if not np.all(np.isfinite(q)):
        raise RejectedInput("q contains non-finite values")
    return q


def _rodrigues_terms(model: RobotModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-joint ``a a^T`` and skew(a), so R(q) = a a^T + cos q (I - a a^T) + sin q skew(a)."""
    if "rodrigues" not in model._cache:
        a = model._axes
        outer = np.einsum("ja,jb->jab", a, a)
        skew = np.zeros((N_JOINTS, 3, 3))
        skew[:, 0, 1], skew[:, 0, 2], skew[:, 1, 2] = -a[:, 2], a[:, 1], -a[:, 0]
        skew[:, 1, 0], skew[:, 2, 0], skew[:, 2, 1] = a[:, 2], -a[:, 1], a[:, 0]
        model._cache["rodrigues"] = (outer, np.eye(3) - outer, skew)
    return model._cache["rodrigues"]


def _joint_rotations(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Rotation of every joint about its own axis, stacked as (7, 3, 3)."""
    outer, perp, skew = _rodrigues_terms(model)
    return outer + np.cos(q)[:, None, None] * perp + np.sin(q)[:, None, None] * skew


def forward_kinematics(model: RobotModel, q) -> Kinematics:
    q = _check_q(q)
    local = model._fixed.copy()
    local[:, :3, :3] = model._fixed[:, :3, :3] @ _joint_rotations(model, q)
    links = np.empty((N_JOINTS + 1, 4, 4))
    links[0] = np.eye(4)
    for j in range(N_JOINTS):
        links[j + 1] = links[j] @ local[j]
    origins = links[1:, :3, 3]
    axes = np.einsum("jab,jb->ja", links[1:, :3, :3], model._axes)
    return Kinematics(links, links[-1] @ model._flange, origins, axes)


def sphere_centers(model: RobotModel, kin: Kinematics) -> np.ndarray:
    """World-frame centers of all collision spheres, shape (S, 3)."""
    L = kin.links[model.sphere_link]
    return np.einsum("sab,sb->sa", L[:, :3, :3], model.sphere_center) + L[:, :3, 3]


def point_jacobian(model: RobotModel, q, p: SurfacePoint, kin: Kinematics | None = None) -> np.ndarray:
    """3x7 translational Jacobian of a point rigidly attached to link ``p.link``."""
    if not 0 <= int(p.link) <= N_JOINTS:
        raise RejectedInput(f"link index {p.link} out of range 0..{N_JOINTS}")
    if kin is None:
        kin = forward_kinematics(model, q)
    J = np.zeros((3, N_JOINTS))
    n = int(p.link)
    if n:
        J[:, :n] = np.cross(kin.axes[:n], np.asarray(p.position, dtype=float) - kin.origins[:n]).T
    return J


def point_jacobians(kin: Kinematics, positions: np.ndarray, links: np.ndarray) -> np.ndarray:
    """Batched :func:`point_jacobian`: (K, 3) positions on links (K,) -> (K, 3, 7)."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    cols = np.cross(kin.axes[None, :, :], positions[:, None, :] - kin.origins[None, :, :])  # (K, 7, 3)
    mask = np.arange(1, N_JOINTS + 1)[None, :] <= np.asarray(links)[:, None]
    cols *= mask[:, :, None]
    return cols.transpose(0, 2, 1)


def surface_distances(centers: np.ndarray, radii: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Signed distance from each point in ``x`` (N, 3) to each sphere: (N, S)."""
    diff = x[:, None, :] - centers[None, :, :]
    return np.sqrt(np.einsum("nsk,nsk->ns", diff, diff)) - radii[None, :]


def _project(center, radius, x) -> np.ndarray:
    v = x - center
    d = np.linalg.norm(v)
    if d < 1e-12:
        return center + radius * np.array([0.0, 0.0, 1.0])
    return center + radius * v / d


def closest_surface_point(model: RobotModel, q, x_obs, kin: Kinematics | None = None) -> SurfacePoint:
    """Closest point on the sphere surface model to ``x_obs``.

    Spheres are ranked by signed surface distance ``|x - c| - r``; for points
    outside every sphere that is the Euclidean distance to the surface.
    """
    if kin is None:
        kin = forward_kinematics(model, q)
    x = np.asarray(x_obs, dtype=float)
    centers = sphere_centers(model, kin)
    k = int(np.argmin(surface_distances(centers, model.sphere_radius, x[None])[0]))
    return SurfacePoint(_project(centers[k], model.sphere_radius[k], x), int(model.sphere_link[k]), k)


def _surface_samples(model: RobotModel, n: int, seed: int):
    key = ("surface", n, seed)
    if key not in model._cache:
        rng = rng_stream(seed, 0x5A)
        area = model.sphere_radius**2
        idx = rng.choice(model.n_spheres, size=n, p=area / area.sum())
        dirs = uniform_sphere_dirs(rng, n)
        idx.setflags(write=False)
        dirs.setflags(write=False)
        model._cache[key] = (idx, dirs)
    return model._cache[key]


def robot_point_cloud(
    model: RobotModel, q, n: int = 256, seed: int = 0, kin: Kinematics | None = None, stamp: int = 0
) -> PointCloud:
    """``n`` points area-uniform over the sphere surface model at configuration ``q``.

    The body-frame sample pattern depends only on ``(n, seed)``, so the cloud
    moves rigidly with the arm and repeated calls are bit-identical.
    """
    if n < 1:
        raise RejectedInput("n must be >= 1")
    if kin is None:
        kin = forward_kinematics(model, q)
    idx, dirs = _surface_samples(model, int(n), int(seed))
    centers = sphere_centers(model, kin)
    return PointCloud(centers[idx] + model.sphere_radius[idx, None] * dirs, stamp)


def clamp_to_limits(model: RobotModel, q) -> np.ndarray:
    return np.clip(q, model.lower, model.upper)
