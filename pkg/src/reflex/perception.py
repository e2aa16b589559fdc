"""Exact nearest-neighbour queries and frame-differencing of scene clouds into dynamic points."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from reflex.errors import RejectedInput
from reflex.geometry import PointCloud
from reflex.kinematics import Kinematics, RobotModel, SurfacePoint, forward_kinematics, sphere_centers, surface_distances

__all__ = [
    "PointCloud",
    "KdTree",
    "DynamicPointSet",
    "ClosestDynamic",
    "build_tree",
    "extract_dynamic_points",
    "closest_dynamic_to_robot",
]

DEFAULT_TAU_DYN = 0.01


class KdTree:
    """Immutable exact 3-D nearest-neighbour index over one cloud snapshot."""

    def __init__(self, cloud: PointCloud):
        if len(cloud) == 0:
            raise RejectedInput("cannot build a KD-tree from an empty cloud")
        self.cloud = cloud
        # an unbalanced build is ~10x cheaper and queries stay exact; the tree lives for one tick
        self._tree = cKDTree(cloud.points, balanced_tree=False, compact_nodes=False)

    def __len__(self):
        return len(self.cloud)

    def query(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Nearest neighbour distance and index for each row of ``x`` (exact)."""
        x = np.asarray(x, dtype=float).reshape(-1, 3)
        d, i = self._tree.query(x, k=1)
        return d, i

    def any_within(self, x, radius: float) -> np.ndarray:
        """Boolean mask: does each query point have a neighbour at distance <= ``radius``."""
        x = np.asarray(x, dtype=float).reshape(-1, 3)
        # the upper bound is strict in cKDTree; nudge by one ulp so "<= radius" is exact
        d, _ = self._tree.query(x, k=1, distance_upper_bound=np.nextafter(radius, np.inf))
        return np.isfinite(d)


def build_tree(cloud: PointCloud) -> KdTree:
    return KdTree(cloud)


@dataclass(frozen=True, eq=False)
class DynamicPointSet:
    """Points of the current frame classified as moving.

    ``first_frame`` is True when there was no previous frame to compare with;
    the set is then empty by contract rather than by observation.
    """

    points: np.ndarray
    indices: np.ndarray
    first_frame: bool = False

    def __len__(self):
        return len(self.indices)

    @classmethod
    def empty(cls, first_frame: bool = False) -> DynamicPointSet:
        return cls(np.zeros((0, 3)), np.zeros(0, dtype=int), first_frame)


def extract_dynamic_points(
    prev: PointCloud | None,
    curr: PointCloud,
    tau_dyn: float = DEFAULT_TAU_DYN,
    prev_tree: KdTree | None = None,
) -> DynamicPointSet:
    """Points of ``curr`` whose nearest neighbour in ``prev`` is farther than ``tau_dyn``.

    ``prev_tree`` may carry a tree already built over ``prev``; it is only
    built on demand.
    """
    if tau_dyn <= 0:
        raise RejectedInput("tau_dyn must be positive")
    if len(curr) == 0:
        raise RejectedInput("current cloud is empty")
    if prev is None:
        return DynamicPointSet.empty(first_frame=True)
    if len(prev) == 0:
        raise RejectedInput("previous cloud is empty")
    candidates = np.arange(len(curr))
    if len(prev) == len(curr):
        # index-aligned exact repeats have distance 0 and can never be dynamic
        candidates = np.flatnonzero(np.any(curr.points != prev.points, axis=1))
    if candidates.size == 0:
        return DynamicPointSet.empty()
    tree = prev_tree if prev_tree is not None else KdTree(prev)
    near = tree.any_within(curr.points[candidates], tau_dyn)
    idx = candidates[~near]
    return DynamicPointSet(curr.points[idx], idx)


class ClosestDynamic(NamedTuple):
    x_obs: np.ndarray
    x_p: SurfacePoint
    distance: float


def closest_dynamic_to_robot(
    dyn: DynamicPointSet, model: RobotModel, q, kin: Kinematics | None = None
) -> ClosestDynamic | None:
    """The dynamic point nearest the robot's sphere surface, or None for an empty set."""
    if len(dyn) == 0:
        return None
    if kin is None:
        kin = forward_kinematics(model, q)
    centers = sphere_centers(model, kin)
    dist = surface_distances(centers, model.sphere_radius, dyn.points)
    i, s = np.unravel_index(int(np.argmin(dist)), dist.shape)
    x_obs = dyn.points[i].copy()
    v = x_obs - centers[s]
    n = np.linalg.norm(v)
    direction = v / n if n >= 1e-12 else np.array([0.0, 0.0, 1.0])
    x_p = SurfacePoint(centers[s] + model.sphere_radius[s] * direction, int(model.sphere_link[s]), int(s))
    return ClosestDynamic(x_obs, x_p, float(dist[i, s]))
