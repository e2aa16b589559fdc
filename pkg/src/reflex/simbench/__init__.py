"""Deterministic simulated benchmark: scenes, rendering, ground-truth checks, episodes."""

from reflex.simbench.episode import EpisodeReport, SimConfig, SuiteSummary, aggregate, run_episode, step_robot
from reflex.simbench.generate import Difficulty, GenerationError, feasible_path, generate_scenario
from reflex.simbench.scene import FAMILIES, Ball, Box, DynamicObstacle, MotionScript, SceneSpec
from reflex.simbench.world import (
    CollisionResult,
    SceneRenderer,
    SuccessResult,
    check_collision,
    check_success,
    pose_error,
    render_scene_cloud,
)

__all__ = [
    "FAMILIES",
    "Ball",
    "Box",
    "CollisionResult",
    "Difficulty",
    "DynamicObstacle",
    "EpisodeReport",
    "GenerationError",
    "MotionScript",
    "SceneRenderer",
    "SceneSpec",
    "SimConfig",
    "SuccessResult",
    "SuiteSummary",
    "aggregate",
    "check_collision",
    "check_success",
    "feasible_path",
    "generate_scenario",
    "pose_error",
    "render_scene_cloud",
    "run_episode",
    "step_robot",
]
