"""Detectability-aware chase planning for a camera drone following an actor."""

from importlib import resources
from pathlib import Path

from chasecam.detect import DetectParams, DetectabilityReport, Status, evaluate_viewpoint, variance_ratio
from chasecam.geom import Pose, RgbPointCloud, load_ply, look_at_pose, transform_cloud, write_ply
from chasecam.graph import build_dag, shortest_viewpoint_path, topological_index, view_sphere
from chasecam.render import CameraIntrinsics, LabeledImage, synthesize_view
from chasecam.rhp import PlannerConfig, Scenario, load_scenario, run_mission
from chasecam.traj import build_qp, eval_spline, solve_spline

__version__ = "0.1.0"


def desk_scenario_path() -> Path:
    """Path of the bundled desk-scene scenario file."""
    return Path(str(resources.files("chasecam") / "data" / "desk" / "scenario.yaml"))


__all__ = [
    "CameraIntrinsics", "DetectParams", "DetectabilityReport", "LabeledImage", "PlannerConfig", "Pose",
    "RgbPointCloud", "Scenario", "Status", "build_dag", "build_qp", "desk_scenario_path", "eval_spline",
    "evaluate_viewpoint", "load_ply", "load_scenario", "look_at_pose", "run_mission", "shortest_viewpoint_path",
    "solve_spline", "synthesize_view", "topological_index", "transform_cloud", "variance_ratio", "view_sphere",
    "write_ply",
]
