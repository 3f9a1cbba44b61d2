"""Receding-horizon chase loop.

Every replan predicts the actor over the horizon with a constant-velocity
fit, scores a view sphere of candidate camera positions per predicted step,
picks the cheapest viewpoint sequence through the layered graph and fits a
smooth spline from the drone's current state. Between replans the drone
tracks the spline exactly. Replanning happens when no trajectory exists,
when the spline's horizon is used up, or when accumulated prediction error
exceeds a threshold.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
import yaml
from numpy.typing import ArrayLike, NDArray

from chasecam.detect import DetectabilityReport, DetectParams, Status, evaluate_viewpoint
from chasecam.geom import Pose, RgbPointCloud, as_vec3, load_ply
from chasecam.graph import (
    InfeasiblePlanError,
    LayeredDag,
    ViewLayer,
    ViewpointPath,
    build_dag,
    shortest_viewpoint_path,
    view_sphere,
)
from chasecam.render import CameraIntrinsics
from chasecam.traj import SplineTrajectory, build_qp, eval_spline, solve_spline, yaw_profile

log = logging.getLogger(__name__)


class ScenarioError(ValueError):
    pass


class ExtrapolationError(ValueError):
    pass


# ------------------------------------------------------------------ prediction

@dataclass
class TargetTrack:
    times: list[float] = field(default_factory=list)
    poses: list[Pose] = field(default_factory=list)

    def add(self, t: float, pose: Pose) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("observation timestamps must increase strictly")
        self.times.append(float(t))
        self.poses.append(pose)

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class ConstantVelocityPredictor:
    t_ref: float
    position: NDArray[np.float64]  # fitted position at t_ref
    velocity: NDArray[np.float64]
    rotation: NDArray[np.float64]
    first_time: float
    last_time: float
    velocity_stderr: NDArray[np.float64]

    def position_at(self, t: float) -> NDArray[np.float64]:
        return self.position + self.velocity * (t - self.t_ref)


def fit_constant_velocity(track: TargetTrack, window: int = 10) -> ConstantVelocityPredictor:
    """Least-squares line through the last ``window`` observed positions.

    Orientation is held at the latest observation. ``velocity_stderr`` is the
    per-axis standard error of the slope (zero when it cannot be estimated).
    """
    if len(track) == 0:
        raise ValueError("cannot fit an empty track")
    if window < 1:
        raise ValueError("window must be >= 1")
    ts = np.asarray(track.times[-window:])
    ps = np.array([p.translation for p in track.poses[-window:]])
    rot = track.poses[-1].rotation
    t_ref = float(ts[-1])
    if len(ts) == 1:
        zero = np.zeros(3)
        return ConstantVelocityPredictor(t_ref, ps[0].copy(), zero, rot, t_ref, t_ref, zero)
    dt = ts - ts.mean()
    sxx = float(dt @ dt)
    vel = (dt @ (ps - ps.mean(axis=0))) / sxx
    mean_p = ps.mean(axis=0)
    pos_ref = mean_p + vel * (t_ref - ts.mean())
    if len(ts) > 2:
        resid = ps - (mean_p + np.outer(dt, vel))
        s2 = (resid**2).sum(axis=0) / (len(ts) - 2)
        stderr = np.sqrt(s2 / sxx)
    else:
        stderr = np.zeros(3)
    return ConstantVelocityPredictor(t_ref, pos_ref, vel, rot, float(ts[0]), t_ref, stderr)


def predict(predictor: ConstantVelocityPredictor, times: Sequence[float], horizon: float = math.inf) -> list[Pose]:
    """Poses on the fitted line at ``times``; refuses to extrapolate beyond
    ``horizon`` seconds after the latest observation."""
    out = []
    for t in times:
        if t > predictor.last_time + horizon + 1e-9:
            raise ExtrapolationError(f"t={t} beyond horizon {horizon} from {predictor.last_time}")
        out.append(Pose(predictor.rotation, predictor.position_at(t)))
    return out


def update_accum_err(accum: float, observed: Pose, predicted: Pose, dt: float) -> float:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return accum + float(np.linalg.norm(observed.translation - predicted.translation)) * dt


# --------------------------------------------------------------------- config

@dataclass
class PlannerConfig:
    horizon: float = 4.0
    steps: int = 4
    lam: float = 20.0
    r_d: float = 5.0
    r_max: Optional[float] = None  # None -> r_d
    azimuth_count: int = 8
    elevation_deg: float = 20.0
    extra_elevations_deg: tuple = ()
    K: int = 5
    rho: float = 100.0
    eps_err: float = 0.5
    window: int = 10
    image_width: int = 96
    image_height: int = 72
    hfov_deg: float = 120.0
    near_clip: float = 0.05
    bins_per_channel: int = 8
    bin_count: int = 32
    eps: float = 1e-6
    eps_den: float = 1e-9
    eps_R: float = 1e-3
    w_max: float = 5.0
    d_c: Optional[float] = None
    weighted: bool = True
    splat_radius: int = 1
    clear_color: tuple = (128, 128, 128)
    score_every: int = 1
    sample_hz: float = 50.0
    threads: int = 0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ScenarioError("horizon must be positive")
        if self.steps < 1:
            raise ScenarioError("steps must be >= 1")
        if self.lam < 0:
            raise ScenarioError("lam must be nonnegative")
        self.extra_elevations_deg = tuple(self.extra_elevations_deg)
        self.clear_color = tuple(int(c) for c in self.clear_color)

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def effective_r_max(self) -> float:
        return self.r_d if self.r_max is None else self.r_max

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.from_hfov(self.image_width, self.image_height, self.hfov_deg, self.near_clip)

    def detect_params(self) -> DetectParams:
        return DetectParams(
            bins_per_channel=self.bins_per_channel, bin_count=self.bin_count, eps=self.eps,
            eps_den=self.eps_den, eps_R=self.eps_R, w_max=self.w_max, d_c=self.d_c,
            weighted=self.weighted, splat_radius=self.splat_radius, clear_color=self.clear_color,
        )

    def worker_count(self) -> int:
        n = int(os.environ.get("CHASE_THREADS", self.threads) or 0)
        return n if n > 0 else (os.cpu_count() or 1)


CONFIG_KEYS = {f.name for f in dataclasses.fields(PlannerConfig)}


@dataclass
class DroneState:
    position: NDArray[np.float64]
    velocity: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    acceleration: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def as_tuple(self):
        return self.position, self.velocity, self.acceleration


class ActorPath:
    """Piecewise-linear timed waypoints; heading follows the current segment."""

    def __init__(self, waypoints: ArrayLike):
        w = np.asarray(waypoints, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] != 4 or len(w) < 1:
            raise ScenarioError("actor_path must be a list of [t, x, y, z] rows")
        if np.any(np.diff(w[:, 0]) <= 0):
            raise ScenarioError("actor_path times must increase strictly")
        self.times = w[:, 0]
        self.points = w[:, 1:]

    def position(self, t: float) -> NDArray[np.float64]:
        return np.array([np.interp(t, self.times, self.points[:, k]) for k in range(3)])

    def pose(self, t: float) -> Pose:
        if len(self.times) == 1:
            return Pose.from_translation(self.points[0])
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        d = self.points[i + 1] - self.points[i]
        return Pose.from_yaw(math.atan2(d[1], d[0]), self.position(t))


@dataclass
class Scenario:
    background: RgbPointCloud
    actor: RgbPointCloud
    actor_path: Optional[ActorPath] = None
    duration_s: float = 60.0
    tick_hz: float = 20.0
    drone_start: Optional[NDArray[np.float64]] = None
    seed: int = 0
    obs_noise: float = 0.0
    config: PlannerConfig = field(default_factory=PlannerConfig)
    # single-horizon planning inputs
    predictions: Optional[NDArray[np.float64]] = None  # rows [t, x, y, z]
    drone_init: Optional[DroneState] = None
    source: Optional[Path] = None


SCENARIO_KEYS = {
    "background_ply", "actor_ply", "actor_path", "duration_s", "tick_hz", "drone_start",
    "seed", "obs_noise", "predictions", "drone_init",
}


def scenario_dict(path: str | os.PathLike) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    return data


def build_scenario(data: dict, base_dir: str | os.PathLike = ".") -> Scenario:
    """Scenario from a key/value mapping. Cloud paths resolve against ``base_dir``."""
    unknown = set(data) - SCENARIO_KEYS - CONFIG_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    for key in ("background_ply", "actor_ply"):
        if key not in data:
            raise ScenarioError(f"missing required key {key!r}")
    base = Path(base_dir)

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        config = PlannerConfig(**{k: v for k, v in data.items() if k in CONFIG_KEYS})
    except TypeError as exc:
        raise ScenarioError(str(exc)) from exc
    init = None
    if "drone_init" in data:
        di = data["drone_init"]
        init = DroneState(as_vec3(di["pos"]), as_vec3(di.get("vel", (0, 0, 0))), as_vec3(di.get("acc", (0, 0, 0))))
    return Scenario(
        background=load_ply(resolve(data["background_ply"])),
        actor=load_ply(resolve(data["actor_ply"])),
        actor_path=ActorPath(data["actor_path"]) if "actor_path" in data else None,
        duration_s=float(data.get("duration_s", 60.0)),
        tick_hz=float(data.get("tick_hz", 20.0)),
        drone_start=as_vec3(data["drone_start"]) if "drone_start" in data else None,
        seed=int(data.get("seed", 0)),
        obs_noise=float(data.get("obs_noise", 0.0)),
        config=config,
        predictions=np.asarray(data["predictions"], dtype=np.float64) if "predictions" in data else None,
        drone_init=init,
        source=base,
    )


def load_scenario(path: str | os.PathLike, overrides: Optional[dict] = None) -> Scenario:
    data = scenario_dict(path)
    data.update(overrides or {})
    return build_scenario(data, Path(path).parent)


# --------------------------------------------------------------- one horizon

@dataclass
class HorizonPlan:
    t0: float
    knot_times: NDArray[np.float64]
    predicted: list[Pose]
    layers: list[ViewLayer]
    reports: list[list[DetectabilityReport]]
    dag: LayeredDag
    path: ViewpointPath
    trajectory: SplineTrajectory
    objective: float
    r_max_used: float
    timings: dict

    def chosen_reports(self) -> list[DetectabilityReport]:
        return [self.reports[i][k] for i, k in enumerate(self.path.source_ids)]


def _evaluate_layers(predicted: list[Pose], clouds, config: PlannerConfig, pool=None):
    intr, params = config.intrinsics(), config.detect_params()
    extra = tuple(math.radians(e) for e in config.extra_elevations_deg)
    spheres = [
        view_sphere(p.translation, config.r_d, config.azimuth_count, math.radians(config.elevation_deg), extra)
        for p in predicted
    ]
    jobs = [(i, c) for i, sph in enumerate(spheres) for c in sph]

    def run(job):
        i, c = job
        return evaluate_viewpoint(predicted[i], clouds, c, intr, params)

    results = list(pool.map(run, jobs)) if pool is not None else [run(j) for j in jobs]
    reports, k = [], 0
    for sph in spheres:
        reports.append(results[k:k + len(sph)])
        k += len(sph)
    return spheres, reports


def plan_horizon(state: DroneState, t0: float, predicted: Sequence[Pose], clouds: tuple[RgbPointCloud, RgbPointCloud],
                 config: PlannerConfig, pool=None) -> HorizonPlan:
    """Viewpoint search and spline fit for one horizon starting at ``t0``.

    ``predicted`` holds the actor poses at ``t0 + i*dt`` for ``i = 1..N``. If
    the graph is infeasible the step limit is doubled once before giving up.
    """
    predicted = list(predicted)
    knots = t0 + config.dt * np.arange(len(predicted) + 1)
    tick = time.perf_counter()
    spheres, reports = _evaluate_layers(predicted, clouds, config, pool)
    t_eval = time.perf_counter() - tick

    tick = time.perf_counter()
    layers = [
        ViewLayer(i + 1, sph, [r.L for r in reps], predicted[i].translation)
        for i, (sph, reps) in enumerate(zip(spheres, reports))
    ]
    r_max = config.effective_r_max
    try:
        dag = build_dag(state.position, layers, r_max, config.lam)
    except InfeasiblePlanError:
        r_max *= 2.0
        log.info("infeasible viewpoint graph at t=%.3f; retrying with r_max=%.3f", t0, r_max)
        dag = build_dag(state.position, layers, r_max, config.lam)
    path = shortest_viewpoint_path(dag)
    t_graph = time.perf_counter() - tick

    tick = time.perf_counter()
    qp = build_qp(path.points, knots, state.as_tuple(), config.K, config.rho)
    traj = solve_spline(qp)
    objective = qp.objective(traj.flat_coeffs())
    t_qp = time.perf_counter() - tick
    return HorizonPlan(t0, knots, predicted, layers, reports, dag, path, traj, objective, r_max,
                       {"eval": t_eval, "graph": t_graph, "qp": t_qp})


# ------------------------------------------------------------------- mission

@dataclass
class TickRecord:
    t: float
    position: NDArray[np.float64]
    velocity: NDArray[np.float64]
    acceleration: NDArray[np.float64]
    yaw: float
    target: NDArray[np.float64]
    pred_err: float
    accum_err: float
    R: Optional[float] = None
    status: Optional[str] = None


@dataclass
class ReplanRecord:
    index: int
    t: float
    reason: str
    accum_err_before: float
    accum_err_after: float
    r_max_used: float
    viewpoints: NDArray[np.float64]
    targets: NDArray[np.float64]
    R: list[float]
    L: list[float]
    path_cost: float
    spline_objective: float
    handoff_error: float
    timings: dict


@dataclass
class MissionLog:
    ticks: list[TickRecord] = field(default_factory=list)
    replans: list[ReplanRecord] = field(default_factory=list)
    plans: list[HorizonPlan] = field(default_factory=list, repr=False)

    @property
    def travel_distance(self) -> float:
        if len(self.ticks) < 2:
            return 0.0
        p = np.array([t.position for t in self.ticks])
        return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))

    @property
    def mean_R(self) -> float:
        rs = [t.R for t in self.ticks if t.R is not None]
        return float(np.mean(rs)) if rs else float("nan")

    def mean_timings(self) -> dict:
        if not self.replans:
            return {"eval": float("nan"), "graph": float("nan"), "qp": float("nan")}
        return {k: float(np.mean([r.timings[k] for r in self.replans])) for k in ("eval", "graph", "qp")}

    def summary(self) -> dict:
        out = {
            "ticks": len(self.ticks),
            "replans": len(self.replans),
            "travel_distance_m": self.travel_distance,
            "mean_R": self.mean_R,
        }
        out.update({f"mean_{k}_s": v for k, v in self.mean_timings().items()})
        return out


def run_mission(scenario: Scenario, keep_plans: bool = False,
                on_replan: Optional[Callable[[ReplanRecord, HorizonPlan], Any]] = None) -> MissionLog:
    """Simulate the chase over ``scenario.duration_s`` at ``scenario.tick_hz``.

    Each tick observes the true actor pose (optionally with Gaussian noise),
    replans if needed, accumulates prediction error and then executes the
    active spline at the tick time. Executed viewpoints are scored every
    ``config.score_every`` ticks; occluded views count as R = 0.
    """
    cfg = scenario.config
    if scenario.actor_path is None:
        raise ScenarioError("mission needs an actor_path")
    dt = 1.0 / scenario.tick_hz
    n_ticks = int(round(scenario.duration_s * scenario.tick_hz))
    rng = np.random.default_rng(scenario.seed)
    clouds = (scenario.actor, scenario.background)
    intr, params = cfg.intrinsics(), cfg.detect_params()

    if scenario.drone_start is not None:
        start = scenario.drone_start
    else:
        p0 = scenario.actor_path.position(0.0)
        e = math.radians(cfg.elevation_deg)
        start = p0 + cfg.r_d * np.array([-math.cos(e), 0.0, math.sin(e)])
    state = DroneState(np.array(start, dtype=np.float64))

    mission = MissionLog()
    track = TargetTrack()
    traj: Optional[SplineTrajectory] = None
    predictor: Optional[ConstantVelocityPredictor] = None
    accum = 0.0
    yaw_prev: Optional[float] = None
    workers = cfg.worker_count()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for k in range(n_ticks):
            t = k * dt
            true_pose = scenario.actor_path.pose(t)
            obs_pos = true_pose.translation
            if scenario.obs_noise > 0:
                obs_pos = obs_pos + rng.normal(0.0, scenario.obs_noise, 3)
            observed = Pose(true_pose.rotation, obs_pos)
            track.add(t, observed)

            reason = None
            if traj is None:
                reason = "initial"
            elif accum > cfg.eps_err:
                reason = "error"
            elif t >= traj.t_end - 1e-9:
                reason = "horizon"
            if reason is not None:
                if traj is not None:
                    state = DroneState(eval_spline(traj, t, 0), eval_spline(traj, t, 1), eval_spline(traj, t, 2))
                predictor = fit_constant_velocity(track, cfg.window)
                times = t + cfg.dt * np.arange(1, cfg.steps + 1)
                predicted = predict(predictor, times, cfg.horizon)
                plan = plan_horizon(state, t, predicted, clouds, cfg, pool)
                traj = plan.trajectory
                handoff = max(
                    float(np.max(np.abs(eval_spline(traj, t, d) - s))) for d, s in enumerate(state.as_tuple())
                )
                before, accum = accum, 0.0
                chosen = plan.chosen_reports()
                rec = ReplanRecord(
                    len(mission.replans), t, reason, before, accum, plan.r_max_used, plan.path.points.copy(),
                    np.array([p.translation for p in predicted]), [r.R for r in chosen], [r.L for r in chosen],
                    plan.path.cost, plan.objective, handoff, plan.timings,
                )
                mission.replans.append(rec)
                if keep_plans:
                    mission.plans.append(plan)
                if on_replan is not None:
                    on_replan(rec, plan)

            pred_err = float(np.linalg.norm(observed.translation - predictor.position_at(t)))
            accum = update_accum_err(accum, observed, Pose(predictor.rotation, predictor.position_at(t)), dt)

            pos, vel, acc = (eval_spline(traj, t, d) for d in range(3))
            yaw = yaw_profile(pos, true_pose.translation, yaw_prev)
            if yaw_prev is not None:
                yaw = yaw_prev + (yaw - yaw_prev + math.pi) % (2 * math.pi) - math.pi
            yaw_prev = yaw
            R = status = None
            if cfg.score_every > 0 and k % cfg.score_every == 0:
                rep = evaluate_viewpoint(true_pose, clouds, pos, intr, params)
                R = 0.0 if rep.status is Status.OCCLUDED else rep.R
                status = rep.status.value
            mission.ticks.append(TickRecord(t, pos, vel, acc, yaw, true_pose.translation.copy(), pred_err, accum,
                                            R, status))
    finally:
        if pool is not None:
            pool.shutdown()
    return mission


# ----------------------------------------------------------------- outputs

MISSION_HEADER = ["t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az", "yaw",
                  "target_x", "target_y", "target_z", "pred_err", "accum_err", "R", "status"]
REPLAN_HEADER = ["replan", "t", "reason", "accum_err_before", "accum_err_after", "r_max", "path_cost",
                 "spline_objective", "handoff_error", "viewpoints", "R", "L"]
TIMING_HEADER = ["replan", "t", "eval_s", "graph_s", "qp_s"]


def _fmt(x: float) -> str:
    return repr(float(x))


def mission_rows(log_: MissionLog):
    for r in log_.ticks:
        yield [_fmt(r.t), *map(_fmt, r.position), *map(_fmt, r.velocity), *map(_fmt, r.acceleration), _fmt(r.yaw),
               *map(_fmt, r.target), _fmt(r.pred_err), _fmt(r.accum_err),
               "" if r.R is None else _fmt(r.R), r.status or ""]


def replan_rows(log_: MissionLog):
    for r in log_.replans:
        vp = ";".join(" ".join(_fmt(c) for c in p) for p in r.viewpoints)
        yield [r.index, _fmt(r.t), r.reason, _fmt(r.accum_err_before), _fmt(r.accum_err_after), _fmt(r.r_max_used),
               _fmt(r.path_cost), _fmt(r.spline_objective), _fmt(r.handoff_error), vp,
               ";".join(_fmt(x) for x in r.R), ";".join(_fmt(x) for x in r.L)]


def timing_rows(log_: MissionLog):
    for r in log_.replans:
        yield [r.index, _fmt(r.t), f"{r.timings['eval']:.6f}", f"{r.timings['graph']:.6f}", f"{r.timings['qp']:.6f}"]


def sample_trajectory(traj: SplineTrajectory, targets: Callable[[float], NDArray[np.float64]], rate_hz: float = 50.0):
    """Rows ``t,x,y,z,yaw,vx,vy,vz,ax,ay,az`` sampled along ``traj``; yaw points at
    ``targets(t)`` and is unwrapped."""
    n = int(math.floor((traj.t_end - traj.t0) * rate_hz + 1e-9))
    rows, prev = [], None
    for i in range(n + 1):
        t = traj.t0 + i / rate_hz
        p, v, a = (eval_spline(traj, t, d) for d in range(3))
        y = yaw_profile(p, targets(t), prev)
        if prev is not None:
            y = prev + (y - prev + math.pi) % (2 * math.pi) - math.pi
        prev = y
        rows.append([t, *p, y, *v, *a])
    return rows
