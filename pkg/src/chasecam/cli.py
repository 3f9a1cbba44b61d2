"""``chasecam`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 infeasible plan. Any
nonzero exit prints exactly one ``chasecam: error: <kind>: <message>`` line on
stderr. Scenario keys can be overridden with ``--key value`` (CLI wins over
the scenario file, which wins over defaults).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from chasecam import _io
from chasecam.detect import Status, evaluate_viewpoint
from chasecam.geom import Pose, PlyError, load_ply, look_at_pose, transform_cloud
from chasecam.graph import (
    InfeasiblePlanError,
    bench_csv,
    bench_sssp,
    layer_counts_for_edges,
)
from chasecam.render import label_to_gray, synthesize_view, write_pgm, write_ppm
from chasecam.rhp import (
    CONFIG_KEYS,
    MISSION_HEADER,
    REPLAN_HEADER,
    SCENARIO_KEYS,
    TIMING_HEADER,
    DroneState,
    PlannerConfig,
    ScenarioError,
    build_scenario,
    mission_rows,
    plan_horizon,
    replan_rows,
    run_mission,
    sample_trajectory,
    scenario_dict,
    timing_rows,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3
DEFAULT_BENCH_EDGES = (1_000, 3_000, 10_000, 30_000, 100_000, 300_000, 1_000_000)
KEY_ALIASES = {"lambda": "lam"}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def parse_overrides(extra: Sequence[str]) -> dict:
    """Turn leftover ``--key value`` pairs into scenario overrides (YAML-typed values)."""
    out = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, raw = key.split("=", 1)
        else:
            try:
                raw = next(it)
            except StopIteration:
                raise UsageError(f"missing value for --{key}") from None
        key = KEY_ALIASES.get(key, key)
        if key not in SCENARIO_KEYS and key not in CONFIG_KEYS:
            raise UsageError(f"unknown option --{key}")
        try:
            out[key] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise UsageError(f"bad value for --{key}: {exc}") from None
    return out


def _load_data(args, overrides: dict) -> tuple[dict, Path]:
    data, base = {}, Path(".")
    if getattr(args, "scenario", None):
        try:
            data = scenario_dict(args.scenario)
        except FileNotFoundError as exc:
            raise DataError(f"scenario not found: {args.scenario}") from exc
        except yaml.YAMLError as exc:
            raise DataError(f"scenario parse error: {exc}") from exc
        base = Path(args.scenario).parent
    for key in ("background", "actor"):
        val = getattr(args, key, None)
        if val:
            data[f"{key}_ply"] = str(Path(val).resolve())
    data.update(overrides)
    return data, base


def _config(data: dict) -> PlannerConfig:
    try:
        return PlannerConfig(**{k: v for k, v in data.items() if k in CONFIG_KEYS})
    except TypeError as exc:
        raise ScenarioError(str(exc)) from exc


def _emit(manifest: list[str], path: Path) -> None:
    manifest.append(str(path))
    print(f"wrote {path}")


# ------------------------------------------------------------------ commands

def cmd_eval_view(args, overrides) -> int:
    data, base = _load_data(args, overrides)
    cfg = _config(data)
    for key in ("background_ply", "actor_ply"):
        if key not in data:
            raise UsageError(f"--{key.split('_')[0]} or a scenario providing {key} is required")
    bg = load_ply(base / data["background_ply"])
    actor = load_ply(base / data["actor_ply"])
    pose = Pose.from_yaw(math.radians(args.target_yaw), args.target)
    rep = evaluate_viewpoint(pose, (actor, bg), args.camera, cfg.intrinsics(), cfg.detect_params(), keep=True)

    out = Path(args.out)
    manifest: list[str] = []
    if args.dump_images:
        write_ppm(out / "view.ppm", rep.image.color)
        _emit(manifest, out / "view.ppm")
        write_pgm(out / "labels.pgm", label_to_gray(rep.image.label))
        _emit(manifest, out / "labels.pgm")
        if rep.likelihood is not None:
            lo, hi = rep.likelihood.bounds
            v = rep.likelihood.values
            gray = np.where(np.isnan(v), 0, np.clip(np.rint((v - lo) / (hi - lo) * 255), 0, 255)).astype(np.uint8)
            write_pgm(out / "likelihood.pgm", gray)
            _emit(manifest, out / "likelihood.pgm")
    if rep.p_a is not None:
        rows = [[i, repr(float(h)), repr(float(a)), repr(float(b))]
                for i, (h, a, b) in enumerate(zip(rep.p_a.centers, rep.p_a.weights, rep.p_b.weights))]
    else:
        rows = []
    _io.write_csv(out / "histograms.csv", ["bin", "h", "p_a", "p_b"], rows)
    _emit(manifest, out / "histograms.csv")
    R = -1.0 if rep.status is Status.OCCLUDED else rep.R
    _io.write_csv(out / "score.csv", ["status", "R", "L", "actor_pixels", "background_pixels"],
                  [[rep.status.value, repr(R), repr(rep.L), rep.actor_pixel_count, rep.background_pixel_count]])
    _emit(manifest, out / "score.csv")
    if rep.status is Status.OCCLUDED:
        print("OCCLUDED")
    else:
        print(f"status={rep.status.value} R={rep.R:.6g} L={rep.L:.6g}")
    return EXIT_OK


def cmd_render(args, overrides) -> int:
    data, base = _load_data(args, overrides)
    cfg = _config(data)
    bg = load_ply(base / data["background_ply"])
    actor = load_ply(base / data["actor_ply"])
    pose = Pose.from_yaw(math.radians(args.target_yaw), args.target)
    cam = look_at_pose(args.camera, args.target)
    img = synthesize_view(transform_cloud(actor, pose), bg, cam, cfg.intrinsics(), cfg.splat_radius, cfg.clear_color)
    manifest: list[str] = []
    write_ppm(args.out, img.color)
    _emit(manifest, Path(args.out))
    if args.labels:
        write_pgm(args.labels, label_to_gray(img.label))
        _emit(manifest, Path(args.labels))
    return EXIT_OK


def cmd_plan(args, overrides) -> int:
    data, base = _load_data(args, overrides)
    if "predictions" not in data or "drone_init" not in data:
        raise DataError("plan needs 'predictions' and 'drone_init' in the scenario")
    pred = np.asarray(data["predictions"], dtype=np.float64)
    if pred.ndim != 2 or pred.shape[1] != 4 or len(pred) < 1:
        raise DataError("predictions must be rows of [t, x, y, z]")
    t0 = float(data["drone_init"].get("t", 0.0))
    knots = np.concatenate([[t0], pred[:, 0]])
    steps = np.diff(knots)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-9):
        raise DataError("prediction times must be evenly spaced after drone_init.t")
    data["steps"] = len(pred)
    data["horizon"] = float(knots[-1] - t0)
    sc = build_scenario(data, base)
    cfg = sc.config
    predicted = [Pose.from_translation(p) for p in pred[:, 1:]]
    plan = plan_horizon(sc.drone_init, t0, predicted, (sc.actor, sc.background), cfg)

    out = Path(args.out)
    manifest: list[str] = []
    rows = []
    for i, (p, rep, tgt) in enumerate(zip(plan.path.points, plan.chosen_reports(), pred), start=1):
        rows.append([i, repr(float(plan.knot_times[i])), *map(repr, map(float, p)), *map(repr, map(float, tgt[1:])),
                     repr(float(rep.R)), repr(float(rep.L))])
    _io.write_csv(out / "viewpoints.csv", ["step", "t", "x", "y", "z", "target_x", "target_y", "target_z", "R", "L"],
                  rows)
    _emit(manifest, out / "viewpoints.csv")

    def target_at(t):
        return np.array([np.interp(t, pred[:, 0], pred[:, k]) for k in (1, 2, 3)])

    samples = sample_trajectory(plan.trajectory, target_at, cfg.sample_hz)
    _io.write_csv(out / "trajectory.csv", ["t", "x", "y", "z", "yaw", "vx", "vy", "vz", "ax", "ay", "az"],
                  [[repr(float(v)) for v in r] for r in samples])
    _emit(manifest, out / "trajectory.csv")
    if args.dump_dag:
        _io.atomic_write_text(out / "dag.txt", "\n".join(plan.dag.edge_list_lines()) + "\n")
        _emit(manifest, out / "dag.txt")
    print(f"path_cost={plan.path.cost:.6g} spline_objective={plan.objective:.6g} r_max={plan.r_max_used:.6g}")
    return EXIT_OK


def cmd_simulate(args, overrides) -> int:
    data, base = _load_data(args, overrides)
    if args.seed is not None:
        data["seed"] = args.seed
    sc = build_scenario(data, base)
    log = run_mission(sc)
    out = Path(args.out)
    manifest: list[str] = []
    _io.write_csv(out / "mission.csv", MISSION_HEADER, mission_rows(log))
    _emit(manifest, out / "mission.csv")
    _io.write_csv(out / "replans.csv", REPLAN_HEADER, replan_rows(log))
    _emit(manifest, out / "replans.csv")
    _io.write_csv(out / "timings.csv", TIMING_HEADER, timing_rows(log))
    _emit(manifest, out / "timings.csv")
    print("summary:")
    for k, v in log.summary().items():
        print(f"  {k}: {v:.6g}" if isinstance(v, float) else f"  {k}: {v}")
    return EXIT_OK


def cmd_bench_graph(args, overrides) -> int:
    if overrides:
        raise UsageError(f"bench-graph takes no scenario overrides: {', '.join(overrides)}")
    edges = args.edges or list(DEFAULT_BENCH_EDGES)
    if min(edges) < 1 or args.layer_width < 1 or args.trials < 1:
        raise UsageError("sizes and trials must be positive")
    counts = layer_counts_for_edges(edges, args.layer_width)
    try:
        rows = bench_sssp(counts, args.layer_width, args.trials, args.seed)
    except AssertionError as exc:
        raise DataError(str(exc)) from exc
    text = bench_csv(rows)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        _io.atomic_write_text(args.out, text)
        print(f"wrote {args.out}")
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chasecam", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def view_args(sp):
        sp.add_argument("--scenario", help="YAML scenario supplying clouds and parameters")
        sp.add_argument("--background", help="background ASCII PLY")
        sp.add_argument("--actor", help="actor ASCII PLY (body frame)")
        sp.add_argument("--camera", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"))
        sp.add_argument("--target", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"))
        sp.add_argument("--target-yaw", type=float, default=0.0, help="actor heading in degrees")

    sp = sub.add_parser("eval-view", help="score one camera viewpoint")
    view_args(sp)
    sp.add_argument("--out", default="eval_out")
    sp.add_argument("--dump-images", type=_bool, default=True)
    sp.set_defaults(func=cmd_eval_view)

    sp = sub.add_parser("render", help="render one view to PPM (and labels to PGM)")
    view_args(sp)
    sp.add_argument("--out", default="view.ppm")
    sp.add_argument("--labels")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("plan", help="plan a single horizon from predictions")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--out", default="plan_out")
    sp.add_argument("--dump-dag", type=_bool, default=False)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("simulate", help="run a full receding-horizon mission")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--out", default="sim_out")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bench-graph", help="time shortest-path backends")
    sp.add_argument("--edges", type=int, nargs="+", help="approximate edge counts")
    sp.add_argument("--layer-width", type=int, default=10)
    sp.add_argument("--trials", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="-", help="CSV path or '-' for stdout")
    sp.set_defaults(func=cmd_bench_graph)
    return p


def _fail(code: int, kind: str, message: str) -> int:
    message = " ".join(str(message).split())
    print(f"chasecam: error: {kind}: {message}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        overrides = parse_overrides(extra)
        return args.func(args, overrides)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except InfeasiblePlanError as exc:
        return _fail(EXIT_INFEASIBLE, "infeasible", exc)
    except (DataError, ScenarioError, PlyError, OSError, yaml.YAMLError, KeyError, ValueError) as exc:
        return _fail(EXIT_DATA, "data", exc)


if __name__ == "__main__":
    sys.exit(main())
