"""End-to-end driver: plan, simulate, evaluate.

Stages write their artifacts into an output directory; every artifact
carries the scenario hash and seed so reruns are attributable. Exit
codes: 0 pass, 1 task failure (infeasible plan or failed evaluation),
2 usage/configuration error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from .footprint import FeasibilityReport, FootprintPlan, plan_footprints
from .scenario import (
    Scenario,
    ScenarioError,
    build_sim_config,
    build_world,
    bundled_scenario_path,
    load_scenario,
    make_footprint_problem,
)
from .sim import SimLog, evaluate_run, run_closed_loop
from .smoothing import HermiteTrajectory, smooth_waypoints
from .stl_core import HorizonError, StlError
from .waypoints import FragmentError, PlanningError, extract_fragment, plan_waypoints

PASS, TASK_FAIL, CONFIG_ERROR, INTERNAL_ERROR = 0, 1, 2, 3


def _dump_json(path: Path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _meta(sc: Scenario, seed: int) -> dict:
    return {"scenario_hash": sc.scenario_hash, "seed": seed}


def resolve_scenario(spec: str) -> Path:
    p = Path(spec)
    if p.exists():
        return p
    bundled = bundled_scenario_path(spec)
    if bundled.is_file():
        return bundled
    raise ScenarioError(f"scenario '{spec}' not found (no file, no bundled entry)")


def cmd_plan(sc: Scenario, out: Path, seed: int) -> int:
    task = extract_fragment(sc.formula)
    waypoints = plan_waypoints(
        task,
        sc.obstacles,
        sc.x0,
        seed,
        params=sc.planner,
        object_radius=sc.obj.bounding_radius,
    )
    _dump_json(out / "waypoints.json", {**_meta(sc, seed), "knots": waypoints.to_table()})
    traj = smooth_waypoints(
        np.column_stack([waypoints.times, waypoints.positions]),
        grid_step=sc.smoothing_grid_step,
        sigma=sc.smoothing_sigma,
    )
    _dump_json(
        out / "trajectory.json",
        {
            **_meta(sc, seed),
            "times": traj.times.tolist(),
            "positions": traj.positions.tolist(),
            "velocities": traj.velocities.tolist(),
        },
    )
    problem = make_footprint_problem(sc, traj)
    plan = plan_footprints(problem, traj, seed)
    _dump_json(
        out / "footprint.json",
        {
            **_meta(sc, seed),
            "times": plan.times.tolist(),
            "bases": plan.bases.tolist(),
            "objective": plan.objective,
            "certified": plan.certified,
            "residuals": plan.report.violations,
            "worst_step": plan.report.worst_step,
        },
    )
    with open(out / "footprint.csv", "w") as fh:
        fh.write(f"# scenario_hash={sc.scenario_hash} seed={seed}\n")
        for row in plan.to_table():
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    if not plan.certified:
        print(f"plan: footprint not certified ({plan.report})")
        return TASK_FAIL
    print(
        f"plan: {len(waypoints.times)} knots, footprint objective "
        f"{plan.objective:.4f}, residual {plan.report.max_violation:.2e}"
    )
    return PASS


def _load_plan_artifacts(sc: Scenario, out: Path):
    tpath = out / "trajectory.json"
    fpath = out / "footprint.json"
    if not tpath.exists() or not fpath.exists():
        raise ScenarioError(f"missing plan artifacts in {out}; run `plan` first")
    tdoc = json.loads(tpath.read_text())
    fdoc = json.loads(fpath.read_text())
    for doc, label in ((tdoc, "trajectory"), (fdoc, "footprint")):
        if doc.get("scenario_hash") != sc.scenario_hash:
            raise ScenarioError(f"{label} artifact was produced by a different scenario")
    traj = HermiteTrajectory(
        np.array(tdoc["times"]), np.array(tdoc["positions"]), np.array(tdoc["velocities"])
    )
    plan = FootprintPlan(
        times=np.array(fdoc["times"]),
        bases=np.array(fdoc["bases"]),
        objective=float(fdoc["objective"]),
        report=FeasibilityReport(fdoc["residuals"], fdoc["worst_step"]),
        certified=bool(fdoc["certified"]),
    )
    return traj, plan


def cmd_simulate(sc: Scenario, out: Path, seed: int, overrides=None) -> int:
    traj, plan = _load_plan_artifacts(sc, out)
    world = build_world(sc)
    config = build_sim_config(sc, seed_override=seed, overrides=overrides)
    log = run_closed_loop(world, traj, plan, config)
    log.meta.update(_meta(sc, seed))
    log.to_csv(out / "simlog.csv")
    _dump_json(
        out / "simlog_meta.json",
        {
            **_meta(sc, seed),
            "n_robots": sc.n_robots,
            "n_joints": world.models[0].n,
        },
    )
    _dump_json(out / "summary.json", {**_meta(sc, seed), **log.summary()})
    print(
        f"simulate: {log.times[-1]:.1f} s, object error rms "
        f"{np.sqrt(np.mean(log.object_error ** 2)):.4f} m, min clearance "
        f"{np.min(log.min_clearance):.3f} m"
    )
    return PASS


def cmd_evaluate(sc: Scenario, out: Path, seed: int) -> int:
    lpath = out / "simlog.csv"
    mpath = out / "simlog_meta.json"
    if not lpath.exists() or not mpath.exists():
        raise ScenarioError(f"missing simulation artifacts in {out}; run `simulate` first")
    meta = json.loads(mpath.read_text())
    log = SimLog.from_csv(lpath, meta["n_robots"], meta["n_joints"])
    try:
        report = evaluate_run(
            log,
            sc.formula,
            sc.obstacles,
            tracking_rms_bound=sc.evaluation.get("tracking_rms_bound"),
        )
    except HorizonError as err:
        print(f"evaluate: horizon error: {err}")
        _dump_json(out / "metrics.json", {**_meta(sc, seed), "error": str(err)})
        return TASK_FAIL
    _dump_json(out / "metrics.json", {**_meta(sc, seed), **report.to_dict()})
    verdict = "PASS" if report.passed else "FAIL"
    print(
        f"evaluate: {verdict} robustness={report.robustness:.4f} "
        f"min_clearance={report.min_clearance:.3f} "
        f"self_clearance={report.min_self_clearance:.3f} "
        f"rms={report.object_error_rms:.4f}"
    )
    return PASS if report.passed else TASK_FAIL


def cmd_pipeline(sc: Scenario, out: Path, seed: int, overrides=None) -> int:
    rc = cmd_plan(sc, out, seed)
    if rc != PASS:
        return rc
    rc = cmd_simulate(sc, out, seed, overrides)
    if rc != PASS:
        return rc
    return cmd_evaluate(sc, out, seed)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coop-transport",
        description="plan, simulate, and evaluate cooperative transport scenarios",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("plan", "simulate", "evaluate", "pipeline"):
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="path or bundled scenario name")
        p.add_argument("--out", required=True, help="artifact directory")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--ik-budget", type=int, default=None)
        p.add_argument(
            "--rates",
            default=None,
            help="override control,ik rates in Hz (e.g. 200,20)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(resolve_scenario(args.scenario))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        seed = args.seed if args.seed is not None else sc.seed
        overrides = {}
        if args.rates:
            ctrl, ik = (float(x) for x in args.rates.split(","))
            overrides["control_rate_hz"] = ctrl
            overrides["ik_rate_hz"] = ik
        if args.ik_budget is not None:
            sc.ik_cfg["budget"] = args.ik_budget
        if args.command == "plan":
            return cmd_plan(sc, out, seed)
        if args.command == "simulate":
            return cmd_simulate(sc, out, seed, overrides)
        if args.command == "evaluate":
            return cmd_evaluate(sc, out, seed)
        return cmd_pipeline(sc, out, seed, overrides)
    except (ScenarioError, StlError, FragmentError, ValueError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return CONFIG_ERROR
    except PlanningError as err:
        print(f"planning failed: {err}", file=sys.stderr)
        return TASK_FAIL
    except Exception:
        traceback.print_exc()
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
