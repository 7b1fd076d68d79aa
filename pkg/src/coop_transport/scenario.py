"""Scenario files: schema, validation, and world assembly.

A scenario is a versioned JSON document declaring the workspace,
obstacles (3-D primitives plus their planar super-ellipse projections),
the robot team and grasp layout, the object, the STL task formula, and
per-stage parameter blocks. Loading validates everything up front:
the formula must parse, tolerances must be positive, and the initial
team configuration (solved from the grasp when marked "auto") must be
collision-free and grasp-consistent.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .control import GainSet
from .footprint import FootprintProblem, spread
from .geometry import Box, SuperEllipse, point_signed_distance
from .grasp import GraspSpec, ObjectModel, grasp_residual, ring_grasp
from .ik import IkProblem, solve_effector_pose
from .robot_model import default_robot_config, from_config, rpy_matrix
from .sim import BushingParams, SimConfig, SystemState, World
from .smoothing import HermiteTrajectory
from .stl_core import Formula, parse_formula
from .waypoints import PlannerParams

SCHEMA_VERSION = 1


class ScenarioError(Exception):
    pass


def _require(cond, message):
    if not cond:
        raise ScenarioError(message)


@dataclass
class Scenario:
    name: str
    seed: int
    bounds: np.ndarray  # (3, 2)
    formula: Formula
    formula_text: str
    obstacles: list
    super_ellipses: list
    n_robots: int
    robot_cfg: dict
    base_radius: float
    grasp: GraspSpec
    obj: ObjectModel
    x0: np.ndarray
    initial_qs: list
    planner: PlannerParams
    smoothing_grid_step: float
    smoothing_sigma: float
    footprint_cfg: dict
    ik_cfg: dict
    controller_cfg: dict
    sim_cfg: dict
    evaluation: dict
    raw: dict

    @property
    def scenario_hash(self) -> str:
        return scenario_hash(self.raw)


def scenario_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def bundled_scenario_path(name: str):
    return resources.files("coop_transport.scenarios").joinpath(f"{name}.json")


def load_scenario(path) -> Scenario:
    """Load and fully validate a scenario file."""
    if hasattr(path, "read_text"):
        raw = json.loads(path.read_text())
    else:
        with open(path) as fh:
            raw = json.load(fh)
    _require(
        raw.get("schema_version") == SCHEMA_VERSION,
        f"schema_version must be {SCHEMA_VERSION}",
    )
    name = raw.get("name", "unnamed")
    seed = int(raw.get("seed", 0))

    ws = raw.get("workspace", {})
    bounds = np.asarray(ws.get("bounds", [[-5, 5], [-5, 5], [0.2, 1.8]]), dtype=float)
    _require(bounds.shape == (3, 2), "workspace.bounds must be 3 pairs")

    try:
        formula = parse_formula(raw["formula"])
    except KeyError:
        raise ScenarioError("missing formula")

    obstacles = []
    super_ellipses = []
    for i, ob in enumerate(raw.get("obstacles", [])):
        _require(ob.get("kind", "box") == "box", f"obstacles[{i}]: only boxes supported")
        rot = rpy_matrix(*ob.get("rpy", (0.0, 0.0, 0.0)))
        obstacles.append(Box(np.array(ob["center"]), np.array(ob["half_extents"]), rot))
        se = ob.get("super_ellipse")
        if se is not None:
            _require(se.get("ax", 0) > 0 and se.get("ay", 0) > 0,
                     f"obstacles[{i}].super_ellipse: shape parameters must be > 0")
            super_ellipses.append(
                SuperEllipse(np.array(se["center"]), float(se["ax"]),
                             float(se["ay"]), float(se.get("rho", 1.0)))
            )

    ocfg = raw["object"]
    _require(ocfg.get("mass", 0) > 0, "object.mass must be > 0")
    half = np.asarray(ocfg["half_extents"], dtype=float)
    obj = ObjectModel(
        mass=float(ocfg["mass"]),
        inertia=np.diag(ocfg["inertia_diag"]),
        primitive=Box(np.zeros(3), half),
        bounding_radius=float(np.linalg.norm(half)),
    )
    x0 = np.asarray(ocfg["initial_position"], dtype=float).reshape(3)

    gcfg = raw.get("grasp", {})
    rcfg = raw.get("robots", {})
    n_robots = int(rcfg.get("count", 3))
    _require(n_robots >= 1, "robots.count must be >= 1")
    grasp = ring_grasp(
        n_robots,
        float(gcfg.get("radius", 0.22)),
        approach_pitch=float(gcfg.get("approach_pitch", 0.45)),
        start_angle=np.deg2rad(float(gcfg.get("start_angle_deg", 90.0))),
    )
    robot_cfg = (
        default_robot_config()
        if rcfg.get("config", "default") == "default"
        else rcfg["config"]
    )
    base_radius = float(rcfg.get("base_radius", 0.85))

    pcfg = raw.get("planner", {})
    pad = float(pcfg.get("bounds_pad", 0.4))
    planner = PlannerParams(
        v_max=float(pcfg.get("v_max", 1.0)),
        knot_spacing=float(pcfg.get("knot_spacing", 0.5)),
        rrt_step=float(pcfg.get("rrt_step", 0.35)),
        goal_bias=float(pcfg.get("goal_bias", 0.15)),
        max_iters=int(pcfg.get("max_iters", 40000)),
        clearance_pad=float(pcfg.get("clearance_pad", 0.15)),
        settle_pad=float(pcfg.get("settle_pad", 0.3)),
        jitter=float(pcfg.get("jitter", 0.1)),
        bounds=tuple(
            (float(lo) - pad, float(hi) + pad) for lo, hi in bounds.tolist()
        ),
    )

    scfg = raw.get("smoothing", {})
    fcfg = dict(raw.get("footprint", {}))
    icfg = dict(raw.get("ik", {}))
    ccfg = dict(raw.get("controller", {}))
    simcfg = dict(raw.get("sim", {}))
    evaluation = dict(raw.get("evaluation", {}))

    for key, val in (("epsilon", fcfg.get("epsilon", 0.35)),
                     ("eta", fcfg.get("eta", 0.3)),
                     ("delta", fcfg.get("delta", 0.12))):
        _require(float(val) > 0, f"footprint.{key} must be > 0")

    # initial team configuration: solved from the grasp geometry
    models = [from_config(robot_cfg) for _ in range(n_robots)]
    initial_qs = rcfg.get("initial_q", "auto")
    if initial_qs == "auto":
        targets_p, targets_R = grasp.ee_targets(x0, np.eye(3))
        qs = []
        for i, m in enumerate(models):
            az = np.arctan2(targets_p[i, 1] - x0[1], targets_p[i, 0] - x0[0])
            hint = x0[:2] + base_radius * np.array([np.cos(az), np.sin(az)])
            qs.append(solve_effector_pose(m, targets_R[i], targets_p[i], base_hint=hint))
    else:
        qs = [np.asarray(q, dtype=float) for q in initial_qs]
        _require(len(qs) == n_robots, "robots.initial_q length mismatch")

    pos_res, rot_res = grasp_residual(models, qs, grasp)
    _require(
        pos_res < 1e-6 and rot_res < 1e-6,
        f"initial state is not grasp-consistent (pos {pos_res:.2e}, rot {rot_res:.2e})",
    )
    for i, (m, q) in enumerate(zip(models, qs)):
        _require(m.within_limits(q), f"robots[{i}] initial configuration violates limits")
    if obstacles:
        clear = min(point_signed_distance(o, x0) for o in obstacles)
        _require(clear > 0, "object initial position collides with obstacles")
        from .geometry import min_clearance
        from .robot_model import posed_collision_primitives

        bodies = [
            prim
            for m, q in zip(models, qs)
            for _, prim in posed_collision_primitives(m, q)
        ]
        body_clear = min_clearance(bodies, obstacles)
        _require(
            body_clear > 0,
            f"initial robot configuration collides with obstacles ({body_clear:.3f} m)",
        )

    return Scenario(
        name=name,
        seed=seed,
        bounds=bounds,
        formula=formula,
        formula_text=raw["formula"],
        obstacles=obstacles,
        super_ellipses=super_ellipses,
        n_robots=n_robots,
        robot_cfg=robot_cfg,
        base_radius=base_radius,
        grasp=grasp,
        obj=obj,
        x0=x0,
        initial_qs=qs,
        planner=planner,
        smoothing_grid_step=float(scfg.get("grid_step", 0.05)),
        smoothing_sigma=float(scfg.get("sigma", 5.0)),
        footprint_cfg=fcfg,
        ik_cfg=icfg,
        controller_cfg=ccfg,
        sim_cfg=simcfg,
        evaluation=evaluation,
        raw=raw,
    )


# ---------------------------------------------------------------------------
# assembly


def build_world(sc: Scenario) -> World:
    models = [from_config(sc.robot_cfg) for _ in range(sc.n_robots)]
    gains = [
        GainSet.bandwidth(
            m,
            q,
            omega_base=float(sc.controller_cfg.get("omega_base", 3.2)),
            omega_arm=float(sc.controller_cfg.get("omega_arm", 20.0)),
            zeta=float(sc.controller_cfg.get("zeta", 1.0)),
        )
        for m, q in zip(models, sc.initial_qs)
    ]
    ik = IkProblem(
        q0=[q.copy() for q in sc.initial_qs],
        nu=float(sc.ik_cfg.get("nu", 0.15)),
        alpha=float(sc.ik_cfg.get("alpha", 40.0)),
        d_safe=float(sc.ik_cfg.get("d_safe", 0.15)),
        posture_weight=float(sc.ik_cfg.get("posture_weight", 0.05)),
        tracking_weight=float(sc.ik_cfg.get("tracking_weight", 30.0)),
        grasp_pos_weight=float(sc.ik_cfg.get("grasp_pos_weight", 1e3)),
        grasp_rot_weight=float(sc.ik_cfg.get("grasp_rot_weight", 1e2)),
        budget=int(sc.ik_cfg.get("budget", 40)),
        activation_clearance=sc.ik_cfg.get("activation_clearance"),
    )
    initial = SystemState(
        qs=[q.copy() for q in sc.initial_qs],
        qds=[np.zeros(m.n) for m in models],
        x_o=sc.x0.copy(),
        R_o=np.eye(3),
        v_o=np.zeros(3),
        w_o=np.zeros(3),
    )
    return World(
        models=models,
        grasp=sc.grasp,
        obj=sc.obj,
        obstacles=sc.obstacles,
        gains=gains,
        ik_problem=ik,
        initial=initial,
        compensate_payload=bool(sc.sim_cfg.get("compensate_payload", True)),
    )


def build_sim_config(sc: Scenario, seed_override=None, overrides=None) -> SimConfig:
    cfg = dict(sc.sim_cfg)
    if overrides:
        cfg.update(overrides)
    bush = cfg.get("bushing", {})
    bushing = BushingParams.critical(
        float(bush.get("k_t", 1e4)),
        float(bush.get("k_r", 100.0)),
        sc.obj.mass,
        float(np.max(np.diag(sc.obj.inertia))),
        sc.n_robots,
        ratio=float(bush.get("ratio", 1.0)),
        rot_ratio=float(bush.get("rot_ratio", 0.1)),
    )
    return SimConfig(
        control_rate_hz=float(cfg.get("control_rate_hz", 100.0)),
        ik_rate_hz=float(cfg.get("ik_rate_hz", 10.0)),
        physics_dt=float(cfg.get("physics_dt", 1e-3)),
        integrator=cfg.get("integrator", "semi_implicit_euler"),
        bushing=bushing,
        t_max=float(cfg.get("t_max", 10.0)),
        seed=int(seed_override if seed_override is not None else sc.seed),
        ik_lookahead=cfg.get("ik_lookahead"),
        disturbance=cfg.get("disturbance"),
        pipelined=bool(cfg.get("pipelined", False)),
    )


def nominal_formation(sc: Scenario, center_xy) -> np.ndarray:
    """Base positions of the start formation translated to center_xy."""
    starts = np.array([q[:2] for q in sc.initial_qs])
    centroid = starts.mean(axis=0)
    return starts - centroid + np.asarray(center_xy, dtype=float)


def make_footprint_problem(sc: Scenario, traj: HermiteTrajectory) -> FootprintProblem:
    """Assemble the base-trajectory problem along a planned path.

    Pair spacing targets default to the initial formation's pairwise
    distances; the height model is calibrated so the initial spread
    maps to the initial object height (z_ref = z0 + kappa * spread0).
    """
    fcfg = sc.footprint_cfg
    from .smoothing import eval_hermite

    p_start = eval_hermite(traj, traj.t_start)[0]
    p_goal = eval_hermite(traj, traj.t_end)[0]
    b_start = nominal_formation(sc, p_start[:2])
    b_goal = nominal_formation(sc, p_goal[:2])
    kappa = float(fcfg.get("kappa", 0.25))
    spread0 = spread(b_start)
    z_ref = fcfg.get("z_ref", "auto")
    if z_ref == "auto":
        z_ref = float(p_start[2] + kappa * spread0)
    alpha_cfg = fcfg.get("alpha", "auto")
    N = sc.n_robots
    if alpha_cfg == "auto":
        alpha = np.zeros((N, N))
        for i in range(N):
            for j in range(N):
                if i != j:
                    alpha[i, j] = np.linalg.norm(b_start[i] - b_start[j])
    else:
        alpha = np.asarray(alpha_cfg, dtype=float)
    weights = fcfg.get("weights", 1.0)
    if np.isscalar(weights):
        weights = np.full(N, float(weights))
    return FootprintProblem(
        n_robots=N,
        K=int(fcfg.get("K", 200)),
        weights=weights,
        alpha=alpha,
        epsilon=float(fcfg.get("epsilon", 0.35)),
        eta=float(fcfg.get("eta", 0.3)),
        delta=float(fcfg.get("delta", 0.12)),
        z_ref=float(z_ref),
        kappa=kappa,
        obstacles=list(sc.super_ellipses),
        b_start=b_start,
        b_goal=b_goal,
        tol=float(fcfg.get("tol", 1e-6)),
        outer_iters=int(fcfg.get("outer_iters", 50)),
        inner_iters=int(fcfg.get("inner_iters", 200)),
    )
