"""Deterministic multi-rate closed-loop simulation.

Robots follow their full joint-space dynamics under PD torques; the
object is a free rigid body coupled to every end-effector through
linear bushings (spring-damper wrenches approximating the rigid grasp,
since explicit closed kinematic chains are avoided). Inverse kinematics
runs at a slow rate, its output held constant (zero-order hold) while
control runs at a faster rate with physics substeps in between. The
whole loop is single-threaded with a fixed tick schedule, so logs are
bit-deterministic; an optional pipelined mode computes IK on a worker
thread with a single-slot handoff and must produce identical logs.
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass, field

import numpy as np

from .control import GainSet, lyapunov_value, pd_torque
from .geometry import (
    Box,
    Capsule,
    CollisionPairs,
    clearance_field,
    point_signed_distance_many,
    signed_distance,
)
from .grasp import GraspSpec, ObjectModel, grasp_residual
from .ik import IkProblem, solve_ik
from .robot_model import (
    SerialChainModel,
    _cross3,
    chain_state,
    forward_dynamics,
    geometric_jacobian,
    rotation_about,
    skew,
)
from .smoothing import HermiteTrajectory, eval_hermite
from .stl_core import Formula, SampledSignal, eval_boolean, eval_robustness, iter_nodes

log = logging.getLogger(__name__)

GRAVITY = np.array([0.0, 0.0, -9.81])


class SimDivergence(Exception):
    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


@dataclass(frozen=True)
class BushingParams:
    k_t: float  # N/m
    k_r: float  # N*m/rad
    c_t: float  # N*s/m
    c_r: float  # N*m*s/rad

    @classmethod
    def critical(
        cls, k_t, k_r, obj_mass, obj_inertia_scale, n_robots,
        ratio=1.0, rot_ratio=0.1,
    ):
        """Damping at the given ratio for the object mass split N ways.

        The rotational channel is deliberately under-damped: grasp
        levers already damp object rocking through c_t, and a large
        c_r puts an integrator-hostile pole on the small wrist
        inertias.
        """
        c_t = 2.0 * ratio * np.sqrt(k_t * obj_mass / n_robots)
        c_r = 2.0 * rot_ratio * np.sqrt(k_r * obj_inertia_scale / n_robots)
        return cls(float(k_t), float(k_r), float(c_t), float(c_r))


@dataclass
class SimConfig:
    control_rate_hz: float = 1000.0
    ik_rate_hz: float = 10.0
    physics_dt: float = 1e-4
    integrator: str = "rk4"  # "rk4" | "semi_implicit_euler"
    bushing: BushingParams = field(
        default_factory=lambda: BushingParams(1e4, 100.0, 160.0, 16.0)
    )
    t_max: float = 10.0
    seed: int = 0
    ik_lookahead: float | None = None  # defaults to half the IK period
    disturbance: dict | None = None
    pipelined: bool = False
    gravity: tuple = (0.0, 0.0, -9.81)

    def __post_init__(self):
        if self.control_rate_hz <= 0 or self.ik_rate_hz <= 0:
            raise ValueError("rates must be positive")
        if self.ik_rate_hz > self.control_rate_hz + 1e-12:
            raise ValueError("IK rate must not exceed the control rate")
        if self.physics_dt > 1.0 / (10.0 * self.control_rate_hz) + 1e-15:
            raise ValueError("physics dt must be <= a tenth of the control period")
        if self.integrator not in ("rk4", "semi_implicit_euler"):
            raise ValueError(f"unknown integrator '{self.integrator}'")
        period = 1.0 / self.control_rate_hz
        sub = period / self.physics_dt
        if abs(sub - round(sub)) > 1e-6:
            raise ValueError("physics dt must divide the control period")
        ratio = self.control_rate_hz / self.ik_rate_hz
        if abs(ratio - round(ratio)) > 1e-6:
            raise ValueError("IK rate must divide the control rate")
        self.gravity = np.asarray(self.gravity, dtype=float).reshape(3)

    @property
    def substeps(self) -> int:
        return int(round(1.0 / (self.control_rate_hz * self.physics_dt)))

    @property
    def ik_every(self) -> int:
        return int(round(self.control_rate_hz / self.ik_rate_hz))


@dataclass
class SystemState:
    qs: list  # per robot (n,)
    qds: list
    x_o: np.ndarray
    R_o: np.ndarray
    v_o: np.ndarray  # linear velocity
    w_o: np.ndarray  # angular velocity
    t: float = 0.0

    def copy(self) -> "SystemState":
        return SystemState(
            [q.copy() for q in self.qs],
            [qd.copy() for qd in self.qds],
            self.x_o.copy(),
            self.R_o.copy(),
            self.v_o.copy(),
            self.w_o.copy(),
            self.t,
        )

    def check_finite(self):
        vals = [*self.qs, *self.qds, self.x_o, self.v_o, self.w_o]
        for v in vals:
            if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > 1e9:
                raise SimDivergence("state diverged", last_state=self)


@dataclass
class World:
    """Everything the closed loop needs besides the plans."""

    models: list
    grasp: GraspSpec
    obj: ObjectModel
    obstacles: list
    gains: list  # GainSet per robot
    ik_problem: IkProblem
    initial: SystemState
    compensate_payload: bool = True
    body_builder: object = None

    def __post_init__(self):
        self.body_builder = _BodyBuilder(self.models, self.obj, self.grasp)


# ---------------------------------------------------------------------------
# bushing coupling


def rotation_exp(w, dt):
    angle = float(np.linalg.norm(w)) * dt
    if angle < 1e-12:
        return np.eye(3) + skew(w) * dt
    axis = np.asarray(w, dtype=float) / np.linalg.norm(w)
    return rotation_about(axis, angle)


def _orthonormalize(R):
    U, _, Vt = np.linalg.svd(R)
    out = U @ Vt
    if np.linalg.det(out) < 0:
        U[:, -1] *= -1
        out = U @ Vt
    return out


def bushing_wrench(
    ee_R, ee_p, ee_v, ee_w, tgt_R, tgt_p, tgt_v, tgt_w, params: BushingParams
):
    """Spring-damper wrench on the end-effector toward its grasp target.

    Returns (wrench_on_ee [f; tau], force_on_object, torque_on_object
    about the target point); the object side is the exact reaction.
    """
    from .robot_model import rotation_log

    ee_p, ee_v, ee_w = (np.asarray(v, dtype=float) for v in (ee_p, ee_v, ee_w))
    tgt_p, tgt_v, tgt_w = (np.asarray(v, dtype=float) for v in (tgt_p, tgt_v, tgt_w))
    f = params.k_t * (tgt_p - ee_p) - params.c_t * (ee_v - tgt_v)
    rot_err = rotation_log(np.asarray(tgt_R) @ np.asarray(ee_R).T)
    tau = params.k_r * rot_err - params.c_r * (ee_w - tgt_w)
    wrench_ee = np.concatenate([f, tau])
    return wrench_ee, -f, -tau


# ---------------------------------------------------------------------------
# physics stepping


def _derivatives(models, obj: ObjectModel, grasp: GraspSpec, state: SystemState, taus, bushing: BushingParams, gravity):
    qdds = []
    force_sum = obj.mass * np.asarray(gravity, dtype=float)
    torque_sum = np.zeros(3)
    for i, m in enumerate(models):
        st = chain_state(m, state.qs[i])
        J = geometric_jacobian(m, state.qs[i], st)
        tw = J @ state.qds[i]
        tgt_p = state.x_o + state.R_o @ grasp.grasp_points[i]
        tgt_R = state.R_o @ grasp.grasp_rotations[i]
        r = state.R_o @ grasp.grasp_points[i]
        tgt_v = state.v_o + _cross3(state.w_o, r)
        w_ee, f_o, tau_o = bushing_wrench(
            st.ee_R, st.ee_p, tw[:3], tw[3:], tgt_R, tgt_p, tgt_v, state.w_o, bushing
        )
        qdd = forward_dynamics(m, state.qs[i], state.qds[i], taus[i], gravity, ee_wrench=w_ee)
        qdds.append(qdd)
        force_sum = force_sum + f_o
        # reaction applied at the grasp target point on the object
        torque_sum = torque_sum + tau_o + _cross3(r, f_o)
    I_w = state.R_o @ obj.inertia @ state.R_o.T
    a_o = force_sum / obj.mass
    wdot = np.linalg.solve(I_w, torque_sum - _cross3(state.w_o, I_w @ state.w_o))
    return qdds, a_o, wdot


def step_dynamics(
    models,
    obj: ObjectModel,
    grasp: GraspSpec,
    state: SystemState,
    taus,
    config: SimConfig,
) -> SystemState:
    """One physics step with the configured integrator."""
    dt = config.physics_dt
    if config.integrator == "semi_implicit_euler":
        qdds, a_o, wdot = _derivatives(
            models, obj, grasp, state, taus, config.bushing, config.gravity
        )
        new = state.copy()
        for i in range(len(models)):
            new.qds[i] = state.qds[i] + dt * qdds[i]
            new.qs[i] = state.qs[i] + dt * new.qds[i]
        new.v_o = state.v_o + dt * a_o
        new.w_o = state.w_o + dt * wdot
        new.x_o = state.x_o + dt * new.v_o
        new.R_o = rotation_exp(new.w_o, dt) @ state.R_o
        new.t = state.t + dt
        new.check_finite()
        return new

    # classic RK4 over the full state, rotation flattened and
    # re-orthonormalized after the step
    def pack(s):
        return (
            [q.copy() for q in s.qs],
            [qd.copy() for qd in s.qds],
            s.x_o.copy(),
            s.R_o.copy(),
            s.v_o.copy(),
            s.w_o.copy(),
        )

    def axpy(s, k, h):
        out = state.copy()
        qs, qds, x, R, v, w = s
        dqs, dqds, dx, dR, dv, dw = k
        out.qs = [a + h * b for a, b in zip(qs, dqs)]
        out.qds = [a + h * b for a, b in zip(qds, dqds)]
        out.x_o = x + h * dx
        out.R_o = R + h * dR
        out.v_o = v + h * dv
        out.w_o = w + h * dw
        return out

    def deriv(s: SystemState):
        qdds, a_o, wdot = _derivatives(
            models, obj, grasp, s, taus, config.bushing, config.gravity
        )
        return (
            [qd.copy() for qd in s.qds],
            qdds,
            s.v_o.copy(),
            skew(s.w_o) @ s.R_o,
            a_o,
            wdot,
        )

    s0 = pack(state)
    k1 = deriv(state)
    k2 = deriv(axpy(s0, k1, dt / 2))
    k3 = deriv(axpy(s0, k2, dt / 2))
    k4 = deriv(axpy(s0, k3, dt))
    new = state.copy()
    for i in range(len(models)):
        new.qs[i] = state.qs[i] + dt / 6 * (k1[0][i] + 2 * k2[0][i] + 2 * k3[0][i] + k4[0][i])
        new.qds[i] = state.qds[i] + dt / 6 * (k1[1][i] + 2 * k2[1][i] + 2 * k3[1][i] + k4[1][i])
    new.x_o = state.x_o + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    new.R_o = _orthonormalize(
        state.R_o + dt / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
    )
    new.v_o = state.v_o + dt / 6 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
    new.w_o = state.w_o + dt / 6 * (k1[5] + 2 * k2[5] + 2 * k3[5] + k4[5])
    new.t = state.t + dt
    new.check_finite()
    return new


# ---------------------------------------------------------------------------
# clearance bookkeeping


class _BodyBuilder:
    """World-posed collision bodies with cheap batched clearance bounds."""

    def __init__(self, models, obj: ObjectModel, grasp: GraspSpec):
        self.models = models
        self.obj = obj
        self.grasp = grasp
        names = []
        owners = []
        for i, m in enumerate(models):
            for li, link in enumerate(m.links):
                for prim in link.collision:
                    names.append(f"r{i}/{link.name}")
                    owners.append((i, li))
        names.append("object")
        self.names = names
        n = len(names)
        allowed = set()
        by_robot = {}
        for idx, name in enumerate(names[:-1]):
            r = int(name[1 : name.index("/")])
            by_robot.setdefault(r, []).append(idx)
        obj_idx = n - 1
        for r, idxs in by_robot.items():
            for a in idxs:
                for b in idxs:
                    if a < b:
                        allowed.add((a, b))
            # wrist links may touch the object (they carry the grasp)
            for a in idxs:
                if "wrist" in names[a]:
                    allowed.add(tuple(sorted((a, obj_idx))))
        self.pairs = CollisionPairs(n_bodies=n, allowed=frozenset(allowed))

    def posed(self, state: SystemState, states=None):
        out = []
        for i, m in enumerate(self.models):
            st = states[i] if states is not None else chain_state(m, state.qs[i])
            for li, link in enumerate(m.links):
                for prim in link.collision:
                    out.append(prim.transformed(st.R[li], st.p[li]))
        if self.obj.primitive is not None:
            out.append(self.obj.primitive.transformed(state.R_o, state.x_o))
        else:
            out.append(Box(state.x_o, [0.1, 0.1, 0.1], state.R_o))
        return out

    @staticmethod
    def _sample_points(prim, per_capsule=5):
        if isinstance(prim, Capsule):
            fr = np.linspace(0.0, 1.0, per_capsule)
            pts = prim.p0 + fr[:, None] * (prim.p1 - prim.p0)
            slack = np.linalg.norm(prim.p1 - prim.p0) / (2 * (per_capsule - 1))
            return pts, prim.radius, slack
        if isinstance(prim, Box):
            # center plus face centers; slack is the largest half-diagonal
            he = prim.half_extents
            offs = [np.zeros(3)]
            for k in range(3):
                for s in (-1.0, 1.0):
                    v = np.zeros(3)
                    v[k] = s * he[k]
                    offs.append(v)
            pts = prim.center + (prim.rotation @ np.array(offs).T).T
            slack = float(np.linalg.norm(he))
            return pts, 0.0, slack
        return prim.center[None], prim.radius, 0.0

    def min_obstacle_clearance(self, bodies, obstacles, exact_below=0.35):
        """Two-stage min clearance: batched bound, exact refinement.

        Far pairs report a conservative sampled bound (never above the
        true distance plus the sampling slack); pairs inside
        exact_below are recomputed exactly, so values near contact are
        trustworthy.
        """
        if not obstacles:
            return np.inf
        best = np.inf
        for body in bodies:
            pts, radius, slack = self._sample_points(body)
            for o in obstacles:
                bound = float(np.min(point_signed_distance_many(o, pts))) - radius
                if bound - slack < exact_below:
                    best = min(best, signed_distance(body, o))
                else:
                    best = min(best, bound)
        return best

    def min_self_clearance(self, bodies, exact_below=0.25):
        best = np.inf
        samples = [self._sample_points(b) for b in bodies]
        for i, j in self.pairs.forbidden:
            pa, ra, sa = samples[i]
            pb, rb, sb = samples[j]
            diff = pa[:, None] - pb[None]
            bound = float(np.sqrt(np.min(np.einsum("ijk,ijk->ij", diff, diff)))) - ra - rb
            if bound - sa - sb < exact_below:
                best = min(best, signed_distance(bodies[i], bodies[j]))
            else:
                best = min(best, bound - sa - sb)
        return best


# ---------------------------------------------------------------------------
# the multirate loop


@dataclass
class SimLog:
    times: np.ndarray
    qs: np.ndarray  # (T, N, n)
    qds: np.ndarray
    taus: np.ndarray
    q_des: np.ndarray
    x_o: np.ndarray  # (T, 3)
    R_o: np.ndarray  # (T, 3, 3)
    v_o: np.ndarray
    w_o: np.ndarray
    bushing_wrenches: np.ndarray  # (T, N, 6)
    min_clearance: np.ndarray
    self_clearance: np.ndarray
    collision_cost: np.ndarray
    object_error: np.ndarray
    base_error: np.ndarray
    grasp_pos_residual: np.ndarray
    grasp_rot_residual: np.ndarray
    ik_certified: np.ndarray
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "t_end": float(self.times[-1]),
            "object_error_max": float(np.max(self.object_error)),
            "object_error_rms": float(np.sqrt(np.mean(self.object_error ** 2))),
            "base_error_max": float(np.max(self.base_error)),
            "min_clearance": float(np.min(self.min_clearance)),
            "min_self_clearance": float(np.min(self.self_clearance)),
            "grasp_pos_residual_max": float(np.max(self.grasp_pos_residual)),
            "grasp_rot_residual_max": float(np.max(self.grasp_rot_residual)),
            "ik_certified_fraction": float(np.mean(self.ik_certified)),
            **self.meta,
        }

    def to_csv(self, path):
        """One row per control tick.

        Columns: t, then per robot i: q_i (n), qd_i (n), tau_i (n),
        qdes_i (n); then x_o (3), rotvec_o (3), v_o (3), w_o (3),
        per-robot bushing wrench (6 each), min_clearance,
        self_clearance, collision_cost, object_error, base_error,
        grasp_pos_residual, grasp_rot_residual, ik_certified.
        """
        from .robot_model import rotation_log

        T, N, n = self.qs.shape
        cols = [self.times[:, None]]
        for i in range(N):
            cols += [self.qs[:, i], self.qds[:, i], self.taus[:, i], self.q_des[:, i]]
        rotvecs = np.array([rotation_log(R) for R in self.R_o])
        cols += [self.x_o, rotvecs, self.v_o, self.w_o]
        for i in range(N):
            cols.append(self.bushing_wrenches[:, i])
        cols += [
            self.min_clearance[:, None],
            self.self_clearance[:, None],
            self.collision_cost[:, None],
            self.object_error[:, None],
            self.base_error[:, None],
            self.grasp_pos_residual[:, None],
            self.grasp_rot_residual[:, None],
            self.ik_certified[:, None].astype(float),
        ]
        data = np.hstack(cols)
        with open(path, "w") as fh:
            if self.meta:
                fh.write(f"# scenario_hash={self.meta.get('scenario_hash', '')} "
                         f"seed={self.meta.get('seed', '')}\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path, n_robots: int, n_joints: int) -> "SimLog":
        """Rebuild a log from the documented CSV column order."""
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        T = len(data)
        N, n = n_robots, n_joints
        c = 0

        def take(width):
            nonlocal c
            out = data[:, c : c + width]
            c += width
            return out

        times = take(1)[:, 0]
        qs = np.zeros((T, N, n))
        qds = np.zeros((T, N, n))
        taus = np.zeros((T, N, n))
        q_des = np.zeros((T, N, n))
        for i in range(N):
            qs[:, i] = take(n)
            qds[:, i] = take(n)
            taus[:, i] = take(n)
            q_des[:, i] = take(n)
        x_o = take(3)
        rotvecs = take(3)
        v_o = take(3)
        w_o = take(3)
        wrenches = np.zeros((T, N, 6))
        for i in range(N):
            wrenches[:, i] = take(6)
        min_clear = take(1)[:, 0]
        self_clear = take(1)[:, 0]
        ccost = take(1)[:, 0]
        obj_err = take(1)[:, 0]
        base_err = take(1)[:, 0]
        gp = take(1)[:, 0]
        gr = take(1)[:, 0]
        cert = take(1)[:, 0] > 0.5
        R_o = np.zeros((T, 3, 3))
        for k in range(T):
            angle = float(np.linalg.norm(rotvecs[k]))
            if angle < 1e-15:
                R_o[k] = np.eye(3)
            else:
                R_o[k] = rotation_about(rotvecs[k] / angle, angle)
        return cls(
            times=times, qs=qs, qds=qds, taus=taus, q_des=q_des,
            x_o=x_o, R_o=R_o, v_o=v_o, w_o=w_o, bushing_wrenches=wrenches,
            min_clearance=min_clear, self_clearance=self_clear,
            collision_cost=ccost, object_error=obj_err, base_error=base_err,
            grasp_pos_residual=gp, grasp_rot_residual=gr, ik_certified=cert,
        )


def _ik_worker(inbox: queue.Queue, outbox: queue.Queue):
    while True:
        job = inbox.get()
        if job is None:
            return
        fn, args = job
        outbox.put(fn(*args))


def run_closed_loop(
    world: World,
    trajectory: HermiteTrajectory,
    footprint_plan,
    config: SimConfig,
) -> SimLog:
    """Run the full multirate loop and return the tick-rate log."""
    models = world.models
    N = len(models)
    state = world.initial.copy()
    state.t = 0.0
    gains = world.gains
    problem = world.ik_problem
    builder = world.body_builder

    period = 1.0 / config.control_rate_hz
    n_ticks = int(round(config.t_max * config.control_rate_hz)) + 1
    lookahead = (
        config.ik_lookahead
        if config.ik_lookahead is not None
        else 0.5 / config.ik_rate_hz
    )

    dist_fn = _make_disturbance(config.disturbance, models)

    q_des = [q.copy() for q in state.qs]
    warm = [q.copy() for q in state.qs]
    collision_active = False
    uncert_streak = 0
    last_res = None

    obj_field = clearance_field(world.obstacles) if world.obstacles else None

    T = n_ticks
    n = models[0].n
    out = SimLog(
        times=np.zeros(T),
        qs=np.zeros((T, N, n)),
        qds=np.zeros((T, N, n)),
        taus=np.zeros((T, N, n)),
        q_des=np.zeros((T, N, n)),
        x_o=np.zeros((T, 3)),
        R_o=np.zeros((T, 3, 3)),
        v_o=np.zeros((T, 3)),
        w_o=np.zeros((T, 3)),
        bushing_wrenches=np.zeros((T, N, 6)),
        min_clearance=np.zeros(T),
        self_clearance=np.zeros(T),
        collision_cost=np.zeros(T),
        object_error=np.zeros(T),
        base_error=np.zeros(T),
        grasp_pos_residual=np.zeros(T),
        grasp_rot_residual=np.zeros(T),
        ik_certified=np.zeros(T, dtype=bool),
    )

    inbox = outbox = worker = None
    if config.pipelined:
        inbox, outbox = queue.Queue(1), queue.Queue(1)
        worker = threading.Thread(
            target=_ik_worker, args=(inbox, outbox), daemon=True
        )
        worker.start()

    try:
        for tick in range(n_ticks):
            t = tick * period
            if tick % config.ik_every == 0:
                t_tgt = min(t + lookahead, trajectory.t_end)
                x_tgt = eval_hermite(trajectory, t_tgt)[0]
                b_ref = (
                    footprint_plan.base_reference(t_tgt)
                    if footprint_plan is not None
                    else None
                )
                if obj_field is not None:
                    clear_obj = obj_field(state.x_o) - world.obj.bounding_radius
                    act = (
                        problem.activation_clearance
                        if problem.activation_clearance is not None
                        else 2.0 * problem.d_safe
                    )
                    # 10% hysteresis so the term does not toggle
                    if collision_active:
                        collision_active = clear_obj < 1.1 * act
                    else:
                        collision_active = clear_obj < act
                args = (
                    problem,
                    models,
                    world.grasp,
                    x_tgt,
                    b_ref,
                    [w.copy() for w in warm],
                    world.obstacles,
                    collision_active,
                    world.obj.bounding_radius,
                )
                if config.pipelined:
                    inbox.put((solve_ik, args))
                    res = outbox.get()
                else:
                    res = solve_ik(*args)
                last_res = res
                q_des = [q.copy() for q in res.q_des]
                warm = [q.copy() for q in res.q_des]
                if not res.certified:
                    uncert_streak += 1
                    if uncert_streak > 3:
                        log.warning(
                            "IK uncertified %d times in a row at t=%.2f "
                            "(pos %.2e, rot %.2e)",
                            uncert_streak, t, res.grasp_pos_residual,
                            res.grasp_rot_residual,
                        )
                else:
                    uncert_streak = 0

            taus = []
            share = (
                -world.obj.mass * config.gravity / N
                if world.compensate_payload
                else None
            )
            for i, m in enumerate(models):
                tau = pd_torque(
                    m, state.qs[i], state.qds[i], q_des[i], gains[i], config.gravity
                )
                if share is not None:
                    # static compensation of the carried load's share
                    J = geometric_jacobian(m, state.qs[i])
                    tau = tau + J.T @ np.concatenate([share, np.zeros(3)])
                w_extra = dist_fn(t, i)
                taus.append(tau + w_extra)

            # log the tick before stepping
            states = [chain_state(m, state.qs[i]) for i, m in enumerate(models)]
            bodies = builder.posed(state, states)
            out.times[tick] = t
            for i in range(N):
                out.qs[tick, i] = state.qs[i]
                out.qds[tick, i] = state.qds[i]
                out.taus[tick, i] = taus[i]
                out.q_des[tick, i] = q_des[i]
            out.x_o[tick] = state.x_o
            out.R_o[tick] = state.R_o
            out.v_o[tick] = state.v_o
            out.w_o[tick] = state.w_o
            for i, m in enumerate(models):
                st = states[i]
                J = geometric_jacobian(m, state.qs[i], st)
                tw = J @ state.qds[i]
                tgt_p = state.x_o + state.R_o @ world.grasp.grasp_points[i]
                tgt_R = state.R_o @ world.grasp.grasp_rotations[i]
                r = state.R_o @ world.grasp.grasp_points[i]
                tgt_v = state.v_o + np.cross(state.w_o, r)
                w_ee, _, _ = bushing_wrench(
                    st.ee_R, st.ee_p, tw[:3], tw[3:], tgt_R, tgt_p, tgt_v,
                    state.w_o, config.bushing,
                )
                out.bushing_wrenches[tick, i] = w_ee
            out.min_clearance[tick] = builder.min_obstacle_clearance(
                bodies, world.obstacles
            )
            out.self_clearance[tick] = builder.min_self_clearance(bodies)
            out.collision_cost[tick] = last_res.collision_cost if last_res else 0.0
            x_ref = eval_hermite(trajectory, min(t, trajectory.t_end))[0]
            out.object_error[tick] = float(np.linalg.norm(state.x_o - x_ref))
            if footprint_plan is not None:
                b_now = footprint_plan.base_reference(min(t, footprint_plan.times[-1]))
                bases = np.array([state.qs[i][:2] for i in range(N)])
                out.base_error[tick] = float(np.max(np.linalg.norm(bases - b_now, axis=1)))
            pos_res, rot_res = grasp_residual(models, state.qs, world.grasp)
            out.grasp_pos_residual[tick] = pos_res
            out.grasp_rot_residual[tick] = rot_res
            out.ik_certified[tick] = last_res.certified if last_res else True

            if tick == n_ticks - 1:
                break
            for _ in range(config.substeps):
                state = step_dynamics(models, world.obj, world.grasp, state, taus, config)
    finally:
        if worker is not None:
            inbox.put(None)
            worker.join(timeout=5.0)
    return out


def _make_disturbance(spec, models):
    if spec is None:
        return lambda t, i: 0.0
    kind = spec.get("kind", "sinusoid")
    if kind != "sinusoid":
        raise ValueError(f"unknown disturbance kind '{kind}'")
    amp = float(spec["amplitude"])
    freq = float(spec["freq_hz"])
    robots = spec.get("robots")

    def fn(t, i):
        if robots is not None and i not in robots:
            return 0.0
        n = models[i].n
        phases = np.arange(n) * 0.7
        return amp * np.sin(2 * np.pi * freq * t + phases)

    return fn


# ---------------------------------------------------------------------------
# single-robot regulation rollout (controller diagnostics)


def rollout_regulation(
    model: SerialChainModel,
    gains: GainSet,
    q0,
    qd0,
    q_des,
    t_final: float,
    dt: float = 1e-4,
    disturbance=None,
    gravity=GRAVITY,
):
    """PD regulation of one robot against a fixed reference.

    Returns (times, q, qd, V) sampled every step; used by the Lyapunov,
    exponential-envelope, and ISS diagnostics.
    """
    steps = int(round(t_final / dt))
    q = np.asarray(q0, dtype=float).copy()
    qd = np.asarray(qd0, dtype=float).copy()
    q_des = np.asarray(q_des, dtype=float)
    ts = np.zeros(steps + 1)
    qs = np.zeros((steps + 1, model.n))
    qds = np.zeros((steps + 1, model.n))
    Vs = np.zeros(steps + 1)

    def accel(qq, vv, t):
        tau = pd_torque(model, qq, vv, q_des, gains, gravity)
        if disturbance is not None:
            tau = tau + disturbance(t)
        return forward_dynamics(model, qq, vv, tau, gravity)

    for k in range(steps + 1):
        ts[k] = k * dt
        qs[k] = q
        qds[k] = qd
        Vs[k] = lyapunov_value(model, q, qd, q_des, gains)
        if k == steps:
            break
        t = k * dt
        k1q, k1v = qd, accel(q, qd, t)
        k2q, k2v = qd + dt / 2 * k1v, accel(q + dt / 2 * k1q, qd + dt / 2 * k1v, t + dt / 2)
        k3q, k3v = qd + dt / 2 * k2v, accel(q + dt / 2 * k2q, qd + dt / 2 * k2v, t + dt / 2)
        k4q, k4v = qd + dt * k3v, accel(q + dt * k3q, qd + dt * k3v, t + dt)
        q = q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        qd = qd + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return ts, qs, qds, Vs


# ---------------------------------------------------------------------------
# run evaluation


@dataclass
class EvalReport:
    robustness: float
    satisfied: bool
    min_clearance: float
    min_self_clearance: float
    separation_ok: bool
    object_error_max: float
    object_error_rms: float
    base_error_max: float
    grasp_pos_residual_max: float
    passed: bool

    def to_dict(self) -> dict:
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                for k, v in self.__dict__.items()}


def evaluate_run(
    log_: SimLog,
    formula: Formula,
    obstacles,
    tracking_rms_bound: float | None = None,
) -> EvalReport:
    """Check a finished run against the task and safety requirements.

    Robustness is evaluated on the executed object-position signal; a
    formula horizon longer than the log raises HorizonError.
    """
    sig = SampledSignal(log_.times, log_.x_o)
    env = {}
    for node in iter_nodes(formula):
        if node.kind == "pred" and node.pred.func_id == "avoid":
            env[node.pred.set_name] = clearance_field(obstacles)
    rho = eval_robustness(formula, sig, 0.0, env=env)
    sat = eval_boolean(formula, sig, 0.0, env=env)
    min_clear = float(np.min(log_.min_clearance))
    min_self = float(np.min(log_.self_clearance))
    rms = float(np.sqrt(np.mean(log_.object_error ** 2)))
    passed = bool(
        rho > 0.0
        and sat
        and min_clear > 0.0
        and min_self > 0.0
        and (tracking_rms_bound is None or rms <= tracking_rms_bound)
    )
    return EvalReport(
        robustness=float(rho),
        satisfied=bool(sat),
        min_clearance=min_clear,
        min_self_clearance=min_self,
        separation_ok=bool(rho > 0.0 and min_clear > 0.0),
        object_error_max=float(np.max(log_.object_error)),
        object_error_rms=rms,
        base_error_max=float(np.max(log_.base_error)),
        grasp_pos_residual_max=float(np.max(log_.grasp_pos_residual)),
        passed=passed,
    )
