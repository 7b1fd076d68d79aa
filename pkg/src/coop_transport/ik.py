"""Fixed-budget constrained inverse kinematics.

Tracks the object reference and the planned base footprints while
holding the rigid grasp, staying inside joint limits, and penalizing
proximity to obstacles through a smooth signed-distance potential.

The solver is a damped Gauss-Newton iteration on a stacked residual
(posture regularization, per-robot object-position tracking, pairwise
rigid-grasp penalties) plus the gradient of the collision potential,
with box constraints (joint limits, base corridor) enforced by
projection. It runs for a fixed iteration budget and reports whether
the grasp residuals reached certification tolerances; an exhausted
budget is an uncertified result, not an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import point_signed_distance, point_signed_distance_grad
from .grasp import GraspSpec, grasp_residual
from .robot_model import (
    SerialChainModel,
    chain_state,
    geometric_jacobian,
    point_jacobian,
    rotation_log,
    skew,
)

CERT_POS_TOL = 1e-3  # m
CERT_ROT_TOL = 1e-2  # rad


@dataclass
class IkProblem:
    """Weights, shaping parameters, and budget for one solver instance."""

    q0: list  # reference posture per robot
    nu: float = 0.15  # base corridor half-width (m)
    alpha: float = 40.0  # collision shaping (1/m^2)
    d_safe: float = 0.15  # safety margin (m)
    posture_weight: float = 0.05
    tracking_weight: float = 30.0
    grasp_pos_weight: float = 1e3
    grasp_rot_weight: float = 1e2
    collision_weight: float = 1.0
    budget: int = 40
    activation_clearance: float | None = None  # default: 2 * d_safe
    escalation: float = 10.0  # grasp penalty escalation factor at mid-budget
    step_cap_arm: float = 0.2  # rad per iteration
    step_cap_base: float = 0.1  # m per iteration

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("iteration budget must be >= 1")
        if self.alpha <= 0 or self.d_safe <= 0:
            raise ValueError("alpha and d_safe must be > 0")
        if self.nu < 0:
            raise ValueError("base tolerance nu must be >= 0")


@dataclass
class IkResult:
    q_des: list
    grasp_pos_residual: float
    grasp_rot_residual: float
    collision_cost: float
    iterations: int
    certified: bool
    merit_history: list = field(default_factory=list)
    phase_starts: list = field(default_factory=list)
    tracking_error: float = 0.0


# ---------------------------------------------------------------------------
# collision potential


def pair_potential(d: float, alpha: float, d_safe: float):
    """Smooth pair cost and its derivative in the distance.

    Beyond the margin the printed Gaussian is tapered by a distance
    weight exp(-(d - d_safe)/d_safe) and clipped to zero past
    d_safe + 4/sqrt(alpha). Below the margin the cost continues as the
    C1 linear ramp 1 + (d_safe - d)/d_safe so that approaching and
    penetrating always raises the cost (monotone-safety form).
    """
    if d <= d_safe:
        return 1.0 + (d_safe - d) / d_safe, -1.0 / d_safe
    if d >= d_safe + 4.0 / np.sqrt(alpha):
        return 0.0, 0.0
    u = d - d_safe
    val = np.exp(-alpha * u * u - u / d_safe)
    return val, val * (-2.0 * alpha * u - 1.0 / d_safe)


def representative_points(model: SerialChainModel, st, fractions=(0.0, 0.5, 1.0)):
    """Sampled sphere centers over the robot's collision geometry.

    Capsule links are sampled along their axis; the base box
    contributes its side-face centers so walls also repel the base
    (the footprint keep-outs remain the hard guarantee). Fixed local
    samples keep the potential smooth in q.
    """
    out = []
    for i, link in enumerate(model.links):
        for prim in link.collision:
            if hasattr(prim, "p0"):
                for f in fractions:
                    local = prim.p0 + f * (prim.p1 - prim.p0)
                    world = st.R[i] @ local + st.p[i]
                    out.append((i, local, world, prim.radius))
            elif hasattr(prim, "half_extents"):
                hx, hy, _ = prim.half_extents
                for local in (
                    prim.center + np.array([hx, 0.0, 0.0]),
                    prim.center + np.array([-hx, 0.0, 0.0]),
                    prim.center + np.array([0.0, hy, 0.0]),
                    prim.center + np.array([0.0, -hy, 0.0]),
                ):
                    world = st.R[i] @ local + st.p[i]
                    out.append((i, local, world, 0.0))
    return out


def collision_cost(
    models,
    qs,
    obstacles,
    alpha: float,
    d_safe: float,
    grasp: GraspSpec | None = None,
    object_radius: float = 0.0,
    want_grad: bool = True,
):
    """Total collision potential over robot-obstacle representative pairs.

    Includes one representative sphere per robot at the grasp-implied
    object position when a grasp is given. Gradient is assembled by the
    chain rule through the signed distances and the point Jacobians.
    """
    dims = [m.n for m in models]
    grad = np.zeros(sum(dims)) if want_grad else None
    total = 0.0
    cutoff = d_safe + 4.0 / np.sqrt(alpha)
    col = 0
    for ri, (m, q) in enumerate(zip(models, qs)):
        st = chain_state(m, q)
        # obstacles beyond the robot's reach plus the cutoff cannot
        # contribute; prune them once per robot
        anchor = st.p[1]
        near = [
            o for o in obstacles
            if point_signed_distance(o, anchor) < 1.6 + cutoff
        ]
        if not near:
            col += m.n
            continue
        pts = representative_points(m, st)
        if grasp is not None:
            r_obj = -(grasp.grasp_rotations[ri].T @ grasp.grasp_points[ri])
            world = st.ee_p + st.ee_R @ r_obj  # grasp-implied object COM
            pts.append((m.n - 1, m.ee_offset + r_obj, world, object_radius))
        for link_idx, local, world, radius in pts:
            for obs in near:
                d = point_signed_distance(obs, world) - radius
                if d >= cutoff:
                    continue
                val, dval = pair_potential(d, alpha, d_safe)
                total += val
                if want_grad and dval != 0.0:
                    n_hat = point_signed_distance_grad(obs, world)
                    Jp = point_jacobian(m, st, link_idx, world)
                    grad[col : col + m.n] += dval * (n_hat @ Jp)
        col += m.n
    return (total, grad) if want_grad else (total, None)


# ---------------------------------------------------------------------------
# stacked residual assembly


def _object_offsets(grasp: GraspSpec):
    """Object COM expressed in each effector frame."""
    return [
        -(grasp.grasp_rotations[i].T @ grasp.grasp_points[i])
        for i in range(grasp.n_robots)
    ]


def _residual_and_jacobian(models, qs, grasp, x_target, weights, want_jac=True):
    N = len(models)
    dims = [m.n for m in models]
    total = sum(dims)
    offsets = np.cumsum([0] + dims)
    sw_post, sw_track, sw_gp, sw_gr, q0 = weights

    states = [chain_state(m, q) for m, q in zip(models, qs)]
    jacs = [geometric_jacobian(m, q, st) for m, q, st in zip(models, qs, states)]
    r_obj = _object_offsets(grasp)

    rows = []
    jac_rows = []

    def add(res_vec, jac_block):
        rows.append(res_vec)
        if want_jac:
            jac_rows.append(jac_block)

    # posture
    for i, (m, q) in enumerate(zip(models, qs)):
        r = sw_post[i] * (np.asarray(q) - q0[i])
        Jb = np.zeros((m.n, total))
        Jb[:, offsets[i] : offsets[i + 1]] = np.diag(sw_post[i])
        add(r, Jb)

    # object-position tracking per robot
    for i, (m, st) in enumerate(zip(models, states)):
        pred = st.ee_p + st.ee_R @ r_obj[i]
        r = sw_track * (pred - x_target)
        Jb = np.zeros((3, total))
        Jb[:, offsets[i] : offsets[i + 1]] = sw_track * point_jacobian(
            m, st, m.n - 1, pred
        )
        add(r, Jb)

    # pairwise rigid-grasp penalties
    for i in range(N):
        Ri, pi = states[i].ee_R, states[i].ee_p
        for j in range(i + 1, N):
            Rj, pj = states[j].ee_R, states[j].ee_p
            ref_p = grasp.grasp_rotations[i].T @ (
                grasp.grasp_points[j] - grasp.grasp_points[i]
            )
            ref_R = grasp.grasp_rotations[i].T @ grasp.grasp_rotations[j]
            r_pos = sw_gp * (Ri.T @ (pj - pi) - ref_p)
            E = (Ri.T @ Rj) @ ref_R.T
            r_rot = sw_gr * rotation_log(E)
            Jp = np.zeros((3, total))
            Jr = np.zeros((3, total))
            Ji, Jj = jacs[i], jacs[j]
            Jp[:, offsets[j] : offsets[j + 1]] = sw_gp * (Ri.T @ Jj[:3])
            Jp[:, offsets[i] : offsets[i + 1]] = sw_gp * (
                Ri.T @ (skew(pj - pi) @ Ji[3:] - Ji[:3])
            )
            # small-angle rotation jacobian (exact at zero residual)
            Jr[:, offsets[j] : offsets[j + 1]] = sw_gr * (Ri.T @ Jj[3:])
            Jr[:, offsets[i] : offsets[i + 1]] = -sw_gr * (Ri.T @ Ji[3:])
            add(r_pos, Jp)
            add(r_rot, Jr)

    r = np.concatenate(rows)
    J = np.vstack(jac_rows) if want_jac else None
    return r, J


def _project(models, q_stack, b_ref, nu):
    """Clip base coordinates to the corridor and all joints to limits."""
    out = q_stack.copy()
    col = 0
    for i, m in enumerate(models):
        q = out[col : col + m.n]
        if b_ref is not None:
            q[0] = min(max(q[0], b_ref[i][0] - nu), b_ref[i][0] + nu)
            q[1] = min(max(q[1], b_ref[i][1] - nu), b_ref[i][1] + nu)
        np.clip(q, m.lower_limits, m.upper_limits, out=q)
        col += m.n
    return out


def _split(models, q_stack):
    out = []
    col = 0
    for m in models:
        out.append(q_stack[col : col + m.n].copy())
        col += m.n
    return out


def solve_ik(
    problem: IkProblem,
    models,
    grasp: GraspSpec,
    x_target,
    b_ref,
    q_warm,
    obstacles=(),
    collision_active: bool = True,
    object_radius: float = 0.0,
) -> IkResult:
    """One fixed-budget constrained solve.

    b_ref is the (N, 2) footprint reference; bases are kept inside
    b_ref +- nu by projection. The warm start must respect joint
    limits. Returns the best iterate found; `certified` reflects the
    final grasp residuals against the fixed tolerances.
    """
    N = len(models)
    x_target = np.asarray(x_target, dtype=float).reshape(3)
    b_ref = None if b_ref is None else np.asarray(b_ref, dtype=float).reshape(N, 2)
    dims = [m.n for m in models]
    for m, q in zip(models, q_warm):
        if not m.within_limits(np.asarray(q), tol=1e-6):
            raise ValueError("warm start violates joint limits")

    sw_post = []
    for i, m in enumerate(models):
        w = np.full(m.n, np.sqrt(problem.posture_weight))
        if b_ref is not None:
            w[:2] = 0.0  # the corridor steers the bases, not the posture prior
        sw_post.append(w)
    q0 = [np.asarray(q, dtype=float).copy() for q in problem.q0]

    def weights(gp_scale):
        return (
            sw_post,
            np.sqrt(problem.tracking_weight),
            np.sqrt(problem.grasp_pos_weight * gp_scale),
            np.sqrt(problem.grasp_rot_weight * gp_scale),
            q0,
        )

    def merit(q_stack, gp_scale):
        qs = _split(models, q_stack)
        r, _ = _residual_and_jacobian(
            models, qs, grasp, x_target, weights(gp_scale), want_jac=False
        )
        val = 0.5 * float(r @ r)
        if collision_active and obstacles:
            c, _ = collision_cost(
                models, qs, obstacles, problem.alpha, problem.d_safe,
                grasp=grasp, object_radius=object_radius, want_grad=False,
            )
            val += problem.collision_weight * c
        return val

    q = _project(models, np.concatenate([np.asarray(qq, dtype=float) for qq in q_warm]), b_ref, problem.nu)
    lam = 1e-6
    gp_scale = 1.0
    escalate_at = problem.budget // 2 if problem.escalation != 1.0 else None
    m_now = merit(q, gp_scale)
    history = [m_now]
    phase_starts = [0]
    iters_used = 0
    caps = np.concatenate(
        [
            np.concatenate(
                [np.full(2, problem.step_cap_base), np.full(m.n - 2, problem.step_cap_arm)]
            )
            for m in models
        ]
    )

    for it in range(problem.budget):
        iters_used = it + 1
        if escalate_at is not None and it == escalate_at and gp_scale == 1.0:
            gp_scale = problem.escalation
            m_now = merit(q, gp_scale)
            history.append(m_now)
            phase_starts.append(len(history) - 1)
        qs = _split(models, q)
        r, J = _residual_and_jacobian(models, qs, grasp, x_target, weights(gp_scale))
        g = J.T @ r
        if collision_active and obstacles:
            cval, cgrad = collision_cost(
                models, qs, obstacles, problem.alpha, problem.d_safe,
                grasp=grasp, object_radius=object_radius,
            )
            g = g + problem.collision_weight * cgrad
        H = J.T @ J
        accepted = False
        for _ in range(8):
            try:
                dq = -np.linalg.solve(H + lam * np.eye(len(g)), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            over = np.max(np.abs(dq) / caps)
            if over > 1.0:
                dq = dq / over
            alpha_ls = 1.0
            for _ in range(6):
                cand = _project(models, q + alpha_ls * dq, b_ref, problem.nu)
                m_cand = merit(cand, gp_scale)
                if m_cand < m_now - 1e-15:
                    q, m_now = cand, m_cand
                    history.append(m_now)
                    accepted = True
                    break
                alpha_ls *= 0.5
            if accepted:
                lam = max(lam / 3.0, 1e-8)
                break
            lam *= 10.0
            if lam > 1e10:
                break
        if not accepted:
            break

    qs = _split(models, q)
    pos_res, rot_res = grasp_residual(models, qs, grasp)
    if collision_active and obstacles:
        cval, _ = collision_cost(
            models, qs, obstacles, problem.alpha, problem.d_safe,
            grasp=grasp, object_radius=object_radius, want_grad=False,
        )
    else:
        cval = 0.0
    r_obj = _object_offsets(grasp)
    preds = []
    for i, (m, qq) in enumerate(zip(models, qs)):
        st = chain_state(m, qq)
        preds.append(st.ee_p + st.ee_R @ r_obj[i])
    track_err = float(np.max(np.linalg.norm(np.array(preds) - x_target, axis=1)))
    return IkResult(
        q_des=qs,
        grasp_pos_residual=pos_res,
        grasp_rot_residual=rot_res,
        collision_cost=cval,
        iterations=iters_used,
        certified=(pos_res <= CERT_POS_TOL and rot_res <= CERT_ROT_TOL),
        merit_history=history,
        phase_starts=phase_starts,
        tracking_error=track_err,
    )


# ---------------------------------------------------------------------------
# single-effector pose solve (initialization helper)


def _pose_solve_from(model, q_start, R_target, p_target, anchor, anchor_w, iters, tol):
    q = q_start.copy()
    lam = 1e-8
    sw = np.sqrt(anchor_w)

    def residual(qq, st):
        r = [st.ee_p - p_target, rotation_log(st.ee_R @ R_target.T)]
        if anchor is not None:
            r.append(sw * (qq[:2] - anchor))
        return np.concatenate(r)

    for _ in range(iters):
        st = chain_state(model, q)
        r = residual(q, st)
        err = float(np.linalg.norm(r[:6]))
        if err < tol:
            break
        J6 = geometric_jacobian(model, q, st)
        if anchor is not None:
            Ja = np.zeros((2, model.n))
            Ja[0, 0] = Ja[1, 1] = sw
            J = np.vstack([J6, Ja])
        else:
            J = J6
        H = J.T @ J + lam * np.eye(model.n)
        dq = -np.linalg.solve(H, J.T @ r)
        step = min(1.0, 0.5 / max(np.max(np.abs(dq)), 1e-9))
        q_new = model.clamp(q + step * dq)
        r_new = residual(q_new, chain_state(model, q_new))
        if np.linalg.norm(r_new) < np.linalg.norm(r):
            q = q_new
            lam = max(lam / 2, 1e-10)
        else:
            lam = min(lam * 10, 1e4)
    st = chain_state(model, q)
    final = np.concatenate([st.ee_p - p_target, rotation_log(st.ee_R @ R_target.T)])
    return q, float(np.linalg.norm(final))


def solve_effector_pose(
    model: SerialChainModel,
    R_target,
    p_target,
    base_hint=None,
    q_init=None,
    iters: int = 300,
    tol: float = 1e-12,
) -> np.ndarray:
    """Drive one effector to an exact pose (used to seed rigid grasps).

    Damped Gauss-Newton on the 6-D pose residual with a soft anchor on
    the base at base_hint, tried from several elbow-bend seeds so the
    result lands on a well-conditioned branch rather than a stretched
    arm with no vertical stiffness.
    """
    R_target = np.asarray(R_target, dtype=float).reshape(3, 3)
    p_target = np.asarray(p_target, dtype=float).reshape(3)
    anchor = (
        np.asarray(base_hint, dtype=float).reshape(2) if base_hint is not None else None
    )
    if q_init is not None:
        q, err = _pose_solve_from(
            model, np.asarray(q_init, dtype=float), R_target, p_target,
            anchor, 1e-3, iters, tol,
        )
        return q
    seeds = []
    base = anchor if anchor is not None else p_target[:2] - np.array([0.7, 0.0])
    yaw = np.arctan2(p_target[1] - base[1], p_target[0] - base[0])
    pitch = float(np.arcsin(np.clip(-R_target[2, 0], -1.0, 1.0)))
    for sh, el in ((-0.7, 1.7), (-0.5, 1.3), (-0.9, 2.1), (-0.3, 0.8)):
        q = np.zeros(model.n)
        q[:2] = base
        if model.n >= 7:
            q[2:7] = [yaw, sh, el, pitch - sh - el, 0.0]
        seeds.append(model.clamp(q))
    best = None
    for seed in seeds:
        q, err = _pose_solve_from(
            model, seed, R_target, p_target, anchor, 1e-3, iters, tol
        )
        healthy = model.n < 7 or 0.4 <= abs(q[4]) <= 2.3
        if err < 1e-8 and healthy:
            best = (q, err)
            break
        if best is None or err < best[1]:
            best = (q, err)
    # polish without the anchor: the soft base pull leaves a small pose
    # floor, and grasp seeding wants the pose exact
    q, _ = _pose_solve_from(model, best[0], R_target, p_target, None, 0.0, 60, tol)
    return q
