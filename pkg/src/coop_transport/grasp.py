"""Rigid-grasp bookkeeping and coupled object-robot dynamics.

A rigid grasp fixes the pose of every end-effector relative to the
object frame. The grasp matrix stacks per-agent object-to-effector
wrench maps; with it, task wrenches map to joint torques and the
object and arm dynamics combine into one 6-DOF equation of motion for
the object twist.

Twists are ordered [linear; angular], wrenches [force; torque],
matching the robot-model Jacobian convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Primitive, check_rotation
from .robot_model import (
    chain_state,
    coriolis_times_qdot,
    geometric_jacobian,
    gravity_vector,
    jacobian_dot,
    mass_matrix,
    skew,
)


class GraspError(Exception):
    pass


@dataclass(frozen=True)
class GraspSpec:
    """Constant relative poses between object frame and end-effectors.

    grasp_points[i] is the i-th effector position in the object frame;
    grasp_rotations[i] is the effector orientation in the object frame.
    """

    grasp_points: np.ndarray  # (N, 3)
    grasp_rotations: np.ndarray  # (N, 3, 3)

    def __post_init__(self):
        pts = np.asarray(self.grasp_points, dtype=float).reshape(-1, 3)
        rots = np.asarray(self.grasp_rotations, dtype=float).reshape(-1, 3, 3)
        if len(pts) != len(rots) or len(pts) == 0:
            raise GraspError("grasp points/rotations mismatch")
        for R in rots:
            check_rotation(R)
        if not np.all(np.isfinite(pts)):
            raise GraspError("grasp offsets must be finite")
        object.__setattr__(self, "grasp_points", pts)
        object.__setattr__(self, "grasp_rotations", rots)

    @property
    def n_robots(self) -> int:
        return len(self.grasp_points)

    def ee_targets(self, x_o, R_o):
        """World end-effector poses implied by an object pose."""
        x_o = np.asarray(x_o, dtype=float).reshape(3)
        R_o = np.asarray(R_o, dtype=float).reshape(3, 3)
        pos = x_o + (R_o @ self.grasp_points.T).T
        rot = np.einsum("ij,njk->nik", R_o, self.grasp_rotations)
        return pos, rot

    def object_from_ee(self, ee_R, ee_p, i: int):
        """Object pose implied by effector i under the rigid grasp."""
        R_o = ee_R @ self.grasp_rotations[i].T
        x_o = ee_p - R_o @ self.grasp_points[i]
        return x_o, R_o


@dataclass(frozen=True)
class ObjectModel:
    """Free rigid body carried by the team."""

    mass: float
    inertia: np.ndarray  # 3x3 about COM, body frame
    primitive: Primitive | None = None
    bounding_radius: float = 0.0

    def __post_init__(self):
        if self.mass <= 0:
            raise GraspError("object mass must be > 0")
        inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        if np.max(np.abs(inertia - inertia.T)) > 1e-12 or np.any(
            np.linalg.eigvalsh(inertia) <= 0
        ):
            raise GraspError("object inertia must be symmetric positive definite")
        object.__setattr__(self, "inertia", inertia)

    def spatial_inertia(self, R_o) -> np.ndarray:
        """6x6 inertia at the COM for [linear; angular] twists."""
        Iw = R_o @ self.inertia @ R_o.T
        M = np.zeros((6, 6))
        M[:3, :3] = self.mass * np.eye(3)
        M[3:, 3:] = Iw
        return M


def ring_grasp(
    n_robots: int,
    radius: float,
    approach_pitch: float = 0.45,
    start_angle: float = np.pi / 2,
) -> GraspSpec:
    """Evenly spaced side grasps around the object rim.

    Each effector's tool axis points at the object center, tilted down
    by approach_pitch; a nonzero pitch keeps the wrist-yaw axis away
    from the shoulder-yaw axis (no wrist singularity at the grasp).
    """
    from .robot_model import rotation_about

    angles = start_angle + 2.0 * np.pi * np.arange(n_robots) / n_robots
    pts = radius * np.column_stack(
        [np.cos(angles), np.sin(angles), np.zeros(n_robots)]
    )
    rots = np.array(
        [
            rotation_about([0, 0, 1], a + np.pi)
            @ rotation_about([0, 1, 0], approach_pitch)
            for a in angles
        ]
    )
    return GraspSpec(pts, rots)


def effector_wrench_map(p_offset) -> np.ndarray:
    """Map an object twist to the effector twist across offset p.

    p_offset points from the object COM to the effector (world frame).
    The transpose maps effector wrenches to object wrenches.
    """
    J = np.eye(6)
    J[:3, 3:] = skew(-np.asarray(p_offset, dtype=float))
    return J


def grasp_matrix(ee_positions, object_position) -> np.ndarray:
    """6 x 6N grasp matrix from effector positions and the object COM."""
    ee = np.asarray(ee_positions, dtype=float).reshape(-1, 3)
    x_o = np.asarray(object_position, dtype=float).reshape(3)
    blocks = [effector_wrench_map(p - x_o).T for p in ee]
    G = np.hstack(blocks)
    if np.linalg.matrix_rank(G, tol=1e-9) < 6:
        raise GraspError("degenerate grasp: grasp matrix is rank deficient")
    return G


def taskspace_to_jointspace(J: np.ndarray, G: np.ndarray, u) -> np.ndarray:
    """Joint torques realizing an object wrench u (6-vector).

    Uses the Moore-Penrose pseudo-inverse of the grasp matrix for the
    minimum-norm wrench distribution: tau = J^T G^+ u.
    """
    u = np.asarray(u, dtype=float).reshape(6)
    if np.linalg.matrix_rank(G, tol=1e-9) < 6:
        raise GraspError("grasp matrix is rank deficient")
    lam = np.linalg.pinv(G) @ u
    return J.T @ lam


def stacked_jacobian(models, qs) -> np.ndarray:
    """Block-diagonal end-effector Jacobian of all robots."""
    n_total = sum(m.n for m in models)
    J = np.zeros((6 * len(models), n_total))
    col = 0
    for i, (m, q) in enumerate(zip(models, qs)):
        J[6 * i : 6 * i + 6, col : col + m.n] = geometric_jacobian(m, q)
        col += m.n
    return J


def coupled_object_dynamics(
    models,
    qs,
    qds,
    obj: ObjectModel,
    grasp: GraspSpec,
    x_o,
    R_o,
    u,
    gravity=(0.0, 0.0, -9.81),
    constraint_tol: float = 1e-6,
):
    """Object twist acceleration under stacked task wrenches u (6N,).

    Solves  M~ dv_o + C~ v_o + g~ = G u  with
    M~ = M_o + G Mbar G^T,  C~ v_o = C_o v_o + G Mbar dG^T v_o + G mu,
    g~ = g_o + G gbar,  where Mbar/mu/gbar are the task-space inertia,
    velocity-product, and gravity terms of each arm.

    The grasp velocity constraint J qd = G^T v_o must hold within
    constraint_tol (scaled); otherwise a GraspError is raised.
    """
    N = len(models)
    gravity = np.asarray(gravity, dtype=float).reshape(3)
    u = np.asarray(u, dtype=float).reshape(6 * N)
    x_o = np.asarray(x_o, dtype=float).reshape(3)
    R_o = check_rotation(R_o)

    ee_pos = []
    J_list, Jd_list = [], []
    for m, q, qd in zip(models, qs, qds):
        st = chain_state(m, q)
        ee_pos.append(st.ee_p)
        J_list.append(geometric_jacobian(m, q, st))
        Jd_list.append(jacobian_dot(m, q, qd))
    G = grasp_matrix(ee_pos, x_o)

    # object twist from the grasp constraint (least squares over G^T)
    qd_stack = np.concatenate([np.asarray(qd, dtype=float) for qd in qds])
    ee_twists = np.concatenate([J @ qd for J, qd in zip(J_list, qds)])
    v_o, *_ = np.linalg.lstsq(G.T, ee_twists, rcond=None)
    residual = G.T @ v_o - ee_twists
    scale = max(1.0, float(np.max(np.abs(ee_twists))))
    if np.max(np.abs(residual)) > constraint_tol * scale:
        raise GraspError(
            f"grasp velocity constraint violated by {np.max(np.abs(residual)):.3e}"
        )

    # task-space dynamics of each arm
    Mbar = np.zeros((6 * N, 6 * N))
    mu = np.zeros(6 * N)
    gbar = np.zeros(6 * N)
    for i, (m, q, qd) in enumerate(zip(models, qs, qds)):
        M = mass_matrix(m, q)
        Minv = np.linalg.inv(M)
        J = J_list[i]
        Lambda = np.linalg.inv(J @ Minv @ J.T)
        Jbar = Minv @ J.T @ Lambda
        sl = slice(6 * i, 6 * i + 6)
        Mbar[sl, sl] = Lambda
        mu[sl] = Jbar.T @ coriolis_times_qdot(m, q, qd) - Lambda @ (Jd_list[i] @ qd)
        gbar[sl] = Jbar.T @ gravity_vector(m, q, gravity)

    # dG^T/dt: the grasp offsets rotate with the object
    omega_o = v_o[3:]
    Gdt = np.zeros((6 * N, 6))
    for i in range(N):
        p = ee_pos[i] - x_o
        dJ = np.zeros((6, 6))
        dJ[:3, 3:] = skew(-np.cross(omega_o, p))
        Gdt[6 * i : 6 * i + 6] = dJ
    M_o = obj.spatial_inertia(R_o)
    Iw = M_o[3:, 3:]
    c_o = np.concatenate([np.zeros(3), np.cross(omega_o, Iw @ omega_o)])
    g_o = np.concatenate([-obj.mass * gravity, np.zeros(3)])

    M_t = M_o + G @ Mbar @ G.T
    c_t = c_o + G @ Mbar @ (Gdt @ v_o) + G @ mu
    g_t = g_o + G @ gbar
    dv_o = np.linalg.solve(M_t, G @ u - c_t - g_t)
    return dv_o, M_t, v_o


def grasp_residual(models, qs, grasp: GraspSpec):
    """Worst-case rigid-grasp drift over effector pairs.

    Returns (position residual, orientation residual): the largest
    deviation of any pairwise relative effector pose from the grasp
    geometry. A single-robot system is trivially rigid (0, 0).
    """
    poses = []
    for m, q in zip(models, qs):
        st = chain_state(m, q)
        poses.append((st.ee_R, st.ee_p))
    N = len(poses)
    if N == 1:
        return 0.0, 0.0
    pos_res = 0.0
    rot_res = 0.0
    for i in range(N):
        Ri, pi = poses[i]
        for j in range(i + 1, N):
            Rj, pj = poses[j]
            rel_p = Ri.T @ (pj - pi)
            ref_p = grasp.grasp_rotations[i].T @ (
                grasp.grasp_points[j] - grasp.grasp_points[i]
            )
            pos_res = max(pos_res, float(np.linalg.norm(rel_p - ref_p)))
            rel_R = Ri.T @ Rj
            ref_R = grasp.grasp_rotations[i].T @ grasp.grasp_rotations[j]
            cos_t = (np.trace(rel_R @ ref_R.T) - 1.0) / 2.0
            rot_res = max(rot_res, float(np.arccos(min(1.0, max(-1.0, cos_t)))))
    return pos_res, rot_res
