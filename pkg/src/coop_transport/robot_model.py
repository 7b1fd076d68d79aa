"""Mobile serial-chain kinematics and dynamics.

Each robot is a planar prismatic pair (base x, y at fixed height)
followed by a revolute arm, described as one serial chain. All spatial
recursions run in world coordinates with Featherstone-style vectors
(motion [omega; v_origin], force [moment_origin; f]), which removes all
frame transforms from the algorithms:

- recursive Newton-Euler for inverse dynamics,
- composite-rigid-body assembly for the mass matrix,
- Christoffel symbols of the mass matrix for the Coriolis matrix.

End-effector Jacobians are exposed in [linear; angular] row order at
the end-effector point, so the prismatic base columns are pure unit
translations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Box, Capsule, Primitive, Sphere, check_rotation


class ModelError(Exception):
    pass


def skew(v) -> np.ndarray:
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _cross3(a, b):
    # np.cross has heavy call overhead for single 3-vectors
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis (fast paths for x/y/z)."""
    ax, ay, az = (float(v) for v in axis)
    c, sn = np.cos(angle), np.sin(angle)
    if ax == 0.0 and ay == 0.0 and abs(az) == 1.0:
        sn = sn * az
        return np.array([[c, -sn, 0.0], [sn, c, 0.0], [0.0, 0.0, 1.0]])
    if ax == 0.0 and az == 0.0 and abs(ay) == 1.0:
        sn = sn * ay
        return np.array([[c, 0.0, sn], [0.0, 1.0, 0.0], [-sn, 0.0, c]])
    if ay == 0.0 and az == 0.0 and abs(ax) == 1.0:
        sn = sn * ax
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -sn], [0.0, sn, c]])
    K = skew([ax, ay, az])
    return np.eye(3) + sn * K + (1.0 - c) * (K @ K)


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def rotation_log(R) -> np.ndarray:
    """Axis-angle vector of a rotation matrix (safe near identity)."""
    R = np.asarray(R, dtype=float)
    cos_t = (np.trace(R) - 1.0) / 2.0
    cos_t = min(1.0, max(-1.0, cos_t))
    theta = np.arccos(cos_t)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-8:
        return 0.5 * w
    if theta > np.pi - 1e-6:
        # antipodal: extract axis from the symmetric part
        A = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(A), 0.0))
        axis = axis / max(np.linalg.norm(axis), 1e-12)
        # fix signs from off-diagonals
        if A[0, 1] < 0:
            axis[1] = -abs(axis[1])
        if A[0, 2] < 0:
            axis[2] = -abs(axis[2])
        return theta * axis
    return theta * w / (2.0 * np.sin(theta))


@dataclass(frozen=True)
class LinkSpec:
    """One joint plus the rigid link that follows it."""

    name: str
    joint_type: str  # "prismatic" | "revolute"
    axis: np.ndarray  # unit, in the joint frame
    origin_xyz: np.ndarray  # joint frame offset from parent, parent coords
    origin_rot: np.ndarray  # joint frame rotation offset from parent
    mass: float
    com: np.ndarray  # in link frame
    inertia: np.ndarray  # 3x3 about com, link frame
    limits: tuple
    collision: tuple = ()

    def __post_init__(self):
        if self.joint_type not in ("prismatic", "revolute"):
            raise ModelError(f"unknown joint type '{self.joint_type}'")
        ax = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(ax)
        if abs(n - 1.0) > 1e-9:
            raise ModelError(f"joint axis of '{self.name}' must be unit length")
        object.__setattr__(self, "axis", ax)
        object.__setattr__(self, "origin_xyz", np.asarray(self.origin_xyz, dtype=float).reshape(3))
        object.__setattr__(self, "origin_rot", check_rotation(self.origin_rot))
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float).reshape(3))
        inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        if self.mass < 0:
            raise ModelError("link mass must be >= 0")
        if self.mass > 0:
            if np.max(np.abs(inertia - inertia.T)) > 1e-12:
                raise ModelError(f"inertia of '{self.name}' must be symmetric")
            if np.any(np.linalg.eigvalsh(inertia) <= 0):
                raise ModelError(f"inertia of '{self.name}' must be positive definite")
        object.__setattr__(self, "inertia", inertia)
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if lo > hi:
            raise ModelError(f"limits of '{self.name}' are inverted")
        object.__setattr__(self, "limits", (lo, hi))


@dataclass(frozen=True)
class SerialChainModel:
    """Immutable chain description; all computations are pure functions."""

    links: tuple
    ee_offset: np.ndarray  # tool point in last link frame
    base_pos: np.ndarray  # chain root position in world

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "ee_offset", np.asarray(self.ee_offset, dtype=float).reshape(3))
        object.__setattr__(self, "base_pos", np.asarray(self.base_pos, dtype=float).reshape(3))
        if not self.links:
            raise ModelError("empty chain")

    @property
    def n(self) -> int:
        return len(self.links)

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([l.limits[0] for l in self.links])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([l.limits[1] for l in self.links])

    @property
    def total_mass(self) -> float:
        return float(sum(l.mass for l in self.links))

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.lower_limits, self.upper_limits)

    def within_limits(self, q: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(
            np.all(q >= self.lower_limits - tol) and np.all(q <= self.upper_limits + tol)
        )


@dataclass
class ChainState:
    """World-frame kinematic quantities for one configuration."""

    R: list  # link orientations
    p: list  # link frame origins
    axis_world: list  # joint axes
    origin_world: list  # points on joint axes
    ee_R: np.ndarray = None
    ee_p: np.ndarray = None


def _check_dim(model, q, name="q"):
    q = np.asarray(q, dtype=float).reshape(-1)
    if len(q) != model.n:
        raise ModelError(f"{name} has length {len(q)}, expected {model.n}")
    return q


def chain_state(model: SerialChainModel, q) -> ChainState:
    q = _check_dim(model, q)
    R_par = np.eye(3)
    p_par = model.base_pos.copy()
    st = ChainState([], [], [], [])
    for i, link in enumerate(model.links):
        R_pre = R_par @ link.origin_rot
        p_pre = p_par + R_par @ link.origin_xyz
        z = R_pre @ link.axis
        if link.joint_type == "revolute":
            R_i = R_pre @ rotation_about(link.axis, q[i])
            p_i = p_pre
        else:
            R_i = R_pre
            p_i = p_pre + z * q[i]
        st.R.append(R_i)
        st.p.append(p_i)
        st.axis_world.append(z)
        st.origin_world.append(p_pre)
        R_par, p_par = R_i, p_i
    st.ee_R = R_par
    st.ee_p = p_par + R_par @ model.ee_offset
    return st


def forward_kinematics(model: SerialChainModel, q) -> np.ndarray:
    """Homogeneous world transform of the end-effector frame."""
    st = chain_state(model, q)
    T = np.eye(4)
    T[:3, :3] = st.ee_R
    T[:3, 3] = st.ee_p
    return T


def ee_pose(model: SerialChainModel, q):
    st = chain_state(model, q)
    return st.ee_R, st.ee_p


def geometric_jacobian(model: SerialChainModel, q, state: ChainState | None = None) -> np.ndarray:
    """6 x n Jacobian at the end-effector point, rows [linear; angular]."""
    st = state if state is not None else chain_state(model, q)
    J = np.zeros((6, model.n))
    for j, link in enumerate(model.links):
        z = st.axis_world[j]
        if link.joint_type == "revolute":
            J[:3, j] = _cross3(z, st.ee_p - st.origin_world[j])
            J[3:, j] = z
        else:
            J[:3, j] = z
    return J


def point_jacobian(model: SerialChainModel, st: ChainState, link_index: int, point_world) -> np.ndarray:
    """3 x n Jacobian of a point rigidly attached to a link."""
    p = np.asarray(point_world, dtype=float).reshape(3)
    J = np.zeros((3, model.n))
    for j in range(link_index + 1):
        link = model.links[j]
        z = st.axis_world[j]
        if link.joint_type == "revolute":
            J[:, j] = _cross3(z, p - st.origin_world[j])
        else:
            J[:, j] = z
    return J


def velocity_state(model: SerialChainModel, q, qd, state: ChainState | None = None):
    """Angular velocity and frame-origin velocity of every link."""
    st = state if state is not None else chain_state(model, q)
    qd = _check_dim(model, qd, "qd")
    omega, vel = [], []
    w_par = np.zeros(3)
    v_par = np.zeros(3)
    p_par = model.base_pos
    for i, link in enumerate(model.links):
        p_pre = st.origin_world[i]
        v_pre = v_par + _cross3(w_par, p_pre - p_par)
        z = st.axis_world[i]
        if link.joint_type == "revolute":
            w_i = w_par + z * qd[i]
            v_i = v_pre
        else:
            w_i = w_par
            v_i = v_pre + _cross3(w_par, st.p[i] - p_pre) + z * qd[i]
        omega.append(w_i)
        vel.append(v_i)
        w_par, v_par, p_par = w_i, v_i, st.p[i]
    return omega, vel


def ee_velocity(model: SerialChainModel, q, qd):
    """Linear and angular end-effector velocity."""
    st = chain_state(model, q)
    J = geometric_jacobian(model, q, st)
    tw = J @ np.asarray(qd, dtype=float)
    return tw[:3], tw[3:]


def jacobian_dot(model: SerialChainModel, q, qd) -> np.ndarray:
    """Analytic time derivative of the end-effector geometric Jacobian."""
    st = chain_state(model, q)
    omega, vel = velocity_state(model, q, qd, st)
    qd = np.asarray(qd, dtype=float)
    J = geometric_jacobian(model, q, st)
    v_ee = J[:3] @ qd
    Jd = np.zeros((6, model.n))
    for j, link in enumerate(model.links):
        w_pre = omega[j - 1] if j > 0 else np.zeros(3)
        v_parent = vel[j - 1] if j > 0 else np.zeros(3)
        p_parent = st.p[j - 1] if j > 0 else model.base_pos
        z = st.axis_world[j]
        zd = _cross3(w_pre, z)
        if link.joint_type == "revolute":
            o_dot = v_parent + _cross3(w_pre, st.origin_world[j] - p_parent)
            Jd[:3, j] = _cross3(zd, st.ee_p - st.origin_world[j]) + _cross3(
                z, v_ee - o_dot
            )
            Jd[3:, j] = zd
        else:
            Jd[:3, j] = zd
    return Jd


# ---------------------------------------------------------------------------
# spatial dynamics (world-origin coordinates)


def _spatial_axis(link: LinkSpec, z, o):
    out = np.zeros(6)
    if link.joint_type == "revolute":
        out[:3] = z
        out[3:] = _cross3(o, z)
    else:
        out[3:] = z
    return out


def _crm(v, m):
    w, vo = v[:3], v[3:]
    out = np.empty(6)
    out[:3] = _cross3(w, m[:3])
    out[3:] = _cross3(w, m[3:]) + _cross3(vo, m[:3])
    return out


def _crf(v, f):
    w, vo = v[:3], v[3:]
    out = np.empty(6)
    out[:3] = _cross3(w, f[:3]) + _cross3(vo, f[3:])
    out[3:] = _cross3(w, f[3:])
    return out


def _spatial_inertia(mass, com_world, inertia_world):
    C = skew(com_world)
    I = np.zeros((6, 6))
    I[:3, :3] = inertia_world + mass * (C @ C.T)
    I[:3, 3:] = mass * C
    I[3:, :3] = mass * C.T
    I[3:, 3:] = mass * np.eye(3)
    return I


def _axes_and_inertias(model: SerialChainModel, st: ChainState):
    S = []
    I = []
    for i, link in enumerate(model.links):
        S.append(_spatial_axis(link, st.axis_world[i], st.origin_world[i]))
        com_w = st.p[i] + st.R[i] @ link.com
        inertia_w = st.R[i] @ link.inertia @ st.R[i].T
        I.append(_spatial_inertia(link.mass, com_w, inertia_w))
    return S, I


def _rnea(model, st, S, I, qd, qdd, gravity):
    n = model.n
    F = [None] * n
    v_par = np.zeros(6)
    a_par = np.zeros(6)
    a_par[3:] = -gravity  # uniform-field gravity trick
    V = [None] * n
    for i in range(n):
        V[i] = v_par + S[i] * qd[i]
        a_i = a_par + S[i] * qdd[i] + _crm(v_par, S[i]) * qd[i]
        F[i] = I[i] @ a_i + _crf(V[i], I[i] @ V[i])
        v_par, a_par = V[i], a_i
    tau = np.zeros(n)
    for i in range(n - 1, -1, -1):
        tau[i] = S[i] @ F[i]
        if i > 0:
            F[i - 1] = F[i - 1] + F[i]
    return tau


def inverse_dynamics(model: SerialChainModel, q, qd, qdd, gravity) -> np.ndarray:
    """Joint torques tau = M(q) qdd + C(q, qd) qd + g(q) via Newton-Euler."""
    q = _check_dim(model, q)
    qd = _check_dim(model, qd, "qd")
    qdd = _check_dim(model, qdd, "qdd")
    g = np.asarray(gravity, dtype=float).reshape(3)
    st = chain_state(model, q)
    S, I = _axes_and_inertias(model, st)
    return _rnea(model, st, S, I, qd, qdd, g)


def _crba(model, S, I):
    n = model.n
    Ic = list(I)
    for i in range(n - 1, 0, -1):
        Ic[i - 1] = Ic[i - 1] + Ic[i]
    M = np.zeros((n, n))
    for j in range(n):
        F = Ic[j] @ S[j]
        M[j, j] = S[j] @ F
        for i in range(j):
            M[i, j] = S[i] @ F
            M[j, i] = M[i, j]
    return M


def mass_matrix(model: SerialChainModel, q) -> np.ndarray:
    """Symmetric positive-definite joint-space inertia (composite assembly)."""
    q = _check_dim(model, q)
    st = chain_state(model, q)
    S, I = _axes_and_inertias(model, st)
    return _crba(model, S, I)


def coriolis_times_qdot(model: SerialChainModel, q, qd) -> np.ndarray:
    """Velocity-product term C(q, qd) qd (exact, via Newton-Euler)."""
    return inverse_dynamics(model, q, qd, np.zeros(model.n), np.zeros(3))


def gravity_vector(model: SerialChainModel, q, gravity) -> np.ndarray:
    return inverse_dynamics(model, q, np.zeros(model.n), np.zeros(model.n), gravity)


def coriolis_matrix(model: SerialChainModel, q, qd, fd_step: float = 1e-6) -> np.ndarray:
    """Coriolis matrix from Christoffel symbols of the mass matrix.

    dM/dq is taken by central differences; the resulting C satisfies the
    skew symmetry of (dM/dt - 2C) by construction and C qd cross-checks
    against the Newton-Euler velocity-product term.
    """
    q = _check_dim(model, q)
    qd = _check_dim(model, qd, "qd")
    n = model.n
    dM = np.zeros((n, n, n))  # dM[:, :, k] = dM/dq_k
    for k in range(n):
        dq = np.zeros(n)
        dq[k] = fd_step
        dM[:, :, k] = (mass_matrix(model, q + dq) - mass_matrix(model, q - dq)) / (
            2 * fd_step
        )
    C = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            C[i, j] = 0.5 * np.sum(
                (dM[i, j, :] + dM[i, :, j] - dM[j, :, i]) * qd
            )
    return C


def mass_matrix_dot(model: SerialChainModel, q, qd, fd_step: float = 1e-6) -> np.ndarray:
    """Time derivative of M along qd, by central differences."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    return (
        mass_matrix(model, q + fd_step * qd) - mass_matrix(model, q - fd_step * qd)
    ) / (2 * fd_step)


def forward_dynamics(
    model: SerialChainModel, q, qd, tau, gravity, ee_wrench=None
) -> np.ndarray:
    """Joint accelerations under torques and an optional EE wrench [f; tau]."""
    q = _check_dim(model, q)
    qd = _check_dim(model, qd, "qd")
    tau = _check_dim(model, tau, "tau")
    g = np.asarray(gravity, dtype=float).reshape(3)
    st = chain_state(model, q)
    S, I = _axes_and_inertias(model, st)
    M = _crba(model, S, I)
    bias = _rnea(model, st, S, I, qd, np.zeros(model.n), g)
    rhs = tau - bias
    if ee_wrench is not None:
        J = geometric_jacobian(model, q, st)
        rhs = rhs + J.T @ np.asarray(ee_wrench, dtype=float).reshape(6)
    return np.linalg.solve(M, rhs)


def kinetic_energy(model: SerialChainModel, q, qd) -> float:
    qd = _check_dim(model, qd, "qd")
    return 0.5 * float(qd @ mass_matrix(model, q) @ qd)


def potential_energy(model: SerialChainModel, q, gravity) -> float:
    g = np.asarray(gravity, dtype=float).reshape(3)
    st = chain_state(model, q)
    total = 0.0
    for i, link in enumerate(model.links):
        com_w = st.p[i] + st.R[i] @ link.com
        total += link.mass * float(g @ com_w)
    return -total


def posed_collision_primitives(model: SerialChainModel, q, state: ChainState | None = None):
    """World-posed collision primitives with their owning link index."""
    st = state if state is not None else chain_state(model, q)
    out = []
    for i, link in enumerate(model.links):
        for prim in link.collision:
            out.append((i, prim.transformed(st.R[i], st.p[i])))
    return out


# ---------------------------------------------------------------------------
# construction from configuration dictionaries


def _rod_inertia(mass, length, radius):
    ixx = 0.5 * mass * radius ** 2
    iyy = mass * (length ** 2 / 12.0 + radius ** 2 / 4.0)
    return np.diag([max(ixx, 1e-6), max(iyy, 1e-6), max(iyy, 1e-6)])


def _primitive_from_config(cfg: dict) -> Primitive:
    kind = cfg["kind"]
    if kind == "sphere":
        return Sphere(np.array(cfg["center"]), float(cfg["radius"]))
    if kind == "capsule":
        return Capsule(np.array(cfg["p0"]), np.array(cfg["p1"]), float(cfg["radius"]))
    if kind == "box":
        rot = rpy_matrix(*cfg.get("rpy", (0.0, 0.0, 0.0)))
        return Box(np.array(cfg["center"]), np.array(cfg["half_extents"]), rot)
    raise ModelError(f"unknown primitive kind '{kind}'")


def from_config(cfg: dict) -> SerialChainModel:
    """Build a mobile manipulator from a scenario robot block."""
    base_height = float(cfg.get("base_height", 0.25))
    base = cfg["base"]
    blim = base.get("limits", (-10.0, 10.0))
    links = [
        LinkSpec(
            name="base_x",
            joint_type="prismatic",
            axis=np.array([1.0, 0.0, 0.0]),
            origin_xyz=np.array([0.0, 0.0, base_height]),
            origin_rot=np.eye(3),
            mass=0.0,
            com=np.zeros(3),
            inertia=np.zeros((3, 3)),
            limits=tuple(blim),
        ),
        LinkSpec(
            name="base_y",
            joint_type="prismatic",
            axis=np.array([0.0, 1.0, 0.0]),
            origin_xyz=np.zeros(3),
            origin_rot=np.eye(3),
            mass=float(base["mass"]),
            com=np.array(base.get("com", (0.0, 0.0, 0.0))),
            inertia=np.diag(base["inertia_diag"]),
            limits=tuple(blim),
            collision=(
                Box(np.zeros(3), np.array(base["half_extents"])),
            ),
        ),
    ]
    for j, joint in enumerate(cfg["arm"]):
        collision = ()
        if "capsule" in joint:
            collision = (_primitive_from_config({"kind": "capsule", **joint["capsule"]}),)
        inertia = (
            np.diag(joint["inertia_diag"])
            if "inertia_diag" in joint
            else _rod_inertia(
                joint["mass"],
                float(np.linalg.norm(joint.get("com", (0, 0, 0)))) * 2.0 + 1e-3,
                0.05,
            )
        )
        links.append(
            LinkSpec(
                name=joint.get("name", f"arm_{j}"),
                joint_type="revolute",
                axis=np.array(joint["axis"]),
                origin_xyz=np.array(joint["origin"]),
                origin_rot=rpy_matrix(*joint.get("origin_rpy", (0.0, 0.0, 0.0))),
                mass=float(joint["mass"]),
                com=np.array(joint.get("com", (0.0, 0.0, 0.0))),
                inertia=inertia,
                limits=tuple(joint.get("limits", (-3.14159, 3.14159))),
                collision=collision,
            )
        )
    return SerialChainModel(
        links=tuple(links),
        ee_offset=np.array(cfg.get("ee_offset", (0.0, 0.0, 0.0))),
        base_pos=np.zeros(3),
    )


def default_robot_config() -> dict:
    """Mobile manipulator used by the bundled scenarios and tests.

    Planar base plus a five-revolute arm (yaw, pitch, pitch, pitch,
    yaw): enough wrist freedom to hold a rigid grasp while the bases
    reconfigure through passages.
    """
    return {
        "base_height": 0.25,
        "base": {
            "mass": 30.0,
            "com": [0.0, 0.0, 0.0],
            "inertia_diag": [1.2, 1.2, 1.8],
            "half_extents": [0.26, 0.26, 0.24],
            "limits": [-12.0, 12.0],
        },
        "arm": [
            {
                "name": "shoulder_yaw",
                "axis": [0, 0, 1],
                "origin": [0.0, 0.0, 0.30],
                "mass": 2.0,
                "com": [0.0, 0.0, 0.075],
                "inertia_diag": [0.01, 0.01, 0.004],
                "limits": [-7.0, 7.0],
                "capsule": {"p0": [0, 0, 0], "p1": [0, 0, 0.15], "radius": 0.06},
            },
            {
                "name": "shoulder_pitch",
                "axis": [0, 1, 0],
                "origin": [0.0, 0.0, 0.15],
                "mass": 3.0,
                "com": [0.225, 0.0, 0.0],
                "inertia_diag": [0.004, 0.055, 0.055],
                "limits": [-1.45, 1.45],
                "capsule": {"p0": [0, 0, 0], "p1": [0.45, 0, 0], "radius": 0.05},
            },
            {
                "name": "elbow",
                "axis": [0, 1, 0],
                "origin": [0.45, 0.0, 0.0],
                "mass": 2.0,
                "com": [0.225, 0.0, 0.0],
                "inertia_diag": [0.003, 0.036, 0.036],
                "limits": [-2.5, 2.5],
                "capsule": {"p0": [0, 0, 0], "p1": [0.45, 0, 0], "radius": 0.04},
            },
            {
                "name": "wrist_pitch",
                "axis": [0, 1, 0],
                "origin": [0.45, 0.0, 0.0],
                "mass": 0.8,
                "com": [0.04, 0.0, 0.0],
                "inertia_diag": [0.0008, 0.0012, 0.0012],
                "limits": [-1.9, 1.9],
                "capsule": {"p0": [0, 0, 0], "p1": [0.08, 0, 0], "radius": 0.035},
            },
            {
                "name": "wrist_yaw",
                "axis": [0, 0, 1],
                "origin": [0.08, 0.0, 0.0],
                "mass": 0.5,
                "com": [0.03, 0.0, 0.0],
                "inertia_diag": [0.0005, 0.0007, 0.0007],
                "limits": [-7.0, 7.0],
                "capsule": {"p0": [0, 0, 0], "p1": [0.06, 0, 0], "radius": 0.03},
            },
        ],
        "ee_offset": [0.06, 0.0, 0.0],
    }
