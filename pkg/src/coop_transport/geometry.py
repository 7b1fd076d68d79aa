"""Collision primitives, signed distances, and planar keep-out regions.

Robot links, bases, the carried object, and obstacles are all described
by three primitive shapes: spheres, capsules, and oriented boxes.
Signed distances are positive for separation and negative for
penetration depth. Base planning uses quartic super-ellipse level sets
in the ground plane as smooth keep-out functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

_ORTHO_TOL = 1e-9


def _as_vec(x, n):
    v = np.asarray(x, dtype=float).reshape(n)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite vector entries")
    return v


def check_rotation(R: np.ndarray, tol: float = _ORTHO_TOL) -> np.ndarray:
    """Validate that R is a proper rotation (orthonormal, det +1)."""
    R = np.asarray(R, dtype=float).reshape(3, 3)
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise ValueError("rotation matrix is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("rotation matrix determinant is not +1")
    return R


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec(self.center, 3))
        if self.radius < 0.0:
            raise ValueError("sphere radius must be >= 0")

    def translated(self, d) -> "Sphere":
        return Sphere(self.center + _as_vec(d, 3), self.radius)

    def transformed(self, R, p) -> "Sphere":
        return Sphere(R @ self.center + p, self.radius)


@dataclass(frozen=True)
class Capsule:
    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", _as_vec(self.p0, 3))
        object.__setattr__(self, "p1", _as_vec(self.p1, 3))
        if self.radius <= 0.0:
            raise ValueError("capsule radius must be > 0")

    def translated(self, d) -> "Capsule":
        d = _as_vec(d, 3)
        return Capsule(self.p0 + d, self.p1 + d, self.radius)

    def transformed(self, R, p) -> "Capsule":
        return Capsule(R @ self.p0 + p, R @ self.p1 + p, self.radius)


@dataclass(frozen=True)
class Box:
    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec(self.center, 3))
        he = _as_vec(self.half_extents, 3)
        if np.any(he <= 0.0):
            raise ValueError("box half extents must be > 0")
        object.__setattr__(self, "half_extents", he)
        object.__setattr__(self, "rotation", check_rotation(self.rotation))

    def translated(self, d) -> "Box":
        return Box(self.center + _as_vec(d, 3), self.half_extents, self.rotation)

    def transformed(self, R, p) -> "Box":
        return Box(R @ self.center + p, self.half_extents, R @ self.rotation)


Primitive = Sphere | Capsule | Box


# ---------------------------------------------------------------------------
# point / segment helpers


def _seg_point_closest(p0, p1, q):
    """Closest point on segment [p0, p1] to q."""
    d = p1 - p0
    dd = float(d @ d)
    if dd < 1e-18:
        return p0
    t = float((q - p0) @ d) / dd
    t = min(1.0, max(0.0, t))
    return p0 + t * d


def _seg_seg_distance(a0, a1, b0, b1):
    """Minimum distance between two segments (standard clamped form)."""
    d1 = a1 - a0
    d2 = b1 - b0
    r = a0 - b0
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a < 1e-18 and e < 1e-18:
        return float(np.linalg.norm(r))
    if a < 1e-18:
        t = min(1.0, max(0.0, f / e))
        return float(np.linalg.norm(a0 - (b0 + t * d2)))
    c = float(d1 @ r)
    if e < 1e-18:
        s = min(1.0, max(0.0, -c / a))
        return float(np.linalg.norm(a0 + s * d1 - b0))
    b = float(d1 @ d2)
    denom = a * e - b * b
    if denom > 1e-18:
        s = min(1.0, max(0.0, (b * f - c * e) / denom))
    else:
        s = 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(1.0, max(0.0, -c / a))
    elif t > 1.0:
        t = 1.0
        s = min(1.0, max(0.0, (b - c) / a))
    return float(np.linalg.norm(a0 + s * d1 - (b0 + t * d2)))


def _point_box_sdf(box: Box, p):
    """Signed distance from a point to a box surface (exact)."""
    local = box.rotation.T @ (np.asarray(p, dtype=float) - box.center)
    d = np.abs(local) - box.half_extents
    if np.any(d > 0.0):
        out = np.maximum(d, 0.0)
        return float(np.linalg.norm(out))
    # inside: clamps at the deepest face (largest, i.e. least negative, d)
    return float(np.max(d))


def _point_box_sdf_grad(box: Box, p):
    """Gradient of the point-box signed distance at p (world frame).

    Piecewise smooth; on faces/edges the one-sided limit is returned.
    """
    local = box.rotation.T @ (np.asarray(p, dtype=float) - box.center)
    d = np.abs(local) - box.half_extents
    if np.any(d > 0.0):
        out = np.maximum(d, 0.0)
        n = float(np.linalg.norm(out))
        if n < 1e-15:
            return np.zeros(3)
        g_local = np.sign(local) * out / n
    else:
        g_local = np.zeros(3)
        i = int(np.argmax(d))
        g_local[i] = np.sign(local[i]) if local[i] != 0.0 else 1.0
    return box.rotation @ g_local


def point_signed_distance(prim: Primitive, point) -> float:
    """Signed distance from a point to the surface of a primitive."""
    p = _as_vec(point, 3)
    if isinstance(prim, Sphere):
        return float(np.linalg.norm(p - prim.center)) - prim.radius
    if isinstance(prim, Capsule):
        c = _seg_point_closest(prim.p0, prim.p1, p)
        return float(np.linalg.norm(p - c)) - prim.radius
    if isinstance(prim, Box):
        return _point_box_sdf(prim, p)
    raise TypeError(f"unknown primitive {type(prim).__name__}")


def point_signed_distance_many(prim: Primitive, points: np.ndarray) -> np.ndarray:
    """Vectorized point_signed_distance over an (m, 3) array."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if isinstance(prim, Sphere):
        return np.linalg.norm(pts - prim.center, axis=1) - prim.radius
    if isinstance(prim, Capsule):
        d = prim.p1 - prim.p0
        dd = float(d @ d)
        if dd < 1e-18:
            closest = np.broadcast_to(prim.p0, pts.shape)
        else:
            t = np.clip((pts - prim.p0) @ d / dd, 0.0, 1.0)
            closest = prim.p0 + t[:, None] * d
        return np.linalg.norm(pts - closest, axis=1) - prim.radius
    if isinstance(prim, Box):
        local = (pts - prim.center) @ prim.rotation
        d = np.abs(local) - prim.half_extents
        out = np.linalg.norm(np.maximum(d, 0.0), axis=1)
        inside = np.max(d, axis=1)
        return np.where(inside > 0.0, out, inside)
    raise TypeError(f"unknown primitive {type(prim).__name__}")


def clearance_field(obstacles):
    """Distance-to-obstacle-set callable over points (for STL avoid)."""
    def field(x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        vals = np.min(
            [point_signed_distance_many(o, pts) for o in obstacles], axis=0
        )
        return float(vals[0]) if np.ndim(x) == 1 else vals

    return field


def point_signed_distance_grad(prim: Primitive, point) -> np.ndarray:
    """Gradient of point_signed_distance with respect to the point."""
    p = _as_vec(point, 3)
    if isinstance(prim, Sphere):
        d = p - prim.center
        n = float(np.linalg.norm(d))
        return d / n if n > 1e-15 else np.array([1.0, 0.0, 0.0])
    if isinstance(prim, Capsule):
        c = _seg_point_closest(prim.p0, prim.p1, p)
        d = p - c
        n = float(np.linalg.norm(d))
        return d / n if n > 1e-15 else np.array([1.0, 0.0, 0.0])
    if isinstance(prim, Box):
        return _point_box_sdf_grad(prim, p)
    raise TypeError(f"unknown primitive {type(prim).__name__}")


# ---------------------------------------------------------------------------
# pairwise signed distances


def _box_support_extent(box: Box, u):
    """Half-width of the box projected onto unit direction u."""
    return float(np.sum(box.half_extents * np.abs(box.rotation.T @ u)))


def _box_box_distance(a: Box, b: Box):
    """Conservative box-box signed distance.

    Separation is lower-bounded by the best separating-axis gap over the
    15 face/edge-cross directions plus the center-line direction, so the
    reported value never exceeds the true distance (safety-preserving
    bias; exact for penetration depth along the tested axes).
    """
    axes = [a.rotation[:, i] for i in range(3)] + [b.rotation[:, i] for i in range(3)]
    for i in range(3):
        for j in range(3):
            cr = np.cross(a.rotation[:, i], b.rotation[:, j])
            n = np.linalg.norm(cr)
            if n > 1e-12:
                axes.append(cr / n)
    dc = b.center - a.center
    ndc = np.linalg.norm(dc)
    if ndc > 1e-12:
        axes.append(dc / ndc)
    best = -np.inf
    for u in axes:
        gap = abs(float(u @ dc)) - _box_support_extent(a, u) - _box_support_extent(b, u)
        best = max(best, gap)
    return best


def _capsule_box_distance(cap: Capsule, box: Box):
    """Capsule-box signed distance via 1-D convex minimization.

    The box signed-distance field is convex, so its restriction to the
    capsule axis is convex; golden-section search finds the global
    minimum to high precision.
    """
    def f(t):
        return _point_box_sdf(box, cap.p0 + t * (cap.p1 - cap.p0))

    lo, hi = 0.0, 1.0
    gl = lo + 0.381966011250105 * (hi - lo)
    gh = hi - 0.381966011250105 * (hi - lo)
    fl, fh = f(gl), f(gh)
    for _ in range(48):
        if fl < fh:
            hi, gh, fh = gh, gl, fl
            gl = lo + 0.381966011250105 * (hi - lo)
            fl = f(gl)
        else:
            lo, gl, fl = gl, gh, fh
            gh = hi - 0.381966011250105 * (hi - lo)
            fh = f(gh)
    best = min(f(0.0), f(1.0), fl, fh)
    return best - cap.radius


def signed_distance(a: Primitive, b: Primitive) -> float:
    """Signed distance between two primitives (symmetric).

    Exact for sphere-sphere, sphere-capsule, capsule-capsule,
    sphere-box, and capsule-box; box-box uses a conservative
    separating-axis bound (never over-reports separation).
    """
    if isinstance(a, Sphere) and isinstance(b, Sphere):
        return float(np.linalg.norm(a.center - b.center)) - a.radius - b.radius
    if isinstance(a, Sphere) and isinstance(b, Capsule):
        c = _seg_point_closest(b.p0, b.p1, a.center)
        return float(np.linalg.norm(a.center - c)) - a.radius - b.radius
    if isinstance(a, Capsule) and isinstance(b, Sphere):
        return signed_distance(b, a)
    if isinstance(a, Capsule) and isinstance(b, Capsule):
        return _seg_seg_distance(a.p0, a.p1, b.p0, b.p1) - a.radius - b.radius
    if isinstance(a, Sphere) and isinstance(b, Box):
        return _point_box_sdf(b, a.center) - a.radius
    if isinstance(a, Box) and isinstance(b, Sphere):
        return signed_distance(b, a)
    if isinstance(a, Capsule) and isinstance(b, Box):
        return _capsule_box_distance(a, b)
    if isinstance(a, Box) and isinstance(b, Capsule):
        return _capsule_box_distance(b, a)
    if isinstance(a, Box) and isinstance(b, Box):
        return _box_box_distance(a, b)
    raise TypeError(f"unsupported pair ({type(a).__name__}, {type(b).__name__})")


def min_clearance(bodies: list, obstacles: list) -> float:
    """Minimum signed distance over all body-obstacle pairs."""
    if not bodies or not obstacles:
        raise ValueError("min_clearance needs non-empty body and obstacle lists")
    return min(signed_distance(b, o) for b in bodies for o in obstacles)


# ---------------------------------------------------------------------------
# super-ellipse keep-out regions


@dataclass(frozen=True)
class SuperEllipse:
    """Quartic keep-out level set in the ground plane.

    The feasible exterior is value(b) >= rho; rho >= 1 inflates the
    region to absorb the base radius.
    """

    center: np.ndarray
    ax: float
    ay: float
    rho: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec(self.center, 2))
        if self.ax <= 0.0 or self.ay <= 0.0:
            raise ValueError("super-ellipse shape parameters must be > 0")
        if self.rho < 1.0:
            raise ValueError("super-ellipse margin rho must be >= 1")

    def value(self, b) -> float:
        b = np.asarray(b, dtype=float)
        u = (b[..., 0] - self.center[0]) / self.ax
        v = (b[..., 1] - self.center[1]) / self.ay
        return u ** 4 + v ** 4

    def grad(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        u = (b[..., 0] - self.center[0]) / self.ax
        v = (b[..., 1] - self.center[1]) / self.ay
        g = np.empty(b.shape, dtype=float)
        g[..., 0] = 4.0 * u ** 3 / self.ax
        g[..., 1] = 4.0 * v ** 3 / self.ay
        return g


def super_ellipse_value(se: SuperEllipse, b) -> float:
    return float(se.value(b))


# ---------------------------------------------------------------------------
# self-collision bookkeeping


@dataclass(frozen=True)
class CollisionPairs:
    """Allowed/forbidden contact pairs over an indexed rigid-body set."""

    n_bodies: int
    allowed: frozenset

    def __post_init__(self):
        norm = frozenset(tuple(sorted(p)) for p in self.allowed)
        for i, j in norm:
            if i == j:
                raise ValueError("self pairs are meaningless")
            if not (0 <= i < self.n_bodies and 0 <= j < self.n_bodies):
                raise ValueError(f"pair ({i}, {j}) outside body index range")
        object.__setattr__(self, "allowed", norm)

    @property
    def forbidden(self) -> frozenset:
        all_pairs = {(i, j) for i, j in combinations(range(self.n_bodies), 2)}
        return frozenset(all_pairs - set(self.allowed))


def self_collision_free(bodies: list, pairs: CollisionPairs) -> bool:
    """True iff every forbidden pair keeps strictly positive distance."""
    if len(bodies) != pairs.n_bodies:
        raise ValueError("body list length does not match pair index set")
    for i, j in pairs.forbidden:
        if signed_distance(bodies[i], bodies[j]) <= 0.0:
            return False
    return True
