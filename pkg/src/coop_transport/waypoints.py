"""Timed reach-avoid waypoint planning for the carried object.

From a conjunction of timed reach goals (Always/Eventually over balls)
and a separation requirement, a goal-to-goal RRT with goal biasing and
shortcut smoothing produces a collision-free, non-smooth timed knot
sequence for the object's center of mass. Knot timestamps follow arc
length between window anchors and are jittered so downstream stages
see irregular spacing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import point_signed_distance_many
from .stl_core import Formula

_WINDOW_TOL = 1e-9


class FragmentError(Exception):
    pass


class PlanningError(Exception):
    pass


@dataclass(frozen=True)
class TimedGoal:
    window: tuple  # (a, b) seconds
    center: np.ndarray
    radius: float
    kind: str  # "always" | "eventually"

    def __post_init__(self):
        a, b = float(self.window[0]), float(self.window[1])
        if a > b:
            raise FragmentError(f"inverted goal window [{a}, {b}]")
        if self.radius <= 0:
            raise FragmentError("goal radius must be > 0")
        if self.kind not in ("always", "eventually"):
            raise FragmentError(f"unknown goal kind '{self.kind}'")
        object.__setattr__(self, "window", (a, b))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))


@dataclass(frozen=True)
class ReachAvoidTask:
    goals: tuple  # TimedGoal, ordered by window start
    margin: float  # d_min, m
    t_max: float
    avoid_sets: tuple = ()

    def __post_init__(self):
        goals = tuple(
            sorted(self.goals, key=lambda g: (g.window[0], g.window[1]))
        )
        for g in goals:
            if g.window[1] > self.t_max + _WINDOW_TOL:
                raise FragmentError("goal window exceeds the task horizon")
        if self.margin < 0:
            raise FragmentError("separation margin must be >= 0")
        object.__setattr__(self, "goals", goals)


@dataclass(frozen=True)
class WaypointTrajectory:
    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        p = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if len(t) != len(p) or len(t) < 2:
            raise PlanningError("waypoint trajectory needs >= 2 consistent knots")
        if np.any(np.diff(t) <= 0):
            raise PlanningError("knot times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)

    def to_table(self):
        return [[float(t), *map(float, p)] for t, p in zip(self.times, self.positions)]


# ---------------------------------------------------------------------------
# fragment extraction


def _flatten_and(f: Formula):
    if f.kind == "and":
        yield from _flatten_and(f.children[0])
        yield from _flatten_and(f.children[1])
    else:
        yield f


def extract_fragment(f: Formula) -> ReachAvoidTask:
    """Split a conjunction of timed goals and separation requirements.

    Supported conjuncts: G/F over a ball predicate, G over an avoid
    predicate. Anything else raises a FragmentError naming the node.
    """
    goals = []
    margin = 0.0
    avoid_sets = []
    t_max = 0.0
    for node in _flatten_and(f):
        if node.kind in ("always", "eventually") and node.children[0].kind == "pred":
            p = node.children[0].pred
            a, b = node.interval
            t_max = max(t_max, b)
            if p.func_id == "ball":
                goals.append(
                    TimedGoal(
                        window=(a, b),
                        center=np.array(p.params[:3]),
                        radius=p.params[3],
                        kind=node.kind,
                    )
                )
                continue
            if p.func_id == "avoid" and node.kind == "always":
                margin = max(margin, p.params[0])
                avoid_sets.append(p.set_name)
                continue
        raise FragmentError(
            f"conjunct outside the reach-avoid fragment: {node.kind} node"
        )
    return ReachAvoidTask(
        goals=tuple(goals), margin=margin, t_max=t_max, avoid_sets=tuple(avoid_sets)
    )


# ---------------------------------------------------------------------------
# planning


@dataclass(frozen=True)
class PlannerParams:
    v_max: float = 1.0  # speed cap between knots (m/s)
    knot_spacing: float = 0.5  # mean knot spacing (s)
    rrt_step: float = 0.35
    goal_bias: float = 0.15
    max_iters: int = 40000
    # extra planning margin on top of d_min + r/2; absorbs the inward
    # corner-cutting of the Gaussian smoothing stage
    clearance_pad: float = 0.15
    settle_pad: float = 0.3  # arrive early / leave late around windows (s)
    start_hold: float = 0.4  # stationary dwell so smoothing keeps x(0) = x0 (s)
    jitter: float = 0.1  # timestamp jitter as a fraction of local spacing
    segment_check_step: float = 0.02
    bounds: tuple = (((-5.0, 5.0), (-5.0, 5.0), (0.2, 1.5)))


def _clearance(obstacles, pts):
    pts = np.atleast_2d(pts)
    if not obstacles:
        return np.full(len(pts), np.inf)
    return np.min([point_signed_distance_many(o, pts) for o in obstacles], axis=0)


def _segment_clear(obstacles, a, b, margin, step):
    n = max(2, int(np.ceil(np.linalg.norm(b - a) / step)) + 1)
    pts = a + np.linspace(0.0, 1.0, n)[:, None] * (b - a)
    return bool(np.all(_clearance(obstacles, pts) > margin))


def _rrt_connect(rng, obstacles, start, goal, goal_tol, margin, params):
    """Single-tree RRT with goal biasing; returns a point path."""
    if _segment_clear(obstacles, start, goal, margin, params.segment_check_step):
        return [start, goal]
    lo = np.array([b[0] for b in params.bounds])
    hi = np.array([b[1] for b in params.bounds])
    nodes = np.zeros((params.max_iters + 1, 3))
    nodes[0] = start
    parents = np.zeros(params.max_iters + 1, dtype=int)
    count = 1
    for _ in range(params.max_iters):
        if rng.random() < params.goal_bias:
            sample = goal
        else:
            sample = rng.uniform(lo, hi)
        d2 = np.sum((nodes[:count] - sample) ** 2, axis=1)
        ni = int(np.argmin(d2))
        near = nodes[ni]
        direction = sample - near
        dist = float(np.linalg.norm(direction))
        if dist < 1e-9:
            continue
        new = near + direction * min(1.0, params.rrt_step / dist)
        if not _segment_clear(obstacles, near, new, margin, params.segment_check_step):
            continue
        nodes[count] = new
        parents[count] = ni
        count += 1
        if np.linalg.norm(new - goal) <= goal_tol and _segment_clear(
            obstacles, new, goal, margin, params.segment_check_step
        ):
            path = [goal]
            i = count - 1
            while i != 0:
                path.append(nodes[i].copy())
                i = parents[i]
            path.append(start)
            return path[::-1]
    raise PlanningError(
        f"planning timeout: no path to goal {np.round(goal, 3)} within "
        f"{params.max_iters} samples"
    )


def _greedy_skip(obstacles, path, margin, step):
    out = [path[0]]
    i = 0
    while i < len(path) - 1:
        j = len(path) - 1
        while j > i + 1 and not _segment_clear(obstacles, path[i], path[j], margin, step):
            j -= 1
        out.append(path[j])
        i = j
    return out


def _subdivide(path, res):
    out = [path[0]]
    for a, b in zip(path[:-1], path[1:]):
        n = max(1, int(np.ceil(np.linalg.norm(b - a) / res)))
        for k in range(1, n + 1):
            out.append(a + (b - a) * (k / n))
    return out


def _shortcut(obstacles, path, margin, step):
    """Deterministic shortcutting: subdivide + greedy skip, both directions."""
    start = path[0]
    for k in range(6):
        before = _path_length(path)
        path = _greedy_skip(obstacles, _subdivide(path, 0.2), margin, step)
        path = path[::-1]  # alternate direction to undo one-sided bias
        if k % 2 == 1 and before - _path_length(path) < 1e-3:
            break
    if not np.allclose(path[0], start):
        path = path[::-1]
    return path


def _path_length(path):
    return float(sum(np.linalg.norm(b - a) for a, b in zip(path[:-1], path[1:])))


def _sample_path(path, fractions):
    """Points at given arc-length fractions along a polyline."""
    segs = [np.linalg.norm(b - a) for a, b in zip(path[:-1], path[1:])]
    total = sum(segs)
    cum = np.concatenate([[0.0], np.cumsum(segs)])
    out = []
    for f in fractions:
        s = f * total
        k = int(np.searchsorted(cum, s, side="right")) - 1
        k = min(max(k, 0), len(segs) - 1)
        w = 0.0 if segs[k] < 1e-12 else (s - cum[k]) / segs[k]
        out.append(path[k] + w * (path[k + 1] - path[k]))
    return out


def plan_waypoints(
    task: ReachAvoidTask,
    obstacles,
    x0,
    seed: int,
    params: PlannerParams = PlannerParams(),
    object_radius: float = 0.0,
) -> WaypointTrajectory:
    """Plan a timed knot sequence satisfying the reach-avoid task.

    Obstacles are inflated by the task margin plus half the object's
    bounding-sphere radius plus a configurable pad, so the object body
    (not just its center) stays clear after smoothing.
    """
    rng = np.random.default_rng(seed)
    x0 = np.asarray(x0, dtype=float).reshape(3)
    margin = task.margin + 0.5 * object_radius + params.clearance_pad
    if _clearance(obstacles, x0)[0] <= margin:
        raise PlanningError("start position is not collision-free at the margin")

    knot_t = [0.0]
    knot_p = [x0]
    if params.start_hold > 0:
        knot_t += [0.5 * params.start_hold, params.start_hold]
        knot_p += [x0.copy(), x0.copy()]
    cursor_t = knot_t[-1]
    cursor_p = x0
    for g in task.goals:
        a, b = g.window
        if _clearance(obstacles, g.center)[0] <= margin:
            raise PlanningError("goal region is not collision-free at the margin")
        goal_tol = max(0.5 * g.radius, 1.5 * params.rrt_step)
        path = _rrt_connect(rng, obstacles, cursor_p, g.center, goal_tol, margin, params)
        path = _shortcut(obstacles, path, margin, params.segment_check_step)
        length = _path_length(path)
        travel_min = length / params.v_max
        # prefer to arrive settle_pad early so smoothing stays inside the
        # ball; fall back toward the hard deadline when travel is tight
        if g.kind == "always":
            preferred = a - params.settle_pad
            deadline = a
            leave_for = lambda arr: b + params.settle_pad
        else:
            mid = 0.5 * (a + b)
            preferred = mid - params.settle_pad
            deadline = b - params.settle_pad
            leave_for = lambda arr: min(
                max(arr + 2 * params.settle_pad, mid + params.settle_pad), b
            )
        if length < 1e-9:
            # already at the goal: no cruise leg, just extend the dwell
            arrive = max(cursor_t, min(preferred, deadline))
        else:
            arrive = max(preferred, cursor_t + max(travel_min, 1e-3))
        if arrive <= deadline + 1e-6:
            arrive = min(arrive, deadline)
        else:
            raise PlanningError(
                f"infeasible window: need {length:.2f} m "
                f"({travel_min:.2f} s at cap {params.v_max} m/s) but only "
                f"{max(deadline - cursor_t, 0):.2f} s available toward goal "
                f"at {np.round(g.center, 2)}"
            )
        leave = leave_for(arrive)
        duration = arrive - cursor_t
        if length < 1e-9:
            for th in (max(arrive, cursor_t + 1e-3), 0.5 * (arrive + leave), leave):
                if th > knot_t[-1] + 1e-6:
                    knot_t.append(th)
                    knot_p.append(g.center.copy())
            cursor_t = knot_t[-1]
            cursor_p = np.asarray(knot_p[-1])
            continue
        n_seg = max(2, int(np.ceil(duration / params.knot_spacing)))
        fracs = np.linspace(0.0, 1.0, n_seg + 1)[1:]
        pts = _sample_path(path, fracs)
        times = cursor_t + duration * fracs
        knot_t.extend(times.tolist())
        knot_p.extend(pts)
        # dwell at the goal center through the hold window
        hold_mid = 0.5 * (arrive + leave)
        for th in (hold_mid, leave):
            if th > knot_t[-1] + 1e-6:
                knot_t.append(th)
                knot_p.append(g.center.copy())
        cursor_t = knot_t[-1]
        cursor_p = np.asarray(knot_p[-1])

    if task.t_max > cursor_t + 1e-6:
        # hold the final position through the remaining horizon
        mid = 0.5 * (cursor_t + task.t_max)
        if mid > cursor_t + 1e-6:
            knot_t.append(mid)
            knot_p.append(cursor_p.copy())
        knot_t.append(task.t_max)
        knot_p.append(cursor_p.copy())

    times = np.array(knot_t)
    positions = np.array(knot_p)

    # seeded jitter on non-anchor knots: downstream must cope with
    # uneven spacing; anchors (first/last and dwell knots) stay exact
    anchor = np.zeros(len(times), dtype=bool)
    anchor[0] = anchor[-1] = True
    for g in task.goals:
        for i in range(len(times)):
            if np.allclose(positions[i], g.center, atol=1e-12):
                anchor[i] = True
    jitter_scale = params.jitter
    for _ in range(6):
        jittered = times.copy()
        local = np.minimum(np.diff(times, prepend=times[0] - 1.0),
                           np.diff(times, append=times[-1] + 1.0))
        noise = rng.uniform(-1.0, 1.0, len(times)) * jitter_scale * local
        jittered[~anchor] += noise[~anchor]
        ok = np.all(np.diff(jittered) > 1e-6)
        if ok:
            speeds = np.linalg.norm(np.diff(positions, axis=0), axis=1) / np.diff(jittered)
            ok = bool(np.all(speeds <= params.v_max + 1e-9))
        if ok:
            times = jittered
            break
        jitter_scale *= 0.5
    traj = WaypointTrajectory(times, positions)
    worst = audit_clearance(traj, obstacles)
    if obstacles and worst <= task.margin:
        raise PlanningError(f"knot clearance audit failed: {worst:.3f} m")
    return traj


def audit_clearance(traj: WaypointTrajectory, obstacles) -> float:
    """Minimum obstacle clearance over all knots (post-hoc audit)."""
    if not obstacles:
        return np.inf
    return float(np.min(_clearance(obstacles, traj.positions)))
