"""Base footprint optimization along the object trajectory.

Plans discrete-time planar trajectories for all mobile bases: a quartic
cost keeps pairwise base distances near their targets while constraints
anchor the formation centroid to the object path, bound per-step
displacements, couple the formation spread to the object height through
a linear model, keep every base outside the super-ellipse keep-outs,
and pin both endpoints.

Solver: augmented Lagrangian outer loop over projected gradient with
backtracking line search. Decision variables are the per-step
displacements; the step box and the endpoint equalities live in the
projection (clip plus a per-axis shift found by bisection), so every
iterate satisfies them exactly. Deterministic for fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .smoothing import HermiteTrajectory, eval_hermite

_FAMILIES = ("centroid", "step", "height", "obstacle", "endpoint")


class FootprintError(Exception):
    pass


@dataclass
class FootprintProblem:
    n_robots: int
    K: int  # plan has K+1 rows
    weights: np.ndarray  # (N,) > 0
    alpha: np.ndarray  # (N, N) symmetric pair targets, m
    epsilon: float  # centroid tolerance, m
    eta: float  # per-axis step bound, m
    delta: float  # height tolerance, m
    z_ref: float
    kappa: float
    obstacles: list  # SuperEllipse
    b_start: np.ndarray  # (N, 2)
    b_goal: np.ndarray  # (N, 2)
    tol: float = 1e-6
    outer_iters: int = 50
    inner_iters: int = 200

    def __post_init__(self):
        N = self.n_robots
        self.weights = np.asarray(self.weights, dtype=float).reshape(N)
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(N, N)
        if np.any(self.weights <= 0):
            raise FootprintError("weights must be > 0")
        if np.max(np.abs(self.alpha - self.alpha.T)) > 1e-12:
            raise FootprintError("pair spacing targets must be symmetric")
        if min(self.epsilon, self.eta, self.delta) <= 0:
            raise FootprintError("tolerances must be > 0")
        if self.K < 2:
            raise FootprintError("need at least 2 steps")
        self.b_start = np.asarray(self.b_start, dtype=float).reshape(N, 2)
        self.b_goal = np.asarray(self.b_goal, dtype=float).reshape(N, 2)
        if np.any(np.abs(self.b_goal - self.b_start) > self.K * self.eta + 1e-12):
            raise FootprintError("endpoints unreachable under the step bound")


@dataclass
class FeasibilityReport:
    """Max constraint violation per family, plus the worst step index."""

    violations: dict
    worst_step: dict

    @property
    def max_violation(self) -> float:
        return max(self.violations.values())

    def satisfied(self, tol: float) -> bool:
        return self.max_violation <= tol

    def worst_family(self) -> str:
        return max(self.violations, key=lambda k: self.violations[k])

    def __str__(self):
        parts = [
            f"{k}={self.violations[k]:.3e}@{self.worst_step[k]}" for k in _FAMILIES
        ]
        return "residuals: " + ", ".join(parts)


@dataclass
class FootprintPlan:
    times: np.ndarray  # (K+1,)
    bases: np.ndarray  # (K+1, N, 2)
    objective: float
    report: FeasibilityReport
    certified: bool

    def base_reference(self, t: float) -> np.ndarray:
        """Linear interpolation of the plan at time t, (N, 2)."""
        t = min(max(t, self.times[0]), self.times[-1])
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), len(self.times) - 2)
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return (1.0 - w) * self.bases[k] + w * self.bases[k + 1]

    def to_table(self):
        K1, N, _ = self.bases.shape
        return [
            [float(self.times[k])] + self.bases[k].reshape(-1).tolist()
            for k in range(K1)
        ]


# ---------------------------------------------------------------------------
# plan-level quantities


def spread(bases_k: np.ndarray) -> float:
    """Average pairwise base distance at one time step."""
    N = len(bases_k)
    if N < 2:
        return 0.0
    total = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            total += float(np.linalg.norm(bases_k[i] - bases_k[j]))
    return 2.0 * total / (N * (N - 1))


def _spread_all(b: np.ndarray) -> np.ndarray:
    K1, N, _ = b.shape
    total = np.zeros(K1)
    for i in range(N):
        for j in range(i + 1, N):
            total += np.linalg.norm(b[:, i] - b[:, j], axis=1)
    return 2.0 * total / (N * (N - 1))


def objective(b: np.ndarray, problem: FootprintProblem) -> float:
    """Quartic spacing cost, exact triple sum over steps and ordered pairs."""
    w = problem.weights
    total = 0.0
    N = problem.n_robots
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            d2 = np.sum((b[:, i] - b[:, j]) ** 2, axis=1)
            total += w[i] * np.sum((d2 - problem.alpha[i, j] ** 2) ** 2)
    return float(total)


def _objective_grad(b: np.ndarray, problem: FootprintProblem) -> np.ndarray:
    w = problem.weights
    N = problem.n_robots
    g = np.zeros_like(b)
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            diff = b[:, i] - b[:, j]
            d2 = np.sum(diff ** 2, axis=1)
            # term (i,j) contributes w_i, the mirrored term (j,i) w_j
            coef = 4.0 * (w[i] + w[j]) * (d2 - problem.alpha[i, j] ** 2)
            g[:, i] += coef[:, None] * diff
    return g


def _sample_object_path(problem, traj: HermiteTrajectory):
    times = np.linspace(traj.t_start, traj.t_end, problem.K + 1)
    pts = np.array([eval_hermite(traj, float(t))[0] for t in times])
    return times, pts[:, :2], pts[:, 2]


# ---------------------------------------------------------------------------
# constraint evaluation (shared by the solver and check_feasibility)


def _constraint_values(b, problem, xy, z_od):
    """Inequality values g <= 0 per family (vectorized over steps)."""
    N = problem.n_robots
    cent = np.linalg.norm(b.mean(axis=1) - xy, axis=1) ** 2 - problem.epsilon ** 2
    spr = _spread_all(b)
    z_pred = problem.z_ref - problem.kappa * spr
    height_hi = (z_pred - z_od) - problem.delta
    height_lo = -(z_pred - z_od) - problem.delta
    obs = []
    for se in problem.obstacles:
        F = se.value(b.reshape(-1, 2)).reshape(b.shape[:2])
        obs.append(se.rho - F)
    obs = np.stack(obs) if obs else np.zeros((0,) + b.shape[:2])
    return cent, height_hi, height_lo, obs


def check_feasibility(
    plan_bases: np.ndarray, problem: FootprintProblem, object_traj: HermiteTrajectory
) -> FeasibilityReport:
    """Max violation per constraint family; pure re-evaluation."""
    b = np.asarray(plan_bases, dtype=float)
    _, xy, z_od = _sample_object_path(problem, object_traj)
    cent, h_hi, h_lo, obs = _constraint_values(b, problem, xy, z_od)

    viol = {}
    worst = {}
    cent_dist = np.maximum(
        np.linalg.norm(b.mean(axis=1) - xy, axis=1) - problem.epsilon, 0.0
    )
    viol["centroid"] = float(np.max(cent_dist))
    worst["centroid"] = int(np.argmax(cent_dist))

    steps = np.abs(np.diff(b, axis=0))
    step_viol = np.maximum(steps - problem.eta, 0.0)
    viol["step"] = float(np.max(step_viol))
    worst["step"] = int(np.argmax(np.max(step_viol, axis=(1, 2))))

    h = np.maximum(np.maximum(h_hi, h_lo), 0.0)
    viol["height"] = float(np.max(h))
    worst["height"] = int(np.argmax(h))

    if len(problem.obstacles):
        o = np.maximum(obs, 0.0)
        viol["obstacle"] = float(np.max(o))
        worst["obstacle"] = int(np.argmax(np.max(o, axis=(0, 2))))
    else:
        viol["obstacle"] = 0.0
        worst["obstacle"] = 0

    end = max(
        float(np.max(np.abs(b[0] - problem.b_start))),
        float(np.max(np.abs(b[-1] - problem.b_goal))),
    )
    viol["endpoint"] = end
    worst["endpoint"] = 0 if np.max(np.abs(b[0] - problem.b_start)) >= np.max(
        np.abs(b[-1] - problem.b_goal)
    ) else problem.K
    return FeasibilityReport(viol, worst)


# ---------------------------------------------------------------------------
# augmented Lagrangian solver over step variables


def _bases_from_steps(b0, d):
    return np.concatenate([b0[None], b0[None] + np.cumsum(d, axis=0)], axis=0)


def _project_steps(d, total, eta):
    """Project onto {|d| <= eta, sum_k d = total} per robot and axis."""
    K = d.shape[0]
    out = np.empty_like(d)
    for i in range(d.shape[1]):
        for a in range(2):
            v = d[:, i, a]
            target = total[i, a]
            lo_sum = -eta * K
            hi_sum = eta * K
            if not (lo_sum - 1e-12 <= target <= hi_sum + 1e-12):
                raise FootprintError("endpoint displacement outside step budget")
            lam_lo, lam_hi = -2.0 * eta + np.min(-v), 2.0 * eta + np.max(-v)
            for _ in range(80):  # bisection on the monotone shift
                lam = 0.5 * (lam_lo + lam_hi)
                s = float(np.sum(np.clip(v + lam, -eta, eta)))
                if s < target:
                    lam_lo = lam
                else:
                    lam_hi = lam
            out[:, i, a] = np.clip(v + 0.5 * (lam_lo + lam_hi), -eta, eta)
    return out


def _al_value_and_grad(d, b0, problem, xy, z_od, lams, mu):
    b = _bases_from_steps(b0, d)
    cent, h_hi, h_lo, obs = _constraint_values(b, problem, xy, z_od)
    val = objective(b, problem)
    grad_b = _objective_grad(b, problem)
    N = problem.n_robots

    def al_terms(g, lam):
        t = np.maximum(0.0, g + lam / mu)
        value = 0.5 * mu * np.sum(t ** 2) - np.sum(lam ** 2) / (2 * mu)
        coef = mu * t  # d/dg of AL term where active
        return value, coef

    # centroid
    v, coef = al_terms(cent, lams["centroid"])
    val += v
    e = b.mean(axis=1) - xy
    grad_b += (coef[:, None] * e * 2.0 / N)[:, None, :]

    # height (two one-sided constraints share the spread gradient)
    v_hi, c_hi = al_terms(h_hi, lams["height_hi"])
    v_lo, c_lo = al_terms(h_lo, lams["height_lo"])
    val += v_hi + v_lo
    coef_z = -(c_hi - c_lo) * problem.kappa  # d(z_pred)/d(spread) = -kappa
    if np.any(coef_z != 0.0):
        pair_norm = 2.0 / (N * (N - 1))
        for i in range(N):
            acc = np.zeros((b.shape[0], 2))
            for j in range(N):
                if i == j:
                    continue
                diff = b[:, i] - b[:, j]
                nrm = np.maximum(np.linalg.norm(diff, axis=1), 1e-12)
                acc += diff / nrm[:, None]
            grad_b[:, i] += (coef_z * pair_norm)[:, None] * acc

    # obstacles
    for li, se in enumerate(problem.obstacles):
        v, coef = al_terms(obs[li], lams["obstacle"][li])
        val += v
        if np.any(coef != 0.0):
            g_se = se.grad(b.reshape(-1, 2)).reshape(b.shape)
            grad_b += -coef[..., None] * g_se

    # back-propagate to step variables: d[k] influences b[k+1..K]
    grad_d = np.cumsum(grad_b[::-1], axis=0)[::-1][1:]
    return val, grad_d, b


def plan_footprints(
    problem: FootprintProblem,
    object_traj: HermiteTrajectory,
    seed: int = 0,
) -> FootprintPlan:
    """Solve the footprint problem along the object trajectory.

    The result always satisfies the step and endpoint families exactly
    (they live in the projection); the remaining families are driven
    below `problem.tol` by the augmented Lagrangian, or the plan comes
    back flagged non-certified with its residual report.
    """
    del seed  # deterministic construction; accepted for interface parity
    times, xy, z_od = _sample_object_path(problem, object_traj)
    N = problem.n_robots
    K = problem.K

    # initialization: sweep the start formation along the path, then
    # push bases out of keep-outs along the super-ellipse gradient
    offsets = problem.b_start - xy[0]
    b = xy[:, None, :] + offsets[None, :, :]
    b[-1] = problem.b_goal
    for _ in range(60):
        moved = False
        for se in problem.obstacles:
            flat = b.reshape(-1, 2)
            F = se.value(flat)
            bad = F < se.rho
            if np.any(bad):
                g = se.grad(flat[bad])
                g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-9)
                flat[bad] += 0.05 * g
                moved = True
        if not moved:
            break
    b[0] = problem.b_start
    b[-1] = problem.b_goal

    total = problem.b_goal - problem.b_start
    d = _project_steps(np.diff(b, axis=0), total, problem.eta)

    lams = {
        "centroid": np.zeros(K + 1),
        "height_hi": np.zeros(K + 1),
        "height_lo": np.zeros(K + 1),
        "obstacle": np.zeros((len(problem.obstacles), K + 1, N)),
    }
    mu = 10.0
    step0 = 1e-3
    value, grad, b = _al_value_and_grad(d, problem.b_start, problem, xy, z_od, lams, mu)
    prev_viol = np.inf
    for outer in range(problem.outer_iters):
        # inner projected gradient with backtracking
        step = step0
        for _ in range(problem.inner_iters):
            cand = _project_steps(d - step * grad, total, problem.eta)
            v_new, g_new, _ = _al_value_and_grad(
                cand, problem.b_start, problem, xy, z_od, lams, mu
            )
            if v_new < value - 1e-15:
                d, value, grad = cand, v_new, g_new
                step = min(step * 1.6, 1.0)
            else:
                step *= 0.4
                if step < 1e-12:
                    break
        b = _bases_from_steps(problem.b_start, d)
        cent, h_hi, h_lo, obs = _constraint_values(b, problem, xy, z_od)
        viol = max(
            float(np.max(cent, initial=0.0)),
            float(np.max(h_hi, initial=0.0)),
            float(np.max(h_lo, initial=0.0)),
            float(np.max(obs, initial=0.0)) if obs.size else 0.0,
        )
        if viol <= 0.2 * problem.tol:
            break
        lams["centroid"] = np.maximum(0.0, lams["centroid"] + mu * cent)
        lams["height_hi"] = np.maximum(0.0, lams["height_hi"] + mu * h_hi)
        lams["height_lo"] = np.maximum(0.0, lams["height_lo"] + mu * h_lo)
        if obs.size:
            lams["obstacle"] = np.maximum(0.0, lams["obstacle"] + mu * obs)
        if viol > 0.25 * prev_viol:
            mu = min(mu * 8.0, 1e9)
        prev_viol = viol
        value, grad, _ = _al_value_and_grad(
            d, problem.b_start, problem, xy, z_od, lams, mu
        )

    b = _bases_from_steps(problem.b_start, d)
    report = check_feasibility(b, problem, object_traj)
    return FootprintPlan(
        times=times,
        bases=b,
        objective=objective(b, problem),
        report=report,
        certified=report.satisfied(problem.tol),
    )
