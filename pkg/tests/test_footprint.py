import numpy as np
import pytest

from coop_transport.footprint import (
    FeasibilityReport,
    FootprintError,
    FootprintPlan,
    FootprintProblem,
    _al_value_and_grad,
    _bases_from_steps,
    _project_steps,
    check_feasibility,
    objective,
    plan_footprints,
    spread,
)
from coop_transport.geometry import SuperEllipse
from coop_transport.smoothing import DenseSamples, build_hermite


def straight_object_traj(start=(0.0, 0.0, 0.6), end=(4.0, 0.0, 0.6), t_end=20.0, n=201):
    t = np.linspace(0.0, t_end, n)
    p = np.array(start) + np.outer(t / t_end, np.array(end) - np.array(start))
    return build_hermite(DenseSamples(t, p))


def formation(center_xy, radius=0.9, n=3, phase=np.pi / 2):
    ang = phase + 2 * np.pi * np.arange(n) / n
    return np.asarray(center_xy) + radius * np.column_stack([np.cos(ang), np.sin(ang)])


def make_problem(traj, obstacles=(), K=60, radius=0.9, eta=0.25, epsilon=0.35,
                 delta=0.12, kappa=0.25):
    from coop_transport.smoothing import eval_hermite

    p0 = eval_hermite(traj, traj.t_start)[0]
    p1 = eval_hermite(traj, traj.t_end)[0]
    b_start = formation(p0[:2], radius)
    b_goal = formation(p1[:2], radius)
    side = np.linalg.norm(b_start[0] - b_start[1])
    alpha = side * (np.ones((3, 3)) - np.eye(3))
    nominal_spread = spread(b_start)
    z_ref = float(p0[2] + kappa * nominal_spread)
    return FootprintProblem(
        n_robots=3,
        K=K,
        weights=np.ones(3),
        alpha=alpha,
        epsilon=epsilon,
        eta=eta,
        delta=delta,
        z_ref=z_ref,
        kappa=kappa,
        obstacles=list(obstacles),
        b_start=b_start,
        b_goal=b_goal,
    )


# ---------------------------------------------------------------------------
# spread and objective


def test_spread_two_bases():
    assert spread(np.array([[0.0, 0.0], [1.0, 0.0]])) == pytest.approx(1.0)


def test_spread_equilateral():
    b = formation([0.0, 0.0], radius=1.0)
    side = np.linalg.norm(b[0] - b[1])
    assert spread(b) == pytest.approx(side, abs=1e-12)


def test_spread_collinear():
    b = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    assert spread(b) == pytest.approx((1.0 + 2.0 + 3.0) / 3.0, abs=1e-12)


def test_objective_zero_at_target_spacing():
    traj = straight_object_traj()
    problem = make_problem(traj)
    b = np.repeat(problem.b_start[None], problem.K + 1, axis=0)
    # translate the rigid formation: spacing stays on target
    shift = np.linspace(0, 4, problem.K + 1)
    b = b + np.stack([shift, np.zeros_like(shift)], axis=1)[:, None, :]
    assert objective(b, problem) == pytest.approx(0.0, abs=1e-18)


def test_objective_one_step_two_robots():
    problem = FootprintProblem(
        n_robots=2,
        K=2,
        weights=[1.0, 1.0],
        alpha=[[0.0, 1.0], [1.0, 0.0]],
        epsilon=1.0,
        eta=1.0,
        delta=1.0,
        z_ref=0.6,
        kappa=0.1,
        obstacles=[],
        b_start=[[0.0, 0.0], [1.0, 0.0]],
        b_goal=[[0.0, 0.0], [1.0, 0.0]],
    )
    # single row with squared distance exceeding alpha^2 by exactly 1
    b = np.array([[[0.0, 0.0], [np.sqrt(2.0), 0.0]]])
    assert objective(b, problem) == pytest.approx(2.0, abs=1e-12)


def test_objective_scales_with_weight():
    traj = straight_object_traj()
    problem = make_problem(traj)
    rng = np.random.default_rng(0)
    b = rng.uniform(-1, 1, (problem.K + 1, 3, 2))
    f1 = objective(b, problem)
    problem.weights = np.array([2.0, 1.0, 1.0])
    f2 = objective(b, problem)
    assert f2 > f1


def test_objective_rotation_invariance():
    traj = straight_object_traj()
    problem = make_problem(traj)
    rng = np.random.default_rng(1)
    b = rng.uniform(-1, 1, (problem.K + 1, 3, 2))
    c = b.mean(axis=1, keepdims=True)
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    b_rot = c + (b - c) @ R.T
    assert objective(b_rot, problem) == pytest.approx(objective(b, problem), rel=1e-12)


# ---------------------------------------------------------------------------
# projection onto the step set


def test_project_steps_idempotent_and_feasible():
    rng = np.random.default_rng(2)
    K = 40
    d = rng.uniform(-0.6, 0.6, (K, 3, 2))
    total = rng.uniform(-0.2 * K, 0.2 * K, (3, 2)) * 0.5
    eta = 0.25
    p = _project_steps(d, total, eta)
    assert np.max(np.abs(p)) <= eta + 1e-9
    assert np.max(np.abs(p.sum(axis=0) - total)) < 1e-8
    p2 = _project_steps(p, total, eta)
    assert np.max(np.abs(p2 - p)) < 1e-8


def test_project_steps_rejects_unreachable():
    d = np.zeros((5, 1, 2))
    with pytest.raises(FootprintError):
        _project_steps(d, np.array([[10.0, 0.0]]), eta=0.25)


# ---------------------------------------------------------------------------
# gradient of the augmented Lagrangian vs finite differences


def test_al_gradient_finite_difference():
    traj = straight_object_traj(t_end=10.0)
    se = SuperEllipse([2.0, 1.2], ax=0.8, ay=0.6, rho=1.0)
    problem = make_problem(traj, obstacles=[se], K=12, eta=0.5)
    times = np.linspace(traj.t_start, traj.t_end, problem.K + 1)
    from coop_transport.smoothing import eval_hermite

    pts = np.array([eval_hermite(traj, float(t))[0] for t in times])
    xy, z_od = pts[:, :2], pts[:, 2]
    rng = np.random.default_rng(3)
    d = rng.uniform(-0.2, 0.2, (problem.K, 3, 2))
    lams = {
        "centroid": np.abs(rng.uniform(0, 1, problem.K + 1)),
        "height_hi": np.abs(rng.uniform(0, 1, problem.K + 1)),
        "height_lo": np.abs(rng.uniform(0, 1, problem.K + 1)),
        "obstacle": np.abs(rng.uniform(0, 1, (1, problem.K + 1, 3))),
    }
    mu = 7.0
    val, grad, _ = _al_value_and_grad(d, problem.b_start, problem, xy, z_od, lams, mu)
    eps = 1e-6
    idxs = [(0, 0, 0), (3, 1, 1), (7, 2, 0), (11, 0, 1), (5, 1, 0)]
    for idx in idxs:
        dp = d.copy()
        dp[idx] += eps
        vp, _, _ = _al_value_and_grad(dp, problem.b_start, problem, xy, z_od, lams, mu)
        dm = d.copy()
        dm[idx] -= eps
        vm, _, _ = _al_value_and_grad(dm, problem.b_start, problem, xy, z_od, lams, mu)
        fd = (vp - vm) / (2 * eps)
        denom = max(abs(fd), 1.0)
        assert abs(grad[idx] - fd) / denom < 1e-5


# ---------------------------------------------------------------------------
# full solves


def test_obstacle_free_straight_line():
    traj = straight_object_traj()
    problem = make_problem(traj)
    plan = plan_footprints(problem, traj, seed=0)
    assert plan.certified, str(plan.report)
    assert plan.report.max_violation <= problem.tol
    # near-zero objective: spacing stays near alpha throughout
    sides = [
        np.linalg.norm(plan.bases[k, 0] - plan.bases[k, 1])
        for k in range(problem.K + 1)
    ]
    assert abs(np.mean(sides) - problem.alpha[0, 1]) < 0.05
    assert plan.objective < 1e-2


def test_endpoints_pinned_exactly():
    traj = straight_object_traj()
    problem = make_problem(traj)
    plan = plan_footprints(problem, traj, seed=0)
    assert np.array_equal(plan.bases[0], problem.b_start)
    assert np.max(np.abs(plan.bases[-1] - problem.b_goal)) < 1e-9


def test_narrow_gap_contracts_spread():
    # keep-outs leave a corridor near y = 0 narrower than the formation
    traj = straight_object_traj(start=(-3.0, 0.0, 0.6), end=(3.0, 0.0, 0.6), t_end=30.0)
    walls = [
        SuperEllipse([0.0, 1.6], ax=1.1, ay=1.15, rho=1.0),
        SuperEllipse([0.0, -1.6], ax=1.1, ay=1.15, rho=1.0),
    ]
    problem = make_problem(traj, obstacles=walls, K=80, radius=0.9, eta=0.3)
    plan = plan_footprints(problem, traj, seed=0)
    assert plan.certified, str(plan.report)
    spreads = np.array([spread(plan.bases[k]) for k in range(problem.K + 1)])
    # inside the gap the formation deviates from nominal while the
    # height model keeps the spread above its algebraic lower bound
    lower = (problem.z_ref - 0.6 - problem.delta) / problem.kappa
    assert np.min(spreads) >= lower - 1e-6
    # formation near the gap reshapes: pairwise geometry differs from start
    k_mid = problem.K // 2
    start_shape = problem.b_start - problem.b_start.mean(axis=0)
    mid_shape = plan.bases[k_mid] - plan.bases[k_mid].mean(axis=0)
    assert np.max(np.abs(start_shape - mid_shape)) > 0.1


def test_check_feasibility_flags_hand_broken_plans():
    traj = straight_object_traj()
    problem = make_problem(traj)
    plan = plan_footprints(problem, traj, seed=0)
    report = check_feasibility(plan.bases, problem, traj)
    assert report.max_violation <= problem.tol

    broken = plan.bases.copy()
    # displace one row so the worst step exceeds the bound by exactly 0.1
    broken[10, 0, 0] = broken[9, 0, 0] + problem.eta + 0.1
    report = check_feasibility(broken, problem, traj)
    assert report.violations["step"] == pytest.approx(0.1, abs=1e-9)

    inside = plan.bases.copy()
    se = SuperEllipse([float(inside[20, 1, 0]), float(inside[20, 1, 1])],
                      ax=0.5, ay=0.5, rho=1.0)
    problem.obstacles = [se]
    report = check_feasibility(inside, problem, traj)
    assert report.violations["obstacle"] == pytest.approx(1.0, abs=1e-9)


def test_determinism():
    traj = straight_object_traj()
    problem = make_problem(traj)
    a = plan_footprints(problem, traj, seed=0)
    b = plan_footprints(problem, traj, seed=0)
    assert a.bases.tobytes() == b.bases.tobytes()
