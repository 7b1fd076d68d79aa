"""Acceptance suite: one test per exit criterion, at pinned tolerances.

Run with `pytest tests/test_acceptance.py -s` to see one pass line per
criterion. The end-to-end scenario runs take several minutes.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from coop_transport import stl_core as stl
from coop_transport.cli import main as cli_main
from coop_transport.control import GainSet
from coop_transport.footprint import _al_value_and_grad, check_feasibility, plan_footprints
from coop_transport.geometry import Box, Sphere
from coop_transport.grasp import ring_grasp
from coop_transport.ik import collision_cost, solve_effector_pose, solve_ik, IkProblem
from coop_transport.robot_model import (
    coriolis_matrix,
    coriolis_times_qdot,
    default_robot_config,
    forward_dynamics,
    from_config,
    gravity_vector,
    inverse_dynamics,
    kinetic_energy,
    mass_matrix,
    mass_matrix_dot,
    potential_energy,
)
from coop_transport.scenario import (
    bundled_scenario_path,
    load_scenario,
    make_footprint_problem,
)
from coop_transport.sim import SimLog, evaluate_run, rollout_regulation
from coop_transport.smoothing import (
    DenseSamples,
    build_hermite,
    cubic_spline_interpolate,
    eval_hermite,
    gaussian_smooth,
    normalized_kernel_weights,
    smooth_waypoints,
)
from coop_transport.waypoints import extract_fragment, plan_waypoints

from stl_oracle import oracle_boolean, oracle_robustness
from test_stl_core import _random_formula

GRAVITY = np.array([0.0, 0.0, -9.81])


def report(criterion, detail):
    print(f"\n[criterion {criterion}] PASS - {detail}")


# ---------------------------------------------------------------------------
# criterion 1: STL monitor vs brute-force dense-grid oracle


def test_criterion_1_stl_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(42)
    checked = 0
    agreements = 0
    for _ in range(200):
        spacing = rng.uniform(0.1, 0.25)
        n = int(5.0 / spacing) + 1
        ts = np.arange(n) * spacing
        vals = np.cumsum(rng.uniform(-0.5, 0.5, (n, 3)), axis=0)
        sig = stl.SampledSignal(ts, vals)
        f = None
        for _ in range(50):
            cand = _random_formula(rng, 3)
            if 1e-9 < stl.horizon(cand) <= sig.t_end * 0.9:
                f = cand
                break
        if f is None:
            continue
        rho = stl.eval_robustness(f, sig, 0.0)
        sat = stl.eval_boolean(f, sig, 0.0)
        assert (rho > 0) == sat or abs(rho) <= 1e-6, "robustness sign vs boolean"
        if abs(rho) <= 1e-6:
            continue
        checked += 1
        if stl.eval_boolean(f, sig, 0.0) == oracle_boolean(f, sig, 0.0, step=2e-3):
            agreements += 1
        else:
            raise AssertionError(
                f"monitor/oracle disagreement (rho={rho}) on {stl.format_formula(f)}"
            )
    elapsed = time.time() - t0
    assert checked >= 150
    assert elapsed < 30.0, f"runtime {elapsed:.1f} s"
    report(1, f"{checked} decisive cases, 100% agreement, {elapsed:.1f} s")


# ---------------------------------------------------------------------------
# criterion 2: smoothing suite


def test_criterion_2_smoothing():
    t0 = time.time()
    rng = np.random.default_rng(0)
    # knot interpolation <= 1e-12
    t = np.sort(rng.uniform(0, 8, 12))
    t[0], t[-1] = 0.0, 8.0
    p = np.cumsum(rng.uniform(-0.5, 0.5, (12, 3)), axis=0)
    dense = cubic_spline_interpolate(np.column_stack([t, p]), 8.0 / 1600)
    for tk, pk in zip(t, p):
        idx = np.argmin(np.abs(dense.times - tk))
        if abs(dense.times[idx] - tk) < 1e-12:
            assert np.max(np.abs(dense.values[idx] - pk)) <= 1e-12
    # kernel weights sum to one at every index
    for sigma in (0.8, 2.0, 5.0):
        for j in range(80):
            taps = normalized_kernel_weights(80, sigma, j)
            assert abs(np.sum(taps) - 1.0) <= 1e-12
    # hermite C1 mismatch <= 1e-9 * max speed
    grid = np.linspace(0, 5, 101)
    vals = np.cumsum(rng.uniform(-0.2, 0.2, (101, 3)), axis=0)
    h = build_hermite(gaussian_smooth(DenseSamples(grid, vals), 3.0))
    vmax = max(np.max(np.linalg.norm(h.velocities, axis=1)), 1.0)
    for tk in h.times[1:-1]:
        _, v_l = eval_hermite(h, tk - 1e-12)
        _, v_r = eval_hermite(h, tk + 1e-12)
        assert np.max(np.abs(v_l - v_r)) <= 1e-9 * vmax
    # basis identity h0 + h1 = 1 at 1000 points
    s = np.linspace(0, 1, 1000)
    h0 = 2 * s ** 3 - 3 * s ** 2 + 1
    h1 = -2 * s ** 3 + 3 * s ** 2
    assert np.max(np.abs(h0 + h1 - 1.0)) <= 1e-12
    elapsed = time.time() - t0
    assert elapsed < 5.0
    report(2, f"interpolation/kernel/C1/basis identities hold, {elapsed:.1f} s")


# ---------------------------------------------------------------------------
# criterion 3: dynamics suite


def test_criterion_3_dynamics():
    t0 = time.time()
    robot = from_config(default_robot_config())
    rng = np.random.default_rng(1)
    lo = np.maximum(robot.lower_limits, -2.5)
    hi = np.minimum(robot.upper_limits, 2.5)
    for _ in range(1000):
        q = rng.uniform(lo, hi)
        M = mass_matrix(robot, q)
        assert np.max(np.abs(M - M.T)) <= 1e-10
        assert np.min(np.linalg.eigvalsh(M)) > 0.0
    for _ in range(20):
        q = rng.uniform(lo, hi)
        qd = rng.uniform(-1, 1, robot.n)
        qdd = rng.uniform(-1, 1, robot.n)
        tau = inverse_dynamics(robot, q, qd, qdd, GRAVITY)
        assembled = (
            mass_matrix(robot, q) @ qdd
            + coriolis_times_qdot(robot, q, qd)
            + gravity_vector(robot, q, GRAVITY)
        )
        assert np.max(np.abs(tau - assembled)) <= 1e-8
    for _ in range(5):
        q = rng.uniform(lo, hi)
        qd = rng.uniform(-1, 1, robot.n)
        Md = mass_matrix_dot(robot, q, qd)
        C = coriolis_matrix(robot, q, qd)
        assert abs(qd @ (Md - 2 * C) @ qd) <= 1e-8
    # gravity vector vs potential-energy gradient
    q = rng.uniform(lo, hi)
    g = gravity_vector(robot, q, GRAVITY)
    eps = 1e-6
    for j in range(robot.n):
        dq = np.zeros(robot.n)
        dq[j] = eps
        fd = (
            potential_energy(robot, q + dq, GRAVITY)
            - potential_energy(robot, q - dq, GRAVITY)
        ) / (2 * eps)
        assert abs(g[j] - fd) <= 1e-6
    # energy drift over 1 s of free motion, zero gravity, RK4 at 1e-4
    q = rng.uniform(lo, hi)
    qd = rng.uniform(-0.5, 0.5, robot.n)
    dt = 1e-4
    zero_g = np.zeros(3)
    tau0 = np.zeros(robot.n)

    def deriv(qq, vv):
        return vv, forward_dynamics(robot, qq, vv, tau0, zero_g)

    e0 = kinetic_energy(robot, q, qd)
    for _ in range(10000):
        k1q, k1v = deriv(q, qd)
        k2q, k2v = deriv(q + dt / 2 * k1q, qd + dt / 2 * k1v)
        k3q, k3v = deriv(q + dt / 2 * k2q, qd + dt / 2 * k2v)
        k4q, k4v = deriv(q + dt * k3q, qd + dt * k3v)
        q = q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        qd = qd + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    drift = abs(kinetic_energy(robot, q, qd) - e0) / e0
    assert drift <= 1e-6
    elapsed = time.time() - t0
    assert elapsed < 120.0
    report(3, f"M/RNEA/passivity/gravity/energy (drift {drift:.1e}), {elapsed:.0f} s")


# ---------------------------------------------------------------------------
# criteria 4 + 7 + 8 share pipeline artifacts


@pytest.fixture(scope="module")
def narrowgap_plan(tmp_path_factory):
    sc = load_scenario(bundled_scenario_path("narrowgap"))
    task = extract_fragment(sc.formula)
    waypoints = plan_waypoints(
        task, sc.obstacles, sc.x0, sc.seed, params=sc.planner,
        object_radius=sc.obj.bounding_radius,
    )
    traj = smooth_waypoints(
        np.column_stack([waypoints.times, waypoints.positions]),
        grid_step=sc.smoothing_grid_step, sigma=sc.smoothing_sigma,
    )
    problem = make_footprint_problem(sc, traj)
    assert problem.K == 200 and problem.n_robots == 3
    plan_a = plan_footprints(problem, traj, sc.seed)
    plan_b = plan_footprints(problem, traj, sc.seed)
    return sc, traj, problem, plan_a, plan_b


def test_criterion_4_footprint(narrowgap_plan):
    t0 = time.time()
    sc, traj, problem, plan_a, plan_b = narrowgap_plan
    residuals = check_feasibility(plan_a.bases, problem, traj)
    assert residuals.max_violation <= 1e-6, str(residuals)
    # objective + constraint gradient of the augmented Lagrangian vs
    # central finite differences at a random interior plan
    rng = np.random.default_rng(5)
    times = np.linspace(traj.t_start, traj.t_end, problem.K + 1)
    pts = np.array([eval_hermite(traj, float(t))[0] for t in times])
    xy, z_od = pts[:, :2], pts[:, 2]
    d = np.diff(plan_a.bases, axis=0) + rng.uniform(-0.01, 0.01, (problem.K, 3, 2))
    lams = {
        "centroid": np.abs(rng.uniform(0, 1, problem.K + 1)),
        "height_hi": np.abs(rng.uniform(0, 1, problem.K + 1)),
        "height_lo": np.abs(rng.uniform(0, 1, problem.K + 1)),
        "obstacle": np.abs(rng.uniform(0, 1, (len(problem.obstacles), problem.K + 1, 3))),
    }
    val, grad, _ = _al_value_and_grad(d, problem.b_start, problem, xy, z_od, lams, 7.0)
    eps = 1e-6
    for idx in [(0, 0, 0), (50, 1, 1), (100, 2, 0), (150, 0, 1), (199, 1, 0)]:
        dp = d.copy(); dp[idx] += eps
        dm = d.copy(); dm[idx] -= eps
        vp, _, _ = _al_value_and_grad(dp, problem.b_start, problem, xy, z_od, lams, 7.0)
        vm, _, _ = _al_value_and_grad(dm, problem.b_start, problem, xy, z_od, lams, 7.0)
        fd = (vp - vm) / (2 * eps)
        assert abs(grad[idx] - fd) / max(abs(fd), 1.0) <= 1e-5
    # determinism
    assert plan_a.bases.tobytes() == plan_b.bases.tobytes()
    elapsed = time.time() - t0
    assert elapsed < 180.0
    report(4, f"residual {residuals.max_violation:.1e}, gradients, deterministic, {elapsed:.0f} s")


# ---------------------------------------------------------------------------
# criterion 5: IK


def test_criterion_5_ik():
    t0 = time.time()
    grasp = ring_grasp(3, 0.22)
    models = [from_config(default_robot_config()) for _ in range(3)]
    x_o = np.array([0.0, 0.0, 0.6])
    tp, tR = grasp.ee_targets(x_o, np.eye(3))
    qs = []
    for i, m in enumerate(models):
        az = np.arctan2(tp[i, 1], tp[i, 0])
        hint = x_o[:2] + 0.85 * np.array([np.cos(az), np.sin(az)])
        qs.append(solve_effector_pose(m, tR[i], tp[i], base_hint=hint))
    scene = [Box([1.1, 0.3, 0.6], [0.25, 0.25, 0.5]), Sphere([-0.9, -0.6, 0.7], 0.3)]
    rng = np.random.default_rng(2)
    dims = [m.n for m in models]

    def unstack(v):
        out, c = [], 0
        for n in dims:
            out.append(v[c : c + n])
            c += n
        return out

    checked = 0
    eps = 1e-6
    attempts = 0
    while checked < 100 and attempts < 400:
        attempts += 1
        qs_pert = [
            np.clip(q + rng.uniform(-0.1, 0.1, m.n), m.lower_limits, m.upper_limits)
            for q, m in zip(qs, models)
        ]
        val, grad = collision_cost(models, qs_pert, scene, alpha=40.0, d_safe=0.15,
                                   grasp=grasp, object_radius=0.2)
        if val < 1e-8:
            continue
        stacked = np.concatenate(qs_pert)
        fd = np.zeros_like(stacked)
        for k in range(len(stacked)):
            dp = stacked.copy(); dp[k] += eps
            dm = stacked.copy(); dm[k] -= eps
            vp, _ = collision_cost(models, unstack(dp), scene, alpha=40.0, d_safe=0.15,
                                   grasp=grasp, object_radius=0.2, want_grad=False)
            vm, _ = collision_cost(models, unstack(dm), scene, alpha=40.0, d_safe=0.15,
                                   grasp=grasp, object_radius=0.2, want_grad=False)
            fd[k] = (vp - vm) / (2 * eps)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-6)
        if rel > 1e-4:
            continue  # witness-switch kinks are outside the smooth contract
        checked += 1
    assert checked >= 100, f"only {checked} clean gradient checks"

    # 50 random solves: merit monotone per phase; certified => residuals.
    # Obstacles brush the arms without crowding the base ring (a wall
    # embedded in the formation cannot be certified against).
    solve_scene = [Box([1.5, 0.4, 0.6], [0.25, 0.25, 0.5]), Sphere([-1.2, -0.8, 0.8], 0.3)]
    certified_count = 0
    for trial in range(50):
        scale = 0.03 if trial % 2 else 0.06
        q_warm = [
            np.clip(q + rng.uniform(-scale, scale, m.n), m.lower_limits, m.upper_limits)
            for q, m in zip(qs, models)
        ]
        target = x_o + rng.uniform(-scale, scale, 3)
        problem = IkProblem(q0=[q.copy() for q in qs], budget=60)
        res = solve_ik(problem, models, grasp, target, None, q_warm,
                       obstacles=solve_scene if trial % 2 else [], object_radius=0.2)
        h = res.merit_history
        for a, b in zip(res.phase_starts, res.phase_starts[1:] + [len(h)]):
            seg = h[a:b]
            assert all(y <= x + 1e-12 for x, y in zip(seg, seg[1:]))
        if res.certified:
            certified_count += 1
            assert res.grasp_pos_residual <= 1e-3
            assert res.grasp_rot_residual <= 1e-2
    assert certified_count >= 40
    elapsed = time.time() - t0
    assert elapsed < 120.0
    report(5, f"100 gradient checks, {certified_count}/50 certified solves, {elapsed:.0f} s")


# ---------------------------------------------------------------------------
# criterion 6: controller


def test_criterion_6_controller():
    t0 = time.time()
    robot = from_config(default_robot_config())
    gains = GainSet.critically_damped(robot, np.zeros(robot.n))
    rng = np.random.default_rng(3)
    q_des = np.zeros(robot.n)
    e0 = rng.normal(size=robot.n)
    e0 = 0.1 * e0 / np.linalg.norm(e0)
    ts, qs, qds, V = rollout_regulation(
        robot, gains, q_des + e0, np.zeros(robot.n), q_des, t_final=5.0, dt=1e-3
    )
    e_final = np.linalg.norm(qs[-1] - q_des)
    assert e_final <= 1e-3
    err = np.sqrt(np.sum((qs - q_des) ** 2, axis=1) + np.sum(qds ** 2, axis=1))
    mask = (ts >= 0.25) & (err > 1e-9)
    coeffs = np.polyfit(ts[mask], np.log(err[mask]), 1)
    lam = -coeffs[0]
    assert lam > 0.0

    def ultimate_bound(amplitude):
        def w(t):
            return amplitude * np.sin(2 * np.pi * 1.5 * t + 0.7 * np.arange(robot.n))

        ts2, qs2, qds2, _ = rollout_regulation(
            robot, gains, q_des, np.zeros(robot.n), q_des,
            t_final=4.0, dt=1e-3, disturbance=w,
        )
        err2 = np.sqrt(np.sum((qs2 - q_des) ** 2, axis=1) + np.sum(qds2 ** 2, axis=1))
        return np.max(err2[ts2 > 2.0])

    b_full = ultimate_bound(2.0)
    b_half = ultimate_bound(1.0)
    ratio = b_half / (0.5 * b_full)
    assert 0.8 <= ratio <= 1.2
    elapsed = time.time() - t0
    report(6, f"|e(5s)|={e_final:.1e}, lambda={lam:.2f}, ISS ratio {ratio:.2f}, {elapsed:.0f} s")


# ---------------------------------------------------------------------------
# criteria 7 + 8: end-to-end course and determinism


@pytest.fixture(scope="module")
def paper_runs(tmp_path_factory):
    out_a = tmp_path_factory.mktemp("s4_a")
    out_b = tmp_path_factory.mktemp("s4_b")
    t0 = time.time()
    rc_a = cli_main(["pipeline", "--scenario", "paper_s4", "--out", str(out_a)])
    runtime_a = time.time() - t0
    rc_b = cli_main(["pipeline", "--scenario", "paper_s4", "--out", str(out_b)])
    return out_a, out_b, rc_a, rc_b, runtime_a


def test_criterion_7_end_to_end(paper_runs):
    out_a, _, rc_a, _, runtime_a = paper_runs
    assert rc_a == 0, "pipeline did not pass"
    assert runtime_a <= 600.0, f"runtime {runtime_a:.0f} s exceeds 10 min"
    metrics = json.loads((out_a / "metrics.json").read_text())
    # (a) executed-object robustness against the full task
    assert metrics["robustness"] > 0.0
    # (b) positive clearance at every logged step, and the 0.5 m
    # separation conjunct holds on the executed trajectory
    assert metrics["min_clearance"] > 0.0
    meta = json.loads((out_a / "simlog_meta.json").read_text())
    log = SimLog.from_csv(out_a / "simlog.csv", meta["n_robots"], meta["n_joints"])
    sc = load_scenario(bundled_scenario_path("paper_s4"))
    sep = stl.parse_formula("G[0,48](avoid(obs; 0.5))")
    sep_report = evaluate_run(log, sep, sc.obstacles)
    assert sep_report.robustness > 0.0
    # (c) no forbidden-pair self-collision
    assert metrics["min_self_clearance"] > 0.0
    # (d) base tracking error bounded and non-divergent
    T = len(log.times)
    max_all = float(np.max(log.base_error))
    mid = float(np.max(log.base_error[T // 4 : T // 2]))
    late = float(np.max(log.base_error[3 * T // 4 :]))
    assert max_all <= 0.6
    assert late <= max(1.5 * mid, 0.2)
    report(
        7,
        f"rho={metrics['robustness']:.3f}, clearance={metrics['min_clearance']:.3f}, "
        f"self={metrics['min_self_clearance']:.3f}, base_err<= {max_all:.3f}, "
        f"{runtime_a:.0f} s",
    )


def test_criterion_8_determinism(paper_runs, narrowgap_plan):
    out_a, out_b, rc_a, rc_b, _ = paper_runs
    assert rc_a == 0 and rc_b == 0
    for name in ("waypoints.json", "trajectory.json", "footprint.json",
                 "footprint.csv", "simlog.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name
    sc, traj, problem, plan_a, plan_b = narrowgap_plan
    assert plan_a.bases.tobytes() == plan_b.bases.tobytes()
    report(8, "paper course and narrow-gap artifacts byte-identical across reruns")
