"""Shared construction of a grasping team for simulator tests."""

import numpy as np

from coop_transport.control import GainSet
from coop_transport.geometry import Box
from coop_transport.grasp import ObjectModel, ring_grasp
from coop_transport.ik import IkProblem, solve_effector_pose
from coop_transport.robot_model import default_robot_config, from_config
from coop_transport.sim import SystemState, World


def build_world(
    x_o=(0.0, 0.0, 0.6),
    n_robots=3,
    obstacles=(),
    base_radius=0.85,
    obj_mass=2.0,
    compensate_payload=True,
    ik_budget=40,
):
    x_o = np.asarray(x_o, dtype=float)
    grasp = ring_grasp(n_robots, 0.22)
    models = [from_config(default_robot_config()) for _ in range(n_robots)]
    targets_p, targets_R = grasp.ee_targets(x_o, np.eye(3))
    qs = []
    for i, m in enumerate(models):
        az = np.arctan2(targets_p[i, 1] - x_o[1], targets_p[i, 0] - x_o[0])
        base = x_o[:2] + base_radius * np.array([np.cos(az), np.sin(az)])
        qs.append(solve_effector_pose(m, targets_R[i], targets_p[i], base_hint=base))
    obj = ObjectModel(
        mass=obj_mass,
        inertia=np.diag([0.02, 0.02, 0.03]),
        primitive=Box([0.0, 0.0, 0.0], [0.18, 0.18, 0.06]),
        bounding_radius=float(np.linalg.norm([0.18, 0.18, 0.06])),
    )
    initial = SystemState(
        qs=[q.copy() for q in qs],
        qds=[np.zeros(m.n) for m in models],
        x_o=x_o.copy(),
        R_o=np.eye(3),
        v_o=np.zeros(3),
        w_o=np.zeros(3),
    )
    gains = [GainSet.bandwidth(m, q) for m, q in zip(models, qs)]
    problem = IkProblem(q0=[q.copy() for q in qs], budget=ik_budget)
    return World(
        models=models,
        grasp=grasp,
        obj=obj,
        obstacles=list(obstacles),
        gains=gains,
        ik_problem=problem,
        initial=initial,
        compensate_payload=compensate_payload,
    )


def constant_trajectory(x_o, t_max, n=41):
    from coop_transport.smoothing import DenseSamples, build_hermite

    t = np.linspace(0.0, t_max, n)
    p = np.tile(np.asarray(x_o, dtype=float), (n, 1))
    return build_hermite(DenseSamples(t, p))
