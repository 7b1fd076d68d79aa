"""Generate the bundled scenario files.

Run from the repository root:  python3 tools/make_scenarios.py

Obstacle super-ellipses are sized to cover each wall box plus the base
half-diagonal, so a base center outside the keep-out cannot touch the
wall.
"""

import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "coop_transport" / "scenarios"
BASE_MARGIN = 0.63  # base half-diagonal plus corridor/tracking allowance


def box(name, center, half, se_margin=BASE_MARGIN):
    return {
        "name": name,
        "kind": "box",
        "center": [round(float(v), 4) for v in center],
        "half_extents": [round(float(v), 4) for v in half],
        "super_ellipse": {
            "center": [round(float(center[0]), 4), round(float(center[1]), 4)],
            "ax": round(float(half[0] + se_margin), 4),
            "ay": round(float(half[1] + se_margin), 4),
            "rho": 1.0,
        },
    }


def far_box(name, x, y):
    return box(name, [x, y, 0.75], [0.3, 0.3, 0.75])


def common_blocks(t_max, control=100.0, ik=10.0, k_footprint=200):
    return {
        "object": {
            "mass": 2.0,
            "inertia_diag": [0.02, 0.02, 0.03],
            "half_extents": [0.18, 0.18, 0.06],
            "initial_position": [0.0, 0.0, 0.6],
        },
        "grasp": {"radius": 0.22, "approach_pitch": 0.45, "start_angle_deg": 90.0},
        "robots": {"count": 3, "config": "default", "base_radius": 0.85, "initial_q": "auto"},
        "planner": {
            "v_max": 1.0,
            "knot_spacing": 0.5,
            "settle_pad": 0.3,
            "clearance_pad": 0.15,
            "bounds_pad": 0.4,
        },
        "smoothing": {"grid_step": 0.05, "sigma": 5.0},
        "footprint": {
            "K": k_footprint,
            "epsilon": 0.35,
            "eta": 0.3,
            "delta": 0.12,
            "kappa": 0.25,
            "z_ref": "auto",
            "alpha": "auto",
            "weights": 1.0,
            "tol": 1e-6,
            "outer_iters": 50,
            "inner_iters": 200,
        },
        "ik": {
            "budget": 60,
            "alpha": 60.0,
            "d_safe": 0.12,
            "nu": 0.25,
            "posture_weight": 0.05,
            "tracking_weight": 30.0,
            "grasp_pos_weight": 1000.0,
            "grasp_rot_weight": 100.0,
            "activation_clearance": 1.1,
        },
        "controller": {"omega_base": 6.0, "omega_arm": 20.0, "zeta": 1.0},
        "sim": {
            "control_rate_hz": control,
            "ik_rate_hz": ik,
            "physics_dt": 1e-3,
            "integrator": "semi_implicit_euler",
            "t_max": t_max,
            "ik_lookahead": 0.4,
            "bushing": {"k_t": 1e4, "k_r": 100.0, "ratio": 1.0, "rot_ratio": 0.1},
            "compensate_payload": True,
        },
    }


def paper_s4():
    """Clockwise course with well-separated legs.

    Square passage on the north leg, staggered funnel on the east leg,
    offset (trapezoid) corridor on the southwest leg, and a lone
    obstacle to swerve around on the west leg. A placement audit keeps
    every wall clear of the start/dwell formations and of the legs it
    does not belong to.
    """
    waypoints = [
        np.array([0.0, 4.0]),    # w1: through the square passage
        np.array([3.5, 3.0]),    # w2: open leg
        np.array([3.5, -2.0]),   # w3: through the funnel
        np.array([0.0, -4.0]),   # w4: through the offset corridor
        np.array([-3.5, -1.0]),  # w5: past the lone obstacle
        np.array([0.0, 0.0]),    # return
    ]
    obstacles = [
        box("square_wall_west", [-1.7, 2.0, 0.75], [0.55, 0.5, 0.75]),
        box("square_wall_east", [1.7, 2.0, 0.75], [0.55, 0.5, 0.75]),
        box("funnel_west", [2.05, 1.0, 0.75], [0.3, 0.3, 0.75]),
        box("funnel_east", [4.75, 0.2, 0.75], [0.3, 0.3, 0.75]),
    ]
    # offset corridor across leg w3 -> w4
    d4 = np.array([0.0, -4.0]) - np.array([3.5, -2.0])
    d4 = d4 / np.linalg.norm(d4)
    n4 = np.array([-d4[1], d4[0]])
    P = lambda f: np.array([3.5, -2.0]) + f * (np.array([0.0, -4.0]) - np.array([3.5, -2.0]))
    obstacles.append(box("corridor_long", [*(P(0.40) + 1.50 * n4), 0.75], [0.6, 0.35, 0.75]))
    obstacles.append(box("corridor_short", [*(P(0.60) - 1.40 * n4), 0.75], [0.3, 0.3, 0.75]))
    obstacles.append(box("lone_obstacle", [-2.24, -3.07, 0.75], [0.35, 0.35, 0.75], se_margin=0.85))

    _audit_course(obstacles, waypoints)

    formula = (
        "G[7.4,7.6](ball(0,4,0.6; 0.35))"
        " & G[13.4,13.6](ball(3.5,3,0.6; 0.35))"
        " & G[20.4,20.6](ball(3.5,-2,0.6; 0.35))"
        " & G[28.4,28.6](ball(0,-4,0.6; 0.35))"
        " & G[36.4,36.6](ball(-3.5,-1,0.6; 0.35))"
        " & F[42,44](ball(0,0,0.6; 0.35))"
        " & G[0,48](avoid(obs; 0.5))"
    )
    doc = {
        "schema_version": 1,
        "name": "paper_s4",
        "seed": 7,
        "workspace": {"bounds": [[-5, 5], [-5, 5], [0.2, 1.6]]},
        "formula": formula,
        "obstacles": obstacles,
        **common_blocks(t_max=48.0),
        "evaluation": {"tracking_rms_bound": 0.08},
    }
    return doc


def _audit_course(obstacles, waypoints):
    """Placement sanity: margins around keypoints, legs, and the start."""
    from coop_transport.geometry import Box as GBox
    from coop_transport.geometry import point_signed_distance, point_signed_distance_many

    margin = 0.5 + 0.131 + 0.15 + 0.02  # avoid + obj/2 + pad + slack
    start_extent = 0.85 + 0.37 + 0.12  # formation radius + base half-diag + slack
    keypoints = [np.array([0.0, 0.0])] + list(waypoints)
    legs = list(zip(keypoints[:-1], keypoints[1:]))
    owners = {
        "square_wall_west": 0, "square_wall_east": 0,
        "funnel_west": 2, "funnel_east": 2,
        "corridor_long": 3, "corridor_short": 3,
        "lone_obstacle": 4,
    }
    for ob in obstacles:
        prim = GBox(np.array(ob["center"]), np.array(ob["half_extents"]))
        for kp in keypoints:
            dist = point_signed_distance(prim, [*kp, 0.6])
            assert dist > margin, f"{ob['name']} is {dist:.2f} m from keypoint {kp}"
        d0 = point_signed_distance(prim, [0.0, 0.0, 0.6])
        assert d0 > start_extent - 0.37, (
            f"{ob['name']} is {d0:.2f} m from the start formation"
        )
        for li, (a, b) in enumerate(legs):
            pts = np.column_stack([
                np.linspace(a[0], b[0], 60), np.linspace(a[1], b[1], 60),
                np.full(60, 0.6),
            ])
            dist = float(np.min(point_signed_distance_many(prim, pts)))
            if li == owners.get(ob["name"], -1):
                # the lone obstacle is supposed to sit on its leg and
                # force a detour; passage walls must leave a corridor
                if ob["name"] != "lone_obstacle":
                    assert dist > 0.72, (
                        f"{ob['name']} blocks its own leg {li} at {dist:.2f} m"
                    )
            else:
                assert dist > margin + 0.01, (
                    f"{ob['name']} intrudes on leg {li}: {dist:.2f} m"
                )


def narrowgap():
    obstacles = [
        box("wall_north", [0.0, 1.6, 0.75], [0.8, 0.55, 0.75]),
        box("wall_south", [0.0, -1.6, 0.75], [0.8, 0.55, 0.75]),
    ]
    formula = "G[28,28.4](ball(3,0,0.6; 0.35)) & G[0,30](avoid(obs; 0.5))"
    doc = {
        "schema_version": 1,
        "name": "narrowgap",
        "seed": 3,
        "workspace": {"bounds": [[-5, 5], [-5, 5], [0.2, 1.6]]},
        "formula": formula,
        "obstacles": obstacles,
        **common_blocks(t_max=30.0),
        "evaluation": {"tracking_rms_bound": 0.08},
    }
    doc["object"]["initial_position"] = [-3.0, 0.0, 0.6]
    return doc


def regulation():
    obstacles = [far_box("far_obstacle", 4.2, 4.2)]
    formula = "G[0.5,9.5](ball(0,0,0.6; 0.2)) & G[0,9.5](avoid(obs; 0.5))"
    doc = {
        "schema_version": 1,
        "name": "regulation",
        "seed": 1,
        "workspace": {"bounds": [[-5, 5], [-5, 5], [0.2, 1.6]]},
        "formula": formula,
        "obstacles": obstacles,
        **common_blocks(t_max=10.0),
        "evaluation": {"tracking_rms_bound": 0.02},
    }
    return doc


def straightline():
    obstacles = [far_box("far_obstacle", 4.2, -4.2)]
    formula = "F[6,6.5](ball(1,0,0.6; 0.25)) & G[0,8](avoid(obs; 0.5))"
    doc = {
        "schema_version": 1,
        "name": "straightline",
        "seed": 2,
        "workspace": {"bounds": [[-5, 5], [-5, 5], [0.2, 1.6]]},
        "formula": formula,
        "obstacles": obstacles,
        **common_blocks(t_max=8.0),
        "evaluation": {"tracking_rms_bound": 0.05},
    }
    doc["object"]["initial_position"] = [-1.0, 0.0, 0.6]
    return doc


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for builder in (paper_s4, narrowgap, regulation, straightline):
        doc = builder()
        path = OUT / f"{doc['name']}.json"
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
