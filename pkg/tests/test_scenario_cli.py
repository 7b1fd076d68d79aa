import json
from pathlib import Path

import numpy as np
import pytest

from coop_transport.cli import main
from coop_transport.scenario import (
    ScenarioError,
    bundled_scenario_path,
    load_scenario,
    scenario_hash,
)
from coop_transport.stl_core import ParseError
from coop_transport.waypoints import extract_fragment


@pytest.fixture(scope="module")
def quick_doc():
    doc = json.loads(bundled_scenario_path("straightline").read_text())
    doc["name"] = "quick"
    doc["formula"] = "F[2,2.5](ball(-0.5,0,0.6; 0.25)) & G[0,3](avoid(obs; 0.5))"
    doc["sim"]["t_max"] = 3.0
    doc["footprint"]["K"] = 30
    return doc


def write_doc(tmp_path, doc, name="quick.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


# ---------------------------------------------------------------------------
# scenario loading


def test_bundled_scenarios_load_and_validate():
    for name in ("paper_s4", "narrowgap", "regulation", "straightline"):
        sc = load_scenario(bundled_scenario_path(name))
        assert sc.n_robots == 3
        assert sc.formula is not None


def test_paper_s4_task_shape():
    sc = load_scenario(bundled_scenario_path("paper_s4"))
    task = extract_fragment(sc.formula)
    assert len(task.goals) == 6
    assert task.margin == 0.5
    assert task.t_max == 48.0
    # every obstacle has a planar keep-out companion for the base planner
    assert len(sc.super_ellipses) == len(sc.obstacles)
    # initial state is grasp-consistent by construction
    from coop_transport.grasp import grasp_residual
    from coop_transport.robot_model import from_config

    models = [from_config(sc.robot_cfg) for _ in range(sc.n_robots)]
    pos, rot = grasp_residual(models, sc.initial_qs, sc.grasp)
    assert pos < 1e-6 and rot < 1e-6


def test_scenario_rejects_bad_epsilon(tmp_path, quick_doc):
    doc = json.loads(json.dumps(quick_doc))
    doc["footprint"]["epsilon"] = -1.0
    with pytest.raises(ScenarioError) as err:
        load_scenario(write_doc(tmp_path, doc))
    assert "epsilon" in str(err.value)


def test_scenario_rejects_bad_formula(tmp_path, quick_doc):
    doc = json.loads(json.dumps(quick_doc))
    doc["formula"] = "G[1,0](ball(0,0,0; 1))"
    with pytest.raises(ParseError):
        load_scenario(write_doc(tmp_path, doc))


def test_scenario_rejects_wrong_schema(tmp_path, quick_doc):
    doc = json.loads(json.dumps(quick_doc))
    doc["schema_version"] = 99
    with pytest.raises(ScenarioError):
        load_scenario(write_doc(tmp_path, doc))


def test_scenario_hash_stable_and_sensitive(quick_doc):
    h1 = scenario_hash(quick_doc)
    doc2 = json.loads(json.dumps(quick_doc))
    assert scenario_hash(doc2) == h1
    doc2["seed"] = 999
    assert scenario_hash(doc2) != h1


# ---------------------------------------------------------------------------
# CLI


def test_cli_unknown_scenario(tmp_path):
    rc = main(["plan", "--scenario", "does_not_exist", "--out", str(tmp_path)])
    assert rc == 2


def test_cli_evaluate_without_artifacts(tmp_path, quick_doc):
    path = write_doc(tmp_path, quick_doc)
    rc = main(["evaluate", "--scenario", str(path), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_cli_plan_artifacts_and_determinism(tmp_path, quick_doc):
    path = write_doc(tmp_path, quick_doc)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["plan", "--scenario", str(path), "--out", str(out1)]) == 0
    assert main(["plan", "--scenario", str(path), "--out", str(out2)]) == 0
    for name in ("waypoints.json", "trajectory.json", "footprint.json", "footprint.csv"):
        b1 = (out1 / name).read_bytes()
        b2 = (out2 / name).read_bytes()
        assert b1 == b2, f"{name} differs between identical runs"
    doc = json.loads((out1 / "waypoints.json").read_text())
    assert doc["scenario_hash"] == scenario_hash(quick_doc)
    assert doc["seed"] == quick_doc["seed"]


def test_cli_full_pipeline_quick(tmp_path, quick_doc):
    path = write_doc(tmp_path, quick_doc)
    out = tmp_path / "run"
    rc = main(["pipeline", "--scenario", str(path), "--out", str(out)])
    assert rc == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["passed"] is True
    assert metrics["robustness"] > 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["min_clearance"] > 0


def test_cli_evaluate_truncated_log_horizon_error(tmp_path, quick_doc):
    path = write_doc(tmp_path, quick_doc)
    out = tmp_path / "run"
    assert main(["pipeline", "--scenario", str(path), "--out", str(out)]) == 0
    # truncate the log so the formula horizon no longer fits
    lines = (out / "simlog.csv").read_text().splitlines()
    (out / "simlog.csv").write_text("\n".join(lines[: len(lines) // 4]) + "\n")
    rc = main(["evaluate", "--scenario", str(path), "--out", str(out)])
    assert rc == 1


def test_cli_seed_override_changes_plan(tmp_path, quick_doc):
    path = write_doc(tmp_path, quick_doc)
    out1 = tmp_path / "s1"
    out2 = tmp_path / "s2"
    assert main(["plan", "--scenario", str(path), "--out", str(out1)]) == 0
    assert main(
        ["plan", "--scenario", str(path), "--out", str(out2), "--seed", "123"]
    ) == 0
    w1 = json.loads((out1 / "waypoints.json").read_text())
    w2 = json.loads((out2 / "waypoints.json").read_text())
    assert w2["seed"] == 123
    assert w1["knots"] != w2["knots"]
