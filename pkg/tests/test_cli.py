import csv
import json

import numpy as np
import pytest

from eqforward import cli
from eqforward.fixtures import skewed_sample, yearly_paths
from eqforward.scenario_model import ContractSpec, ProfileSet, ScenarioSet, save_profile, save_scenarios
from eqforward.scenario_model import shape_weighted_mean_spot
from eqforward.scenario_tree import TreeTopologySpec, build_tree, lattice_from_prices, save_lattice


@pytest.fixture
def workdir(tmp_path):
    spot, hydro = skewed_sample(60)
    save_scenarios(ScenarioSet(spot[None, :]), tmp_path / "scenarios.csv")
    save_profile(ProfileSet("gen", hydro[None, :]), tmp_path / "profile_gen.csv")
    return tmp_path


def write_config(root, **over):
    doc = {
        "scenarios": "scenarios.csv",
        "alpha": 0.9,
        "agents": [
            {"id": "gen", "kind": "generator", "lambda": 0.5, "profile": "profile_gen.csv"},
            {"id": "load", "kind": "load", "lambda": 0.5, "profile": 100},
        ],
        "contract": {"periods": [1]},
        "output": "out",
    }
    doc.update(over)
    path = root / "config.json"
    path.write_text(json.dumps(doc))
    return path


def run(*args):
    return cli.main([str(a) for a in args])


def test_price(workdir):
    cfg = write_config(workdir)
    assert run("price", "--config", cfg) == 0
    res = json.loads((workdir / "out" / "result.json").read_text())
    assert res["status"] == "optimal"
    lo, hi = res["bracket"]
    assert lo <= res["price"] <= hi
    assert res["kkt"]["max_dual_residual"] <= 1e-6
    man = json.loads((workdir / "out" / "price.manifest.json").read_text())
    assert man["alpha_default"] == 0.9
    assert [a["lambda"] for a in man["agents"]] == [0.5, 0.5]
    assert "timestamp" not in json.dumps(man)


def test_bad_lambda(workdir, capsys):
    cfg = write_config(workdir, agents=[
        {"id": "gen", "kind": "generator", "lambda": 1.5, "profile": 100},
        {"id": "load", "kind": "load", "lambda": 0.5, "profile": 100},
    ])
    assert run("price", "--config", cfg) == 2
    assert "agents[0].lambda" in capsys.readouterr().err


def test_missing_file(workdir, capsys):
    cfg = write_config(workdir, scenarios="nope.csv")
    assert run("price", "--config", cfg) == 2
    assert "nope.csv" in capsys.readouterr().err


def test_risk_neutral_price_is_mean(workdir):
    cfg = write_config(workdir, agents=[
        {"id": "gen", "kind": "generator", "lambda": 1.0, "profile": "profile_gen.csv"},
        {"id": "load", "kind": "load", "lambda": 0.3, "profile": 100},
    ])
    assert run("price", "--config", cfg, "--out", workdir / "rn") == 0
    res = json.loads((workdir / "rn" / "result.json").read_text())
    spot, _ = skewed_sample(60)
    mean = shape_weighted_mean_spot(ScenarioSet(spot[None, :]), ContractSpec((1,)))
    assert res["price"] == pytest.approx(mean, rel=1e-6)


def test_curves(workdir):
    cfg = write_config(workdir)
    assert run("curves", "--config", cfg, "--grid", "20:80:13") == 0
    with open(workdir / "out" / "curves.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 13
    sup = [float(r["supply"]) for r in rows if r["supply_status"] == "bounded"]
    assert all(b >= a for a, b in zip(sup, sup[1:]))


def test_bad_grid(workdir):
    assert run("curves", "--config", write_config(workdir), "--grid", "80:20:5") == 2


def test_tree_requires_spec(workdir, capsys):
    assert run("tree", "--config", write_config(workdir)) == 2
    assert "tree" in capsys.readouterr().err


def test_tree_and_value(tmp_path):
    s = yearly_paths(64, 4)
    save_scenarios(s, tmp_path / "scenarios.csv")
    cfg = write_config(
        tmp_path,
        agents=[
            {"id": "gen", "kind": "generator", "lambda": 0.5, "profile": 120},
            {"id": "load", "kind": "load", "lambda": 0.5, "profile": 100},
        ],
        contract={"periods": [4]},
        tree={"stages": [{"periods": [2], "branching": 2}, {"periods": [3], "branching": 2}]},
    )
    assert run("tree", "--config", cfg) == 0
    lat = json.loads((tmp_path / "out" / "lattice.json").read_text())
    assert len(lat["nodes"]) == 7
    assert {n["n_members"] for n in lat["nodes"] if n["stage"] == 2} == {16}
    with open(tmp_path / "out" / "distribution.csv") as fh:
        dist = list(csv.DictReader(fh))
    assert sum(float(r["probability"]) for r in dist if r["stage"] == "2") == pytest.approx(1.0)
    assert run("value", "--config", cfg, "--established", "50", "--side", "buy", "--stage", "1") == 0
    with open(tmp_path / "out" / "value.csv") as fh:
        vals = list(csv.DictReader(fh))
    assert all(float(r["value"]) == pytest.approx(float(r["price"]) - 50) for r in vals)


def test_value_from_lattice(workdir):
    tree = build_tree(ScenarioSet(np.ones((2, 4))), TreeTopologySpec.yearly([2, 2]))
    prices = {"0.0": 68.0, "1.0": 80.0, "1.1": 55.0, "2.0": 86.0, "2.1": 78.0, "2.2": 74.0, "2.3": 30.0}
    save_lattice(lattice_from_prices(tree, ContractSpec((2,)), prices), workdir / "lat.json")
    cfg = write_config(workdir)
    assert run("value", "--config", cfg, "--lattice", workdir / "lat.json", "--established", "68") == 0
    with open(workdir / "out" / "value.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["value"]) for r in rows] == [-18.0, -10.0, -6.0, 38.0]
    assert [float(r["probability"]) for r in rows] == [0.25] * 4


def test_value_needs_established(workdir):
    assert run("value", "--config", write_config(workdir)) == 2


def test_check(workdir):
    assert run("check", "--config", write_config(workdir)) == 0
    rep = json.loads((workdir / "out" / "kkt.json").read_text())
    assert rep["ok"] is True


def test_check_failure_exit(workdir, monkeypatch):
    class Bad:
        def ok(self, tol):
            return False

        def to_dict(self):
            return {"max_dual_residual": 1.0}

    monkeypatch.setattr(cli, "check_kkt", lambda cfg, res: Bad())
    assert run("check", "--config", write_config(workdir)) == 5


def test_unsolved_exit(workdir, monkeypatch):
    from eqforward.equilibrium import EqStatus, _failed

    monkeypatch.setattr(cli, "solve_equilibrium", lambda cfg: _failed(EqStatus.UNBOUNDED))
    assert run("price", "--config", write_config(workdir)) == 3


def test_reproducible_and_read_only(workdir):
    cfg = write_config(workdir)
    before = cfg.read_bytes(), (workdir / "scenarios.csv").read_bytes()
    run("price", "--config", cfg, "--out", workdir / "a")
    run("price", "--config", cfg, "--out", workdir / "b")
    for name in ("result.json", "price.manifest.json"):
        assert (workdir / "a" / name).read_bytes() == (workdir / "b" / name).read_bytes()
    assert (cfg.read_bytes(), (workdir / "scenarios.csv").read_bytes()) == before


def test_twelve_digit_output(workdir):
    run("price", "--config", write_config(workdir))
    res = json.loads((workdir / "out" / "result.json").read_text())
    assert len(repr(res["price"]).replace(".", "").lstrip("0")) <= 12


def test_bad_thread_setting(tmp_path, monkeypatch):
    save_scenarios(yearly_paths(16, 3), tmp_path / "scenarios.csv")
    cfg = write_config(
        tmp_path,
        agents=[{"id": "gen", "kind": "generator", "lambda": 0.5, "profile": 100},
                {"id": "load", "kind": "load", "lambda": 0.5, "profile": 100}],
        contract={"periods": [3]},
        tree={"stages": [{"periods": [2], "branching": 2}]},
    )
    monkeypatch.setenv("EQFORWARD_THREADS", "many")
    assert run("tree", "--config", cfg) == 2
