"""``eqforward`` command line: price, curves, tree, value and check.

Config file (JSON, paths relative to the config file)::

    {
      "scenarios": "scenarios.csv",
      "allow_negative": false,
      "alpha": 0.95,
      "agents": [
        {"id": "gen", "kind": "generator", "lambda": 0.5, "profile": "profile_gen.csv"},
        {"id": "load", "kind": "load", "lambda": 0.5, "alpha": 0.9, "profile": 100, "q_max": 500}
      ],
      "contract": {"periods": [1], "shape": [1.0]},
      "tree": {"stages": [{"periods": [2], "branching": 2}], "stat": "mean_spot"},
      "curves": {"grid": "20:80:31"},
      "output": "out"
    }

A numeric ``profile`` is a constant quantity in every period and scenario.
Exit codes: 0 solved (optimal, degenerate or no trade), 2 bad config or
input, 3 unbounded or infeasible market, 4 numerical failure, 5 KKT check
failed.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, lp_solver
from .agents import AgentKind, AgentSpec, supply_demand_curves, write_curves_csv
from .equilibrium import EqStatus, MarketConfig, check_kkt, default_price_range, solve_equilibrium
from .errors import ConfigError, EqForwardError, NumericalBreakdown
from .risk import RiskParams
from .scenario_model import ContractSpec, ProfileSet, load_profile, load_scenarios
from .scenario_tree import (
    Stage,
    TreeTopologySpec,
    build_tree,
    distribution_rows,
    forward_price_lattice,
    load_lattice,
    save_lattice,
    write_distribution_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_UNSOLVED, EXIT_NUMERIC, EXIT_KKT = 0, 2, 3, 4, 5
KKT_TOL = 1e-6


@dataclass
class RunConfig:
    market: MarketConfig
    tree: TreeTopologySpec | None
    grid: str | None
    output: Path
    digest: str


def _field(doc: dict, key: str, where: str, kind=None, default=...):
    if key not in doc:
        if default is ...:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    v = doc[key]
    if kind is not None and (not isinstance(v, kind) or isinstance(v, bool)):
        raise ConfigError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {v!r}")
    return v


def _unit_interval(v, where: str, closed_right: bool) -> float:
    ok = 0.0 <= v <= 1.0 if closed_right else 0.0 <= v < 1.0
    if not ok:
        rng = "[0, 1]" if closed_right else "[0, 1)"
        raise ConfigError(f"{where}: must lie in {rng}, got {v}")
    return float(v)


def load_run_config(path, out: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
        doc = json.loads(raw)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    root = path.parent
    hasher = hashlib.sha256(raw)

    def resolve(rel, where):
        p = root / str(rel)
        if not p.is_file():
            raise ConfigError(f"{where}: file {p} does not exist")
        hasher.update(p.read_bytes())
        return p

    num = (int, float)
    s = load_scenarios(resolve(_field(doc, "scenarios", "config", str), "config.scenarios"),
                       allow_negative=bool(doc.get("allow_negative", False)))
    alpha = _unit_interval(_field(doc, "alpha", "config", num, 0.95), "config.alpha", False)

    agents = []
    raw_agents = _field(doc, "agents", "config", list)
    for i, a in enumerate(raw_agents):
        where = f"agents[{i}]"
        if not isinstance(a, dict):
            raise ConfigError(f"{where}: expected an object")
        aid = str(_field(a, "id", where, str))
        kind_s = _field(a, "kind", where, str)
        try:
            kind = AgentKind(kind_s.lower())
        except ValueError:
            raise ConfigError(f"{where}.kind: unknown kind {kind_s!r}") from None
        lam = _unit_interval(_field(a, "lambda", where, num), f"{where}.lambda", True)
        a_alpha = a.get("alpha")
        if a_alpha is not None:
            if not isinstance(a_alpha, num) or isinstance(a_alpha, bool):
                raise ConfigError(f"{where}.alpha: expected a number, got {a_alpha!r}")
            a_alpha = _unit_interval(a_alpha, f"{where}.alpha", False)
        q_max = a.get("q_max")
        if q_max is not None and (not isinstance(q_max, num) or q_max <= 0):
            raise ConfigError(f"{where}.q_max: must be a positive number, got {q_max!r}")
        prof = a.get("profile")
        profile = None
        if kind is AgentKind.TRADER:
            if prof is not None:
                raise ConfigError(f"{where}.profile: traders have no physical profile")
        elif isinstance(prof, num) and not isinstance(prof, bool):
            if prof < 0:
                raise ConfigError(f"{where}.profile: must be nonnegative, got {prof}")
            profile = ProfileSet.constant(aid, prof, s)
        elif isinstance(prof, str):
            profile = load_profile(resolve(prof, f"{where}.profile"), aid)
        else:
            raise ConfigError(f"{where}.profile: expected a file path or a number, got {prof!r}")
        try:
            agents.append(AgentSpec(aid, kind, RiskParams(lam, a_alpha), profile,
                                    None if q_max is None else float(q_max)))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc

    cdoc = _field(doc, "contract", "config", dict)
    try:
        contract = ContractSpec(tuple(_field(cdoc, "periods", "contract", list)),
                                None if cdoc.get("shape") is None else tuple(cdoc["shape"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"contract: {exc}") from exc
    market = MarketConfig(tuple(agents), s, contract, alpha)

    tree = None
    if doc.get("tree") is not None:
        tdoc = _field(doc, "tree", "config", dict)
        try:
            stages = tuple(Stage(tuple(st["periods"]), int(st["branching"]))
                           for st in _field(tdoc, "stages", "tree", list))
            tree = TreeTopologySpec(stages, tdoc.get("stat", "mean_spot"))
            tree.check_against(s)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"tree: {exc}") from exc

    grid = (doc.get("curves") or {}).get("grid")
    output = Path(out) if out else root / str(doc.get("output", "out"))
    return RunConfig(market, tree, grid, output, hasher.hexdigest())


# -- output -------------------------------------------------------------------

def _round(v):
    """Round floats to 12 significant digits; non-finite numbers become null."""
    if isinstance(v, dict):
        return {k: _round(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round(x) for x in v]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(f"{v:.12g}") if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(_round(doc), indent=1) + "\n", encoding="utf-8")


def _write_manifest(rc: RunConfig, command: str, args: dict) -> None:
    m = rc.market
    doc = {
        "command": command,
        "arguments": args,
        "version": __version__,
        "config_sha256": rc.digest,
        "tolerances": {
            "feasibility": lp_solver.TOL_FEAS,
            "optimality": lp_solver.TOL_OPT,
            "duality_gap": lp_solver.TOL_GAP,
            "complementarity": lp_solver.TOL_COMP,
            "pivot": lp_solver.TOL_PIVOT,
            "harris": lp_solver.TOL_HARRIS,
            "kkt": KKT_TOL,
            "bracket_eps_rel": 1e-4,
            "degenerate_width_rel": 1e-4,
        },
        "alpha_default": m.alpha_default,
        "agents": [{"id": a.id, "kind": a.kind.value, "lambda": a.risk.lam, "alpha": a.risk.alpha}
                   for a in m.agents],
    }
    _write_json(rc.output / f"{command}.manifest.json", doc)


def _parse_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, steps = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(steps)
    except ValueError:
        raise ConfigError(f"--grid: expected lo:hi:steps, got {spec!r}") from None
    if n < 1 or (n > 1 and not hi > lo):
        raise ConfigError(f"--grid: need steps >= 1 and hi > lo, got {spec!r}")
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo])


def _result_doc(rc: RunConfig, res) -> dict:
    doc = res.to_dict()
    doc["mean_spot"] = float(rc.market.contract.weighted_spot(rc.market.scenarios).mean()
                             / rc.market.contract.total_shape)
    if res.status.solved:
        doc["kkt"] = check_kkt(rc.market, res).to_dict()
    return doc


# -- commands -----------------------------------------------------------------

def cmd_price(rc: RunConfig, args) -> int:
    res = solve_equilibrium(rc.market)
    _write_json(rc.output / "result.json", _result_doc(rc, res))
    _write_manifest(rc, "price", {})
    if not res.status.solved:
        print(f"market is {res.status.value}", file=sys.stderr)
        return EXIT_UNSOLVED
    print(f"{res.status.value}: price {res.price:.6g} $/MWh, quantity {res.quantity:.6g} MWh")
    return EXIT_OK


def cmd_curves(rc: RunConfig, args) -> int:
    spec = args.grid or rc.grid
    if spec:
        grid = _parse_grid(spec)
    else:
        lo, hi = default_price_range(rc.market)
        grid = np.linspace(lo, hi, 41) if hi > lo else np.array([lo])
    rows = supply_demand_curves(rc.market.agents, rc.market.scenarios, rc.market.contract, grid)
    write_curves_csv(rows, rc.output / "curves.csv")
    _write_manifest(rc, "curves", {"grid": [float(grid[0]), float(grid[-1]), int(grid.size)]})
    return EXIT_OK


def _lattice(rc: RunConfig, args):
    if getattr(args, "lattice", None):
        return load_lattice(args.lattice)
    if rc.tree is None:
        raise ConfigError("config has no tree section")
    tree = build_tree(rc.market.scenarios, rc.tree)
    return forward_price_lattice(tree, rc.market)


def cmd_tree(rc: RunConfig, args) -> int:
    lat = _lattice(rc, argparse.Namespace(lattice=None))
    save_lattice(lat, rc.output / "lattice.json")
    rows = [r for t in range(lat.tree.num_stages + 1) for r in distribution_rows(lat, t)]
    write_distribution_csv(rows, rc.output / "distribution.csv")
    _write_manifest(rc, "tree", {})
    failed = [nid for nid, p in lat.prices.items() if p.status not in {s.value for s in EqStatus if s.solved}]
    for nid in failed:
        print(f"node {nid}: {lat.prices[nid].status} {lat.prices[nid].message}", file=sys.stderr)
    return EXIT_UNSOLVED if failed else EXIT_OK


def cmd_value(rc: RunConfig, args) -> int:
    if args.established is None:
        raise ConfigError("--established is required for value")
    lat = _lattice(rc, args)
    stage = lat.tree.num_stages if args.stage is None else args.stage
    if not 0 <= stage <= lat.tree.num_stages:
        raise ConfigError(f"--stage: {stage} outside 0..{lat.tree.num_stages}")
    rows = distribution_rows(lat, stage, args.established, args.side)
    write_distribution_csv(rows, rc.output / "value.csv")
    _write_manifest(rc, "value", {"established": args.established, "side": args.side, "stage": stage,
                                  "lattice": bool(args.lattice)})
    return EXIT_OK


def cmd_check(rc: RunConfig, args) -> int:
    res = solve_equilibrium(rc.market)
    _write_manifest(rc, "check", {})
    if not res.status.solved:
        print(f"market is {res.status.value}", file=sys.stderr)
        return EXIT_UNSOLVED
    rep = check_kkt(rc.market, res)
    _write_json(rc.output / "kkt.json", {"status": res.status.value, "price": res.price,
                                          "tolerance": KKT_TOL, "ok": rep.ok(KKT_TOL), **rep.to_dict()})
    if not rep.ok(KKT_TOL):
        print("KKT residuals above tolerance", file=sys.stderr)
        return EXIT_KKT
    return EXIT_OK


COMMANDS = {"price": cmd_price, "curves": cmd_curves, "tree": cmd_tree, "value": cmd_value, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqforward", description="Forward contract equilibrium prices.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="run configuration JSON")
    ap.add_argument("--out", help="output directory (default: config 'output' or ./out next to the config)")
    ap.add_argument("--grid", help="price grid lo:hi:steps for curves")
    ap.add_argument("--established", type=float, help="established contract price for value")
    ap.add_argument("--side", choices=("sell", "buy"), default="sell")
    ap.add_argument("--stage", type=int, help="tree stage for value (default: last)")
    ap.add_argument("--lattice", help="precomputed lattice JSON for value")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = load_run_config(args.config, args.out)
        rc.output.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](rc, args)
    except NumericalBreakdown as exc:
        print(f"eqforward: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (EqForwardError, ValueError) as exc:
        print(f"eqforward: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
