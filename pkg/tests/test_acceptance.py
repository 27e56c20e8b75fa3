"""Acceptance criteria 1-10 plus the full-size smoke solve.

Each check records one PASS/FAIL line, printed in the pytest terminal summary
(see conftest.py) or directly when run as ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from eqforward.agents import AgentKind, AgentSpec
from eqforward.equilibrium import (
    EqStatus,
    MarketConfig,
    check_kkt,
    default_price_range,
    price_sweep_oracle,
    solve_equilibrium,
)
from eqforward.fixtures import skewed_market, yearly_market, yearly_paths
from eqforward.lp_solver import LpProblem, LpStatus, solve
from eqforward.risk import RiskParams, cvar_rockafellar, cvar_sorted, tail_mass
from eqforward.scenario_model import ContractSpec, ProfileSet, ScenarioSet, shape_weighted_mean_spot
from eqforward.scenario_tree import (
    TreeTopologySpec,
    build_tree,
    contract_value_distribution,
    forward_price_lattice,
    lattice_from_prices,
)

from instances import hand_market, random_market
from oracles import random_bounded_lp, tableau_simplex

RESULTS: dict[str, str] = {}


def record(key: str, ok: bool, detail: str) -> None:
    RESULTS[key] = f"{key}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(RESULTS[key])
    assert ok, RESULTS[key]


_crit1_cache: list = []


def _criterion1_runs():
    if not _crit1_cache:
        rng = np.random.default_rng(20240601)
        for _ in range(60):
            cfg = random_market(rng)
            res = solve_equilibrium(cfg)
            orc = price_sweep_oracle(cfg)
            _crit1_cache.append((cfg, res, orc))
    return _crit1_cache


def test_criterion_01_dual_price_theorem():
    runs = _criterion1_runs()
    failures, worst = 0, 0.0
    for cfg, res, orc in runs:
        lo, hi = default_price_range(cfg)
        allowed = max(1e-3 * (hi - lo), res.bracket_width)
        gap = abs(res.price - orc.price)
        worst = max(worst, gap / allowed if allowed > 0 else gap)
        failures += gap > allowed
    statuses = {s.value: sum(r.status is s for _, r, _ in runs) for s in EqStatus}
    record("criterion 1 (dual price = bisection price)", failures == 0,
           f"{len(runs)} instances, {failures} failures, worst gap/allowed {worst:.3g}, statuses {statuses}")


def _risk_neutral_pair(rng, neutral_side):
    K = int(rng.integers(2, 201))
    M = int(rng.integers(1, 3))
    s = ScenarioSet(rng.lognormal(np.log(40), rng.uniform(0.2, 0.8), (M, K)))
    lam_g = 1.0 if neutral_side == "gen" else float(rng.uniform(0, 0.9))
    lam_d = 1.0 if neutral_side == "load" else float(rng.uniform(0, 0.9))
    gen = AgentSpec("gen", AgentKind.GENERATOR, RiskParams(lam_g), ProfileSet("gen", rng.uniform(50, 150, (M, K))))
    load = AgentSpec("load", AgentKind.LOAD, RiskParams(lam_d), ProfileSet("load", rng.uniform(50, 150, (M, K))))
    c = ContractSpec(tuple(range(1, M + 1)), tuple(rng.uniform(0.5, 2.0, M)))
    return MarketConfig((gen, load), s, c, float(rng.choice([0.5, 0.9, 0.95])))


def test_criterion_02_risk_neutral_collapse():
    rng = np.random.default_rng(7)
    worst, n = 0.0, 0
    for i in range(24):
        cfg = _risk_neutral_pair(rng, "gen" if i % 2 == 0 else "load")
        mean = shape_weighted_mean_spot(cfg.scenarios, cfg.contract)
        worst = max(worst, abs(solve_equilibrium(cfg).price - mean) / abs(mean))
        n += 1
    record("criterion 2 (risk-neutral side gives mean spot)", worst <= 1e-6,
           f"{n} instances, worst relative error {worst:.2e}")


def test_criterion_03_cvar_lp_equals_sorting():
    rng = np.random.default_rng(3)
    alphas = [0.0, 0.3, 0.5, 0.9, 0.95, 0.99, 0.75, 0.6]
    worst, integral, fractional = 0.0, 0, 0
    for i in range(1000):
        k = int(rng.integers(1, 61))
        alpha = alphas[i % len(alphas)]
        gen = (rng.normal, rng.lognormal, rng.uniform)[i % 3]
        x = gen(size=k) * 10 ** rng.uniform(-1, 3)
        if i % 10 == 0:
            x = np.round(x)  # ties
        c = tail_mass(k, alpha)
        integral += c == int(c)
        fractional += c != int(c)
        worst = max(worst, abs(cvar_rockafellar(x, alpha)[0] - cvar_sorted(x, alpha)))
    record("criterion 3 (Rockafellar LP = sorted CVaR)", worst <= 1e-9 and integral > 0 and fractional > 0,
           f"1000 samples ({integral} integral / {fractional} fractional tail masses), max |diff| {worst:.2e}")


def test_criterion_04_kkt_residuals():
    runs = [(cfg, res) for cfg, res, _ in _criterion1_runs() if res.status is EqStatus.OPTIMAL]
    worst = 0.0
    for cfg, res in runs:
        rep = check_kkt(cfg, res)
        worst = max(worst, rep.max_primal_residual, rep.max_dual_residual,
                    rep.max_complementarity_residual, rep.duality_gap, rep.max_resolve_gap)
    record("criterion 4 (KKT residuals of optimal equilibria)", bool(runs) and worst <= 1e-6,
           f"{len(runs)} optimal equilibria, worst residual {worst:.2e}")


def test_criterion_05_overcapacity():
    scales = (1.0, 1.1, 1.2, 1.3)
    prices = [solve_equilibrium(skewed_market(gen_scale=x)).price for x in scales]
    mean = shape_weighted_mean_spot(skewed_market().scenarios, ContractSpec((1,)))
    ok = all(b <= a + 1e-9 for a, b in zip(prices, prices[1:])) and prices[0] >= mean
    record("criterion 5 (price nonincreasing in overcapacity)", ok,
           f"prices {[round(p, 4) for p in prices]}, mean spot {mean:.4f}")


def test_criterion_06_risk_aversion():
    mean = shape_weighted_mean_spot(skewed_market().scenarios, ContractSpec((1,)))
    by_gen = [solve_equilibrium(skewed_market(lam_gen=x, lam_load=0.5)).price for x in (0.0, 0.5, 1.0)]
    by_load = [solve_equilibrium(skewed_market(lam_gen=0.5, lam_load=x)).price for x in (0.0, 0.5, 1.0)]

    def nonincreasing(seq):
        return all(b <= a + 1e-9 for a, b in zip(seq, seq[1:]))

    ends = abs(by_gen[-1] - mean) <= 1e-6 * mean and abs(by_load[-1] - mean) <= 1e-6 * mean
    record("criterion 6 (price nonincreasing in lambda_g and lambda_d)",
           nonincreasing(by_gen) and nonincreasing(by_load) and ends,
           f"lambda_g sweep {[round(p, 4) for p in by_gen]}, lambda_d sweep {[round(p, 4) for p in by_load]}, "
           f"mean {mean:.4f}")


def test_criterion_07_tree_structure():
    tree = build_tree(yearly_paths(1200, 5), TreeTopologySpec.yearly([2, 2, 2], first_period=2))
    sizes = [sorted({n.n_members for n in tree.stage_nodes(t)}) for t in range(4)]
    probs = {n.prob_from_parent for n in tree.nodes.values() if n.stage > 0}
    sums = [abs(sum(n.path_prob for n in tree.stage_nodes(t)) - 1.0) for t in range(4)]
    ok = sizes == [[1200], [600], [300], [150]] and probs == {0.5} and max(sums) <= 1e-12
    record("criterion 7 (1200-trajectory binary tree)", ok,
           f"sizes {sizes}, transition probabilities {sorted(probs)}, max |sum-1| {max(sums):.1e}")


def test_criterion_08_valuation():
    tree = build_tree(ScenarioSet(np.ones((2, 4))), TreeTopologySpec.yearly([2, 2]))
    prices = {"0.0": 68.0, "1.0": 80.0, "1.1": 55.0, "2.0": 86.0, "2.1": 78.0, "2.2": 74.0, "2.3": 30.0}
    lat = lattice_from_prices(tree, ContractSpec((2,)), prices)
    dist = contract_value_distribution(lat, 68.0, "sell", 2)
    ok = dist == [(-18.0, 0.25), (-10.0, 0.25), (-6.0, 0.25), (38.0, 0.25)]
    record("criterion 8 (mark-to-market values)", ok, f"distribution {dist}")


def test_criterion_09_per_node_oracle():
    cfg = hand_market()
    tree = build_tree(cfg.scenarios, TreeTopologySpec.yearly([2, 2]))
    lat = forward_price_lattice(tree, cfg, threads=1)
    worst = 0.0
    for nid, node in tree.nodes.items():
        orc = price_sweep_oracle(cfg.restrict(node.members), tol=1e-5)
        worst = max(worst, abs(lat.prices[nid].price - orc.price))
    record("criterion 9 (per-node price = per-node oracle)", worst <= 1e-3,
           f"{len(tree.nodes)} nodes, max |diff| {worst:.2e}")


def test_criterion_10_lp_duality():
    rng = np.random.default_rng(10)
    worst_obj = worst_gap = worst_comp = 0.0
    ok = True
    for _ in range(50):
        d = random_bounded_lp(rng)
        sol = solve(LpProblem(d["c"], A_eq=d["A_eq"], b_eq=d["b_eq"], A_ub=d["A_ub"], b_ub=d["b_ub"],
                              lb=d["lb"], ub=d["ub"]))
        status, obj = tableau_simplex(**d)
        ok &= sol.status is LpStatus.OPTIMAL and status == "optimal"
        worst_obj = max(worst_obj, abs(sol.objective - obj))
        worst_gap = max(worst_gap, sol.duality_gap)
        worst_comp = max(worst_comp, sol.complementarity)
    ok &= worst_obj <= 1e-8 and worst_gap <= 1e-6 and worst_comp <= 1e-6
    record("criterion 10 (LP duality and tableau oracle)", ok,
           f"50 LPs, max |obj diff| {worst_obj:.1e}, max gap {worst_gap:.1e}, max complementarity {worst_comp:.1e}")


def test_full_size_smoke():
    cfg = yearly_market(num_scenarios=1200, years=5)
    t0 = time.perf_counter()
    res = solve_equilibrium(cfg)
    elapsed = time.perf_counter() - t0
    record("smoke (K=1200 welfare LP)", res.status.solved and elapsed < 30.0,
           f"status {res.status.value}, price {res.price:.4f}, {elapsed:.2f} s")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
