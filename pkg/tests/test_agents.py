import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqforward.agents import (
    AgentKind,
    AgentSpec,
    best_response,
    build_agent_lp,
    optimal_face,
    scenario_revenue,
    solve_agent_lp,
    supply_demand_curves,
    surplus,
    write_curves_csv,
)
from eqforward.errors import KindMismatch
from eqforward.lp_solver import LpStatus, solve
from eqforward.risk import RiskParams, risk_adjusted
from eqforward.scenario_model import ContractSpec, ProfileSet, ScenarioSet, shape_weighted_mean_spot

ONE = ContractSpec((1,))


def toy(lam=0.5, alpha=0.5, spots=(0.0, 100.0), g=1.0, d=1.0, q_max=None):
    s = ScenarioSet(np.array([spots], dtype=float))
    gen = AgentSpec("g", AgentKind.GENERATOR, RiskParams(lam, alpha), ProfileSet.constant("g", g, s), q_max)
    load = AgentSpec("d", AgentKind.LOAD, RiskParams(lam, alpha), ProfileSet.constant("d", d, s), q_max)
    return s, gen, load


def random_agent(rng, kind, K, M=1, lam=None, q_max=None):
    spot = rng.lognormal(np.log(40), 0.5, (M, K))
    s = ScenarioSet(spot)
    prof = None if kind is AgentKind.TRADER else ProfileSet("x", rng.uniform(50, 150, (M, K)))
    lam = float(rng.uniform(0, 0.95)) if lam is None else lam
    return s, AgentSpec("x", kind, RiskParams(lam, float(rng.choice([0.5, 0.9, 0.95]))), prof, q_max)


def grid_best(agent, s, c, p, qs):
    vals = []
    for q in qs:
        if agent.kind is AgentKind.GENERATOR:
            vals.append(surplus(agent, s, c, q, 0.0, p))
        else:
            vals.append(surplus(agent, s, c, 0.0, q, p))
    i = int(np.argmax(vals))
    return qs[i], vals[i]


def test_revenue_examples():
    s, gen, load = toy()
    assert scenario_revenue(gen, s, ONE, 0.0, 0.0, 1) == 100.0
    assert scenario_revenue(gen, s, ONE, 1.0, 0.0, 1) == 0.0
    trader = AgentSpec("t", AgentKind.TRADER, RiskParams(0.5, 0.5))
    assert scenario_revenue(trader, s, ONE, 2.0, 2.0, 1) == 0.0
    assert scenario_revenue(load, s, ONE, 0.0, 1.0, 1) == 0.0


def test_non_delivery_periods_settle_physically():
    s = ScenarioSet(np.array([[10.0, 20.0], [30.0, 40.0]]))
    gen = AgentSpec("g", AgentKind.GENERATOR, RiskParams(1.0, 0.5), ProfileSet.constant("g", 2.0, s))
    c = ContractSpec((2,), (3.0,))
    # period 1 fully physical; period 2: (2 - 3 q) * spot
    assert scenario_revenue(gen, s, c, 0.5, 0.0, 0) == pytest.approx(2 * 10 + (2 - 1.5) * 30)


def test_kind_mismatch():
    s, gen, load = toy()
    with pytest.raises(KindMismatch):
        scenario_revenue(gen, s, ONE, 0.0, 1.0, 0)
    with pytest.raises(KindMismatch):
        scenario_revenue(load, s, ONE, 1.0, 0.0, 0)
    with pytest.raises(KindMismatch):
        AgentSpec("t", AgentKind.TRADER, RiskParams(0.5), ProfileSet.constant("t", 1, s))
    with pytest.raises(KindMismatch):
        AgentSpec("g", AgentKind.GENERATOR, RiskParams(0.5))
    with pytest.raises(ValueError):
        AgentSpec("g", AgentKind.GENERATOR, RiskParams(0.5), ProfileSet.constant("g", 1, s), q_max=0.0)


def test_lp_structure_generator():
    s = ScenarioSet(np.array([[10.0, 20.0, 30.0]]))
    gen = AgentSpec("g", AgentKind.GENERATOR, RiskParams(0.5, 0.5), ProfileSet.constant("g", 1, s))
    lp = build_agent_lp(gen, s, ONE, 25.0)
    assert lp.num_eq == 3 and lp.num_ub == 6
    assert set(lp.var_names) == {"g.q_sell", "g.a", *(f"g.R[{k}]" for k in range(3)),
                                 *(f"g.y[{k}]" for k in range(3))}


def test_lp_structure_trader():
    s = ScenarioSet(np.array([[10.0, 20.0, 30.0]]))
    t = AgentSpec("t", AgentKind.TRADER, RiskParams(0.5, 0.5))
    lp = build_agent_lp(t, s, ONE, 25.0)
    assert {"t.q_sell", "t.q_buy"} <= set(lp.var_names)
    assert lp.num_eq == 3 and lp.num_ub == 6


def test_q_max_is_a_bound():
    s, gen, _ = toy(q_max=2.0)
    lp = build_agent_lp(gen, s, ONE, 25.0)
    assert lp.ub[lp.var_index("g.q_sell")] == 2.0


def test_load_lp_matches_grid():
    s, _, load = toy(lam=0.3, alpha=0.5, spots=(20.0, 90.0), d=1.0)
    qs = np.round(np.arange(0, 201) * 0.01, 10)
    for p in (40.0, 55.0, 80.0):  # demand is unbounded below 0.3 * 55 + 0.7 * 20 = 30.5
        sol, blk = solve_agent_lp(load, s, ONE, p, reduced=False)
        q_grid, v_grid = grid_best(load, s, ONE, p, qs)
        assert sol.objective >= v_grid - 1e-9
        assert sol.objective == pytest.approx(v_grid, abs=1e-6 * max(1, abs(v_grid)) + 0.01 * 90)
        assert surplus(load, s, ONE, 0.0, blk.q_buy, p) == pytest.approx(sol.objective, abs=1e-6)


def test_toy_best_response_matches_grid():
    s, gen, _ = toy()
    qs = np.round(np.arange(0, 3001) * 1e-3, 10)
    q_grid, v_grid = grid_best(gen, s, ONE, 40.0, qs)
    br = best_response(gen, s, ONE, 40.0)
    assert br.status == "optimal"
    assert br.quantity == pytest.approx(q_grid, abs=1e-3)
    assert surplus(gen, s, ONE, br.quantity, 0.0, 40.0) >= v_grid - 1e-9


def test_risk_neutral_step():
    rng = np.random.default_rng(3)
    s, gen = random_agent(rng, AgentKind.GENERATOR, 40, M=2, lam=1.0)
    c = ContractSpec((1, 2), (1.0, 3.0))
    mean = shape_weighted_mean_spot(s, c)
    assert best_response(gen, s, c, mean * 0.99).quantity == 0.0
    up = best_response(gen, s, c, mean * 1.01)
    assert up.status == "unbounded" and up.quantity == math.inf
    capped = AgentSpec("x", AgentKind.GENERATOR, gen.risk, gen.profile, q_max=7.5)
    assert best_response(capped, s, c, mean * 1.01).quantity == pytest.approx(7.5)
    assert best_response(capped, s, c, mean * 0.99).quantity == 0.0


def test_cap_replaces_unbounded():
    rng = np.random.default_rng(4)
    for kind in AgentKind:
        s, ag = random_agent(rng, kind, 30)
        hi = float(ONE.weighted_spot(s).max()) * 2
        p = hi if kind is not AgentKind.LOAD else -hi
        if kind is AgentKind.LOAD:
            p = 0.0  # a load buys without limit when contracts are free
        free = best_response(ag, s, ONE, p)
        assert free.status == "unbounded"
        capped = AgentSpec(ag.id, kind, ag.risk, ag.profile, q_max=12.0)
        br = best_response(capped, s, ONE, p)
        assert br.status == "optimal" and abs(br.quantity) == pytest.approx(12.0)


def test_trader_directions():
    s = ScenarioSet(np.array([[0.0, 100.0]]))
    t = AgentSpec("t", AgentKind.TRADER, RiskParams(0.5, 0.5))
    assert best_response(t, s, ONE, 20.0).quantity == -math.inf
    assert best_response(t, s, ONE, 50.0).quantity == 0.0
    assert best_response(t, s, ONE, 80.0).quantity == math.inf


def test_full_and_reduced_forms_agree():
    rng = np.random.default_rng(5)
    for kind in AgentKind:
        for _ in range(3):
            s, ag = random_agent(rng, kind, int(rng.integers(2, 40)), q_max=50.0)
            p = float(rng.uniform(20, 60))
            a, _ = solve_agent_lp(ag, s, ONE, p, reduced=True)
            b, _ = solve_agent_lp(ag, s, ONE, p, reduced=False)
            assert a.objective == pytest.approx(b.objective, rel=1e-9, abs=1e-7)


@settings(max_examples=40)
@given(st.integers(0, 2**31), st.sampled_from(list(AgentKind)), st.floats(5, 90))
def test_lp_matches_closed_form_face(seed, kind, p):
    rng = np.random.default_rng(seed)
    s, ag = random_agent(rng, kind, int(rng.integers(2, 60)))
    br = best_response(ag, s, ONE, p)
    f = optimal_face(ag, s, ONE, p)
    if br.status == "unbounded":
        assert math.isinf(f.hi if br.quantity > 0 else f.lo)
        return
    lo = f.min_supply - f.min_demand if kind is not AgentKind.LOAD else f.min_demand
    expected = lo if kind is not AgentKind.TRADER else (f.lo if f.lo > 0 else (f.hi if f.hi < 0 else 0.0))
    assert br.quantity == pytest.approx(expected, rel=1e-7, abs=1e-6)


@settings(max_examples=40)
@given(st.integers(0, 2**31), st.sampled_from([AgentKind.GENERATOR, AgentKind.LOAD]), st.floats(5, 90))
def test_surplus_decomposition(seed, kind, p):
    rng = np.random.default_rng(seed)
    s, ag = random_agent(rng, kind, int(rng.integers(2, 60)), q_max=300.0)
    sol, blk = solve_agent_lp(ag, s, ONE, p)
    assert sol.status is LpStatus.OPTIMAL
    r = blk.revenues
    contract = (blk.q_sell - blk.q_buy) * p * ONE.total_shape
    assert sol.objective == pytest.approx(risk_adjusted(r, ag.risk) + contract, rel=1e-6, abs=1e-6)


def test_curves_monotone():
    rng = np.random.default_rng(6)
    for _ in range(5):
        s, gen = random_agent(rng, AgentKind.GENERATOR, 50)
        load = AgentSpec("d", AgentKind.LOAD, RiskParams(float(rng.uniform(0, 0.9)), 0.9),
                         ProfileSet("d", rng.uniform(50, 150, (1, 50))))
        grid = np.linspace(10, 80, 15)
        rows = supply_demand_curves([gen, load], s, ONE, grid)
        sup = [r.supply for r in rows if r.supply_status == "bounded"]
        dem = [r.demand for r in rows if r.demand_status == "bounded"]
        assert all(b >= a - 1e-7 for a, b in zip(sup, sup[1:]))
        assert all(b <= a + 1e-7 for a, b in zip(dem, dem[1:]))
        exact = supply_demand_curves([gen, load], s, ONE, grid, method="exact")
        for r, e in zip(rows, exact):
            assert r.supply == pytest.approx(e.supply, rel=1e-7, abs=1e-6)
            assert r.demand == pytest.approx(e.demand, rel=1e-7, abs=1e-6)


def test_curves_flag_unbounded(tmp_path):
    s, gen, load = toy(lam=1.0)
    rows = supply_demand_curves([gen, load], s, ONE, [40.0, 60.0])
    assert rows[0].supply == 0.0 and rows[0].demand_status == "unbounded"
    assert rows[1].supply_status == "unbounded" and rows[1].demand == 0.0
    write_curves_csv(rows, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "price,supply,demand,supply_status,demand_status"
    assert lines[2].startswith("60,inf,0,unbounded,bounded")


def test_single_price_grid():
    s, gen, load = toy()
    assert len(supply_demand_curves([gen, load], s, ONE, [40.0])) == 1
    with pytest.raises(ValueError):
        supply_demand_curves([gen, load], s, ONE, [40.0, 30.0])


def test_toy_curves_cross_once():
    # supply jumps to 1 above 25, demand falls from 1 at 75: crossing set is [25, 75] at q=1
    s, gen, load = toy()
    rows = supply_demand_curves([gen, load], s, ONE, [10.0, 30.0, 50.0, 70.0, 90.0])
    assert [r.supply for r in rows[1:4]] == [1.0, 1.0, 1.0]
    assert [r.demand for r in rows[1:4]] == [1.0, 1.0, 1.0]
    assert rows[0].supply == 0.0 and rows[-1].demand == 0.0


def test_agent_lp_duals_consistent():
    rng = np.random.default_rng(8)
    s, ag = random_agent(rng, AgentKind.GENERATOR, 25)
    sol, blk = solve_agent_lp(ag, s, ONE, 45.0, reduced=False)
    full = solve(build_agent_lp(ag, s, ONE, 45.0))
    assert blk.theta.sum() == pytest.approx(1.0, abs=1e-9)
    assert full.objective == pytest.approx(sol.objective)
    assert np.all(blk.gamma >= -1e-9) and np.all(blk.eta >= -1e-9)
