"""Contract-market equilibrium as the dual of the welfare LP balance row.

The welfare LP maximizes the sum of every agent's risk-adjusted spot surplus
subject to all agent constraints and one balance row
``sum(V * q_sell) - sum(V * q_buy) = 0`` (V = total contract shape, so the row
is in delivered MWh).  Contract payments cancel across the market, and the
equilibrium price is minus the balance-row dual.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .agents import (
    AgentBlock,
    AgentKind,
    AgentLpSolution,
    AgentSpec,
    _Builder,
    add_agent_block,
    exposure,
    extract_block,
    optimal_face,
    solve_agent_lp,
    surplus,
)
from .errors import ConfigError, NoBracket, NumericalBreakdown
from .lp_solver import LpProblem, LpStatus, solve
from .risk import tail_mass
from .scenario_model import ContractSpec, ScenarioSet, shape_weighted_mean_spot

BALANCE = "balance"


@dataclass(frozen=True)
class MarketConfig:
    agents: tuple[AgentSpec, ...]
    scenarios: ScenarioSet
    contract: ContractSpec
    alpha_default: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.alpha_default < 1.0:
            raise ConfigError(f"alpha_default must lie in [0, 1), got {self.alpha_default}")
        agents = tuple(a.with_alpha(self.alpha_default) for a in self.agents)
        ids = [a.id for a in agents]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate agent ids in {ids}")
        if not any(a.sells for a in agents) or not any(a.buys for a in agents):
            raise ConfigError("market needs at least one agent able to sell and one able to buy")
        try:
            self.contract.check_against(self.scenarios)
            for a in agents:
                a.check_against(self.scenarios)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        object.__setattr__(self, "agents", agents)

    def restrict(self, members, contract: ContractSpec | None = None) -> "MarketConfig":
        """Same market on a subset of scenario trajectories (uniform weights over the subset)."""
        return MarketConfig(
            tuple(a.subset(members) for a in self.agents),
            self.scenarios.subset(members),
            self.contract if contract is None else contract,
            self.alpha_default,
        )

    def agent(self, agent_id: str) -> AgentSpec:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)


class EqStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    DEGENERATE = "degenerate"
    NO_TRADE = "no_trade"
    UNBOUNDED = "unbounded"
    INFEASIBLE = "infeasible"

    @property
    def solved(self) -> bool:
        return self in (EqStatus.OPTIMAL, EqStatus.DEGENERATE, EqStatus.NO_TRADE)


@dataclass(frozen=True)
class AgentOutcome:
    q_sell: float
    q_buy: float
    surplus: float


@dataclass(frozen=True)
class EquilibriumResult:
    price: float
    quantity: float
    per_agent: dict[str, AgentOutcome]
    welfare: float
    balance_dual: float
    price_bracket: tuple[float, float]
    status: EqStatus
    blocks: dict[str, AgentLpSolution] = field(default_factory=dict, repr=False)
    quantity_indeterminate: bool = False

    @property
    def bracket_width(self) -> float:
        return self.price_bracket[1] - self.price_bracket[0]

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "quantity": self.quantity,
            "bracket": list(self.price_bracket),
            "status": self.status.value,
            "welfare": self.welfare,
            "balance_dual": self.balance_dual,
            "agents": [
                {"id": k, "q_sell": v.q_sell, "q_buy": v.q_buy, "surplus": v.surplus}
                for k, v in self.per_agent.items()
            ],
        }


def _failed(status: EqStatus) -> EquilibriumResult:
    nan = math.nan
    return EquilibriumResult(nan, nan, {}, nan, nan, (nan, nan), status)


def _welfare_lp(cfg: MarketConfig, reduced: bool, balance_rhs: float = 0.0):
    b = _Builder()
    blocks = [add_agent_block(b, a, cfg.scenarios, cfg.contract, None, reduced) for a in cfg.agents]
    V = cfg.contract.total_shape
    cols, vals = [], []
    for blk in blocks:
        if blk.q_sell is not None:
            cols.append(blk.q_sell)
            vals.append(V)
        if blk.q_buy is not None:
            cols.append(blk.q_buy)
            vals.append(-V)
    b.add_eq(cols, vals, balance_rhs, BALANCE)
    return b.build(), blocks


def build_welfare_lp(cfg: MarketConfig, reduced: bool = False) -> LpProblem:
    """Welfare LP: sum of agent spot surpluses, all agent constraints, one balance row."""
    return _welfare_lp(cfg, reduced)[0]


def _quantity_cols(blocks: list[AgentBlock]):
    all_q, phys = [], []
    for blk in blocks:
        for j in (blk.q_sell, blk.q_buy):
            if j is not None:
                all_q.append(j)
                if blk.agent.kind is not AgentKind.TRADER:
                    phys.append(j)
    return all_q, phys


def solve_equilibrium(cfg: MarketConfig, reduced: bool = True) -> EquilibriumResult:
    """Equilibrium price, quantities and supported price interval.

    The reported quantities are the minimum-total-quantity point of the
    welfare LP's optimal face.  The price bracket comes from re-solving with the
    balance right-hand side at +-eps (eps = 1e-4 * max(1, q0) MWh) and
    differencing welfare.  Statuses: ``degenerate`` when the bracket is wider
    than 1e-4 * max(1, price) or the cleared quantity is not unique;
    ``no_trade`` when nothing clears, in which case the price is the bracket
    midpoint.
    """
    lp, blocks = _welfare_lp(cfg, reduced)
    all_q, phys = _quantity_cols(blocks)
    tie_min = np.zeros(lp.num_vars)
    tie_min[all_q] = -1.0
    secondary = [tie_min]
    if phys:
        tie_max = np.zeros(lp.num_vars)
        tie_max[phys] = 1.0
        secondary.append(tie_max)
    sol = solve(lp, secondary=secondary)
    if sol.status is LpStatus.UNBOUNDED:
        return _failed(EqStatus.UNBOUNDED)
    if sol.status is LpStatus.INFEASIBLE:
        return _failed(EqStatus.INFEASIBLE)
    if sol.status is not LpStatus.OPTIMAL:
        raise NumericalBreakdown(f"welfare LP ended with status {sol.status.value}")

    V = cfg.contract.total_shape
    bal = lp.eq_index(BALANCE)
    delta = float(sol.eq_duals[bal])
    dual_price = -delta
    x = sol.x
    q0 = float(sum(x[blk.q_sell] for blk in blocks if blk.q_sell is not None))

    indeterminate = False
    if len(sol.secondary) > 1:
        st2, x2 = sol.secondary[1]
        if st2 is LpStatus.UNBOUNDED:
            indeterminate = True
        elif st2 is LpStatus.OPTIMAL:
            spread = float(np.sum(x2[phys]) - np.sum(x[phys]))
            indeterminate = spread > 1e-7 * max(1.0, q0)

    eps = 1e-4 * max(1.0, q0)
    welfare = sol.objective

    def perturbed(sign):
        s2 = solve(lp.with_rhs(b_eq=np.where(np.arange(lp.num_eq) == bal, sign * eps * V, lp.b_eq)))
        if s2.status is LpStatus.OPTIMAL:
            return s2.objective
        if s2.status is LpStatus.INFEASIBLE:
            return -math.inf
        raise NumericalBreakdown(f"bracket probe ended with status {s2.status.value}")

    w_plus, w_minus = perturbed(+1.0), perturbed(-1.0)
    # price = -dW/d(balance rhs in MWh)
    p_left = (w_minus - welfare) / (eps * V) if math.isfinite(w_minus) else -math.inf
    p_right = (welfare - w_plus) / (eps * V) if math.isfinite(w_plus) else math.inf
    p_left, p_right = min(p_left, p_right, dual_price), max(p_left, p_right, dual_price)

    width = p_right - p_left
    if indeterminate:
        status = EqStatus.DEGENERATE
        price = dual_price
    elif q0 <= 1e-9 * max(1.0, float(np.max(np.abs(cfg.scenarios.spot)))):
        status = EqStatus.NO_TRADE
        price = 0.5 * (p_left + p_right) if math.isfinite(width) else dual_price
    elif width > 1e-4 * max(1.0, abs(dual_price)):
        status = EqStatus.DEGENERATE
        price = dual_price
    else:
        status = EqStatus.OPTIMAL
        price = dual_price

    s, c = cfg.scenarios, cfg.contract
    per_agent, block_sols = {}, {}
    for blk in blocks:
        bs = extract_block(blk, sol, dual_price)
        block_sols[blk.agent.id] = bs
        per_agent[blk.agent.id] = AgentOutcome(
            bs.q_sell, bs.q_buy, surplus(blk.agent, s, c, bs.q_sell, bs.q_buy, price)
        )
    return EquilibriumResult(
        price, q0, per_agent, welfare, delta, (p_left, p_right), status, block_sols, indeterminate
    )


# -- independent oracle ------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    price: float
    quantity: float
    p_lo: float
    p_hi: float
    tol: float
    evaluations: int


def excess_supply(cfg: MarketConfig, p: float) -> tuple[float, float]:
    """(total minimum supply, total minimum demand) at price ``p`` from closed-form best responses."""
    sup = dem = 0.0
    for a in cfg.agents:
        f = optimal_face(a, cfg.scenarios, cfg.contract, p)
        sup += f.min_supply
        dem += f.min_demand
    return sup, dem


def _faces(cfg, p):
    lo_s = hi_s = lo_d = hi_d = 0.0
    for a in cfg.agents:
        f = optimal_face(a, cfg.scenarios, cfg.contract, p)
        s0, s1 = f.supply
        d0, d1 = f.demand
        lo_s, hi_s, lo_d, hi_d = lo_s + s0, hi_s + s1, lo_d + d0, hi_d + d1
    return lo_s, hi_s, lo_d, hi_d


def default_price_range(cfg: MarketConfig) -> tuple[float, float]:
    """Range of shape-weighted scenario spot prices; every equilibrium lies inside it."""
    w = cfg.contract.weighted_spot(cfg.scenarios) / cfg.contract.total_shape
    return float(w.min()), float(w.max())


def price_sweep_oracle(cfg: MarketConfig, p_lo: float | None = None, p_hi: float | None = None,
                       tol: float | None = None, max_iter: int = 200) -> OracleResult:
    """Bisection on excess supply using per-agent best responses only.

    Returns the upper end of the final bracket, i.e. a price where excess
    supply is already nonnegative, which lies inside the equilibrium price set
    up to ``tol``.
    """
    d_lo, d_hi = default_price_range(cfg)
    p_lo = d_lo if p_lo is None else float(p_lo)
    p_hi = d_hi if p_hi is None else float(p_hi)
    if p_hi < p_lo:
        raise NoBracket(f"empty price interval [{p_lo}, {p_hi}]")
    if tol is None:
        tol = max(1e-3 * (p_hi - p_lo), 1e-9)
    evals = 0

    def es(p):
        nonlocal evals
        evals += 1
        sup, dem = excess_supply(cfg, p)
        if math.isinf(sup) and math.isinf(dem):
            raise NoBracket(f"supply and demand both unbounded at {p}")
        scale = max(1.0, sup if math.isfinite(sup) else 0.0, dem if math.isfinite(dem) else 0.0)
        diff = sup - dem
        return 0.0 if abs(diff) <= 1e-9 * scale else diff

    e_lo, e_hi = es(p_lo), es(p_hi)
    if e_lo > 0 or e_hi < 0:
        raise NoBracket(f"excess supply {e_lo:.6g} at {p_lo:.6g} and {e_hi:.6g} at {p_hi:.6g}")
    lo, hi = p_lo, p_hi
    if e_lo == 0:
        hi = lo
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        e = es(mid)
        if e == 0:
            lo = hi = mid
            break
        if e > 0:
            hi = mid
        else:
            lo = mid
    price = hi
    ls, hs, ld, hd = _faces(cfg, price)
    q_lo, q_hi = max(ls, ld), min(hs, hd)
    # faces overlap at an exact crossing; otherwise the short side is within tol of the crossing
    quantity = q_lo if q_lo <= q_hi * (1 + 1e-9) + 1e-9 else min(ls, ld)
    return OracleResult(price, quantity, p_lo, p_hi, tol, evals)


# -- optimality-system check --------------------------------------------------

@dataclass(frozen=True)
class KktReport:
    max_primal_residual: float
    max_dual_residual: float
    max_complementarity_residual: float
    duality_gap: float
    max_resolve_gap: float
    breakdown: dict[str, dict[str, float]]

    def ok(self, tol: float = 1e-6) -> bool:
        return max(self.max_primal_residual, self.max_dual_residual,
                   self.max_complementarity_residual, self.duality_gap,
                   self.max_resolve_gap) <= tol

    def to_dict(self) -> dict:
        return {
            "max_primal_residual": self.max_primal_residual,
            "max_dual_residual": self.max_dual_residual,
            "max_complementarity_residual": self.max_complementarity_residual,
            "duality_gap": self.duality_gap,
            "max_resolve_gap": self.max_resolve_gap,
            "agents": self.breakdown,
        }


PRIMAL_KEYS = ("revenue_definition", "quantity_bounds", "tail_cap", "tail_link", "balance")
DUAL_KEYS = ("stationarity_revenue", "stationarity_threshold", "stationarity_tail",
             "stationarity_quantity", "quantity_dual_sign", "tail_dual_sign")
COMP_KEYS = ("complementarity_quantity", "complementarity_tail")


def check_kkt(cfg: MarketConfig, res: EquilibriumResult) -> KktReport:
    """Residuals of every agent's optimality system at the equilibrium.

    Each agent's revenue, threshold and tail duals come from the welfare LP;
    the agent problem is then checked as if solved alone at the equilibrium
    price.  Monetary residuals are divided by the agent's largest scenario
    revenue magnitude, price-stationarity residuals by the total contract
    shape (so they read in $/MWh).  For ``no_trade`` results the dual
    correspondence is evaluated at the balance-dual price, while the re-solve
    comparison uses the reported (midpoint) price.
    """
    if not res.status.solved:
        raise ValueError(f"cannot check an equilibrium with status {res.status.value}")
    s, c = cfg.scenarios, cfg.contract
    p = -res.balance_dual if res.status is EqStatus.NO_TRADE else res.price
    breakdown: dict[str, dict[str, float]] = {}
    total_sell = total_buy = 0.0
    resolve_gap = 0.0
    for a in cfg.agents:
        b = res.blocks[a.id]
        base, w, V = exposure(a, s, c)
        K = base.size
        lam = a.risk.lam
        wy = (1.0 - lam) / tail_mass(K, a.risk._alpha())
        cap = a.q_max if a.q_max is not None else math.inf
        qs, qb = b.q_sell, b.q_buy
        total_sell += qs
        total_buy += qb
        R, y, th, eta, gam = b.revenues, b.y, b.theta, b.eta, b.gamma
        scale = max(1.0, float(np.max(np.abs(base))), float(np.max(np.abs(w))) * max(qs, qb))
        link = y - R + b.a

        stat_q = 0.0
        if a.sells:
            stat_q = max(stat_q, abs(p * V - th @ w - b.beta_sell - b.mu_sell) / V)
        if a.buys:
            stat_q = max(stat_q, abs(-p * V + th @ w - b.beta_buy - b.mu_buy) / V)

        def cap_slack(q):
            return cap - q if math.isfinite(cap) else 0.0

        comp_q = max(abs(b.beta_sell * qs), abs(b.beta_buy * qb),
                     abs(b.mu_sell * cap_slack(qs)), abs(b.mu_buy * cap_slack(qb))) / scale
        if not math.isfinite(cap):
            comp_q = max(comp_q, abs(b.mu_sell), abs(b.mu_buy))
        primal_obj = lam * R.mean() + (1.0 - lam) * b.a + wy * y.sum() + (qs - qb) * p * V
        dual_obj = th @ base
        if math.isfinite(cap):
            dual_obj += cap * (b.mu_sell + b.mu_buy)
        breakdown[a.id] = {
            "revenue_definition": float(np.max(np.abs(R - (base + (qb - qs) * w)))) / scale,
            "quantity_bounds": max(0.0, -qs, -qb, qs - cap, qb - cap),
            "tail_cap": float(np.max(np.maximum(y, 0.0))) / scale,
            "tail_link": float(np.max(np.maximum(link, 0.0))) / scale,
            "stationarity_revenue": float(np.max(np.abs(lam / K - th + eta))),
            "stationarity_threshold": abs((1.0 - lam) - float(eta.sum())),
            "stationarity_tail": float(np.max(np.abs(wy - gam - eta))),
            "stationarity_quantity": stat_q,
            "quantity_dual_sign": max(0.0, b.beta_sell, b.beta_buy, -b.mu_sell, -b.mu_buy),
            "tail_dual_sign": max(0.0, float(np.max(-gam)), float(np.max(-eta))),
            "complementarity_quantity": comp_q,
            "complementarity_tail": max(float(np.max(np.abs(gam * y))),
                                        float(np.max(np.abs(eta * link)))) / scale,
            "primal_dual_equality": abs(dual_obj - primal_obj) / max(1.0, abs(primal_obj)),
        }
        sol, own = solve_agent_lp(a, s, c, res.price)
        target = res.per_agent[a.id].surplus
        if own is None:
            gap = math.inf
        else:
            gap = abs(sol.objective - target) / max(1.0, abs(target))
        breakdown[a.id]["resolve_gap"] = gap
        resolve_gap = max(resolve_gap, gap)

    V = c.total_shape
    bal = abs(total_sell - total_buy) * V / max(1.0, total_sell * V)
    for d in breakdown.values():
        d["balance"] = bal

    def worst(keys):
        return max(d[k] for d in breakdown.values() for k in keys)

    return KktReport(
        worst(PRIMAL_KEYS), worst(DUAL_KEYS), worst(COMP_KEYS),
        worst(("primal_dual_equality",)), resolve_gap, breakdown,
    )


def risk_neutral_price(cfg: MarketConfig) -> float:
    return shape_weighted_mean_spot(cfg.scenarios, cfg.contract)
