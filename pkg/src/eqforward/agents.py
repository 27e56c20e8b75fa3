"""Agent surplus LPs, best responses and contract supply/demand curves.

Every agent's spot-market revenue in scenario k is affine in its contract
quantities::

    R_k = base_k - q_sell * W_k + q_buy * W_k

with ``W_k`` the shape-weighted delivery-period spot sum and ``base_k`` the
uncontracted position (generation revenue, minus load cost, zero for traders).
The contract payment ``(q_sell - q_buy) * p * sum(shape)`` is deterministic and
is added outside the risk functional.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import KindMismatch
from .lp_solver import LpProblem, LpSolution, LpStatus, solve
from .risk import RiskParams, risk_adjusted, tail_mass, tail_weights
from .scenario_model import ContractSpec, ProfileSet, ScenarioSet


class AgentKind(str, enum.Enum):
    GENERATOR = "generator"
    LOAD = "load"
    TRADER = "trader"


@dataclass(frozen=True)
class AgentSpec:
    id: str
    kind: AgentKind
    risk: RiskParams
    profile: ProfileSet | None = None
    q_max: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AgentKind(self.kind))
        if self.kind is AgentKind.TRADER and self.profile is not None:
            raise KindMismatch(f"trader {self.id!r} cannot hold a physical profile")
        if self.kind is not AgentKind.TRADER and self.profile is None:
            raise KindMismatch(f"{self.kind.value} {self.id!r} needs a profile")
        if self.q_max is not None and not self.q_max > 0:
            raise ValueError(f"q_max of {self.id!r} must be positive")

    @property
    def sells(self) -> bool:
        return self.kind is not AgentKind.LOAD

    @property
    def buys(self) -> bool:
        return self.kind is not AgentKind.GENERATOR

    def check_against(self, s: ScenarioSet) -> None:
        if self.profile is not None:
            self.profile.check_against(s)

    def with_alpha(self, default_alpha: float) -> "AgentSpec":
        return replace(self, risk=self.risk.resolved(default_alpha))

    def subset(self, members) -> "AgentSpec":
        if self.profile is None:
            return self
        return replace(self, profile=self.profile.subset(members))


def exposure(agent: AgentSpec, s: ScenarioSet, c: ContractSpec) -> tuple[np.ndarray, np.ndarray, float]:
    """(base revenue per scenario, shape-weighted spot per scenario, total shape)."""
    agent.check_against(s)
    w = c.weighted_spot(s)
    if agent.kind is AgentKind.GENERATOR:
        base = np.einsum("mk,mk->k", agent.profile.quantity, s.spot)
    elif agent.kind is AgentKind.LOAD:
        base = -np.einsum("mk,mk->k", agent.profile.quantity, s.spot)
    else:
        base = np.zeros(s.num_scenarios)
    return base, w, c.total_shape


def _check_kind(agent: AgentSpec, q_sell: float, q_buy: float) -> None:
    if q_sell < 0 or q_buy < 0:
        raise ValueError("contract quantities are nonnegative")
    if q_buy > 0 and not agent.buys:
        raise KindMismatch(f"generator {agent.id!r} cannot buy contracts")
    if q_sell > 0 and not agent.sells:
        raise KindMismatch(f"load {agent.id!r} cannot sell contracts")


def spot_revenues(agent, s, c, q_sell: float = 0.0, q_buy: float = 0.0) -> np.ndarray:
    _check_kind(agent, q_sell, q_buy)
    base, w, _ = exposure(agent, s, c)
    return base + (q_buy - q_sell) * w


def scenario_revenue(agent, s, c, q_sell: float, q_buy: float, k: int) -> float:
    """Spot-settlement revenue of ``agent`` in scenario ``k`` (0-based)."""
    return float(spot_revenues(agent, s, c, q_sell, q_buy)[k])


def surplus(agent, s, c, q_sell: float, q_buy: float, price: float) -> float:
    """Risk-adjusted spot revenue plus the deterministic contract payment."""
    r = spot_revenues(agent, s, c, q_sell, q_buy)
    return risk_adjusted(r, agent.risk) + (q_sell - q_buy) * price * c.total_shape


# -- LP blocks ---------------------------------------------------------------

@dataclass
class _Builder:
    """Accumulates columns and rows of an LP in triplet form."""

    c: list = field(default_factory=list)
    lb: list = field(default_factory=list)
    ub: list = field(default_factory=list)
    names: list = field(default_factory=list)
    eq: list = field(default_factory=list)  # (cols, vals, rhs, name)
    le: list = field(default_factory=list)
    offset: float = 0.0

    def var(self, name, cost=0.0, lo=0.0, hi=np.inf) -> int:
        self.c.append(cost)
        self.lb.append(lo)
        self.ub.append(hi)
        self.names.append(name)
        return len(self.c) - 1

    def add_eq(self, cols, vals, rhs, name) -> int:
        self.eq.append((cols, vals, rhs, name))
        return len(self.eq) - 1

    def add_le(self, cols, vals, rhs, name) -> int:
        self.le.append((cols, vals, rhs, name))
        return len(self.le) - 1

    @staticmethod
    def _matrix(rows, n):
        ri, ci, vv = [], [], []
        for i, (cols, vals, _, _) in enumerate(rows):
            ri.extend([i] * len(cols))
            ci.extend(cols)
            vv.extend(vals)
        return sp.csr_matrix((vv, (ri, ci)), shape=(len(rows), n))

    def build(self) -> LpProblem:
        n = len(self.c)
        return LpProblem(
            np.array(self.c, dtype=float),
            self._matrix(self.eq, n), np.array([r[2] for r in self.eq], dtype=float),
            self._matrix(self.le, n), np.array([r[2] for r in self.le], dtype=float),
            np.array(self.lb, dtype=float), np.array(self.ub, dtype=float),
            self.offset, tuple(self.names),
            tuple(r[3] for r in self.eq), tuple(r[3] for r in self.le),
        )


@dataclass(frozen=True)
class AgentBlock:
    """Column and row positions of one agent inside an LP."""

    agent: AgentSpec
    base: np.ndarray
    w: np.ndarray
    total_shape: float
    reduced: bool
    shift: float
    q_sell: int | None
    q_buy: int | None
    a: int | None
    y: np.ndarray | None
    R: np.ndarray | None = None
    rev_rows: np.ndarray | None = None
    cap_rows: np.ndarray | None = None
    tail_rows: np.ndarray | None = None

    @property
    def has_tail(self) -> bool:
        return self.a is not None


def add_agent_block(b: _Builder, agent: AgentSpec, s: ScenarioSet, c: ContractSpec,
                    price: float | None, reduced: bool) -> AgentBlock:
    """Append the agent's surplus variables and constraints to ``b``.

    With ``price=None`` the contract payment is omitted (welfare objective).
    The reduced form substitutes the revenue equalities into the tail rows,
    turns ``y <= 0`` into a bound, shifts the threshold by ``min(base)`` so
    the origin is feasible, and drops the tail block entirely for risk-neutral
    agents.
    """
    base, w, V = exposure(agent, s, c)
    K = base.size
    lam = agent.risk.lam
    cm = tail_mass(K, agent.risk._alpha())
    wy = (1.0 - lam) / cm
    cap = agent.q_max if agent.q_max is not None else np.inf
    pid = agent.id
    pv = 0.0 if price is None else price * V
    qs = qb = None
    mean_w = float(w.mean())

    if not reduced:
        if agent.sells:
            qs = b.var(f"{pid}.q_sell", pv, 0.0, cap)
        if agent.buys:
            qb = b.var(f"{pid}.q_buy", -pv, 0.0, cap)
        a = b.var(f"{pid}.a", 1.0 - lam, -np.inf, np.inf)
        R = np.array([b.var(f"{pid}.R[{k}]", lam / K, -np.inf, np.inf) for k in range(K)])
        y = np.array([b.var(f"{pid}.y[{k}]", wy, -np.inf, np.inf) for k in range(K)])
        rev, caps, tails = [], [], []
        for k in range(K):
            cols, vals = [int(R[k])], [1.0]
            if qs is not None:
                cols.append(qs)
                vals.append(w[k])
            if qb is not None:
                cols.append(qb)
                vals.append(-w[k])
            rev.append(b.add_eq(cols, vals, base[k], f"{pid}.rev[{k}]"))
        for k in range(K):
            caps.append(b.add_le([int(y[k])], [1.0], 0.0, f"{pid}.ycap[{k}]"))
        for k in range(K):
            tails.append(b.add_le([int(y[k]), int(R[k]), a], [1.0, -1.0, 1.0], 0.0, f"{pid}.tail[{k}]"))
        return AgentBlock(agent, base, w, V, False, 0.0, qs, qb, a, y, R,
                          np.array(rev), np.array(caps), np.array(tails))

    if agent.sells:
        qs = b.var(f"{pid}.q_sell", pv - lam * mean_w, 0.0, cap)
    if agent.buys:
        qb = b.var(f"{pid}.q_buy", -pv + lam * mean_w, 0.0, cap)
    b.offset += lam * float(base.mean())
    if lam >= 1.0:
        return AgentBlock(agent, base, w, V, True, 0.0, qs, qb, None, None)
    shift = float(base.min())
    b.offset += (1.0 - lam) * shift
    a = b.var(f"{pid}.a", 1.0 - lam, -np.inf, np.inf)
    y = np.array([b.var(f"{pid}.y[{k}]", wy, -np.inf, 0.0) for k in range(K)])
    tails = []
    for k in range(K):
        cols, vals = [int(y[k]), a], [1.0, 1.0]
        if qs is not None:
            cols.append(qs)
            vals.append(w[k])
        if qb is not None:
            cols.append(qb)
            vals.append(-w[k])
        tails.append(b.add_le(cols, vals, base[k] - shift, f"{pid}.tail[{k}]"))
    return AgentBlock(agent, base, w, V, True, shift, qs, qb, a, y, tail_rows=np.array(tails))


@dataclass(frozen=True)
class AgentLpSolution:
    q_sell: float
    q_buy: float
    a: float
    revenues: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    eta: np.ndarray
    gamma: np.ndarray
    beta_sell: float
    beta_buy: float
    mu_sell: float  # dual of the q_max bound on q_sell (0 without a cap)
    mu_buy: float
    surplus: float

    @property
    def net(self) -> float:
        return self.q_sell - self.q_buy


def extract_block(blk: AgentBlock, sol: LpSolution, price: float) -> AgentLpSolution:
    """Agent primal values and the duals of its own optimality system.

    Revenue-row duals are recovered as ``lam / K + eta`` and tail-cap duals as
    ``(1 - lam) / (K (1 - alpha)) - eta`` when the reduced form dropped those
    rows.
    """
    agent = blk.agent
    x, d = sol.x, sol.reduced_costs
    K = blk.base.size
    lam = agent.risk.lam
    wy = (1.0 - lam) / tail_mass(K, agent.risk._alpha())
    cap = agent.q_max if agent.q_max is not None else np.inf
    # basic values may sit a rounding error outside their bounds
    qs = float(np.clip(x[blk.q_sell], 0.0, cap)) if blk.q_sell is not None else 0.0
    qb = float(np.clip(x[blk.q_buy], 0.0, cap)) if blk.q_buy is not None else 0.0
    R = blk.base + (qb - qs) * blk.w
    if blk.has_tail:
        a = float(x[blk.a]) + blk.shift
        y = x[blk.y].astype(float)
        eta = sol.ineq_duals[blk.tail_rows].astype(float)
        if blk.reduced:
            theta = lam / K + eta
            gamma = wy - eta
        else:
            R = x[blk.R].astype(float)
            theta = sol.eq_duals[blk.rev_rows].astype(float)
            gamma = sol.ineq_duals[blk.cap_rows].astype(float)
    else:
        a = float(R.min())
        y = np.zeros(K)
        eta = np.zeros(K)
        gamma = np.zeros(K)
        theta = np.full(K, 1.0 / K)

    def split(j):
        if j is None:
            return 0.0, 0.0
        dj = float(d[j])
        return min(dj, 0.0), max(dj, 0.0)

    bs, ms = split(blk.q_sell)
    bb, mb = split(blk.q_buy)
    value = lam * R.mean() + (1.0 - lam) * a + wy * y.sum()
    value += (qs - qb) * price * blk.total_shape
    return AgentLpSolution(qs, qb, a, R, y, theta, eta, gamma, bs, bb, ms, mb, float(value))


def build_agent_lp(agent: AgentSpec, s: ScenarioSet, c: ContractSpec, p: float,
                   reduced: bool = False) -> LpProblem:
    """Risk-adjusted surplus LP of one agent at contract price ``p``."""
    b = _Builder()
    add_agent_block(b, agent, s, c, p, reduced)
    return b.build()


def solve_agent_lp(agent, s, c, p, reduced: bool = True) -> tuple[LpSolution, AgentLpSolution | None]:
    b = _Builder()
    blk = add_agent_block(b, agent, s, c, p, reduced)
    lp = b.build()
    qcols = [j for j in (blk.q_sell, blk.q_buy) if j is not None]
    tie = np.zeros(lp.num_vars)
    tie[qcols] = -1.0
    sol = solve(lp, secondary=[tie])
    if sol.status is not LpStatus.OPTIMAL:
        return sol, None
    return sol, extract_block(blk, sol, p)


@dataclass(frozen=True)
class BestResponse:
    quantity: float  # q_sell for generators, q_buy for loads, q_sell - q_buy for traders
    status: str  # "optimal" or "unbounded"
    q_sell: float = 0.0
    q_buy: float = 0.0


def best_response(agent: AgentSpec, s: ScenarioSet, c: ContractSpec, p: float) -> BestResponse:
    """Minimum optimal contract quantity of ``agent`` at price ``p`` (LP route)."""
    sol, blk = solve_agent_lp(agent, s, c, p)
    if sol.status is LpStatus.UNBOUNDED:
        b = _Builder()
        layout = add_agent_block(b, agent, s, c, p, True)
        sell_dir = layout.q_sell is not None and sol.ray[layout.q_sell] > 0
        if agent.kind is AgentKind.LOAD:
            return BestResponse(math.inf, "unbounded", 0.0, math.inf)
        if agent.kind is AgentKind.GENERATOR or sell_dir:
            return BestResponse(math.inf, "unbounded", math.inf, 0.0)
        return BestResponse(-math.inf, "unbounded", 0.0, math.inf)
    if blk is None:
        raise RuntimeError(f"agent LP ended with status {sol.status.value}")
    q = {AgentKind.GENERATOR: blk.q_sell, AgentKind.LOAD: blk.q_buy}.get(agent.kind, blk.net)
    return BestResponse(float(q), "optimal", blk.q_sell, blk.q_buy)


# -- closed-form optimal faces -----------------------------------------------

def _face_1d(base, slope, h, lam, alpha, cap) -> tuple[float, float]:
    """Min and max maximizers over [0, cap] of ``RA(base + q*slope) + q*h``.

    The objective is concave and piecewise linear with kinks only where two
    scenario revenue lines cross, so it is enough to locate the first interval
    between consecutive crossings whose slope is non-positive (resp. negative).
    """
    K = base.size
    wts = tail_weights(K, alpha)
    mean_b = float(slope.mean())
    tol = 1e-10 * max(1.0, float(np.abs(slope).mean()), abs(h))

    def derivative(q):
        order = np.argsort(base + q * slope, kind="stable")
        return lam * mean_b + (1.0 - lam) * float(wts @ slope[order]) + h

    i, j = np.triu_indices(K, 1)
    ds = slope[i] - slope[j]
    nz = np.abs(ds) > 1e-14 * max(1.0, float(np.abs(slope).max()))
    pts = (base[j][nz] - base[i][nz]) / ds[nz]
    pts = pts[(pts > 0) & (pts < cap)]
    pts = np.unique(pts)
    if pts.size > 1:
        keep = np.concatenate([[True], np.diff(pts) > 1e-12 * np.maximum(1.0, np.abs(pts[1:]))])
        pts = pts[keep]
    knots = np.concatenate([[0.0], pts])
    ends = np.concatenate([knots[1:], [cap]])
    n = knots.size

    def mid(t):
        if np.isfinite(ends[t]):
            return 0.5 * (knots[t] + ends[t])
        return knots[t] + 1.0 + abs(knots[t])

    def first(pred) -> float:
        lo, hi = 0, n  # first interval index where pred(derivative) holds, n if none
        while lo < hi:
            t = (lo + hi) // 2
            if pred(derivative(mid(t))):
                hi = t
            else:
                lo = t + 1
        return float(knots[lo]) if lo < n else float(cap)

    return first(lambda g: g <= tol), first(lambda g: g < -tol)


@dataclass(frozen=True)
class Face:
    """Interval of optimal net quantities (sell positive) and the induced supply/demand ranges."""

    lo: float
    hi: float

    @property
    def supply(self) -> tuple[float, float]:
        return max(self.lo, 0.0), max(self.hi, 0.0)

    @property
    def demand(self) -> tuple[float, float]:
        return max(-self.hi, 0.0), max(-self.lo, 0.0)

    @property
    def min_supply(self) -> float:
        return max(self.lo, 0.0)

    @property
    def min_demand(self) -> float:
        return max(-self.hi, 0.0)


def optimal_face(agent: AgentSpec, s: ScenarioSet, c: ContractSpec, p: float) -> Face:
    """Optimal net contract positions at price ``p`` from the sorted-sample CVaR.

    Independent of the LP machinery; used as the best-response oracle.
    """
    base, w, V = exposure(agent, s, c)
    lam, alpha = agent.risk.lam, agent.risk._alpha()
    cap = agent.q_max if agent.q_max is not None else math.inf
    if agent.kind is AgentKind.GENERATOR:
        lo, hi = _face_1d(base, -w, p * V, lam, alpha, cap)
        return Face(lo, hi)
    if agent.kind is AgentKind.LOAD:
        lo, hi = _face_1d(base, w, -p * V, lam, alpha, cap)
        return Face(-hi, -lo)
    s_lo, s_hi = _face_1d(base, -w, p * V, lam, alpha, cap)
    b_lo, b_hi = _face_1d(base, w, -p * V, lam, alpha, cap)
    if s_lo > 0:
        return Face(s_lo, s_hi)
    if b_lo > 0:
        return Face(-b_hi, -b_lo)
    return Face(-b_hi, s_hi)


# -- curves ------------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    price: float
    supply: float
    demand: float
    supply_status: str
    demand_status: str


def supply_demand_curves(agents, s: ScenarioSet, c: ContractSpec, price_grid,
                         method: str = "lp") -> list[CurvePoint]:
    """Aggregate minimum-quantity supply and demand at each grid price.

    ``method="lp"`` solves each agent LP; ``method="exact"`` uses
    :func:`optimal_face`.  Unbounded responses give an infinite total and an
    ``unbounded`` status rather than being clipped.
    """
    grid = np.asarray(price_grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("price grid must be non-empty and strictly increasing")
    rows = []
    for p in grid:
        sup = dem = 0.0
        for ag in agents:
            if method == "lp":
                br = best_response(ag, s, c, p)
                net = -br.quantity if ag.kind is AgentKind.LOAD else br.quantity
                if br.status == "optimal" and ag.kind is AgentKind.TRADER:
                    sup += br.q_sell
                    dem += br.q_buy
                    continue
            elif method == "exact":
                f = optimal_face(ag, s, c, p)
                net = f.min_supply - f.min_demand
            else:
                raise ValueError(f"unknown method {method!r}")
            if net > 0:
                sup += net
            else:
                dem += -net
        rows.append(CurvePoint(
            float(p), sup, dem,
            "unbounded" if math.isinf(sup) else "bounded",
            "unbounded" if math.isinf(dem) else "bounded",
        ))
    return rows


def write_curves_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["price", "supply", "demand", "supply_status", "demand_status"])
        for r in rows:
            w.writerow([f"{r.price:.12g}", f"{r.supply:.12g}", f"{r.demand:.12g}",
                        r.supply_status, r.demand_status])
