"""Nested equal-count scenario trees and per-node forward prices.

At each stage every node's trajectories are sorted by a per-trajectory
statistic over that stage's periods and cut into ``branching`` consecutive
groups of (almost) equal size.  Transition probabilities are member-count
ratios, so with equally likely trajectories the path probability of a node is
its member count over K.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .equilibrium import EqStatus, MarketConfig, solve_equilibrium
from .errors import ConfigError, EqForwardError, TopologyError
from .scenario_model import ContractSpec, ScenarioSet

Statistic = Union[str, Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Stage:
    periods: tuple[int, ...]  # 1-based periods the statistic looks at
    branching: int

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(int(m) for m in self.periods))
        if not self.periods:
            raise TopologyError("stage needs at least one period")
        if self.branching < 1:
            raise TopologyError(f"branching must be >= 1, got {self.branching}")


@dataclass(frozen=True)
class TreeTopologySpec:
    """Stages in time order.

    ``stat`` is ``"mean_spot"`` (default), ``"sum_spot"``, a function mapping
    the [len(periods) x K] spot slice to K values, or an explicit [M x K]
    matrix whose selected rows are averaged (a custom column).
    """

    stages: tuple[Stage, ...]
    stat: Statistic = "mean_spot"

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if isinstance(self.stat, str) and self.stat not in ("mean_spot", "sum_spot"):
            raise TopologyError(f"unknown clustering statistic {self.stat!r}")

    @classmethod
    def yearly(cls, branching: Sequence[int], first_period: int = 1, stat: Statistic = "mean_spot"):
        """One stage per period starting at ``first_period``."""
        return cls(tuple(Stage((first_period + i,), int(b)) for i, b in enumerate(branching)), stat)

    def check_against(self, s: ScenarioSet) -> None:
        for st in self.stages:
            if st.periods[0] < 1 or st.periods[-1] > s.num_periods:
                raise TopologyError(f"stage periods {st.periods} outside 1..{s.num_periods}")

    def statistic(self, s: ScenarioSet, stage: Stage) -> np.ndarray:
        rows = np.asarray(stage.periods) - 1
        if isinstance(self.stat, str):
            block = s.spot[rows]
            return block.mean(axis=0) if self.stat == "mean_spot" else block.sum(axis=0)
        if callable(self.stat):
            return np.asarray(self.stat(s.spot[rows]), dtype=float).ravel()
        return np.asarray(self.stat, dtype=float)[rows].mean(axis=0)


@dataclass
class Node:
    id: str
    stage: int
    members: np.ndarray
    parent: str | None
    prob_from_parent: float
    path_prob: float
    children: list[str] = field(default_factory=list)

    @property
    def n_members(self) -> int:
        return int(self.members.size)


@dataclass
class ScenarioTree:
    nodes: dict[str, Node]
    num_scenarios: int
    num_stages: int
    last_period: int = 0  # latest period used for clustering

    @property
    def root(self) -> Node:
        return self.nodes["0.0"]

    def stage_nodes(self, t: int) -> list[Node]:
        if not 0 <= t <= self.num_stages:
            raise ValueError(f"stage {t} outside 0..{self.num_stages}")
        return [n for n in self.nodes.values() if n.stage == t]

    def node_of(self, trajectory: int, t: int) -> Node:
        for n in self.stage_nodes(t):
            if trajectory in n.members:
                return n
        raise KeyError(trajectory)


def equal_count_split(values: np.ndarray, members: np.ndarray, branching: int) -> list[np.ndarray]:
    """Sort ``members`` by ``values`` (ties by index) and cut into ``branching`` groups.

    Group sizes differ by at most one; the larger groups come first, i.e.
    take the lower-statistic members.
    """
    n = members.size
    if branching > n:
        raise TopologyError(f"cannot split {n} trajectories into {branching} groups")
    order = np.lexsort((members, values[members]))
    ranked = members[order]
    base, extra = divmod(n, branching)
    sizes = [base + 1 if j < extra else base for j in range(branching)]
    cuts = np.cumsum(sizes)[:-1]
    return [np.sort(g) for g in np.split(ranked, cuts)]


def build_tree(s: ScenarioSet, spec: TreeTopologySpec) -> ScenarioTree:
    spec.check_against(s)
    K = s.num_scenarios
    root = Node("0.0", 0, np.arange(K), None, 1.0, 1.0)
    nodes = {root.id: root}
    frontier = [root]
    for t, stage in enumerate(spec.stages, start=1):
        stat = spec.statistic(s, stage)
        if stat.shape != (K,):
            raise TopologyError(f"clustering statistic has shape {stat.shape}, expected ({K},)")
        nxt = []
        for parent in frontier:
            for group in equal_count_split(stat, parent.members, stage.branching):
                node = Node(
                    f"{t}.{len(nxt)}", t, group, parent.id,
                    group.size / parent.n_members, group.size / K,
                )
                parent.children.append(node.id)
                nodes[node.id] = node
                nxt.append(node)
        frontier = nxt
    last = max((st.periods[-1] for st in spec.stages), default=0)
    return ScenarioTree(nodes, K, len(spec.stages), last)


# -- forward prices -----------------------------------------------------------

@dataclass(frozen=True)
class NodePrice:
    price: float
    quantity: float
    status: str  # an EqStatus value, or "error"
    bracket: tuple[float, float] = (float("nan"), float("nan"))
    message: str = ""


@dataclass
class ForwardPriceLattice:
    tree: ScenarioTree
    target: ContractSpec
    prices: dict[str, NodePrice]

    def to_dict(self) -> dict:
        out = []
        for nid, n in self.tree.nodes.items():
            p = self.prices.get(nid)
            out.append({
                "id": nid,
                "stage": n.stage,
                "parent": n.parent,
                "prob_from_parent": n.prob_from_parent,
                "path_prob": n.path_prob,
                "n_members": n.n_members,
                "members": n.members.tolist(),
                "price": None if p is None else p.price,
                "status": None if p is None else p.status,
            })
        return {
            "target": {"delivery_periods": list(self.target.delivery_periods), "shape": list(self.target.shape)},
            "num_scenarios": self.tree.num_scenarios,
            "num_stages": self.tree.num_stages,
            "last_period": self.tree.last_period,
            "nodes": out,
        }


def _thread_count() -> int:
    raw = os.environ.get("EQFORWARD_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"EQFORWARD_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigError("EQFORWARD_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _solve_node(cfg: MarketConfig, node: Node, target: ContractSpec) -> NodePrice:
    try:
        res = solve_equilibrium(cfg.restrict(node.members, target))
    except (EqForwardError, ValueError, ArithmeticError) as exc:
        return NodePrice(float("nan"), float("nan"), "error", message=f"{type(exc).__name__}: {exc}")
    return NodePrice(res.price, res.quantity, res.status.value, res.price_bracket)


def forward_price_lattice(tree: ScenarioTree, cfg: MarketConfig, target: ContractSpec | None = None,
                          threads: int | None = None) -> ForwardPriceLattice:
    """Equilibrium price of ``target`` on every node's member trajectories."""
    target = cfg.contract if target is None else target
    target.check_against(cfg.scenarios)
    if tree.num_scenarios != cfg.scenarios.num_scenarios:
        raise TopologyError("tree and market have different scenario counts")
    if target.delivery_periods[0] < tree.last_period:
        raise TopologyError(
            f"target delivery starts in period {target.delivery_periods[0]}, before clustering period {tree.last_period}"
        )
    nodes = list(tree.nodes.values())
    workers = min(threads or _thread_count(), len(nodes))
    if workers <= 1:
        results = [_solve_node(cfg, n, target) for n in nodes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda n: _solve_node(cfg, n, target), nodes))
    return ForwardPriceLattice(tree, target, {n.id: r for n, r in zip(nodes, results)})


def price_distribution(lattice: ForwardPriceLattice, stage: int) -> list[tuple[float, float]]:
    """(node price, path probability) for every node at ``stage``."""
    return [(lattice.prices[n.id].price, n.path_prob) for n in lattice.tree.stage_nodes(stage)]


def contract_value_distribution(lattice: ForwardPriceLattice, established_price: float, side: str,
                                stage: int) -> list[tuple[float, float]]:
    """Per-MWh mark-to-market value of an existing contract at each node of ``stage``."""
    side = side.lower()
    if side not in ("sell", "buy"):
        raise ValueError(f"side must be 'sell' or 'buy', got {side!r}")
    sign = 1.0 if side == "sell" else -1.0
    return [(sign * (established_price - p), w) for p, w in price_distribution(lattice, stage)]


def lattice_from_prices(tree: ScenarioTree, target: ContractSpec, prices: dict[str, float]) -> ForwardPriceLattice:
    """Lattice with externally supplied node prices (no solves)."""
    return ForwardPriceLattice(
        tree, target, {nid: NodePrice(float(p), float("nan"), EqStatus.OPTIMAL.value) for nid, p in prices.items()}
    )


def save_lattice(lattice: ForwardPriceLattice, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(lattice.to_dict(), fh, indent=1)


def load_lattice(path) -> ForwardPriceLattice:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        nodes, prices = {}, {}
        for d in doc["nodes"]:
            nodes[d["id"]] = Node(d["id"], int(d["stage"]), np.asarray(d.get("members", []), dtype=int),
                                  d["parent"], float(d["prob_from_parent"]), float(d["path_prob"]))
            if d.get("price") is not None:
                prices[d["id"]] = NodePrice(float(d["price"]), float("nan"), d.get("status") or "optimal")
        for n in nodes.values():
            if n.parent is not None:
                nodes[n.parent].children.append(n.id)
        target = ContractSpec(tuple(doc["target"]["delivery_periods"]), tuple(doc["target"]["shape"]))
        tree = ScenarioTree(nodes, int(doc["num_scenarios"]), int(doc["num_stages"]), int(doc.get("last_period", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed lattice file ({exc})") from exc
    return ForwardPriceLattice(tree, target, prices)


def write_distribution_csv(rows, path) -> None:
    """Rows of (stage, node, price, probability, value); numbers at 12 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "node", "price", "probability", "value"])
        for stage, node, price, prob, value in rows:
            w.writerow([stage, node, f"{price:.12g}", f"{prob:.12g}", f"{value:.12g}"])


def distribution_rows(lattice: ForwardPriceLattice, stage: int, established_price: float | None = None,
                      side: str = "sell"):
    nodes = lattice.tree.stage_nodes(stage)
    prices = [lattice.prices[n.id].price for n in nodes]
    if established_price is None:
        values = [float("nan")] * len(nodes)
    else:
        values = [v for v, _ in contract_value_distribution(lattice, established_price, side, stage)]
    return [(stage, n.id, p, n.path_prob, v) for n, p, v in zip(nodes, prices, values)]
