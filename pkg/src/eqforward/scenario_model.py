"""Discrete spot-price scenarios, agent profiles and contract shapes.

Periods are 1-based in every public interface (files, ``ContractSpec``, tree
stages) and dense: period ``m`` is row ``m - 1`` of the ``[M x K]`` matrices.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, ParseError


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScenarioSet:
    """K equally likely spot-price trajectories over M periods."""

    spot: np.ndarray  # [M, K] $/MWh
    period_labels: tuple[str, ...] = ()
    allow_negative: bool = False

    def __post_init__(self):
        spot = _frozen(self.spot)
        if spot.ndim == 1:
            spot = _frozen(spot[None, :])
        if spot.ndim != 2 or spot.shape[0] < 1 or spot.shape[1] < 1:
            raise DimensionError(f"spot must be a non-empty [M x K] matrix, got shape {spot.shape}")
        if not np.all(np.isfinite(spot)):
            raise ValueError("spot prices must be finite")
        if not self.allow_negative and np.any(spot < 0):
            raise ValueError("negative spot price (set allow_negative to accept)")
        labels = tuple(str(x) for x in self.period_labels) or tuple(str(m + 1) for m in range(spot.shape[0]))
        if len(labels) != spot.shape[0]:
            raise DimensionError(f"{len(labels)} period labels for {spot.shape[0]} periods")
        object.__setattr__(self, "spot", spot)
        object.__setattr__(self, "period_labels", labels)

    @property
    def num_periods(self) -> int:
        return self.spot.shape[0]

    @property
    def num_scenarios(self) -> int:
        return self.spot.shape[1]

    @property
    def probability(self) -> float:
        return 1.0 / self.num_scenarios

    def subset(self, members: Sequence[int]) -> "ScenarioSet":
        idx = np.asarray(members, dtype=int)
        return ScenarioSet(self.spot[:, idx], self.period_labels, self.allow_negative)

    def scaled(self, factor: float = 1.0, shift: float = 0.0) -> "ScenarioSet":
        return ScenarioSet(self.spot * factor + shift, self.period_labels, allow_negative=True)


@dataclass(frozen=True)
class ProfileSet:
    """Per-scenario physical energy of one agent (generation or load), MWh per period."""

    agent_id: str
    quantity: np.ndarray  # [M, K]

    def __post_init__(self):
        q = _frozen(self.quantity)
        if q.ndim == 1:
            q = _frozen(q[None, :])
        if q.ndim != 2:
            raise DimensionError("profile must be an [M x K] matrix")
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise ValueError(f"profile {self.agent_id!r} must be finite and nonnegative")
        object.__setattr__(self, "quantity", q)

    @classmethod
    def constant(cls, agent_id: str, value: float, scenarios: ScenarioSet) -> "ProfileSet":
        return cls(agent_id, np.full(scenarios.spot.shape, float(value)))

    def check_against(self, s: ScenarioSet) -> None:
        if self.quantity.shape != s.spot.shape:
            raise DimensionError(
                f"profile {self.agent_id!r} has shape {self.quantity.shape}, scenarios {s.spot.shape}"
            )

    def subset(self, members: Sequence[int]) -> "ProfileSet":
        return ProfileSet(self.agent_id, self.quantity[:, np.asarray(members, dtype=int)])

    def scaled(self, factor: float) -> "ProfileSet":
        return ProfileSet(self.agent_id, self.quantity * factor)


@dataclass(frozen=True)
class ContractSpec:
    """Flat-price contract delivered over ``delivery_periods`` (1-based) with shape ``shape``."""

    delivery_periods: tuple[int, ...]
    shape: tuple[float, ...] | None = None

    def __post_init__(self):
        periods = tuple(int(m) for m in self.delivery_periods)
        if not periods:
            raise ValueError("contract needs at least one delivery period")
        if any(b <= a for a, b in zip(periods, periods[1:])):
            raise ValueError("delivery periods must be strictly increasing")
        if periods[0] < 1:
            raise ValueError("delivery periods are 1-based")
        shape = (1.0,) * len(periods) if self.shape is None else tuple(float(v) for v in self.shape)
        if len(shape) != len(periods):
            raise ValueError("shape must have one entry per delivery period")
        if any(v < 0 or not np.isfinite(v) for v in shape) or max(shape) <= 0:
            raise ValueError("shape must be nonnegative with at least one positive entry")
        object.__setattr__(self, "delivery_periods", periods)
        object.__setattr__(self, "shape", shape)

    def check_against(self, s: ScenarioSet) -> None:
        if self.delivery_periods[-1] > s.num_periods:
            raise DimensionError(
                f"delivery period {self.delivery_periods[-1]} beyond horizon of {s.num_periods}"
            )

    @property
    def total_shape(self) -> float:
        return float(sum(self.shape))

    def shape_vector(self, num_periods: int) -> np.ndarray:
        """Shape expanded to all periods (zeros outside delivery)."""
        v = np.zeros(num_periods)
        v[np.asarray(self.delivery_periods) - 1] = self.shape
        return v

    def weighted_spot(self, s: ScenarioSet) -> np.ndarray:
        """Per-scenario sum of shape-weighted delivery-period spot prices, $/MWh * MWh-shape."""
        self.check_against(s)
        return self.shape_vector(s.num_periods) @ s.spot


def shape_weighted_mean_spot(s: ScenarioSet, c: ContractSpec) -> float:
    return float(c.weighted_spot(s).mean() / c.total_shape)


# -- files -------------------------------------------------------------------

def _read_header_labels(lines: list[str]) -> tuple[list[str] | None, list[str]]:
    labels = None
    body = []
    for line in lines:
        stripped = line.strip()
        if stripped.startswith("#"):
            key, _, val = stripped[1:].partition(":")
            if key.strip().lower() == "periods":
                labels = [v.strip() for v in val.split(",") if v.strip()]
            continue
        if stripped:
            body.append(line)
    return labels, body


def _read_grid(path: Path, value_col: str) -> tuple[np.ndarray, list[str] | None]:
    """Parse a long-format ``scenario,period,<value_col>`` CSV into an [M, K] matrix."""
    with open(path, newline="", encoding="utf-8") as fh:
        labels, body = _read_header_labels(fh.readlines())
    reader = csv.DictReader(body)
    if reader.fieldnames is None:
        raise ParseError(f"{path}: empty file")
    fields = [f.strip() for f in reader.fieldnames]
    reader.fieldnames = fields
    need = {"scenario", "period", value_col}
    if not need <= set(fields):
        raise ParseError(f"{path}: header must contain {sorted(need)}, got {fields}")
    cells: dict[tuple[int, int], float] = {}
    weights = set()
    for lineno, row in enumerate(reader, start=2):
        try:
            k = int(row["scenario"])
            m = int(row["period"])
            v = float(row[value_col])
            if "probability" in row and row["probability"] not in (None, ""):
                weights.add(float(row["probability"]))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}:{lineno}: malformed row {row!r}") from exc
        if k < 1 or m < 1:
            raise ParseError(f"{path}:{lineno}: scenario and period are 1-based")
        if (k, m) in cells:
            raise ParseError(f"{path}:{lineno}: duplicate cell scenario={k} period={m}")
        cells[(k, m)] = v
    if len(weights) > 1:
        raise ValueError(f"{path}: non-uniform scenario probabilities are not supported")
    if not cells:
        raise DimensionError(f"{path}: no data rows")
    K = max(k for k, _ in cells)
    M = max(m for _, m in cells)
    if labels is not None and len(labels) != M:
        raise DimensionError(f"{path}: header declares {len(labels)} periods, data has {M}")
    grid = np.full((M, K), np.nan)
    for (k, m), v in cells.items():
        grid[m - 1, k - 1] = v
    missing = np.argwhere(np.isnan(grid))
    if missing.size:
        m, k = missing[0]
        raise DimensionError(f"{path}: missing cell scenario={k + 1} period={m + 1} ({len(missing)} total)")
    return grid, labels


def load_scenarios(path, format: str | None = None, allow_negative: bool = False) -> ScenarioSet:
    """Read scenarios from CSV (``scenario,period,spot``) or JSON.

    CSV files may declare period labels with a leading ``# periods: a,b,c``
    comment, listed in period order.  JSON files hold
    ``{"periods": [...], "scenarios": [[spot per period], ...]}`` with one inner
    list per scenario.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        grid, labels = _read_grid(path, "spot")
        return ScenarioSet(grid, tuple(labels or ()), allow_negative)
    if fmt == "json":
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            periods = [str(p) for p in doc["periods"]]
            rows = doc["scenarios"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if not rows:
            raise DimensionError(f"{path}: no scenarios")
        if any(len(r) != len(periods) for r in rows):
            raise DimensionError(f"{path}: every scenario needs {len(periods)} period values")
        try:
            spot = np.array(rows, dtype=float).T
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: non-numeric spot value") from exc
        if "probabilities" in doc and len(set(doc["probabilities"])) > 1:
            raise ValueError(f"{path}: non-uniform scenario probabilities are not supported")
        return ScenarioSet(spot, tuple(periods), allow_negative)
    raise ParseError(f"unsupported scenario format {fmt!r}")


def load_profile(path, agent_id: str) -> ProfileSet:
    grid, _ = _read_grid(Path(path), "quantity")
    return ProfileSet(agent_id, grid)


def _write_grid(path, grid: np.ndarray, value_col: str, labels=None) -> None:
    M, K = grid.shape
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if labels:
            fh.write("# periods: " + ",".join(labels) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "period", value_col])
        for k in range(K):
            for m in range(M):
                w.writerow([k + 1, m + 1, repr(float(grid[m, k]))])


def save_scenarios(s: ScenarioSet, path, format: str | None = None) -> None:
    """Write ``s`` so that :func:`load_scenarios` reproduces it bit for bit."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        _write_grid(path, s.spot, "spot", s.period_labels)
    elif fmt == "json":
        doc = {"periods": list(s.period_labels), "scenarios": s.spot.T.tolist()}
        path.write_text(json.dumps(doc), encoding="utf-8")
    else:
        raise ParseError(f"unsupported scenario format {fmt!r}")


def save_profile(p: ProfileSet, path) -> None:
    _write_grid(path, p.quantity, "quantity")


def summary(s: ScenarioSet) -> dict:
    """Per-period mean, min, max and quartiles of spot prices."""
    q = np.quantile(s.spot, [0.0, 0.25, 0.5, 0.75, 1.0], axis=1)
    return {
        label: {
            "mean": float(s.spot[m].mean()),
            "min": float(q[0, m]),
            "p25": float(q[1, m]),
            "median": float(q[2, m]),
            "p75": float(q[3, m]),
            "max": float(q[4, m]),
        }
        for m, label in enumerate(s.period_labels)
    }
