"""Left-tail CVaR of revenue samples and the mean/CVaR blend."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import EmptySample, NumericalBreakdown
from .lp_solver import LpProblem, LpStatus, solve


@dataclass(frozen=True)
class RiskParams:
    """``lam`` weights the expectation (1 = risk neutral); ``alpha`` is the CVaR level.

    ``alpha`` may be left as None and filled from a market-wide default.
    """

    lam: float
    alpha: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.alpha is not None and not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")

    def resolved(self, default_alpha: float) -> "RiskParams":
        return self if self.alpha is not None else RiskParams(self.lam, default_alpha)

    @property
    def tail_weight(self) -> float:
        """Objective weight of each tail variable: (1 - lam) / (1 - alpha), before dividing by K."""
        return (1.0 - self.lam) / (1.0 - self._alpha())

    def _alpha(self) -> float:
        if self.alpha is None:
            raise ValueError("alpha not set; resolve against a market default first")
        return self.alpha


def _sample(sample) -> np.ndarray:
    r = np.asarray(sample, dtype=float).ravel()
    if r.size == 0:
        raise EmptySample("CVaR of an empty sample")
    return r


def tail_mass(k: int, alpha: float) -> float:
    """Number of scenarios (possibly fractional) in the (1 - alpha) tail.

    Values within 1e-9 of an integer are snapped to it so that e.g. K=10,
    alpha=0.9 is treated as exactly one scenario.
    """
    c = k * (1.0 - alpha)
    r = round(c)
    return float(r) if abs(c - r) <= 1e-9 * max(1.0, c) else c


def tail_weights(k: int, alpha: float) -> np.ndarray:
    """Weights on ascending order statistics whose dot product with the sorted sample is the CVaR."""
    c = tail_mass(k, alpha)
    n = min(int(math.floor(c)), k)
    w = np.zeros(k)
    w[:n] = 1.0
    if n < k and c > n:
        w[n] = c - n
    return w / c


def cvar_sorted(sample, alpha: float) -> float:
    """Average of the worst ``1 - alpha`` probability mass of ``sample``."""
    r = np.sort(_sample(sample))
    return float(tail_weights(r.size, alpha) @ r)


def cvar_rockafellar(sample, alpha: float) -> tuple[float, float]:
    """CVaR via the linear program ``max a + sum(y) / (K (1 - alpha))``, ``y <= 0``, ``y <= R - a``.

    Returns (value, a_star) where a_star is the smallest maximizing threshold,
    obtained as a secondary objective on the optimal face.
    """
    r = _sample(sample)
    k = r.size
    c_mass = tail_mass(k, alpha)
    shift = float(r.min())
    # columns: a (free, shifted by min(R) so the origin is feasible), y_1..K <= 0
    c = np.concatenate([[1.0], np.full(k, 1.0 / c_mass)])
    A = sp.hstack([sp.csr_matrix(np.ones((k, 1))), sp.identity(k, format="csr")], format="csr")
    lb = np.concatenate([[-np.inf], np.full(k, -np.inf)])
    ub = np.concatenate([[np.inf], np.zeros(k)])
    sec = np.zeros(k + 1)
    sec[0] = -1.0
    p = LpProblem(c, A_ub=A, b_ub=r - shift, lb=lb, ub=ub, offset=shift)
    sol = solve(p, secondary=[sec])
    if sol.status is not LpStatus.OPTIMAL:
        raise NumericalBreakdown(f"CVaR LP ended with status {sol.status.value}")
    return sol.objective, float(sol.x[0] + shift)


def risk_adjusted(sample, params: RiskParams) -> float:
    """``lam * mean + (1 - lam) * CVaR_alpha`` of a revenue sample."""
    r = _sample(sample)
    alpha = params._alpha()
    return params.lam * float(r.mean()) + (1.0 - params.lam) * cvar_sorted(r, alpha)
