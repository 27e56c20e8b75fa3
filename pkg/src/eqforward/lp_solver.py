"""Dense revised simplex for small and medium linear programs.

Problems are maximizations::

    max  c @ x + offset
    s.t. A_eq @ x == b_eq
         A_ub @ x <= b_ub
         lb <= x <= ub          (entries may be infinite)

The solver is a two-phase primal simplex over bounded variables.  Slack and
artificial columns are unit vectors, so the basis is factored by a dense LU of
the non-unit "kernel" only; between refactorizations the basis is updated in
product form (an eta file).  Duals are reported with the sensitivity
convention: ``eq_duals[i]`` and ``ineq_duals[i]`` are the rate of change of the
optimal objective per unit increase of the corresponding right-hand side, so
inequality duals are nonnegative.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import NumericalBreakdown

TOL_FEAS = 1e-7
TOL_OPT = 1e-7
TOL_GAP = 1e-6
TOL_COMP = 1e-6
TOL_PIVOT = 1e-9
TOL_HARRIS = 1e-11  # bound overshoot allowed when choosing among tied ratios, relative

_BASIC, _LOWER, _UPPER, _FREE = 0, 1, 2, 3


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


def _as_csr(a, n: int) -> sp.csr_matrix:
    if a is None:
        return sp.csr_matrix((0, n))
    m = sp.csr_matrix(a, dtype=float)
    if m.shape[1] != n:
        raise ValueError(f"constraint matrix has {m.shape[1]} columns, expected {n}")
    return m


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A_eq: sp.csr_matrix | None = None
    b_eq: np.ndarray | None = None
    A_ub: sp.csr_matrix | None = None
    b_ub: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    offset: float = 0.0
    var_names: tuple[str, ...] | None = None
    eq_names: tuple[str, ...] | None = None
    ub_names: tuple[str, ...] | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        set_ = object.__setattr__
        set_(self, "c", c)
        set_(self, "A_eq", _as_csr(self.A_eq, n))
        set_(self, "A_ub", _as_csr(self.A_ub, n))
        b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).ravel()
        b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, dtype=float).ravel()
        if b_eq.size != self.A_eq.shape[0] or b_ub.size != self.A_ub.shape[0]:
            raise ValueError("right-hand side length does not match constraint rows")
        set_(self, "b_eq", b_eq)
        set_(self, "b_ub", b_ub)
        lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float).ravel()
        ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).ravel()
        if lb.size != n or ub.size != n:
            raise ValueError("bounds must have one entry per variable")
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(lb == np.inf) or np.any(ub == -np.inf):
            raise ValueError("infinite bound on the wrong side")
        set_(self, "lb", lb)
        set_(self, "ub", ub)
        for name, size in (("var_names", n), ("eq_names", b_eq.size), ("ub_names", b_ub.size)):
            val = getattr(self, name)
            if val is not None:
                val = tuple(val)
                if len(val) != size:
                    raise ValueError(f"{name} has {len(val)} entries, expected {size}")
                set_(self, name, val)
        for arr in (c, b_eq, b_ub, lb, ub):
            arr.setflags(write=False)

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_eq(self) -> int:
        return self.b_eq.size

    @property
    def num_ub(self) -> int:
        return self.b_ub.size

    def var_index(self, name: str) -> int:
        return self.var_names.index(name)

    def eq_index(self, name: str) -> int:
        return self.eq_names.index(name)

    def ub_index(self, name: str) -> int:
        return self.ub_names.index(name)

    def with_rhs(self, b_eq=None, b_ub=None) -> "LpProblem":
        return LpProblem(
            self.c, self.A_eq, self.b_eq if b_eq is None else b_eq,
            self.A_ub, self.b_ub if b_ub is None else b_ub,
            self.lb, self.ub, self.offset, self.var_names, self.eq_names, self.ub_names,
        )


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float = float("nan")
    eq_duals: np.ndarray | None = None
    ineq_duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    ray: np.ndarray | None = None
    iterations: int = 0
    primal_residual: float = float("nan")
    complementarity: float = float("nan")
    duality_gap: float = float("nan")
    # one entry per secondary objective: (status, x on the optimal face)
    secondary: tuple = field(default_factory=tuple)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Simplex:
    """Working state of one solve.  Column layout: structural | slack | artificial."""

    def __init__(self, p: LpProblem, refactor_every: int, bland_after: int, max_iter: int | None):
        self.p = p
        n = p.num_vars
        m_eq, m_ub = p.num_eq, p.num_ub
        m = m_eq + m_ub
        self.n, self.m, self.m_eq = n, m, m_eq
        A = sp.vstack([p.A_eq, p.A_ub], format="csc") if m else sp.csc_matrix((0, n))
        self.b = np.concatenate([p.b_eq, p.b_ub])
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.max_iter = max_iter if max_iter is not None else 50 * (m + n) + 1000
        self.iterations = 0

        lb = list(p.lb) + [0.0] * m_ub
        ub = list(p.ub) + [np.inf] * m_ub
        # unit columns: row index and sign; -1 marks a structural column
        unit_row = [-1] * n + list(range(m_eq, m))
        unit_sign = [0.0] * n + [1.0] * m_ub

        x = np.zeros(n + m_ub)
        state = np.empty(n + m_ub, dtype=np.int8)
        for j in range(n):
            if np.isfinite(lb[j]):
                x[j], state[j] = lb[j], _LOWER
            elif np.isfinite(ub[j]):
                x[j], state[j] = ub[j], _UPPER
            else:
                x[j], state[j] = 0.0, _FREE
        resid = self.b - (A @ x[:n] if m else np.zeros(0))

        basis = np.empty(m, dtype=np.int64)
        art_cols = []
        ncol = n + m_ub
        for i in range(m):
            if i >= m_eq and resid[i] >= -TOL_FEAS:
                j = n + (i - m_eq)
                basis[i] = j
                x[j] = max(resid[i], 0.0)
                state[j] = _BASIC
                continue
            if i >= m_eq:
                state[n + (i - m_eq)] = _LOWER
            sign = 1.0 if resid[i] >= 0 else -1.0
            art_cols.append((i, sign))
            basis[i] = ncol
            ncol += 1
        n_art = len(art_cols)
        art_val = np.array([abs(resid[i]) for i, _ in art_cols])
        x = np.concatenate([x, art_val])
        state = np.concatenate([state, np.full(n_art, _BASIC, dtype=np.int8)])
        lb += [0.0] * n_art
        ub += [np.inf] * n_art
        unit_row += [i for i, _ in art_cols]
        unit_sign += [s for _, s in art_cols]

        blocks = [A]
        if m_ub:
            blocks.append(sp.vstack([sp.csc_matrix((m_eq, m_ub)), sp.identity(m_ub, format="csc")]))
        if n_art:
            rows = [i for i, _ in art_cols]
            vals = [s for _, s in art_cols]
            blocks.append(sp.csc_matrix((vals, (rows, range(n_art))), shape=(m, n_art)))
        self.A = sp.hstack(blocks, format="csc") if m else sp.csc_matrix((0, ncol))
        self.AT = self.A.T.tocsr()
        self.ncol = ncol
        self.n_art = n_art
        self.art_start = n + m_ub
        self.lb = np.array(lb, dtype=float)
        self.ub = np.array(ub, dtype=float)
        self.unit_row = np.array(unit_row, dtype=np.int64)
        self.unit_sign = np.array(unit_sign, dtype=float)
        self.x = x
        self.state = state
        self.basis = basis
        self.refactor()

    # -- factorization ------------------------------------------------------
    def refactor(self):
        m = self.m
        rows_u = self.unit_row[self.basis]
        is_unit = rows_u >= 0
        self.pos_unit = np.flatnonzero(is_unit)
        self.pos_kern = np.flatnonzero(~is_unit)
        self.rows_unit = rows_u[is_unit]
        self.sign_unit = self.unit_sign[self.basis[is_unit]]
        covered = np.zeros(m, dtype=bool)
        covered[self.rows_unit] = True
        if covered.sum() != self.rows_unit.size:
            raise NumericalBreakdown("basis contains two unit columns on the same row")
        self.rows_kern = np.flatnonzero(~covered)
        if self.rows_kern.size != self.pos_kern.size:
            raise NumericalBreakdown("basis dimension mismatch")
        cols = self.A[:, self.basis[self.pos_kern]]
        self.kern_other = cols[self.rows_unit, :].tocsr()
        kern = cols[self.rows_kern, :].toarray()
        self.kern_size = kern.shape[0]
        if self.kern_size:
            lu, piv = sla.lu_factor(kern, check_finite=False)
            d = np.abs(np.diag(lu))
            if d.min() <= 1e-11 * max(1.0, d.max()):
                raise NumericalBreakdown("singular basis")
            self.lu = (lu, piv)
        self.etas: list[tuple[int, np.ndarray]] = []

    def _ftran0(self, r: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        if self.kern_size:
            xk = sla.lu_solve(self.lu, r[self.rows_kern], check_finite=False)
            out[self.pos_kern] = xk
            out[self.pos_unit] = self.sign_unit * (r[self.rows_unit] - self.kern_other @ xk)
        else:
            out[self.pos_unit] = self.sign_unit * r[self.rows_unit]
        return out

    def _btran0(self, cb: np.ndarray) -> np.ndarray:
        y = np.empty(self.m)
        yu = self.sign_unit * cb[self.pos_unit]
        y[self.rows_unit] = yu
        if self.kern_size:
            rhs = cb[self.pos_kern] - self.kern_other.T @ yu
            y[self.rows_kern] = sla.lu_solve(self.lu, rhs, trans=1, check_finite=False)
        return y

    def ftran(self, r: np.ndarray) -> np.ndarray:
        v = self._ftran0(r)
        for pos, alpha in self.etas:
            t = v[pos] / alpha[pos]
            v -= t * alpha
            v[pos] = t
        return v

    def btran(self, cb: np.ndarray) -> np.ndarray:
        z = cb.copy()
        for pos, alpha in reversed(self.etas):
            zp = z[pos]
            z[pos] = 0.0
            z[pos] = (zp - alpha @ z) / alpha[pos]
        return self._btran0(z)

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        a = self.A
        s, e = a.indptr[j], a.indptr[j + 1]
        col[a.indices[s:e]] = a.data[s:e]
        return col

    def recompute_basic(self):
        xn = self.x.copy()
        xn[self.basis] = 0.0
        r = self.b - self.A @ xn
        self.x[self.basis] = self.ftran(r)

    # -- main loop ----------------------------------------------------------
    def run(self, cost: np.ndarray) -> tuple[str, object]:
        """Optimize ``cost`` from the current basis; returns (outcome, payload)."""
        stall = 0
        bland = False
        m = self.m
        while True:
            if self.iterations >= self.max_iter:
                return "limit", None
            y = self.btran(cost[self.basis]) if m else np.zeros(0)
            d = cost - self.AT @ y if m else cost.copy()
            st = self.state
            movable = self.ub > self.lb
            cand = np.where(
                ((st == _LOWER) & (d > TOL_OPT)) | ((st == _UPPER) & (d < -TOL_OPT))
                | ((st == _FREE) & (np.abs(d) > TOL_OPT)),
                True, False,
            ) & movable
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return "optimal", (y, d)
            if bland:
                q = int(idx[0])
            else:
                q = int(idx[np.argmax(np.abs(d[idx]))])
            dirn = 1.0 if d[q] > 0 else -1.0
            alpha = self.ftran(self.column(q)) if m else np.zeros(0)
            dx = -dirn * alpha
            xb = self.x[self.basis]
            lbb, ubb = self.lb[self.basis], self.ub[self.basis]

            flip = self.ub[q] - self.lb[q]
            dec = (dx < -TOL_PIVOT) & np.isfinite(lbb)
            inc = (dx > TOL_PIVOT) & np.isfinite(ubb)
            ratio = np.full(m, np.inf)
            relaxed = np.full(m, np.inf)
            ratio[dec] = (xb[dec] - lbb[dec]) / -dx[dec]
            relaxed[dec] = (xb[dec] - lbb[dec] + TOL_HARRIS * np.maximum(1.0, np.abs(lbb[dec]))) / -dx[dec]
            ratio[inc] = (ubb[inc] - xb[inc]) / dx[inc]
            relaxed[inc] = (ubb[inc] - xb[inc] + TOL_HARRIS * np.maximum(1.0, np.abs(ubb[inc]))) / dx[inc]
            ratio = np.maximum(ratio, 0.0)

            r = -1
            if m and np.isfinite(relaxed).any():
                if bland:
                    tmin = ratio.min()
                    ties = np.flatnonzero(ratio <= tmin + 1e-12 * max(1.0, tmin))
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    tmax = max(relaxed.min(), 0.0)
                    ok = np.flatnonzero(ratio <= tmax)
                    r = int(ok[np.argmax(np.abs(dx[ok]))])
                step = ratio[r]
            else:
                step = np.inf
            if flip <= step:
                if not np.isfinite(flip):
                    ray = np.zeros(self.ncol)
                    ray[q] = dirn
                    ray[self.basis] = dx
                    return "unbounded", ray
                step, r = flip, -1

            self.iterations += 1
            gain = abs(d[q]) * step
            if gain <= 1e-12 * max(1.0, abs(float(cost @ self.x))):
                stall += 1
                if stall > self.bland_after:
                    bland = True
            else:
                stall = 0
                bland = False

            if m:
                self.x[self.basis] = xb + step * dx
            self.x[q] += dirn * step
            if r < 0:
                self.state[q] = _UPPER if dirn > 0 else _LOWER
                continue
            leave = self.basis[r]
            if dx[r] < 0:
                self.x[leave], self.state[leave] = self.lb[leave], _LOWER
            else:
                self.x[leave], self.state[leave] = self.ub[leave], _UPPER
            self.basis[r] = q
            self.state[q] = _BASIC
            self.etas.append((r, alpha))
            if len(self.etas) >= self.refactor_every:
                self.refactor()
                self.recompute_basic()


def _residuals(p: LpProblem, x: np.ndarray, y_eq, y_ub, d) -> tuple[float, float]:
    ax_eq = p.A_eq @ x
    ax_ub = p.A_ub @ x
    res = 0.0
    if p.num_eq:
        scale = np.maximum(1.0, abs(p.A_eq).max(axis=1).toarray().ravel())
        res = max(res, float(np.max(np.abs(ax_eq - p.b_eq) / scale)))
    if p.num_ub:
        scale = np.maximum(1.0, abs(p.A_ub).max(axis=1).toarray().ravel())
        res = max(res, float(np.max(np.maximum(ax_ub - p.b_ub, 0.0) / scale)))
    with np.errstate(invalid="ignore"):
        res = max(res, float(np.max(np.maximum(p.lb - x, 0.0), initial=0.0)))
        res = max(res, float(np.max(np.maximum(x - p.ub, 0.0), initial=0.0)))
    comp = 0.0
    if p.num_ub:
        slack = p.b_ub - ax_ub
        comp = max(comp, float(np.max(np.abs(y_ub * slack))))
    gap_lo = np.where(np.isfinite(p.lb), np.abs(x - p.lb), np.inf)
    gap_hi = np.where(np.isfinite(p.ub), np.abs(p.ub - x), np.inf)
    dist = np.minimum(gap_lo, gap_hi)
    dist = np.where(np.isfinite(dist), dist, np.abs(x))
    if x.size:
        comp = max(comp, float(np.max(np.abs(d) * dist)))
    return res, comp


def solve(
    p: LpProblem,
    *,
    secondary: Sequence[np.ndarray] = (),
    refactor_every: int = 50,
    bland_after: int = 200,
    max_iter: int | None = None,
) -> LpSolution:
    """Solve ``p`` to optimality.

    ``secondary`` objectives (maximized) are optimized in turn over the optimal
    face of the primary problem, each starting from the primary optimal basis.
    Nonbasic columns with nonzero reduced cost are pinned at their bound, which
    keeps the reported primary duals valid for every returned point.  The
    solution's ``x`` is the primary optimum when no secondary is given and the
    first secondary's point otherwise.
    """
    s = _Simplex(p, refactor_every, bland_after, max_iter)
    n, m = s.n, s.m
    # phase 1
    if s.n_art and np.any(s.x[s.art_start:] > TOL_FEAS):
        cost1 = np.zeros(s.ncol)
        cost1[s.art_start:] = -1.0
        outcome, _ = s.run(cost1)
        if outcome == "limit":
            return LpSolution(LpStatus.ITERATION_LIMIT, iterations=s.iterations)
        s.recompute_basic()
        infeas = float(np.sum(s.x[s.art_start:]))
        if infeas > TOL_FEAS * max(1.0, float(np.max(np.abs(s.b), initial=0.0))):
            return LpSolution(LpStatus.INFEASIBLE, iterations=s.iterations)
    s.ub[s.art_start:] = 0.0
    s.x[s.art_start:] = np.where(s.state[s.art_start:] == _BASIC, s.x[s.art_start:], 0.0)
    s.state[s.art_start:] = np.where(s.state[s.art_start:] == _BASIC, _BASIC, _LOWER)

    cost = np.zeros(s.ncol)
    cost[:n] = p.c
    outcome, payload = s.run(cost)
    if outcome == "limit":
        return LpSolution(LpStatus.ITERATION_LIMIT, iterations=s.iterations)
    if outcome == "unbounded":
        ray = payload[:n].copy()
        return LpSolution(LpStatus.UNBOUNDED, ray=ray, iterations=s.iterations)

    s.refactor()
    s.recompute_basic()
    y = s.btran(cost[s.basis]) if m else np.zeros(0)
    d = cost - s.AT @ y if m else cost.copy()
    x = s.x[:n].copy()
    objective = float(p.c @ x) + p.offset
    y_eq, y_ub = y[: s.m_eq], y[s.m_eq:]
    dual_obj = float(s.b @ y) + float(d[:n] @ x) + float(d[n:] @ s.x[n:]) + p.offset
    gap = abs(objective - dual_obj) / max(1.0, abs(objective))
    res, comp = _residuals(p, x, y_eq, y_ub, d[:n])
    if gap > TOL_GAP:
        raise NumericalBreakdown(f"duality gap {gap:.3e} after optimal termination")
    if res > TOL_FEAS * 10 or comp > TOL_COMP:
        raise NumericalBreakdown(f"post-solve residuals primal={res:.3e} complementarity={comp:.3e}")
    dual_sign = float(np.max(-y_ub, initial=0.0))
    if dual_sign > TOL_OPT * 10:
        raise NumericalBreakdown(f"inequality dual of wrong sign ({-dual_sign:.3e})")

    sec = []
    x_report = x
    if secondary:
        pin = (s.state != _BASIC) & (np.abs(d) > TOL_OPT)
        saved = (s.x.copy(), s.state.copy(), s.basis.copy(), s.lb.copy(), s.ub.copy())
        for k, c2 in enumerate(secondary):
            s.x, s.state, s.basis = saved[0].copy(), saved[1].copy(), saved[2].copy()
            s.lb, s.ub = saved[3].copy(), saved[4].copy()
            s.lb[pin] = s.x[pin]
            s.ub[pin] = s.x[pin]
            s.refactor()
            cost2 = np.zeros(s.ncol)
            cost2[:n] = np.asarray(c2, dtype=float)
            out2, _ = s.run(cost2)
            if out2 == "optimal":
                s.refactor()
                s.recompute_basic()
                sec.append((LpStatus.OPTIMAL, s.x[:n].copy()))
            elif out2 == "unbounded":
                sec.append((LpStatus.UNBOUNDED, None))
            else:
                sec.append((LpStatus.ITERATION_LIMIT, None))
        if sec[0][0] is LpStatus.OPTIMAL:
            x_report = sec[0][1]

    return LpSolution(
        LpStatus.OPTIMAL,
        x=x_report,
        objective=objective,
        eq_duals=y_eq.copy(),
        ineq_duals=y_ub.copy(),
        reduced_costs=d[:n].copy(),
        iterations=s.iterations,
        primal_residual=res,
        complementarity=comp,
        duality_gap=gap,
        secondary=tuple(sec),
    )


# -- MPS ---------------------------------------------------------------------

def _fmt(v: float) -> str:
    """Most precise representation fitting a 12-character fixed-format field."""
    for digits in range(12, 0, -1):
        s = f"{v:.{digits}g}"
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot write {v!r} in 12 characters")


def write_mps(p: LpProblem, path, name: str = "EQFWD") -> None:
    """Dump ``p`` in fixed-format MPS.

    Fixed MPS minimizes, so the objective row holds ``-c``.  Names are replaced
    by 8-character ordinal labels (C0000001, E0000001, L0000001).
    """
    n = p.num_vars
    cols = [f"C{j + 1:07d}" for j in range(n)]
    eqs = [f"E{i + 1:07d}" for i in range(p.num_eq)]
    ubs = [f"L{i + 1:07d}" for i in range(p.num_ub)]
    lines = [f"NAME          {name}", "* objective negated: source problem is a maximization"]
    if p.offset:
        lines.append(f"* objective offset (not encoded): {p.offset!r}")
    lines.append("ROWS")
    lines.append(" N  COST")
    lines += [f" E  {r}" for r in eqs]
    lines += [f" L  {r}" for r in ubs]
    lines.append("COLUMNS")
    a_eq = p.A_eq.tocsc()
    a_ub = p.A_ub.tocsc()

    def field_line(c, r, v):
        return f"    {c:<8}  {r:<8}  {_fmt(v):>12}"

    for j in range(n):
        if p.c[j] != 0:
            lines.append(field_line(cols[j], "COST", -p.c[j]))
        for mat, names in ((a_eq, eqs), (a_ub, ubs)):
            s, e = mat.indptr[j], mat.indptr[j + 1]
            for i, v in zip(mat.indices[s:e], mat.data[s:e]):
                if v != 0:
                    lines.append(field_line(cols[j], names[i], v))
    lines.append("RHS")
    for b, names in ((p.b_eq, eqs), (p.b_ub, ubs)):
        for i, v in enumerate(b):
            if v != 0:
                lines.append(field_line("RHS", names[i], v))
    lines.append("BOUNDS")
    for j in range(n):
        lo, hi = p.lb[j], p.ub[j]
        c = cols[j]
        if lo == hi:
            lines.append(f" FX BND       {c:<8}  {_fmt(lo):>12}")
            continue
        if lo == -np.inf and hi == np.inf:
            lines.append(f" FR BND       {c:<8}")
            continue
        if lo == -np.inf:
            lines.append(f" MI BND       {c:<8}")
        elif lo != 0:
            lines.append(f" LO BND       {c:<8}  {_fmt(lo):>12}")
        if hi != np.inf:
            lines.append(f" UP BND       {c:<8}  {_fmt(hi):>12}")
    lines.append("ENDATA")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mps(path) -> LpProblem:
    """Read a fixed-format MPS file written by :func:`write_mps` (maximization restored)."""
    rows: dict[str, str] = {}
    obj = None
    col_index: dict[str, int] = {}
    entries: list[tuple[str, int, float]] = []
    cost: dict[int, float] = {}
    rhs: dict[str, float] = {}
    bounds: list[tuple[str, int, float]] = []
    section = None
    with open(path, encoding="ascii") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line.startswith(" "):
                section = line.split()[0]
                continue
            f = line.split()
            if section == "ROWS":
                kind, rname = f
                if kind == "N":
                    obj = rname
                else:
                    rows[rname] = kind
            elif section == "COLUMNS":
                cname = f[0]
                j = col_index.setdefault(cname, len(col_index))
                for rname, val in zip(f[1::2], f[2::2]):
                    if rname == obj:
                        cost[j] = -float(val)
                    else:
                        entries.append((rname, j, float(val)))
            elif section == "RHS":
                for rname, val in zip(f[1::2], f[2::2]):
                    rhs[rname] = float(val)
            elif section == "BOUNDS":
                kind, cname = f[0], f[2]
                val = float(f[3]) if len(f) > 3 else 0.0
                bounds.append((kind, col_index.setdefault(cname, len(col_index)), val))
    n = len(col_index)
    eq_rows = [r for r, k in rows.items() if k == "E"]
    ub_rows = [r for r, k in rows.items() if k == "L"]
    ge_rows = [r for r, k in rows.items() if k == "G"]
    ub_all = ub_rows + ge_rows
    eq_pos = {r: i for i, r in enumerate(eq_rows)}
    ub_pos = {r: i for i, r in enumerate(ub_all)}
    A_eq = sp.lil_matrix((len(eq_rows), n))
    A_ub = sp.lil_matrix((len(ub_all), n))
    ge = set(ge_rows)
    for rname, j, v in entries:
        if rname in eq_pos:
            A_eq[eq_pos[rname], j] = v
        else:
            A_ub[ub_pos[rname], j] = -v if rname in ge else v
    b_eq = np.array([rhs.get(r, 0.0) for r in eq_rows])
    b_ub = np.array([-rhs.get(r, 0.0) if r in ge else rhs.get(r, 0.0) for r in ub_all])
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for kind, j, v in bounds:
        if kind == "FX":
            lb[j] = ub[j] = v
        elif kind == "FR":
            lb[j], ub[j] = -np.inf, np.inf
        elif kind == "MI":
            lb[j] = -np.inf
        elif kind == "LO":
            lb[j] = v
        elif kind == "UP":
            ub[j] = v
    return LpProblem(c, A_eq, b_eq, A_ub, b_ub, lb, ub)
