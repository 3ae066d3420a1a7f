"""Bounded-variable revised simplex for the LP relaxations.

Solves min c.x s.t. A x >= b, l <= x <= u, where l/u combine instance bounds
with per-node overrides (branching decisions).  Cold solves run a two-phase
method with artificial variables; child re-solves warm-start from the parent
basis with the dual simplex and fall back to a cold solve on any numerical
trouble.  Dantzig pricing with Bland's rule after a stall; the basis inverse
is refactorized every 50 pivots.  Dense algebra throughout: desk-scale sizes
do not justify sparse factorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import FEAS_TOL, LpSolution, LpStatus, MilpInstance, VarStatus

DUAL_TOL = 1e-7
PIV_TOL = 1e-9
REFACTOR_EVERY = 50

_AT_LOWER, _AT_UPPER, _BASIC, _FREE = 0, 1, 2, 3

_STATUS_MAP = {
    _AT_LOWER: VarStatus.AT_LOWER,
    _AT_UPPER: VarStatus.AT_UPPER,
    _BASIC: VarStatus.BASIC,
    _FREE: VarStatus.NONBASIC_FREE,
}


class NumericalBreakdown(RuntimeError):
    """Pivot limit exceeded or the basis became numerically unusable."""


@dataclass
class BoundSet:
    """Per-variable (lower, upper) overrides layered on the instance bounds."""

    overrides: dict[int, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for j, (lo, hi) in self.overrides.items():
            if lo > hi:
                raise ValueError(f"override at {j} has lower {lo} > upper {hi}")

    def child(self, j: int, lo: float, hi: float) -> "BoundSet":
        merged = dict(self.overrides)
        merged[j] = (lo, hi)
        return BoundSet(merged)

    def apply(self, instance: MilpInstance) -> tuple[np.ndarray, np.ndarray]:
        lower = instance.var_lower.copy()
        upper = instance.var_upper.copy()
        for j, (lo, hi) in self.overrides.items():
            lower[j] = lo
            upper[j] = hi
        return lower, upper


class LpWorkspace:
    """Per-instance dense data reused across the many solves of a B&B run.

    Column layout: [0, n) structural, [n, n+m) surplus (coefficient -1),
    [n+m, n+2m) artificial (coefficient +1, pinned to [0, 0] outside phase 1).
    Also meters how many basis inverses solutions may retain for warm starts
    (a cache that avoids refactorizing on every child solve).
    """

    def __init__(self, instance: MilpInstance) -> None:
        self.instance = instance
        n, m = instance.num_vars, instance.num_cons
        self.n, self.m = n, m
        self.ncols = n + 2 * m
        a = np.zeros((m, self.ncols))
        a[:, :n] = instance.dense_matrix()
        for i in range(m):
            a[i, n + i] = -1.0
            a[i, n + m + i] = 1.0
        self.a_ext = a
        self.rhs = instance.rhs.astype(float)
        self.cost2 = np.zeros(self.ncols)
        self.cost2[:n] = instance.obj
        self.binv_live = 0
        binv_bytes = max(1, m * m * 8)
        self.binv_cap = max(8, int(256e6 / binv_bytes))

    def retain_binv(self, binv: np.ndarray) -> np.ndarray | None:
        if self.binv_live >= self.binv_cap:
            return None
        self.binv_live += 1
        return binv  # solver instance is discarded after extract; safe to alias

    def release_binv(self, sol: "LpSolution") -> None:
        if getattr(sol, "binv", None) is not None:
            sol.binv = None
            self.binv_live -= 1


class _Solver:
    def __init__(self, ws: LpWorkspace, lower: np.ndarray, upper: np.ndarray,
                 max_iters: int) -> None:
        n, m, ncols = ws.n, ws.m, ws.ncols
        self.ws = ws
        self.lower = np.full(ncols, 0.0)
        self.upper = np.full(ncols, math.inf)
        self.lower[:n] = lower
        self.upper[:n] = upper
        self.upper[n + m:] = 0.0  # artificials pinned unless phase 1 opens them
        self.basis = np.zeros(m, dtype=np.int64)
        self.stat = np.full(ncols, _AT_LOWER, dtype=np.int8)
        self.x = np.zeros(ncols)
        self.binv = np.zeros((m, m))
        self.iters = 0
        self.max_iters = max_iters
        self.pivots_since_refactor = 0

    # -- factorization ----------------------------------------------------

    def factorize(self) -> None:
        m = self.ws.m
        if m == 0:
            self.binv = np.zeros((0, 0))
            return
        try:
            self.binv = np.linalg.inv(self.ws.a_ext[:, self.basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("singular basis") from exc
        if not np.all(np.isfinite(self.binv)):
            raise NumericalBreakdown("non-finite basis inverse")
        self.pivots_since_refactor = 0

    def recompute_basics(self) -> None:
        xn = self.x.copy()
        xn[self.basis] = 0.0
        resid = self.ws.rhs - self.ws.a_ext @ xn
        self.x[self.basis] = self.binv @ resid

    def _set_nonbasic_values(self) -> None:
        nb_low = self.stat == _AT_LOWER
        nb_up = self.stat == _AT_UPPER
        self.x[nb_low] = self.lower[nb_low]
        self.x[nb_up] = self.upper[nb_up]
        self.x[self.stat == _FREE] = 0.0

    def _update_binv(self, ucol: np.ndarray, r: int) -> None:
        ur = ucol[r]
        if abs(ur) < 1e-11:
            raise NumericalBreakdown("pivot element too small")
        row_r = self.binv[r] / ur
        self.binv -= ucol[:, None] * row_r[None, :]
        self.binv[r] = row_r
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= REFACTOR_EVERY:
            self.factorize()
            self.recompute_basics()

    # -- primal simplex ----------------------------------------------------

    def primal(self, costs: np.ndarray) -> str:
        """Run primal iterations to optimality; 'optimal' or 'unbounded'."""
        n_plus_m = self.ws.n + self.ws.m
        stall, bland = 0, False
        last_z = math.inf
        while True:
            if self.iters > self.max_iters:
                raise NumericalBreakdown("pivot limit exceeded")
            y = costs[self.basis] @ self.binv
            d = costs - y @ self.ws.a_ext
            d[self.basis] = 0.0

            movable = self.upper > self.lower
            elig = movable & (
                ((self.stat == _AT_LOWER) & (d < -DUAL_TOL))
                | ((self.stat == _AT_UPPER) & (d > DUAL_TOL))
                | ((self.stat == _FREE) & (np.abs(d) > DUAL_TOL))
            )
            if not elig.any():
                return "optimal"
            if bland:
                q = int(np.nonzero(elig)[0][0])
            else:
                score = np.where(elig, np.abs(d), -1.0)
                q = int(np.argmax(score))
            dirn = 1.0 if (self.stat[q] == _AT_LOWER
                           or (self.stat[q] == _FREE and d[q] < 0)) else -1.0

            ucol = self.binv @ self.ws.a_ext[:, q]
            delta = dirn * ucol
            xb = self.x[self.basis]
            lb, ub = self.lower[self.basis], self.upper[self.basis]
            tvals = np.full(self.ws.m, math.inf)
            pos = delta > PIV_TOL
            neg = delta < -PIV_TOL
            tvals[pos] = (xb[pos] - lb[pos]) / delta[pos]
            tvals[neg] = (xb[neg] - ub[neg]) / delta[neg]
            np.maximum(tvals, 0.0, out=tvals)

            t_basic = float(tvals.min()) if self.ws.m else math.inf
            rng = self.upper[q] - self.lower[q]
            t_own = rng if math.isfinite(rng) and self.stat[q] != _FREE else math.inf

            if t_own <= t_basic:
                if math.isinf(t_own):
                    return "unbounded"
                # bound flip: no basis change
                self.x[self.basis] = xb - delta * t_own
                self.x[q] = self.upper[q] if self.stat[q] == _AT_LOWER else self.lower[q]
                self.stat[q] = _AT_UPPER if self.stat[q] == _AT_LOWER else _AT_LOWER
            else:
                cand = np.nonzero(tvals <= t_basic + 1e-12)[0]
                if bland:
                    r = int(cand[np.argmin(self.basis[cand])])
                else:
                    r = int(cand[np.argmax(np.abs(delta[cand]))])
                t = max(0.0, float(tvals[r]))
                self.x[self.basis] = xb - delta * t
                self.x[q] = self.x[q] + dirn * t
                leaving = int(self.basis[r])
                hit_lower = delta[r] > 0
                self.x[leaving] = self.lower[leaving] if hit_lower else self.upper[leaving]
                self.stat[leaving] = _AT_LOWER if hit_lower else _AT_UPPER
                self.stat[q] = _BASIC
                self.basis[r] = q
                self._update_binv(ucol, r)

            self.iters += 1
            z = float(costs @ self.x)
            if z < last_z - 1e-9 * (1.0 + abs(z)):
                stall = 0
            else:
                stall += 1
                if stall > 3 * n_plus_m:
                    bland = True
            last_z = z

    # -- dual simplex (warm starts) -----------------------------------------

    def dual(self, costs: np.ndarray) -> str:
        """Restore primal feasibility from a dual-feasible basis.

        Returns 'feasible' once all basics are within bounds, or 'infeasible'
        when some violated row cannot be repaired (primal infeasible).
        """
        while True:
            if self.iters > self.max_iters:
                raise NumericalBreakdown("pivot limit exceeded (dual)")
            xb = self.x[self.basis]
            lb, ub = self.lower[self.basis], self.upper[self.basis]
            below = lb - xb
            above = xb - ub
            viol = np.maximum(below, above)
            r = int(np.argmax(viol)) if self.ws.m else 0
            if self.ws.m == 0 or viol[r] <= FEAS_TOL:
                return "feasible"
            to_lower = below[r] >= above[r]

            y = costs[self.basis] @ self.binv
            d = costs - y @ self.ws.a_ext
            d[self.basis] = 0.0
            alpha = self.binv[r] @ self.ws.a_ext

            movable = (self.stat != _BASIC) & (self.upper > self.lower)
            if to_lower:  # basic variable must increase: dx_B[r] = -alpha_j dx_j
                elig = movable & (
                    ((self.stat == _AT_LOWER) & (alpha < -PIV_TOL))
                    | ((self.stat == _AT_UPPER) & (alpha > PIV_TOL))
                    | ((self.stat == _FREE) & (np.abs(alpha) > PIV_TOL))
                )
            else:
                elig = movable & (
                    ((self.stat == _AT_LOWER) & (alpha > PIV_TOL))
                    | ((self.stat == _AT_UPPER) & (alpha < -PIV_TOL))
                    | ((self.stat == _FREE) & (np.abs(alpha) > PIV_TOL))
                )
            if not elig.any():
                return "infeasible"
            ratios = np.where(elig, np.abs(d) / np.maximum(np.abs(alpha), PIV_TOL),
                              math.inf)
            best = float(ratios.min())
            cand = np.nonzero(ratios <= best + 1e-12)[0]
            q = int(cand[np.argmax(np.abs(alpha[cand]))])

            leaving = int(self.basis[r])
            target = self.lower[leaving] if to_lower else self.upper[leaving]
            ucol = self.binv @ self.ws.a_ext[:, q]
            if abs(ucol[r]) < 1e-11:
                raise NumericalBreakdown("dual pivot element too small")
            dxq = (self.x[leaving] - target) / ucol[r]
            self.x[self.basis] -= dxq * ucol
            self.x[leaving] = target
            self.x[q] = self.x[q] + dxq
            self.stat[leaving] = _AT_LOWER if to_lower else _AT_UPPER
            self.stat[q] = _BASIC
            self.basis[r] = q
            self._update_binv(ucol, r)
            self.iters += 1

    # -- solution extraction -------------------------------------------------

    def extract(self, status: LpStatus) -> LpSolution:
        if status is not LpStatus.OPTIMAL:
            return LpSolution(status=status, iterations=self.iters)
        ws = self.ws
        x = self.x[:ws.n].copy()
        if ws.m:
            act = ws.a_ext[:, :ws.n] @ x
            if float(np.max(ws.rhs - act)) > 10 * FEAS_TOL:
                raise NumericalBreakdown("extracted solution violates rows")
        y = ws.cost2[self.basis] @ self.binv if ws.m else np.zeros(0)
        d = ws.cost2 - (y @ ws.a_ext if ws.m else 0.0)
        basis_status = [_STATUS_MAP[int(s)] for s in self.stat[:ws.n]]
        sol = LpSolution(
            status=LpStatus.OPTIMAL,
            z_lp=float(ws.cost2[:ws.n] @ x),
            x=x,
            duals=np.asarray(y, dtype=float).copy(),
            reduced_costs=d[:ws.n].copy(),
            basis=basis_status,
            iterations=self.iters,
            basis_cols=self.basis.copy(),
            col_status=self.stat.copy(),
        )
        sol.binv = ws.retain_binv(self.binv)
        return sol


def _default_max_iters(ws: LpWorkspace) -> int:
    return 50 * (ws.n + ws.m)


def _crash_flip_bounds(ws: LpWorkspace, sol: _Solver, resid: np.ndarray) -> np.ndarray:
    """Greedy crash: flip columns to their other bound when that lowers the
    total row infeasibility, so covering-style instances start (near-)feasible
    and need few or no artificial variables."""
    n = ws.n
    a = ws.a_ext
    for j in range(n):
        span = sol.upper[j] - sol.lower[j]
        if not math.isfinite(span) or span <= 0.0:
            continue
        col = a[:, j]
        step = span if sol.stat[j] == _AT_LOWER else -span
        new_resid = resid - col * step
        gain = float(np.maximum(resid, 0.0).sum() - np.maximum(new_resid, 0.0).sum())
        if gain > 1e-12:
            resid = new_resid
            sol.stat[j] = _AT_UPPER if sol.stat[j] == _AT_LOWER else _AT_LOWER
            sol.x[j] = sol.upper[j] if sol.stat[j] == _AT_UPPER else sol.lower[j]
    return resid


def solve_lp(instance: MilpInstance, bounds: BoundSet | None = None,
             workspace: LpWorkspace | None = None,
             max_iters: int | None = None) -> LpSolution:
    """Cold two-phase solve of the LP relaxation under the given bounds."""
    ws = workspace or LpWorkspace(instance)
    lower, upper = (bounds or BoundSet()).apply(instance)
    if np.any(lower > upper):
        return LpSolution(status=LpStatus.INFEASIBLE)
    sol = _Solver(ws, lower, upper, max_iters or _default_max_iters(ws))

    n, m = ws.n, ws.m
    for j in range(n):
        if math.isfinite(sol.lower[j]):
            sol.stat[j] = _AT_LOWER
        elif math.isfinite(sol.upper[j]):
            sol.stat[j] = _AT_UPPER
        else:
            sol.stat[j] = _FREE
    sol._set_nonbasic_values()

    resid = ws.rhs - ws.a_ext[:, :n] @ sol.x[:n] if m else np.zeros(0)
    if m and float(np.max(resid)) > 0.0:
        resid = _crash_flip_bounds(ws, sol, resid)
    artificial_used = False
    for i in range(m):
        if resid[i] <= 0.0:  # surplus can absorb the slack
            sol.basis[i] = n + i
        else:
            sol.basis[i] = n + m + i
            sol.upper[n + m + i] = math.inf
            artificial_used = True
    sol.stat[sol.basis] = _BASIC
    sol.factorize()
    sol.recompute_basics()

    if artificial_used:
        cost1 = np.zeros(ws.ncols)
        cost1[n + m:] = np.where(np.isinf(sol.upper[n + m:]), 1.0, 0.0)
        outcome = sol.primal(cost1)
        if outcome != "optimal" or float(cost1 @ sol.x) > 1e-6 * (1.0 + float(np.max(np.abs(ws.rhs)))):
            return sol.extract(LpStatus.INFEASIBLE)
        sol.upper[n + m:] = 0.0  # pin artificials; basic ones stay at zero
        nb_art = (np.arange(ws.ncols) >= n + m) & (sol.stat != _BASIC)
        sol.x[nb_art] = 0.0
        sol.stat[nb_art] = _AT_LOWER

    outcome = sol.primal(ws.cost2)
    if outcome == "unbounded":
        return sol.extract(LpStatus.UNBOUNDED)
    return sol.extract(LpStatus.OPTIMAL)


def resolve_from_basis(instance: MilpInstance, prev: LpSolution,
                       bounds: BoundSet | None = None,
                       workspace: LpWorkspace | None = None,
                       max_iters: int | None = None) -> LpSolution:
    """Re-solve after bound changes, warm-starting from a previous basis.

    The parent basis stays dual feasible under bound changes, so the dual
    simplex repairs primal feasibility in a handful of pivots.  Any breakdown
    falls back to a cold solve; results match a cold solve within tolerance.
    """
    if prev.status is not LpStatus.OPTIMAL or prev.basis_cols is None:
        return solve_lp(instance, bounds, workspace, max_iters)
    ws = workspace or LpWorkspace(instance)
    lower, upper = (bounds or BoundSet()).apply(instance)
    if np.any(lower > upper):
        return LpSolution(status=LpStatus.INFEASIBLE)
    try:
        sol = _Solver(ws, lower, upper, max_iters or _default_max_iters(ws))
        sol.basis = prev.basis_cols.copy()
        sol.stat = prev.col_status.copy()
        # nonbasic statuses must point at finite bounds after the change
        for j in np.nonzero(sol.stat == _AT_LOWER)[0]:
            if not math.isfinite(sol.lower[j]):
                sol.stat[j] = _AT_UPPER if math.isfinite(sol.upper[j]) else _FREE
        for j in np.nonzero(sol.stat == _AT_UPPER)[0]:
            if not math.isfinite(sol.upper[j]):
                sol.stat[j] = _AT_LOWER if math.isfinite(sol.lower[j]) else _FREE
        sol._set_nonbasic_values()
        if getattr(prev, "binv", None) is not None:
            sol.binv = prev.binv.copy()  # parent basis inverse is still valid
        else:
            sol.factorize()
        sol.recompute_basics()
        outcome = sol.dual(ws.cost2)
        if outcome == "infeasible":
            return sol.extract(LpStatus.INFEASIBLE)
        outcome = sol.primal(ws.cost2)
        if outcome == "unbounded":
            return sol.extract(LpStatus.UNBOUNDED)
        return sol.extract(LpStatus.OPTIMAL)
    except NumericalBreakdown:
        return solve_lp(instance, bounds, workspace, max_iters)
