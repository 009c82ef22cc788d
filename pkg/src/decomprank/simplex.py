"""Dense-tableau bounded-variable simplex.

Internally every LP is ``min cost @ z  s.t.  [A I] z = b,  lo <= z <= hi``
where ``z = (x, s)`` and the slack bounds encode the row relation
(``<=``: ``s >= 0``, ``>=``: ``s <= 0``, ``=``: ``s = 0``). Duals are
reported as ``d z* / d b`` in the caller's objective sense, so for a
maximisation they are ``>= 0`` on ``<=`` rows and ``<= 0`` on ``>=`` rows.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .model import EQ, GE, LE, MipInstance

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
DEGENERATE_RUN = 50

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIME_LIMIT = "time_limit"

_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, -1


class SimplexError(RuntimeError):
    """The simplex made no progress under either pricing rule."""


class Clock:
    """Budget clock measuring process CPU seconds or simplex pivots.

    ``mode="work"`` makes every budget and every recorded solve time a
    deterministic function of the input; ``mode="cpu"`` uses
    :func:`time.process_time`. Time spent inside :meth:`paused` is not
    counted by :meth:`now`.
    """

    def __init__(self, mode: str = "cpu"):
        if mode not in ("cpu", "work"):
            raise ValueError(f"unknown clock mode {mode!r}")
        self.mode = mode
        self.work = 0
        self._excluded = 0.0

    def tick(self, n: int = 1) -> None:
        self.work += n

    def _raw(self) -> float:
        return time.process_time() if self.mode == "cpu" else float(self.work)

    def now(self) -> float:
        return self._raw() - self._excluded

    @contextmanager
    def paused(self):
        start = self._raw()
        try:
            yield
        finally:
            self._excluded += self._raw() - start


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    basis: tuple | None = None
    iterations: int = 0


class LpData:
    """Array form of an instance, shared by every LP solved on it."""

    def __init__(self, instance: MipInstance):
        self.n = instance.num_vars
        self.m = instance.num_constraints
        self.maximize = instance.is_maximize
        self.constant = instance.objective_constant
        self.c = np.array(instance.c, dtype=float)
        A = np.asarray(instance.matrix, dtype=float)
        self.A_full = np.hstack([A, np.eye(self.m)]) if self.m else np.zeros((0, self.n))
        self.b = np.array(instance.rhs, dtype=float)
        slo = np.empty(self.m)
        shi = np.empty(self.m)
        for i, rel in enumerate(instance.relations):
            if rel == LE:
                slo[i], shi[i] = 0.0, math.inf
            elif rel == GE:
                slo[i], shi[i] = -math.inf, 0.0
            else:
                slo[i], shi[i] = 0.0, 0.0
        self.slack_lo = slo
        self.slack_hi = shi
        self.lower = np.array(instance.lower, dtype=float)
        self.upper = np.array(instance.upper, dtype=float)
        self.integral = np.array(instance.integral_mask, dtype=bool)
        self.cost = np.concatenate([-self.c if self.maximize else self.c, np.zeros(self.m)])

    def bounds(self, lower=None, upper=None):
        lo = np.concatenate([self.lower if lower is None else lower, self.slack_lo])
        hi = np.concatenate([self.upper if upper is None else upper, self.slack_hi])
        return lo, hi


class _Tableau:
    def __init__(self, data: LpData, lo, hi, clock: Clock | None, deadline):
        self.data = data
        self.lo = lo
        self.hi = hi
        self.clock = clock
        self.deadline = deadline
        self.iterations = 0
        self.N = data.n + data.m
        self.M = None
        self.beta = None
        self.basis = None
        self.state = None
        self.xn = None
        self.d = None
        self.cost = None

    # -- setup ---------------------------------------------------------

    def _nonbasic_start(self, ncols):
        lo, hi = self.lo[:ncols], self.hi[:ncols]
        state = np.full(ncols, _AT_LOWER, dtype=np.int8)
        xn = np.zeros(ncols)
        fin_lo = np.isfinite(lo)
        fin_hi = np.isfinite(hi)
        xn[fin_lo] = lo[fin_lo]
        up_only = ~fin_lo & fin_hi
        state[up_only] = _AT_UPPER
        xn[up_only] = hi[up_only]
        state[~fin_lo & ~fin_hi] = _FREE
        return state, xn

    def cold_start(self) -> str:
        data = self.data
        n, m = data.n, data.m
        state, xn = self._nonbasic_start(self.N)
        r = data.b - data.A_full[:, :n] @ xn[:n] if m else np.zeros(0)
        need_art = (r < data.slack_lo - FEAS_TOL) | (r > data.slack_hi + FEAS_TOL)
        art_rows = np.flatnonzero(need_art)
        k = len(art_rows)
        sigma = np.ones(m)
        sigma[art_rows] = np.sign(r[art_rows])
        art_cols = np.zeros((m, k))
        art_cols[art_rows, np.arange(k)] = sigma[art_rows]
        M = np.hstack([data.A_full, art_cols]) * sigma[:, None]
        basis = np.arange(n, n + m)
        basis[art_rows] = self.N + np.arange(k)
        self.lo = np.concatenate([self.lo, np.zeros(k)])
        self.hi = np.concatenate([self.hi, np.full(k, math.inf)])
        state = np.concatenate([state, np.zeros(k, dtype=np.int8)])
        xn = np.concatenate([xn, np.zeros(k)])
        # slacks of artificial rows stay nonbasic at 0; the others are basic
        state[n + np.arange(m)] = _BASIC
        for i in art_rows:
            if data.slack_lo[i] == 0.0:
                state[n + i] = _AT_LOWER
            else:
                state[n + i] = _AT_UPPER
            xn[n + i] = 0.0
        state[self.N + np.arange(k)] = _BASIC
        beta = np.where(need_art, np.abs(r), r)
        self.M, self.beta, self.basis, self.state, self.xn = M, beta, basis, state, xn

        if k:
            self.cost = np.concatenate([np.zeros(self.N), np.ones(k)])
            self._reprice()
            status = self._primal()
            if status != OPTIMAL:
                return status
            infeas = float(np.sum(self.beta[self.basis >= self.N])) if k else 0.0
            if infeas > 1e-6 * (1.0 + float(np.max(np.abs(data.b), initial=0.0))):
                return INFEASIBLE
            self._drop_artificials()
        self.cost = data.cost.copy()
        self._reprice()
        return self._primal()

    def _drop_artificials(self):
        N = self.N
        for r in np.flatnonzero(self.basis >= N):
            row = np.abs(self.M[r, :N]).copy()
            row[self.state[:N] == _BASIC] = 0.0
            q = int(np.argmax(row))
            if row[q] <= PIVOT_TOL:
                continue
            self.beta[r] = self.xn[q]
            self._pivot(r, q)
        if np.any(self.basis >= N):
            # redundant rows: the artificial stays basic, pinned at zero
            self.hi[N:] = 0.0
            return
        self.M = self.M[:, :N]
        self.lo = self.lo[:N]
        self.hi = self.hi[:N]
        self.state = self.state[:N]
        self.xn = self.xn[:N]

    def from_basis(self, basis, at_upper) -> bool:
        """Rebuild the tableau for a known basis; False if it is singular."""
        data = self.data
        basis = np.asarray(basis, dtype=int)
        if len(basis) != data.m or np.any(basis >= self.N):
            return False
        B = data.A_full[:, basis]
        try:
            M = np.linalg.solve(B, data.A_full) if data.m else np.zeros((0, self.N))
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(M)):
            return False
        state, xn = self._nonbasic_start(self.N)
        up = np.asarray(at_upper, dtype=bool) & np.isfinite(self.hi)
        state[up] = _AT_UPPER
        xn[up] = self.hi[up]
        state[basis] = _BASIC
        xn[basis] = 0.0
        self.M = M
        self.basis = basis.copy()
        self.state = state
        self.xn = xn
        self.beta = np.linalg.solve(B, data.b - data.A_full @ xn) if data.m else np.zeros(0)
        self.cost = data.cost.copy()
        self._reprice()
        return True

    def warm_solve(self) -> str:
        if self._dual_feasible():
            status = self._dual()
            if status == OPTIMAL:
                return self._primal()
            if status in (INFEASIBLE, TIME_LIMIT):
                return status
        elif self._primal_feasible():
            return self._primal()
        self.lo, self.hi = self.lo[: self.N], self.hi[: self.N]
        return self.cold_start()

    # -- core operations ----------------------------------------------

    def _reprice(self):
        self.d = self.cost - self.cost[self.basis] @ self.M if len(self.basis) else self.cost.copy()

    def _pivot(self, r, q):
        M = self.M
        piv = M[r, q]
        M[r, :] /= piv
        col = M[:, q].copy()
        col[r] = 0.0
        M -= np.outer(col, M[r, :])
        M[:, q] = 0.0
        M[r, q] = 1.0
        self.d -= self.d[q] * M[r, :]
        self.d[q] = 0.0
        p = self.basis[r]
        self.basis[r] = q
        self.state[q] = _BASIC
        return p

    def _tick(self):
        self.iterations += 1
        if self.clock is not None:
            self.clock.tick()

    def _expired(self):
        return self.deadline is not None and self.clock is not None and self.clock.now() > self.deadline

    def _dual_feasible(self):
        d, st = self.d, self.state
        movable = self.hi > self.lo
        bad = (st == _AT_LOWER) & movable & (d < -OPT_TOL)
        bad |= (st == _AT_UPPER) & movable & (d > OPT_TOL)
        bad |= (st == _FREE) & (np.abs(d) > OPT_TOL)
        return not np.any(bad)

    def _primal_feasible(self):
        lo_b, hi_b = self.lo[self.basis], self.hi[self.basis]
        return bool(np.all(self.beta >= lo_b - FEAS_TOL) and np.all(self.beta <= hi_b + FEAS_TOL))

    def _primal(self) -> str:
        ncols = self.M.shape[1]
        max_iter = 50 * (ncols + self.M.shape[0]) + 1000
        degenerate = 0
        bland = False
        for _ in range(max_iter):
            if self._expired():
                return TIME_LIMIT
            d, st = self.d, self.state
            movable = self.hi > self.lo
            inc = ((st == _AT_LOWER) | (st == _FREE)) & movable & (d < -OPT_TOL)
            dec = ((st == _AT_UPPER) | (st == _FREE)) & movable & (d > OPT_TOL)
            elig = inc | dec
            if not elig.any():
                return OPTIMAL
            if bland:
                q = int(np.flatnonzero(elig)[0])
            else:
                q = int(np.argmax(np.where(elig, np.abs(d), -1.0)))
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self.M[:, q] * direction
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.full(len(alpha), math.inf)
                dec_rows = alpha > PIVOT_TOL
                inc_rows = alpha < -PIVOT_TOL
                ratio[dec_rows] = (self.beta[dec_rows] - lo_b[dec_rows]) / alpha[dec_rows]
                ratio[inc_rows] = (hi_b[inc_rows] - self.beta[inc_rows]) / -alpha[inc_rows]
            ratio = np.maximum(ratio, 0.0)
            flip = self.hi[q] - self.lo[q] if st[q] != _FREE else math.inf
            theta_row = float(ratio.min()) if len(ratio) else math.inf
            if flip <= theta_row:
                theta = flip
                if math.isinf(theta):
                    return UNBOUNDED
                self.beta -= alpha * theta
                if st[q] == _AT_LOWER:
                    st[q], self.xn[q] = _AT_UPPER, self.hi[q]
                else:
                    st[q], self.xn[q] = _AT_LOWER, self.lo[q]
                self._tick()
                degenerate = 0
                bland = False
                continue
            theta = theta_row
            if math.isinf(theta):
                return UNBOUNDED
            ties = np.flatnonzero(ratio <= theta + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            entering_value = self.xn[q] + direction * theta
            self.beta -= alpha * theta
            leaving_to_lower = alpha[r] > 0
            self.beta[r] = entering_value
            p = self._pivot(r, q)
            if leaving_to_lower:
                st[p], self.xn[p] = _AT_LOWER, self.lo[p]
            else:
                st[p], self.xn[p] = _AT_UPPER, self.hi[p]
            self._tick()
            if theta <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False
        raise SimplexError("primal simplex made no progress within the iteration limit")

    def _dual(self) -> str:
        max_iter = 50 * (self.M.shape[1] + self.M.shape[0]) + 1000
        for _ in range(max_iter):
            if self._expired():
                return TIME_LIMIT
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            below = lo_b - self.beta
            above = self.beta - hi_b
            viol = np.maximum(below, above)
            if not len(viol):
                return OPTIMAL
            r = int(np.argmax(viol))
            if viol[r] <= FEAS_TOL:
                return OPTIMAL
            row = self.M[r]
            st = self.state
            movable = self.hi > self.lo
            if below[r] > above[r]:
                target = lo_b[r]
                elig = ((st == _AT_LOWER) & (row < -PIVOT_TOL)) | ((st == _AT_UPPER) & (row > PIVOT_TOL))
            else:
                target = hi_b[r]
                elig = ((st == _AT_LOWER) & (row > PIVOT_TOL)) | ((st == _AT_UPPER) & (row < -PIVOT_TOL))
            elig |= (st == _FREE) & (np.abs(row) > PIVOT_TOL)
            elig &= movable
            if not elig.any():
                return INFEASIBLE
            idx = np.flatnonzero(elig)
            ratios = np.abs(self.d[idx]) / np.abs(row[idx])
            best = ratios.min()
            ties = idx[ratios <= best + 1e-12]
            q = int(ties[np.argmax(np.abs(row[ties]))])
            delta = (self.beta[r] - target) / row[q]
            entering_value = self.xn[q] + delta
            self.beta -= self.M[:, q] * delta
            self.beta[r] = entering_value
            p = self._pivot(r, q)
            if target == self.lo[p]:
                st[p], self.xn[p] = _AT_LOWER, self.lo[p]
            else:
                st[p], self.xn[p] = _AT_UPPER, self.hi[p]
            self._tick()
        raise SimplexError("dual simplex made no progress within the iteration limit")

    # -- results -------------------------------------------------------

    def solution(self) -> LpSolution:
        data = self.data
        n, m, N = data.n, data.m, self.N
        basis = self.basis
        z = self.xn[:N].copy()
        if m:
            if np.all(basis < N):
                B = data.A_full[:, basis]
                nonbasic = np.ones(N, dtype=bool)
                nonbasic[basis] = False
                rhs = data.b - data.A_full[:, nonbasic] @ z[nonbasic]
                try:
                    z[basis] = np.linalg.solve(B, rhs)
                    y = np.linalg.solve(B.T, data.cost[basis])
                except np.linalg.LinAlgError:
                    z[basis[basis < N]] = self.beta[basis < N]
                    y = self.cost[basis] @ np.linalg.pinv(B)
            else:
                real = basis < N
                z[basis[real]] = self.beta[real]
                # B^-1 sits in the slack columns of the tableau
                Binv = self.M[:, n:N]
                y = data.cost[np.where(real, basis, 0)] * real @ Binv
        else:
            y = np.zeros(0)
        x = z[:n]
        reduced = data.cost[:n] - (data.A_full[:, :n].T @ y if m else 0.0)
        sign = -1.0 if data.maximize else 1.0
        objective = float(data.c @ x) + data.constant
        at_upper = tuple(bool(s == _AT_UPPER) for s in self.state[:N])
        return LpSolution(
            status=OPTIMAL,
            x=x,
            objective=objective,
            duals=sign * y,
            reduced_costs=sign * reduced,
            basis=(tuple(int(b) for b in basis), at_upper),
            iterations=self.iterations,
        )


def solve_arrays(data: LpData, lower=None, upper=None, warm=None, clock=None, deadline=None) -> LpSolution:
    """Solve the LP held in ``data`` with optional replacement column bounds."""
    lo, hi = data.bounds(lower, upper)
    if np.any(lo > hi + FEAS_TOL):
        return LpSolution(INFEASIBLE)
    tab = _Tableau(data, lo, hi, clock, deadline)
    if data.m == 0:
        return _bounds_only(data, lo, hi, clock)
    status = None
    if warm is not None and tab.from_basis(*warm):
        status = tab.warm_solve()
    if status is None:
        tab = _Tableau(data, lo, hi, clock, deadline)
        status = tab.cold_start()
    if status != OPTIMAL:
        return LpSolution(status, iterations=tab.iterations)
    return tab.solution()


def _bounds_only(data, lo, hi, clock):
    cost = data.cost[: data.n]
    x = np.where(cost > 0, lo[: data.n], np.where(cost < 0, hi[: data.n], 0.0))
    x = np.where((cost == 0) & np.isfinite(lo[: data.n]), lo[: data.n], x)
    x = np.where((cost == 0) & ~np.isfinite(lo[: data.n]) & np.isfinite(hi[: data.n]), hi[: data.n], x)
    if clock is not None:
        clock.tick()
    if not np.all(np.isfinite(x)):
        return LpSolution(UNBOUNDED, iterations=1)
    sign = -1.0 if data.maximize else 1.0
    return LpSolution(
        OPTIMAL,
        x=x,
        objective=float(data.c @ x) + data.constant,
        duals=np.zeros(0),
        reduced_costs=sign * cost,
        basis=((), tuple(bool(c < 0) for c in cost)),
        iterations=1,
    )


def solve_lp(instance: MipInstance, clock: Clock | None = None, deadline: float | None = None) -> LpSolution:
    """Solve the LP relaxation of ``instance`` (integrality is ignored).

    Infeasible and unbounded problems are reported through ``status``; a
    ``deadline`` on ``clock`` yields status ``"time_limit"``.
    """
    return solve_arrays(LpData(instance), clock=clock, deadline=deadline)


def dual_objective(instance: MipInstance, duals, tol: float = 1e-9) -> float:
    """Lagrangian value of the LP with every row priced at ``duals``.

    Equals the LP optimum when ``duals`` are optimal (strong duality).
    Reduced costs within ``tol`` of zero count as zero.
    """
    y = np.asarray(duals, dtype=float)
    red = instance.c - (instance.matrix.T @ y if instance.num_constraints else 0.0)
    total = float(y @ instance.rhs) if instance.num_constraints else 0.0
    sign = 1.0 if instance.is_maximize else -1.0
    for j in range(instance.num_vars):
        r = sign * red[j]
        if abs(r) <= tol:
            continue
        lo, hi = instance.lower[j], instance.upper[j]
        if r > 0:
            total += sign * r * hi if math.isfinite(hi) else math.inf * sign
        elif r < 0:
            total += sign * r * lo if math.isfinite(lo) else math.inf * sign
    return total + instance.objective_constant


def relation_sign_ok(relation: str, dual: float, maximize: bool, tol: float = 1e-9) -> bool:
    """Sign convention for a row dual (``d z / d b``)."""
    if relation == EQ:
        return True
    positive = (relation == LE) == maximize
    return dual >= -tol if positive else dual <= tol


__all__ = [
    "Clock",
    "LpData",
    "LpSolution",
    "SimplexError",
    "dual_objective",
    "relation_sign_ok",
    "solve_arrays",
    "solve_lp",
]
