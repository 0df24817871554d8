"""Dense two-phase primal simplex with Bland's rule.

The programs built by this package are tiny (one variable per worker and
application, plus a handful of metric rows), so a plain tableau is enough and
keeps the results reproducible bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBreakdown

PIVOT_TOL = 1e-11
ENTRY_TOL = 1e-9
COST_TOL = 1e-9
FEAS_TOL = 1e-9
DEGENERATE_TOL = 1e-12


class LPStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    UNBOUNDED = "Unbounded"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class LinearProgram:
    """maximize ``objective @ x`` s.t. ``A @ x <= bound``, ``A_eq @ x == bound_eq``, ``x >= lower``."""

    objective: np.ndarray
    A: np.ndarray
    bound: np.ndarray
    lower: np.ndarray | None = None
    A_eq: np.ndarray | None = field(default=None, repr=False)
    bound_eq: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        n = c.size
        if n == 0:
            raise ValueError("a linear program needs at least one variable")
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        b = np.asarray(self.bound, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise ValueError(f"{A.shape[0]} constraint rows but {b.size} bounds")
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        if lower.size != n:
            raise ValueError("one lower bound per variable expected")
        A_eq = np.zeros((0, n)) if self.A_eq is None else np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        b_eq = np.zeros(0) if self.bound_eq is None else np.asarray(self.bound_eq, dtype=float).ravel()
        if A_eq.shape[0] != b_eq.size:
            raise ValueError(f"{A_eq.shape[0]} equality rows but {b_eq.size} bounds")
        for name, arr in (("objective", c), ("A", A), ("bound", b), ("lower", lower), ("A_eq", A_eq), ("bound_eq", b_eq)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite coefficient in {name}")
        for name, arr in (("objective", c), ("A", A), ("bound", b), ("lower", lower), ("A_eq", A_eq), ("bound_eq", b_eq)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def inequality_form(self) -> tuple[np.ndarray, np.ndarray]:
        """All constraints as ``<=`` rows, equalities split into two opposite rows."""
        A = np.vstack([self.A, self.A_eq, -self.A_eq])
        b = np.concatenate([self.bound, self.bound_eq, -self.bound_eq])
        return A, b


@dataclass(frozen=True)
class LPResult:
    status: LPStatus
    value: float
    x: np.ndarray | None

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


def _pivot(T, basis, row, col):
    piv = T[row, col]
    if abs(piv) < PIVOT_TOL:
        raise NumericalBreakdown(f"pivot magnitude {abs(piv):.3g} below {PIVOT_TOL}")
    T[row] /= piv
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _run(T, basis, cost, allowed, max_iter):
    """Maximize ``cost`` over the tableau. Returns False when unbounded."""
    m = T.shape[0]
    for _ in range(max_iter):
        reduced = cost[:-1] - cost[basis] @ T[:, :-1]
        entering = -1
        for j in allowed:
            if reduced[j] > COST_TOL:
                entering = j
                break
        if entering < 0:
            return True
        col = T[:, entering]
        rhs = T[:, -1]
        best_row, best_ratio = -1, np.inf
        for i in range(m):
            # a degenerate row blocks even through a small entry, otherwise
            # rounding lets the step push its basic variable below zero
            if col[i] > ENTRY_TOL or (col[i] > 10 * PIVOT_TOL and rhs[i] <= DEGENERATE_TOL):
                ratio = rhs[i] / col[i]
                if best_row < 0:
                    best_row, best_ratio = i, ratio
                    continue
                slack = 1e-12 * (1.0 + abs(best_ratio))
                if ratio < best_ratio - slack or (abs(ratio - best_ratio) <= slack and basis[i] < basis[best_row]):
                    best_row, best_ratio = i, ratio
        if best_row < 0:
            return False
        _pivot(T, basis, best_row, entering)
    raise NumericalBreakdown(f"simplex did not terminate within {max_iter} pivots")


def simplex_solve(lp: LinearProgram) -> LPResult:
    """Solve ``lp`` to an optimal basic solution, or report it unbounded / infeasible."""
    A, b = lp.inequality_form()
    lower = lp.lower
    c = lp.objective
    n = c.size
    rhs = b - A @ lower

    keep = []
    for i in range(A.shape[0]):
        scale = np.max(np.abs(A[i])) if A.shape[1] else 0.0
        if scale == 0.0:
            if rhs[i] < -FEAS_TOL:
                return LPResult(LPStatus.INFEASIBLE, float("nan"), None)
            continue
        keep.append(i)
    A = A[keep]
    rhs = rhs[keep]
    # equilibrate rows and columns so that the absolute tolerances below are
    # meaningful even when coefficients span many orders of magnitude
    col_scale = np.ones(n)
    if A.shape[0]:
        for _ in range(2):
            rows = np.max(np.abs(A), axis=1)
            A = A / rows[:, None]
            rhs = rhs / rows
            cols = np.max(np.abs(A), axis=0)
            cols[cols == 0.0] = 1.0
            A = A / cols
            col_scale = col_scale / cols
        rows = np.max(np.abs(A), axis=1)
        A = A / rows[:, None]
        rhs = rhs / rows
    c_scaled = c * col_scale
    m = A.shape[0]
    A_s, rhs_s = A, rhs
    active = np.arange(m)

    neg = np.flatnonzero(rhs < 0.0)
    n_art = neg.size
    n_cols = n + m + n_art
    T = np.zeros((m, n_cols + 1))
    T[:, :n] = A
    T[np.arange(m), n + np.arange(m)] = 1.0
    T[:, -1] = rhs
    basis = np.arange(n, n + m)
    for j, i in enumerate(neg):
        T[i, :-1] *= -1.0
        T[i, -1] *= -1.0
        T[i, n + m + j] = 1.0
        basis[i] = n + m + j
    max_iter = 200 * (m + n_cols) + 1000

    if n_art:
        cost1 = np.zeros(n_cols + 1)
        cost1[n + m:n_cols] = -1.0
        _run(T, basis, cost1, range(n_cols), max_iter)
        infeas = float(np.sum(T[basis >= n + m, -1]))
        if infeas > FEAS_TOL * max(1.0, float(np.max(np.abs(rhs)))):
            return LPResult(LPStatus.INFEASIBLE, float("nan"), None)
        # drive remaining (zero-valued) artificials out of the basis
        drop = []
        for i in range(m):
            if basis[i] >= n + m:
                cand = np.flatnonzero(np.abs(T[i, :n + m]) > ENTRY_TOL)
                if cand.size:
                    _pivot(T, basis, i, int(cand[0]))
                else:
                    drop.append(i)
        if drop:
            rows = np.setdiff1d(np.arange(m), drop)
            T, basis = T[rows], basis[rows]
            active = rows
        T = np.delete(T, np.arange(n + m, n_cols), axis=1)
        n_cols = n + m

    cost2 = np.zeros(n_cols + 1)
    cost2[:n] = c_scaled
    if not _run(T, basis, cost2, range(n_cols), max_iter):
        return LPResult(LPStatus.UNBOUNDED, float("inf"), None)

    # the tableau accumulates rounding over many pivots, so recompute the
    # basic values from the final basis directly
    full = np.hstack([A_s, np.eye(m)])[active]
    try:
        basic = np.linalg.solve(full[:, basis], rhs_s[active])
    except np.linalg.LinAlgError:
        basic = T[:, -1]
    y = np.zeros(n_cols)
    y[basis] = basic
    x = y[:n] * col_scale + lower
    x[np.abs(x) < 1e-15] = 0.0
    A_full, b_full = lp.inequality_form()
    if A_full.size:
        excess = A_full @ x - b_full
        slack = 1e-7 * (1.0 + np.abs(b_full) + np.abs(A_full) @ np.abs(x))
        if np.any(excess > slack):
            raise NumericalBreakdown("simplex returned a point violating its constraints")
    if np.any(x < lower - 1e-7 * (1.0 + np.abs(lower))):
        raise NumericalBreakdown("simplex returned a point below its lower bounds")
    x.setflags(write=False)
    return LPResult(LPStatus.OPTIMAL, float(c @ x), x)
