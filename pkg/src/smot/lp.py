"""Dense two-phase simplex with Bland's anti-cycling rule.

Problems have the form ``min c.z`` subject to ``A_eq z = b_eq``,
``A_ub z <= b_ub`` and ``z >= 0``.  Inequalities receive slack columns.  The
tableau is refreshed from the original data every few pivots and the final
basic solution is recomputed by a direct solve, so reported residuals refer
to the input data rather than to the accumulated tableau.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SolverError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-10
COST_TOL = 1e-10
FEAS_TOL = 1e-9
REFRESH_EVERY = 60


@dataclass
class LinearProgram:
    """``min c.z`` s.t. ``A_eq z = b_eq``, ``A_ub z <= b_ub``, ``z >= 0``."""

    c: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_eq, self.b_eq = _block(self.A_eq, self.b_eq, n, "equality")
        self.A_ub, self.b_ub = _block(self.A_ub, self.b_ub, n, "inequality")

    @property
    def n(self) -> int:
        return self.c.size

    def residuals(self, z):
        """Largest equality violation and largest inequality excess."""
        eq = float(np.max(np.abs(self.A_eq @ z - self.b_eq))) if self.b_eq.size else 0.0
        ub = float(np.max(self.A_ub @ z - self.b_ub, initial=0.0)) if self.b_ub.size else 0.0
        return eq, max(ub, 0.0)


def _block(A, b, n, what):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape != (b.size, n):
        raise ValueError(f"{what} block has shape {A.shape}, expected ({b.size}, {n})")
    if not np.all(np.isfinite(b)):
        raise ValueError(f"{what} right-hand side must be finite")
    return A, b


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray] = None
    value: float = float("nan")
    iterations: int = 0
    basis: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class _Tableau:
    """Rows ``B^-1 [A | b]`` plus a reduced-cost row, over standard-form data."""

    def __init__(self, A, b, basis):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.iterations = 0
        self.refresh()

    def refresh(self):
        B = self.A[:, self.basis]
        try:
            self.T = np.linalg.solve(B, np.column_stack([self.A, self.b]))
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular basis during simplex refresh") from exc
        rhs = self.T[:, -1]
        rhs[(rhs < 0) & (rhs > -FEAS_TOL)] = 0.0

    def reduced_costs(self, cost):
        return cost - cost[self.basis] @ self.T[:, :-1]

    def pivot(self, r, e):
        T = self.T
        T[r] /= T[r, e]
        col = T[:, e].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = e
        self.iterations += 1
        if self.iterations % REFRESH_EVERY == 0:
            self.refresh()

    def run(self, cost, allowed, max_iter):
        """Bland iterations; returns ``OPTIMAL`` or ``UNBOUNDED``."""
        while True:
            if self.iterations > max_iter:
                raise SolverError("simplex iteration limit reached", iterations=self.iterations)
            d = self.reduced_costs(cost)
            scale = 1.0 + np.abs(cost).max(initial=0.0)
            candidates = np.nonzero((d < -COST_TOL * scale) & allowed)[0]
            if candidates.size == 0:
                return OPTIMAL
            e = int(candidates[0])
            col = self.T[:, e]
            pos = col > PIVOT_TOL
            if not np.any(pos):
                return UNBOUNDED
            ratios = np.full(col.size, np.inf)
            ratios[pos] = self.T[pos, -1] / col[pos]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + 1e-12 * (1.0 + abs(best)))[0]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, e)


def solve_lp(lp: LinearProgram, max_iter: int = 200000) -> LPResult:
    """Solve ``lp`` exactly (up to floating point) with the simplex method.

    Returns:
        ``LPResult`` with status ``optimal``, ``infeasible`` or ``unbounded``.

    Raises:
        SolverError: numerical breakdown, i.e. the recomputed basic solution
            violates the constraints by more than ``1e-9``.
    """
    n = lp.n
    m_eq, m_ub = lp.b_eq.size, lp.b_ub.size
    m = m_eq + m_ub
    if m == 0:
        if np.any(lp.c < 0):
            return LPResult(UNBOUNDED)
        return LPResult(OPTIMAL, np.zeros(n), 0.0)

    # standard form: [A_eq 0; A_ub I] [z; s] = b
    A = np.zeros((m, n + m_ub))
    A[:m_eq, :n] = lp.A_eq
    A[m_eq:, :n] = lp.A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([lp.b_eq, lp.b_ub])
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    n_std = A.shape[1]

    # phase 1 with one artificial per row
    A1 = np.hstack([A, np.eye(m)])
    cost1 = np.concatenate([np.zeros(n_std), np.ones(m)])
    tab = _Tableau(A1, b, range(n_std, n_std + m))
    tab.run(cost1, np.ones(n_std + m, dtype=bool), max_iter)
    infeas = float(cost1[tab.basis] @ tab.T[:, -1])
    if infeas > FEAS_TOL * max(1.0, float(np.abs(b).max())):
        return LPResult(INFEASIBLE, iterations=tab.iterations)

    # drive artificials out of the basis; drop redundant rows
    keep_rows = list(range(m))
    r = 0
    while r < len(tab.basis):
        if tab.basis[r] >= n_std:
            row = np.abs(tab.T[r, :n_std])
            j = int(np.argmax(row)) if row.size else -1
            if j >= 0 and row[j] > 1e-7 * max(1.0, float(np.abs(tab.T[:, :n_std]).max())):
                tab.pivot(r, j)
            else:
                # the artificial's own row is a combination of the others
                keep_rows.remove(tab.basis[r] - n_std)
                del tab.basis[r]
                tab.T = np.delete(tab.T, r, axis=0)
                continue
        r += 1
    if not tab.basis:
        x = np.zeros(n)
        return LPResult(OPTIMAL, x, float(lp.c @ x), tab.iterations)
    A2 = A[keep_rows]
    tab2 = _Tableau(A2, b[keep_rows], tab.basis)
    tab2.iterations = tab.iterations
    cost2 = np.concatenate([lp.c, np.zeros(m_ub)])
    status = tab2.run(cost2, np.ones(n_std, dtype=bool), max_iter)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, iterations=tab2.iterations)

    # recompute the vertex from the original data
    basis = tab2.basis
    xb = np.linalg.lstsq(A2[:, basis], b[keep_rows], rcond=None)[0]
    if np.any(xb < -FEAS_TOL):
        raise SolverError("basic solution has negative entries", min_entry=float(xb.min()))
    z_std = np.zeros(n_std)
    z_std[basis] = np.maximum(xb, 0.0)
    x = z_std[:n]
    eq_res, ub_res = lp.residuals(x)
    scale = max(1.0, float(np.abs(b).max()))
    if eq_res > FEAS_TOL * scale or ub_res > FEAS_TOL * scale:
        raise SolverError("constraint residual above tolerance", eq=eq_res, ub=ub_res)
    return LPResult(OPTIMAL, x, float(lp.c @ x), tab2.iterations, [j for j in basis if j < n])
