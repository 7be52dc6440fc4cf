"""Weak supermartingale transport: linear and convex solvers.

Couplings are matrices ``Z[i, j]`` over the atoms of the two marginals.  The
feasible set is the supermartingale polytope (marginal equalities plus one
barycentre inequality per row); linear costs are solved exactly by the
simplex method and convex costs by away-step Frank-Wolfe with the simplex as
linear-minimisation oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .._config import resolve_tol
from ..coupling import FiniteCoupling, aw_distance
from ..errors import MassError, OrderError, SolverError
from ..lp import LinearProgram, solve_lp
from ..measure import DiscreteMeasure, cd_gap
from .cost import CostSpec

GAP_TOL = 1e-7
MAX_ITER = 10_000


@dataclass
class RowPolytope:
    """Nonnegative matrices with fixed row and column sums and barycentre rows.

    Row ``i`` satisfies ``sum_j y_j Z[i, j] = bary_rhs[i]`` when ``equal[i]``
    and ``<= bary_rhs[i]`` otherwise.
    """

    xs: np.ndarray
    ys: np.ndarray
    row_mass: np.ndarray
    col_mass: np.ndarray
    bary_rhs: np.ndarray
    equal: np.ndarray

    @property
    def shape(self):
        return self.xs.size, self.ys.size

    def program(self, cost) -> LinearProgram:
        n, m = self.shape
        A = np.zeros((n + m, n * m))
        for i in range(n):
            A[i, i * m:(i + 1) * m] = 1.0
        for j in range(m):
            A[n + j, j::m] = 1.0
        b = np.concatenate([self.row_mass, self.col_mass])
        B = np.zeros((n, n * m))
        for i in range(n):
            B[i, i * m:(i + 1) * m] = self.ys
        eq = np.asarray(self.equal, dtype=bool)
        A_eq = np.vstack([A, B[eq]])
        b_eq = np.concatenate([b, self.bary_rhs[eq]])
        ub = ~eq
        return LinearProgram(np.asarray(cost, dtype=float).reshape(-1), A_eq, b_eq,
                             B[ub] if ub.any() else None, self.bary_rhs[ub] if ub.any() else None)

    def vertex(self, cost) -> Optional[np.ndarray]:
        """Minimiser of ``<cost, Z>`` (a vertex), or ``None`` when the polytope is empty."""
        res = solve_lp(self.program(cost))
        if not res.ok:
            return None
        return res.x.reshape(self.shape)


def supermartingale_polytope(mu: DiscreteMeasure, nu: DiscreteMeasure) -> RowPolytope:
    if abs(mu.mass - nu.mass) > 1e-9:
        raise MassError("marginals must have equal mass", mass1=mu.mass, mass2=nu.mass)
    return RowPolytope(mu.atoms, nu.atoms, mu.weights, nu.weights * (mu.mass / nu.mass),
                       mu.atoms * mu.weights, np.zeros(mu.size, dtype=bool))


def _infeasible(mu, nu):
    gap, at = cd_gap(mu, nu)
    return OrderError("no supermartingale coupling exists between the given marginals",
                      breakpoint=at if gap > 0 else None, gap=gap)


def solve_linear(mu: DiscreteMeasure, nu: DiscreteMeasure, c: CostSpec, tol: float | None = None):
    """Optimal supermartingale transport for a pairwise cost.

    Returns:
        ``(value, coupling)`` with an optimal vertex coupling.

    Raises:
        OrderError: ``mu`` is not below ``nu`` in the convex-decreasing order.
        CostDomainError: the cost is not linear in the kernel or misses a pair.
    """
    resolve_tol(tol)
    if mu.is_zero and nu.is_zero:
        return 0.0, FiniteCoupling()
    poly = supermartingale_polytope(mu, nu)
    C = c.pairwise_matrix(mu.atoms, nu.atoms)
    Z = poly.vertex(C)
    if Z is None:
        raise _infeasible(mu, nu)
    return float((C * Z).sum()), FiniteCoupling.from_matrix(mu.atoms, nu.atoms, Z)


@dataclass
class ConvexResult:
    """Frank-Wolfe outcome.

    ``lower_bound = value - gap`` bounds the optimum from below when the cost
    is convex (``certified``).  Unpacks as ``(value, coupling)``.
    """

    value: float
    coupling: FiniteCoupling
    gap: float
    iterations: int
    converged: bool
    certified: bool
    matrix: np.ndarray = field(repr=False, default=None)

    @property
    def lower_bound(self) -> float:
        return self.value - self.gap

    def __iter__(self):
        yield self.value
        yield self.coupling

    def to_json(self):
        return {"value": self.value, "gap": self.gap, "lower_bound": self.lower_bound,
                "iterations": self.iterations, "converged": self.converged,
                "certified": self.certified, "coupling": self.coupling.to_json()}


def weighted_objective(C: CostSpec, xs, ys, row_mass):
    """``F(Z) = sum_i a_i C(x_i, Z_i / a_i)`` and its gradient, for fixed row masses ``a``."""
    a = np.asarray(row_mass, dtype=float)
    safe = np.where(a > 0, a, 1.0)
    shape = (xs.size, ys.size)

    def f(z):
        P = np.maximum(z.reshape(shape), 0.0) / safe[:, None]
        return float(a @ C.row_values(xs, ys, P))

    def grad(z):
        P = np.maximum(z.reshape(shape), 0.0) / safe[:, None]
        return C.row_gradient(xs, ys, P).reshape(-1)

    return f, grad


def frank_wolfe(f: Callable, grad: Callable, lmo: Callable, z0: np.ndarray, gap_tol: float = GAP_TOL,
                max_iter: int = MAX_ITER):
    """Away-step Frank-Wolfe from the vertex ``z0``.

    ``lmo(g)`` returns a vertex minimising ``<g, z>``.  Returns
    ``(z_best, f_best, gap, iterations, converged)`` where ``gap`` is
    ``f_best`` minus the best lower bound ``f(z) + <g, s - z>`` seen.
    """
    def key(v):
        return np.round(v, 12).tobytes()

    verts = {key(z0): z0.copy()}
    alpha = {key(z0): 1.0}
    z = z0.copy()
    fz = f(z)
    best_z, best_f, lower = z.copy(), fz, -math.inf
    it = 0
    converged = False
    while it < max_iter:
        g = grad(z)
        s = lmo(g)
        fw_gap = float(g @ (z - s))
        lower = max(lower, fz - fw_gap)
        if best_f - lower <= gap_tol:
            converged = True
            break
        it += 1
        ka = max(alpha, key=lambda k: float(g @ verts[k]))
        v_a = verts[ka]
        away_gain = float(g @ (v_a - z))
        if fw_gap >= away_gain or len(alpha) == 1:
            d, gmax, step = s - z, 1.0, "fw"
        else:
            a_a = alpha[ka]
            d, gmax, step = z - v_a, a_a / (1.0 - a_a), "away"
        res = minimize_scalar(lambda t: f(z + t * d), bounds=(0.0, gmax), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, gmax)})
        gamma = float(res.x)
        for cand in (0.0, gmax):
            if f(z + cand * d) < f(z + gamma * d):
                gamma = cand
        if gamma <= 0.0:
            # no numerical descent left; the certificate stays as recorded
            break
        if step == "fw":
            ks = key(s)
            for k in alpha:
                alpha[k] *= 1.0 - gamma
            verts.setdefault(ks, s.copy())
            alpha[ks] = alpha.get(ks, 0.0) + gamma
            if gamma >= 1.0:
                verts, alpha = {ks: verts[ks]}, {ks: 1.0}
        else:
            for k in alpha:
                alpha[k] *= 1.0 + gamma
            alpha[ka] -= gamma
            if gamma >= gmax or alpha[ka] <= 1e-15:
                del alpha[ka]
                del verts[ka]
        z = sum(alpha[k] * verts[k] for k in alpha)
        fz = f(z)
        if fz < best_f:
            best_z, best_f = z.copy(), fz
    return best_z, best_f, max(best_f - lower, 0.0), it, converged


def solve_convex(mu: DiscreteMeasure, nu: DiscreteMeasure, C: CostSpec, tol: float | None = None,
                 start_cost: np.ndarray | None = None, gap_tol: float = GAP_TOL,
                 max_iter: int = MAX_ITER) -> ConvexResult:
    """Minimise ``int C(x, pi_x) mu(dx)`` over supermartingale couplings.

    The iteration starts at the vertex minimising ``start_cost`` (default
    ``|x - y|``) and stops once the duality gap is at most ``gap_tol`` or
    after ``max_iter`` iterations; ``converged`` records which.  For a
    non-convex cost (positive variance weight) the result is a local
    solution and ``certified`` is false.

    Raises:
        OrderError: ``mu`` is not below ``nu`` in the convex-decreasing order.
    """
    resolve_tol(tol)
    if mu.is_zero and nu.is_zero:
        return ConvexResult(0.0, FiniteCoupling(), 0.0, 0, True, True, np.zeros((0, 0)))
    poly = supermartingale_polytope(mu, nu)
    x, y = mu.atoms, nu.atoms
    start = np.abs(x[:, None] - y[None, :]) if start_cost is None else np.asarray(start_cost, dtype=float)
    Z0 = poly.vertex(start)
    if Z0 is None:
        raise _infeasible(mu, nu)
    f, grad = weighted_objective(C, x, y, poly.row_mass)

    def lmo(g):
        v = poly.vertex(g)
        if v is None:
            raise SolverError("linear oracle failed on a nonempty polytope")
        return v.reshape(-1)

    z, val, gap, it, conv = frank_wolfe(f, grad, lmo, Z0.reshape(-1), gap_tol, max_iter)
    Z = np.maximum(z.reshape(poly.shape), 0.0)
    return ConvexResult(val, FiniteCoupling.from_matrix(x, y, Z), gap, it, conv, C.is_convex, Z)


def uniqueness_spread(mu: DiscreteMeasure, nu: DiscreteMeasure, C: CostSpec, n_starts: int = 2,
                      seed: int = 0, tol: float | None = None) -> float:
    """Largest ``AW_1`` distance between minimisers found from random starting vertices.

    Small values are expected for strictly convex costs, whose minimiser is
    unique.
    """
    rng = np.random.default_rng(seed)
    sols = []
    for _ in range(max(2, n_starts)):
        start = rng.normal(size=(mu.size, nu.size))
        sols.append(solve_convex(mu, nu, C, tol, start_cost=start).coupling)
    return max(aw_distance(a, b) for i, a in enumerate(sols) for b in sols[i + 1:])


def solve(mu: DiscreteMeasure, nu: DiscreteMeasure, C: CostSpec, tol: float | None = None):
    """``(value, coupling)`` by the simplex method for linear costs, Frank-Wolfe otherwise."""
    if C.is_linear:
        return solve_linear(mu, nu, C, tol)
    return tuple(solve_convex(mu, nu, C, tol))
