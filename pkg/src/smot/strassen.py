"""Feasible supermartingale and martingale couplings between discrete marginals.

Existence of a supermartingale coupling is equivalent to ``mu <=_cd nu`` and
of a martingale coupling to ``mu <=_c nu``.  The constructors below never
assume this: the linear program over the coupling polytope decides
feasibility, and the potential comparison is only consulted afterwards to
annotate an infeasible outcome.
"""

from __future__ import annotations

import numpy as np

from ._config import resolve_tol
from .coupling import FiniteCoupling
from .errors import MassError, OrderError
from .lp import LinearProgram, solve_lp
from .measure import DiscreteMeasure, cd_gap, wasserstein


def coupling_polytope(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: np.ndarray, martingale: bool,
                      tol: float | None = None) -> LinearProgram:
    """LP over couplings of ``mu`` and ``nu`` with barycentre rows.

    Variables are ``z[i, j]`` in row-major order.  Supermartingale rows read
    ``sum_j (y_j - x_i) z[i, j] <= 0``; martingale rows are equalities.
    """
    if abs(mu.mass - nu.mass) > 1e-9:
        raise MassError("marginals must have equal mass", mass1=mu.mass, mass2=nu.mass)
    x, y = mu.atoms, nu.atoms
    n, m = x.size, y.size
    A_marg = np.zeros((n + m, n * m))
    for i in range(n):
        A_marg[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A_marg[n + j, j::m] = 1.0
    # second marginal rescaled so both marginal blocks share the same total
    b_marg = np.concatenate([mu.weights, nu.weights * (mu.mass / nu.mass)])
    A_bar = np.zeros((n, n * m))
    for i in range(n):
        A_bar[i, i * m:(i + 1) * m] = y - x[i]
    if martingale:
        return LinearProgram(cost.reshape(-1), np.vstack([A_marg, A_bar]),
                             np.concatenate([b_marg, np.zeros(n)]))
    return LinearProgram(cost.reshape(-1), A_marg, b_marg, A_bar, np.zeros(n))


def _solve_polytope(mu, nu, cost, martingale, tol):
    tol = resolve_tol(tol)
    if mu.is_zero and nu.is_zero:
        return FiniteCoupling(), 0.0
    if abs(mu.mass - nu.mass) > 1e-9:
        raise MassError("marginals must have equal mass", mass1=mu.mass, mass2=nu.mass)
    lp = coupling_polytope(mu, nu, cost, martingale)
    res = solve_lp(lp)
    if not res.ok:
        gap, at = cd_gap(mu, nu)
        kind = "martingale" if martingale else "supermartingale"
        raise OrderError(f"no {kind} coupling exists between the given marginals",
                         breakpoint=at if gap > 0 else None, gap=gap,
                         mean_gap=mu.first_moment - nu.first_moment)
    Z = res.x.reshape(mu.size, nu.size)
    return FiniteCoupling.from_matrix(mu.atoms, nu.atoms, Z), res.value


def _abs_cost(mu, nu):
    return np.abs(mu.atoms[:, None] - nu.atoms[None, :])


def feasible_supermartingale(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float | None = None,
                             cost: np.ndarray | None = None) -> FiniteCoupling:
    """A supermartingale coupling of ``mu`` and ``nu``.

    Among feasible couplings the one minimising ``sum |x - y| pi(x, y)`` is
    returned (or the given ``cost`` matrix), which makes the output
    reproducible.

    Raises:
        OrderError: no supermartingale coupling exists; ``breakpoint`` marks
            where the put potential of ``mu`` exceeds that of ``nu``.
        MassError: the masses differ.
    """
    c = _abs_cost(mu, nu) if cost is None else np.asarray(cost, dtype=float)
    pi, _ = _solve_polytope(mu, nu, c, False, tol)
    return pi


def feasible_martingale(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float | None = None,
                        cost: np.ndarray | None = None) -> FiniteCoupling:
    """A martingale coupling of ``mu`` and ``nu`` (see ``feasible_supermartingale``)."""
    c = _abs_cost(mu, nu) if cost is None else np.asarray(cost, dtype=float)
    pi, _ = _solve_polytope(mu, nu, c, True, tol)
    return pi


def quantitative_martingale(eta: DiscreteMeasure, nu: DiscreteMeasure, tol: float | None = None,
                            return_cost: bool = False):
    """Martingale coupling of ``eta`` and ``nu`` with least transport cost.

    Minimises ``sum |z - y| M(z, y)`` over martingale couplings and checks
    the bound ``cost <= 2 W_1(eta, nu)``.

    Raises:
        OrderError: ``eta`` is not below ``nu`` in the convex order.
    """
    M, cost = _solve_polytope(eta, nu, _abs_cost(eta, nu), True, tol)
    bound = 2.0 * wasserstein(eta, nu, 1.0) if not eta.is_zero else 0.0
    if cost > bound + 1e-7:
        raise AssertionError(f"martingale transport cost {cost} exceeds twice W1 ({bound})")
    return (M, cost) if return_cost else M
