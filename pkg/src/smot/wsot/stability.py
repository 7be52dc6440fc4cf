"""Stability of the optimal value under perturbed marginals."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .._config import resolve_tol
from ..coupling import aw_distance
from ..errors import DomainError, PerturbationError
from ..lp import solve_lp
from ..measure import DiscreteMeasure, leq_cd, sup_cd, wasserstein
from .cost import CostSpec
from .solvers import solve, supermartingale_polytope, uniqueness_spread

TRANSLATE = "translate"
SPREAD = "spread"
JITTER = "jitter"
KINDS = (TRANSLATE, SPREAD, JITTER)


@dataclass(frozen=True)
class Perturbation:
    """How the marginals move at level ``h``.

    ``translate`` shifts both marginals by ``h``.  ``spread`` replaces
    ``nu`` by its symmetric mollification ``(nu(. - h) + nu(. + h)) / 2``,
    which dominates ``nu`` in the convex order.  ``jitter`` additionally
    moves every atom of ``mu`` by ``h u_i`` with fixed ``u_i`` uniform on
    ``[-1, 1]`` drawn from ``seed``, then restores the order by replacing
    the perturbed ``nu`` with the ``sup_cd`` of itself and the perturbed
    ``mu``.
    """

    kind: str = SPREAD
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown perturbation {self.kind!r}", known=list(KINDS))

    def apply(self, mu: DiscreteMeasure, nu: DiscreteMeasure, h: float, tol: float | None = None):
        """``(mu_h, nu_h)`` with ``mu_h <=_cd nu_h``.

        Raises:
            PerturbationError: the repair does not restore the order.
        """
        tol = resolve_tol(tol)
        if h < 0:
            raise DomainError("perturbation level must be nonnegative", h=h)
        if h == 0:
            return mu, nu
        if self.kind == TRANSLATE:
            mu_h, nu_h = mu.translate(h), nu.translate(h)
        else:
            nu_h = (nu.translate(-h) + nu.translate(h)).scale_mass(0.5)
            mu_h = mu
            if self.kind == JITTER:
                u = np.random.default_rng(self.seed).uniform(-1.0, 1.0, size=mu.size)
                mu_h = DiscreteMeasure(mu.atoms + h * u, mu.weights)
            if not leq_cd(mu_h, nu_h, tol):
                nu_h = sup_cd(nu_h, mu_h)
        if not leq_cd(mu_h, nu_h, tol):
            raise PerturbationError("perturbed marginals are not in convex-decreasing order", h=h)
        return mu_h, nu_h

    def to_json(self):
        return {"kind": self.kind, "seed": self.seed}


@dataclass
class StabilityRow:
    h: float
    w_gap: float
    value: float
    value_gap: float
    aw: Optional[float]


@dataclass
class StabilityTable:
    value: float
    unique: bool
    rows: List[StabilityRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "w_gap", "value", "value_gap", "aw"])
        for r in self.rows:
            w.writerow(["%.17g" % r.h, "%.17g" % r.w_gap, "%.17g" % r.value, "%.17g" % r.value_gap,
                        "" if r.aw is None else "%.17g" % r.aw])
        return buf.getvalue()

    def to_json(self):
        return {"value": self.value, "unique": self.unique,
                "rows": [r.__dict__.copy() for r in self.rows]}


def linear_optimum_unique(mu: DiscreteMeasure, nu: DiscreteMeasure, c: CostSpec, value: float,
                          trials: int = 3, seed: int = 0) -> bool:
    """Whether the optimal face of the linear problem is a single point.

    Random linear functionals are minimised and maximised over the optimal
    face; a face of positive dimension gives distinct extremes for almost
    every direction.
    """
    poly = supermartingale_polytope(mu, nu)
    C = c.pairwise_matrix(mu.atoms, nu.atoms).reshape(-1)
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        d = rng.normal(size=C.size)
        ext = []
        for sign in (1.0, -1.0):
            lp = poly.program(sign * d)
            lp.A_ub = np.vstack([lp.A_ub, C[None, :]])
            lp.b_ub = np.append(lp.b_ub, value + 1e-9 * max(1.0, abs(value)))
            res = solve_lp(lp)
            if not res.ok:
                return False
            ext.append(res.x)
        if np.max(np.abs(ext[0] - ext[1])) > 1e-7:
            return False
    return True


def stability_run(mu: DiscreteMeasure, nu: DiscreteMeasure, C: CostSpec, perturbation: Perturbation,
                  levels: Sequence[float], tol: float | None = None) -> StabilityTable:
    """Optimal values along perturbed marginals.

    Each row holds ``h``, ``W_1(mu_h, mu) + W_1(nu_h, nu)``, the value
    ``V_h``, ``|V_h - V|`` and, when the unperturbed minimiser is unique,
    ``AW_1`` between the perturbed and unperturbed minimisers.

    Raises:
        OrderError: ``mu`` is not below ``nu``.
        PerturbationError: a perturbed pair cannot be ordered.
    """
    tol = resolve_tol(tol)
    V, pi_star = solve(mu, nu, C, tol)
    if C.is_linear:
        unique = linear_optimum_unique(mu, nu, C, V)
    else:
        unique = C.is_convex and uniqueness_spread(mu, nu, C, tol=tol) <= 1e-5
    table = StabilityTable(float(V), bool(unique))
    for h in levels:
        h = float(h)
        mu_h, nu_h = perturbation.apply(mu, nu, h, tol)
        V_h, pi_h = solve(mu_h, nu_h, C, tol)
        gap = wasserstein(mu_h, mu) + wasserstein(nu_h, nu)
        aw = aw_distance(pi_h, pi_star) if unique else None
        table.rows.append(StabilityRow(h, gap, float(V_h), abs(float(V_h) - V), aw))
    return table
