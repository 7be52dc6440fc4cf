"""Finite checks of supermartingale C-monotonicity.

A coupling passes when no group of at most ``n_max`` rows can exchange mass
among their kernels and lower the total cost.  Competitor kernels ``q_i``
live on the union of the rows' kernel atoms, keep the weighted sum
``sum_i w_i q_i = sum_i w_i p_i``, keep the barycentre of rows in the
martingale region ``M_1`` and may move the barycentre of rows in ``M_0`` to
any value ``<= x_i``.  Row weights enter relative to the lightest row of the
group, so equally weighted rows give the plain unweighted exchange.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .._config import MERGE_TOL, resolve_tol
from ..coupling import FiniteCoupling
from ..decomposition import DIAGONAL, MARTINGALE, SUPERMARTINGALE, IrreducibleDecomposition
from ..errors import CostDomainError, RegionCoverageError
from ..measure import DiscreteMeasure, Interval
from .cost import CostSpec
from .solvers import RowPolytope, frank_wolfe, weighted_objective

IMPROVEMENT_TOL = 1e-7
M0, M1 = "M0", "M1"


@dataclass(frozen=True)
class MartingaleRegions:
    """``M_1``: martingale-component intervals left of ``x*``; ``M_0``: ``(x*, inf)``."""

    M0: Tuple[Interval, ...]
    M1: Tuple[Interval, ...]

    def to_json(self):
        return {"M0": [iv.to_json() for iv in self.M0], "M1": [iv.to_json() for iv in self.M1]}


def martingale_regions(pi: FiniteCoupling, dec: IrreducibleDecomposition) -> MartingaleRegions:
    """Regions of the decomposition of ``pi``'s marginals.

    ``M_1`` depends on the marginals only.  ``M_0`` is the interval of the
    supermartingale component, on which every supermartingale coupling may
    lower barycentres.
    """
    m0 = tuple(c.interval for c in dec.components if c.kind == SUPERMARTINGALE)
    m1 = tuple(c.interval for c in dec.components if c.kind == MARTINGALE)
    return MartingaleRegions(m0, m1)


def row_roles(pi: FiniteCoupling, dec: IrreducibleDecomposition) -> List[str]:
    """``M0`` or ``M1`` for every row of ``pi``; diagonal rows count as ``M1``.

    Raises:
        RegionCoverageError: a row is not an atom of the decomposed first
            marginal, so no region applies.
    """
    support = np.concatenate([c.mu.atoms for c in dec.components]) if dec.components else np.zeros(0)
    roles = []
    loc = dec.locate(pi.xs)
    kinds = {c.index: c.kind for c in dec.components}
    for x, k in zip(pi.xs, loc):
        if support.size == 0 or np.min(np.abs(support - x)) > MERGE_TOL:
            raise RegionCoverageError("row lies outside the decomposed first marginal", x=float(x))
        kind = kinds.get(int(k), DIAGONAL)
        roles.append(M0 if kind == SUPERMARTINGALE else M1)
    return roles


@dataclass
class Witness:
    """An improving exchange among the rows ``indices``."""

    indices: Tuple[int, ...]
    xs: np.ndarray
    weights: np.ndarray
    roles: Tuple[str, ...]
    p: Tuple[DiscreteMeasure, ...]
    q: Tuple[DiscreteMeasure, ...]
    cost_p: float
    cost_q: float

    @property
    def improvement(self) -> float:
        return self.cost_p - self.cost_q

    def replay(self, C: CostSpec, tol: float = 1e-9) -> float:
        """Re-evaluate both allocations and the competitor constraints.

        Returns:
            The cost improvement.

        Raises:
            AssertionError: a competitor constraint fails.
        """
        ys = np.unique(np.concatenate([k.atoms for k in self.p + self.q]))
        Pm = np.array([_on_grid(k, ys) for k in self.p])
        Qm = np.array([_on_grid(k, ys) for k in self.q])
        assert np.all(Qm >= -tol), "competitor kernel has negative weight"
        assert np.allclose(Qm.sum(axis=1), 1.0, atol=tol), "competitor kernel is not a probability"
        assert np.allclose(self.weights @ Qm, self.weights @ Pm, atol=tol), "kernel sums differ"
        for role, x, p, q in zip(self.roles, self.xs, self.p, self.q):
            if role == M1:
                assert abs(q.bary - p.bary) <= tol * max(1.0, abs(x)), "barycentre moved in M_1"
            else:
                assert q.bary <= x + tol * max(1.0, abs(x)), "barycentre above x in M_0"
        cp = float(self.weights @ C.row_values(self.xs, ys, Pm))
        cq = float(self.weights @ C.row_values(self.xs, ys, Qm))
        return cp - cq

    def to_json(self):
        return {
            "indices": list(self.indices),
            "x": self.xs.tolist(),
            "weights": self.weights.tolist(),
            "roles": list(self.roles),
            "p": [k.to_json() for k in self.p],
            "q": [k.to_json() for k in self.q],
            "cost_p": self.cost_p,
            "cost_q": self.cost_q,
            "improvement": self.improvement,
        }


def _on_grid(k: DiscreteMeasure, ys):
    out = np.zeros(ys.size)
    idx = np.searchsorted(ys, k.atoms - MERGE_TOL)
    np.add.at(out, idx, k.weights)
    return out


@dataclass
class MonotonicityReport:
    is_monotone: bool
    regions: MartingaleRegions
    witness: Optional[Witness] = None
    subsets_checked: int = 0
    n_max: int = 3

    def to_json(self):
        return {
            "is_monotone": self.is_monotone,
            "regions": self.regions.to_json(),
            "witness": None if self.witness is None else self.witness.to_json(),
            "subsets_checked": self.subsets_checked,
            "n_max": self.n_max,
        }


def _competitor(pi: FiniteCoupling, roles, idx, C: CostSpec, tol: float) -> Optional[Witness]:
    xs = pi.xs[list(idx)]
    w = pi.ws[list(idx)]
    omega = w / w.min()
    kernels = tuple(pi.kernels[i] for i in idx)
    ys = np.unique(np.concatenate([k.atoms for k in kernels]))
    Pm = np.array([_on_grid(k, ys) for k in kernels])
    bary = Pm @ ys
    rl = tuple(roles[i] for i in idx)
    equal = np.array([r == M1 for r in rl])
    rhs = omega * np.where(equal, bary, xs)
    poly = RowPolytope(xs, ys, omega, omega @ Pm, rhs, equal)
    f, grad = weighted_objective(C, xs, ys, omega)
    z_p = (omega[:, None] * Pm).reshape(-1)
    cost_p = f(z_p)
    if C.is_linear:
        Z = poly.vertex(C.pairwise_matrix(xs, ys))
        if Z is None:
            return None
        z = Z.reshape(-1)
    else:
        Z0 = poly.vertex(grad(z_p).reshape(poly.shape))
        if Z0 is None:
            return None

        def lmo(g):
            return poly.vertex(g.reshape(poly.shape)).reshape(-1)

        z, _, _, _, _ = frank_wolfe(f, grad, lmo, Z0.reshape(-1), gap_tol=IMPROVEMENT_TOL * 1e-2,
                                    max_iter=2000)
    cost_q = f(z)
    if cost_p - cost_q <= IMPROVEMENT_TOL:
        return None
    Qm = np.maximum(z.reshape(poly.shape), 0.0) / omega[:, None]
    q = tuple(DiscreteMeasure(ys, row) for row in Qm)
    return Witness(tuple(idx), xs, omega, rl, kernels, q, cost_p, cost_q)


def check_monotone(pi: FiniteCoupling, C: CostSpec, dec: IrreducibleDecomposition, n_max: int = 3,
                   threads: int = 1, tol: float | None = None) -> MonotonicityReport:
    """Search all groups of at most ``n_max`` rows for an improving competitor.

    Groups are visited by size and then lexicographically; with several
    threads all groups are solved and the first witness in that order is
    reported.  Single rows are skipped: their only competitor is the row
    itself.  Competitor kernels are restricted to the union of the group's
    kernel atoms, so the check is a necessary condition for optimality.

    Raises:
        RegionCoverageError: a row lies outside the decomposed marginal.
    """
    tol = resolve_tol(tol)
    regions = martingale_regions(pi, dec)
    roles = row_roles(pi, dec)
    subsets = [s for k in range(2, min(n_max, pi.size) + 1) for s in itertools.combinations(range(pi.size), k)]
    report = MonotonicityReport(True, regions, n_max=n_max)
    if threads > 1 and len(subsets) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda s: _competitor(pi, roles, s, C, tol), subsets))
        report.subsets_checked = len(subsets)
        for wit in results:
            if wit is not None:
                report.is_monotone, report.witness = False, wit
                break
        return report
    for s in subsets:
        report.subsets_checked += 1
        wit = _competitor(pi, roles, s, C, tol)
        if wit is not None:
            report.is_monotone, report.witness = False, wit
            break
    return report


def check_finitely_optimal(pi: FiniteCoupling, c: CostSpec, dec: IrreducibleDecomposition, n_max: int = 3,
                           threads: int = 1, tol: float | None = None) -> MonotonicityReport:
    """``check_monotone`` for a pairwise cost ``C(x, p) = int c(x, y) p(dy)``.

    Raises:
        CostDomainError: ``c`` is not a pairwise cost.
    """
    if not c.is_linear:
        raise CostDomainError("finite optimality is defined for pairwise costs")
    return check_monotone(pi, c, dec, n_max, threads, tol)
