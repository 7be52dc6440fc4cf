"""Irreducible decomposition of a pair ``mu <=_cd nu``.

With ``D = P_nu - P_mu >= 0`` and ``x* = sup{D = 0}``, the open components of
``{D > 0}`` left of ``x*`` carry martingale pieces, ``(x*, inf)`` carries the
strict supermartingale piece and the remaining closed set is the diagonal,
where ``mu`` and ``nu`` agree and every coupling stays put.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._config import resolve_tol
from .coupling import FiniteCoupling, mix
from .errors import CouplingInconsistentError, DecompositionError
from .measure import DiscreteMeasure, Interval, leq_c, leq_cd, require_leq_cd, weight_gap
from .potential import PiecewiseLinear, put_potential

DIAGONAL = "diagonal"
SUPERMARTINGALE = "supermartingale"
MARTINGALE = "martingale"


@dataclass(frozen=True, eq=False)
class Component:
    """One piece of the decomposition.

    ``index`` is ``-1`` for the diagonal, ``0`` for the supermartingale part
    and ``n >= 1`` for martingale parts.  The diagonal has ``interval=None``:
    it is the closed complement of the other intervals.
    """

    index: int
    kind: str
    interval: Optional[Interval]
    mu: DiscreteMeasure
    nu: DiscreteMeasure

    def to_json(self):
        return {
            "index": self.index,
            "kind": self.kind,
            "interval": "complement" if self.interval is None else _interval_triple(self.interval),
            "mu": self.mu.to_json(),
            "nu": self.nu.to_json(),
        }


def _interval_triple(iv: Interval):
    """``[lo, hi, [left, right]]`` with each flag ``"open"`` or ``"closed"``."""
    flag = {True: "closed", False: "open"}
    lo, hi = iv.to_json()["lo"], iv.to_json()["hi"]
    return [lo, hi, [flag[iv.lo_closed], flag[iv.hi_closed]]]


@dataclass(frozen=True, eq=False)
class IrreducibleDecomposition:
    x_star: float
    components: List[Component] = field(default_factory=list)

    @property
    def open_intervals(self):
        return [c.interval for c in self.components if c.interval is not None]

    def locate(self, x):
        """Component index for each ``x`` (``-1`` outside all open intervals)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.full(x.shape, -1, dtype=int)
        for c in self.components:
            if c.interval is not None:
                out[c.interval.contains(x)] = c.index
        return out

    def component(self, index):
        for c in self.components:
            if c.index == index:
                return c
        return None

    def to_json(self):
        xs = self.x_star
        return {
            "x_star": "inf" if math.isinf(xs) else xs,
            "components": [c.to_json() for c in self.components],
        }


def defect_potential(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float | None = None) -> PiecewiseLinear:
    """``D = P_nu - P_mu``; requires ``mu <=_cd nu``."""
    require_leq_cd(mu, nu, tol)
    return put_potential(nu) - put_potential(mu)


def _zero_grid(mu, nu):
    grid = np.unique(np.concatenate([mu.atoms, nu.atoms]))
    d = put_potential(nu)(grid) - put_potential(mu)(grid)
    scale = max(1.0, float(np.max(np.abs(put_potential(nu)(grid)), initial=0.0)))
    zero = d <= 1e-12 * scale
    tail_gap = mu.first_moment - nu.first_moment
    tail_zero = tail_gap <= 1e-12 * scale
    return grid, zero, tail_zero


def x_star(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float | None = None) -> float:
    """Supremum of the zero set of ``P_nu - P_mu``; ``inf`` if it vanishes at infinity."""
    require_leq_cd(mu, nu, tol)
    if mu.is_zero:
        return math.inf
    grid, zero, tail_zero = _zero_grid(mu, nu)
    if tail_zero:
        return math.inf
    return float(grid[np.nonzero(zero)[0][-1]])


def irreducible_components(mu: DiscreteMeasure, nu: DiscreteMeasure,
                           tol: float | None = None) -> IrreducibleDecomposition:
    """Decompose ``mu <=_cd nu`` into diagonal, supermartingale and martingale pieces.

    Boundary atoms of ``nu`` are split so that each martingale piece matches
    the mass and mean of its ``mu`` part, the supermartingale piece matches
    its mass, and whatever remains equals the diagonal ``mu`` part.

    Raises:
        OrderError: ``mu`` is not below ``nu`` in the convex-decreasing order.
        DecompositionError: the bookkeeping fails (indicates a bug).
    """
    tol = resolve_tol(tol)
    require_leq_cd(mu, nu, tol)
    if mu.is_zero:
        return IrreducibleDecomposition(math.inf, [])
    grid, zero, tail_zero = _zero_grid(mu, nu)
    xs = math.inf if tail_zero else float(grid[np.nonzero(zero)[0][-1]])

    # open components of {D > 0} left of x*
    intervals = []
    zero_idx = [i for i in np.nonzero(zero)[0] if grid[i] <= xs]
    for a, b in zip(zero_idx[:-1], zero_idx[1:]):
        if b > a + 1:
            intervals.append(Interval.open(grid[a], grid[b]))

    components = []
    used = DiscreteMeasure.zero()
    for n, iv in enumerate(intervals, start=1):
        mu_n = mu.restrict(iv)
        inner = nu.restrict(iv)
        m = mu_n.mass - inner.mass
        mom = mu_n.first_moment - inner.first_moment
        l, r = iv.lo, iv.hi
        b_w = (mom - l * m) / (r - l)
        a_w = m - b_w
        if a_w < -tol or b_w < -tol:
            raise DecompositionError("negative boundary allocation in a martingale component",
                                     interval=str(iv), left=a_w, right=b_w)
        dust = 1e-14 * max(1.0, mu_n.mass)
        nu_n = inner + DiscreteMeasure([l, r], [a_w if a_w > dust else 0.0, b_w if b_w > dust else 0.0])
        components.append(Component(n, MARTINGALE, iv, mu_n, nu_n))
        used = used + nu_n

    if not math.isinf(xs):
        iv0 = Interval(xs, math.inf, False, False)
        mu_0 = mu.restrict(iv0)
        inner = nu.restrict(iv0)
        c = mu_0.mass - inner.mass
        if c < -tol:
            raise DecompositionError("negative boundary allocation at x*", weight=c)
        nu_0 = inner + DiscreteMeasure([xs], [c if c > 1e-14 * max(1.0, mu_0.mass) else 0.0])
        components.insert(0, Component(0, SUPERMARTINGALE, iv0, mu_0, nu_0))
        used = used + nu_0

    covered = [c.interval for c in components]
    diag_mask = np.ones(mu.size, dtype=bool)
    for iv in covered:
        diag_mask &= ~iv.contains(mu.atoms)
    mu_d = DiscreteMeasure(mu.atoms[diag_mask], mu.weights[diag_mask])
    try:
        nu_d = nu.subtract(used, tol)
    except Exception as exc:
        raise DecompositionError("component second marginals exceed nu") from exc
    gap = weight_gap(mu_d, nu_d)
    if gap > 10 * tol:
        raise DecompositionError("diagonal parts of mu and nu differ", weight_gap=gap)
    if not mu_d.is_zero or not nu_d.is_zero:
        components.insert(0, Component(-1, DIAGONAL, None, mu_d, nu_d))

    dec = IrreducibleDecomposition(xs, components)
    _check_orders(dec, tol)
    return dec


def _check_orders(dec, tol):
    for c in dec.components:
        if c.kind == MARTINGALE and not leq_c(c.mu, c.nu, 10 * tol):
            raise DecompositionError("martingale component is not in convex order", index=c.index)
        if c.kind == SUPERMARTINGALE and not leq_cd(c.mu, c.nu, 10 * tol):
            raise DecompositionError("supermartingale component is not in convex-decreasing order")


def decompose_coupling(pi: FiniteCoupling, dec: IrreducibleDecomposition,
                       tol: float | None = None) -> List[FiniteCoupling]:
    """Split a supermartingale coupling along the decomposition.

    Returns one sub-coupling per component of ``dec`` (same order).

    Raises:
        CouplingInconsistentError: a piece's second marginal differs from the
            component's ``nu`` part, or the diagonal piece moves mass.
    """
    tol = resolve_tol(tol)
    if pi.size == 0:
        return []
    loc = dec.locate(pi.xs)
    pieces = []
    for c in dec.components:
        rows = [r for r, k in zip(pi.rows, loc) if k == c.index]
        piece = FiniteCoupling(rows)
        gap = max(weight_gap(piece.first_marginal, c.mu), weight_gap(piece.second_marginal, c.nu))
        if gap > 10 * tol:
            raise CouplingInconsistentError("coupling piece does not match its component",
                                            index=c.index, weight_gap=gap)
        if c.kind == DIAGONAL:
            moved = max((abs(k.atoms - x).max() for x, _, k in piece.rows), default=0.0)
            if moved > tol:
                raise CouplingInconsistentError("diagonal piece moves mass", distance=moved)
        pieces.append(piece)
    return pieces


def _level_ranges(mu: DiscreteMeasure, dec: IrreducibleDecomposition):
    """Quantile-level set of each non-diagonal component, as ``(lo, hi)``."""
    out = {}
    for c in dec.components:
        if c.interval is None:
            continue
        lo = float(mu.cdf(c.interval.lo)) if not math.isinf(c.interval.lo) else 0.0
        if math.isinf(c.interval.hi):
            hi = mu.mass
        else:
            hi = float(mu.weights[mu.atoms < c.interval.hi].sum())
        out[c.index] = (lo, hi)
    return out


@dataclass(frozen=True, eq=False)
class ApproxComponent:
    component: Component
    mu_k: DiscreteMeasure
    nu_k: DiscreteMeasure
    pi_k: FiniteCoupling


def approx_decomposition(mu: DiscreteMeasure, nu: DiscreteMeasure, pi_k: FiniteCoupling,
                         mu_k: DiscreteMeasure, nu_k: DiscreteMeasure,
                         dec: IrreducibleDecomposition, tol: float | None = None) -> List[ApproxComponent]:
    """Transfer the decomposition of ``(mu, nu)`` to ``(mu_k, nu_k)``.

    Each component keeps the quantile levels ``u`` it occupies under ``mu``;
    its first marginal is the image of those levels under the quantile
    function of ``mu_k`` and its second marginal mixes the kernels of
    ``pi_k`` at the corresponding atoms.  The diagonal takes the leftover
    levels.  Every piece is coupled by a sub-coupling of ``pi_k`` and is
    therefore ordered in the convex-decreasing order.
    """
    tol = resolve_tol(tol)
    require_leq_cd(mu_k, nu_k, tol)
    if weight_gap(pi_k.first_marginal, mu_k) > 10 * tol or weight_gap(pi_k.second_marginal, nu_k) > 10 * tol:
        raise CouplingInconsistentError("reference coupling does not have marginals (mu_k, nu_k)")
    ranges = _level_ranges(mu, dec)
    cum = np.cumsum(pi_k.ws)
    starts = np.concatenate([[0.0], cum[:-1]])
    shares = {}
    assigned = np.zeros(pi_k.size)
    for idx, (lo, hi) in ranges.items():
        s = np.clip(np.minimum(cum, hi) - np.maximum(starts, lo), 0.0, None)
        shares[idx] = s
        assigned += s
    diag = np.clip(pi_k.ws - assigned, 0.0, None)
    diag[diag <= 1e-15] = 0.0
    out = []
    for c in dec.components:
        s = diag if c.index == -1 else shares[c.index]
        rows = [(x, w, k) for x, w, k in zip(pi_k.xs, s, pi_k.kernels) if w > 0]
        piece = FiniteCoupling(rows)
        m_k, n_k = piece.marginals()
        if not leq_cd(m_k, n_k, 10 * tol):
            raise DecompositionError("transferred component lost the convex-decreasing order", index=c.index)
        out.append(ApproxComponent(c, m_k, n_k, piece))
    return out


__all__ = [
    "Component",
    "IrreducibleDecomposition",
    "ApproxComponent",
    "defect_potential",
    "x_star",
    "irreducible_components",
    "decompose_coupling",
    "approx_decomposition",
    "mix",
]
