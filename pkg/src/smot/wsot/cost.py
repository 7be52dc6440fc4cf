"""Weak transport costs ``C(x, m)`` evaluated on finitely supported kernels.

Kernels are handled as rows of a probability matrix ``P`` over a fixed grid
``ys``.  Every cost exposes its row values and its first variation
``dC/dP[i, j]``, which is the gradient used by Frank-Wolfe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .._config import MERGE_TOL
from ..coupling import FiniteCoupling
from ..errors import CostDomainError
from ..potential import PiecewiseLinear

PAIRWISE = "pairwise"
BARYCENTRE_CONVEX = "barycentre_convex"
VARIANCE_PENALTY = "variance_penalty"
LINEAR_COMBINATION = "linear_combination"

NAMED_PAIRWISE = {
    "abs": lambda x, y: np.abs(x - y),
    "square": lambda x, y: (x - y) ** 2,
    "y": lambda x, y: y + 0.0 * x,
}


@dataclass(frozen=True)
class _Grid:
    """Tabulated ``c(x, y)`` over atom pairs."""

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        i = _lookup(self.xs, x, "x")
        j = _lookup(self.ys, y, "y")
        return self.values[i, j]


def _lookup(grid, v, what):
    idx = np.clip(np.searchsorted(grid, v - MERGE_TOL), 0, grid.size - 1)
    if np.any(np.abs(grid[idx] - v) > MERGE_TOL):
        bad = float(np.asarray(v)[np.abs(grid[idx] - v) > MERGE_TOL].flat[0])
        raise CostDomainError(f"cost grid has no entry for {what} = {bad!r}", missing=bad)
    return idx


@dataclass(frozen=True)
class _Phi:
    """Convex function of the barycentre with a (sub)derivative."""

    name: str
    f: Callable
    df: Callable
    pl: Optional[PiecewiseLinear] = None


def _square_phi():
    return _Phi("square", lambda b: b * b, lambda b: 2.0 * b)


def _pl_phi(pl: PiecewiseLinear):
    if not pl.is_convex():
        raise CostDomainError("barycentre function is not convex")

    def df(b):
        b = np.asarray(b, dtype=float)
        # right slope at each point
        return pl.slopes[np.searchsorted(pl.xs, b, side="right")]

    return _Phi("piecewise_linear", lambda b: pl(b), df, pl)


@dataclass(frozen=True, eq=False)
class CostSpec:
    """A weak transport cost.

    Use the constructors ``pairwise``, ``pairwise_grid``,
    ``barycentre_convex``, ``variance_penalty`` and ``linear_combination``.
    """

    kind: str
    c: Optional[Callable] = None
    c_name: Optional[str] = None
    phi: Optional[_Phi] = None
    lam: float = 0.0
    terms: Tuple[Tuple[float, "CostSpec"], ...] = field(default_factory=tuple)

    # -- constructors ---------------------------------------------------------
    @classmethod
    def pairwise(cls, c) -> "CostSpec":
        """``C(x, m) = int c(x, y) m(dy)`` for a vectorised ``c`` or a name in ``NAMED_PAIRWISE``."""
        if isinstance(c, str):
            if c not in NAMED_PAIRWISE:
                raise CostDomainError(f"unknown pairwise cost {c!r}", known=sorted(NAMED_PAIRWISE))
            return cls(PAIRWISE, NAMED_PAIRWISE[c], c_name=c)
        if not callable(c):
            raise CostDomainError("pairwise cost must be callable or a known name")
        return cls(PAIRWISE, c)

    @classmethod
    def pairwise_grid(cls, xs, ys, values) -> "CostSpec":
        """Pairwise cost tabulated on ``xs x ys``; lookups off the grid raise ``CostDomainError``."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape != (xs.size, ys.size):
            raise CostDomainError("cost grid shape does not match its axes", shape=list(values.shape))
        if not np.all(np.isfinite(values)):
            raise CostDomainError("cost grid entries must be finite")
        ox, oy = np.argsort(xs), np.argsort(ys)
        return cls(PAIRWISE, _Grid(xs[ox], ys[oy], values[np.ix_(ox, oy)]), c_name="grid")

    @classmethod
    def barycentre_convex(cls, phi="square") -> "CostSpec":
        """``C(x, m) = phi(bary(m))`` for ``phi`` equal to ``"square"`` or a convex ``PiecewiseLinear``."""
        if isinstance(phi, str):
            if phi != "square":
                raise CostDomainError(f"unknown barycentre function {phi!r}")
            return cls(BARYCENTRE_CONVEX, phi=_square_phi())
        if isinstance(phi, PiecewiseLinear):
            return cls(BARYCENTRE_CONVEX, phi=_pl_phi(phi))
        raise CostDomainError("barycentre function must be 'square' or a PiecewiseLinear")

    @classmethod
    def variance_penalty(cls, lam: float = 1.0) -> "CostSpec":
        """``C(x, m) = lam * Var(m)``."""
        lam = float(lam)
        if not lam >= 0 or not math.isfinite(lam):
            raise CostDomainError("variance weight must be finite and nonnegative", weight=lam)
        return cls(VARIANCE_PENALTY, lam=lam)

    @classmethod
    def linear_combination(cls, terms: Sequence[Tuple[float, "CostSpec"]]) -> "CostSpec":
        terms = tuple((float(a), s) for a, s in terms)
        if not terms:
            raise CostDomainError("linear combination needs at least one term")
        return cls(LINEAR_COMBINATION, terms=terms)

    # -- structure ------------------------------------------------------------
    @property
    def is_linear(self) -> bool:
        """Linear in the kernel, i.e. a pairwise cost."""
        if self.kind == PAIRWISE:
            return True
        if self.kind == VARIANCE_PENALTY:
            return self.lam == 0
        if self.kind == LINEAR_COMBINATION:
            return all(s.is_linear or a == 0 for a, s in self.terms)
        return False

    @property
    def is_convex(self) -> bool:
        """Convex in the kernel.

        The variance is concave in the kernel, so a positive variance weight
        makes the cost non-convex.
        """
        if self.kind in (PAIRWISE, BARYCENTRE_CONVEX):
            return True
        if self.kind == VARIANCE_PENALTY:
            return self.lam == 0
        return all(s.is_linear or (a >= 0 and s.is_convex) for a, s in self.terms)

    # -- evaluation -----------------------------------------------------------
    def pairwise_matrix(self, xs, ys) -> np.ndarray:
        """``c(x_i, y_j)``; only for linear costs."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if self.kind == PAIRWISE:
            out = np.asarray(self.c(xs[:, None], ys[None, :]), dtype=float)
            out = np.broadcast_to(out, (xs.size, ys.size)).copy()
            if not np.all(np.isfinite(out)):
                raise CostDomainError("pairwise cost is not finite on the support")
            return out
        if self.kind == VARIANCE_PENALTY and self.lam == 0:
            return np.zeros((xs.size, ys.size))
        if self.kind == LINEAR_COMBINATION and self.is_linear:
            out = np.zeros((xs.size, ys.size))
            for a, s in self.terms:
                if a != 0:
                    out += a * s.pairwise_matrix(xs, ys)
            return out
        raise CostDomainError("cost is not linear in the kernel")

    def row_values(self, xs, ys, P) -> np.ndarray:
        """``C(x_i, P_i)`` for probability rows ``P`` over ``ys``."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        P = np.asarray(P, dtype=float)
        if self.kind == PAIRWISE:
            return (P * self.pairwise_matrix(xs, ys)).sum(axis=1)
        if self.kind == BARYCENTRE_CONVEX:
            return np.asarray(self.phi.f(P @ ys), dtype=float)
        if self.kind == VARIANCE_PENALTY:
            b = P @ ys
            return self.lam * np.maximum(P @ (ys * ys) - b * b, 0.0)
        return sum(a * s.row_values(xs, ys, P) for a, s in self.terms)

    def row_gradient(self, xs, ys, P) -> np.ndarray:
        """First variation ``dC(x_i, P_i)/dP[i, j]``."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        P = np.asarray(P, dtype=float)
        if self.kind == PAIRWISE:
            return self.pairwise_matrix(xs, ys)
        if self.kind == BARYCENTRE_CONVEX:
            return np.asarray(self.phi.df(P @ ys), dtype=float)[:, None] * ys[None, :]
        if self.kind == VARIANCE_PENALTY:
            b = P @ ys
            return self.lam * (ys[None, :] ** 2 - 2.0 * b[:, None] * ys[None, :])
        return sum(a * s.row_gradient(xs, ys, P) for a, s in self.terms)

    def growth_constant(self, xs, ys, r: float = 1.0) -> float:
        """Smallest ``K`` with ``|C(x, m)| <= K (1 + |x|^r + int |y|^r dm)`` over kernels on ``ys``.

        Checked at the vertices ``m = delta_y`` and at uniform kernels; for
        pairwise costs the vertex check is exact.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        probes = [np.eye(ys.size), np.full((1, ys.size), 1.0 / ys.size)]
        K = 0.0
        for P in probes:
            for x in xs:
                xr = np.full(P.shape[0], x)
                v = np.abs(self.row_values(xr, ys, P))
                denom = 1.0 + abs(x) ** r + P @ (np.abs(ys) ** r)
                K = max(K, float(np.max(v / denom)))
        if not math.isfinite(K):
            raise CostDomainError("cost is not finite on the support")
        return K

    # -- serialisation --------------------------------------------------------
    @classmethod
    def from_json(cls, obj, xs=None, ys=None) -> "CostSpec":
        """Parse ``{"kind": ..., ...}``.

        Pairwise costs take ``"c"`` as a name in ``NAMED_PAIRWISE`` or as a
        matrix over ``obj["x"] x obj["y"]`` (defaulting to ``xs x ys``).
        Barycentre costs take ``"phi"`` as ``"square"`` or
        ``{"xs", "vals", "slopes"}``; variance costs take ``"lambda"``;
        combinations take ``"terms": [[coef, cost], ...]``.
        """
        if not isinstance(obj, dict) or "kind" not in obj:
            raise CostDomainError("cost JSON must be an object with a 'kind' field")
        kind = obj["kind"]
        if kind == PAIRWISE:
            c = obj.get("c")
            if isinstance(c, str):
                return cls.pairwise(c)
            gx = obj.get("x", xs)
            gy = obj.get("y", ys)
            if c is None or gx is None or gy is None:
                raise CostDomainError("pairwise cost grid needs values and both axes")
            return cls.pairwise_grid(gx, gy, c)
        if kind == BARYCENTRE_CONVEX:
            phi = obj.get("phi", "square")
            if isinstance(phi, dict):
                phi = PiecewiseLinear(phi["xs"], phi["vals"], phi["slopes"])
            return cls.barycentre_convex(phi)
        if kind == VARIANCE_PENALTY:
            return cls.variance_penalty(obj.get("lambda", 1.0))
        if kind == LINEAR_COMBINATION:
            return cls.linear_combination([(a, cls.from_json(s, xs, ys)) for a, s in obj.get("terms", [])])
        raise CostDomainError(f"unknown cost kind {kind!r}")

    def to_json(self):
        if self.kind == PAIRWISE:
            if isinstance(self.c, _Grid):
                return {"kind": PAIRWISE, "x": self.c.xs.tolist(), "y": self.c.ys.tolist(),
                        "c": self.c.values.tolist()}
            return {"kind": PAIRWISE, "c": self.c_name or "callable"}
        if self.kind == BARYCENTRE_CONVEX:
            if self.phi.pl is None:
                return {"kind": BARYCENTRE_CONVEX, "phi": self.phi.name}
            pl = self.phi.pl
            return {"kind": BARYCENTRE_CONVEX,
                    "phi": {"xs": pl.xs.tolist(), "vals": pl.vals.tolist(), "slopes": pl.slopes.tolist()}}
        if self.kind == VARIANCE_PENALTY:
            return {"kind": VARIANCE_PENALTY, "lambda": self.lam}
        return {"kind": LINEAR_COMBINATION, "terms": [[a, s.to_json()] for a, s in self.terms]}


def coupling_matrix(pi: FiniteCoupling, ys=None):
    """``(xs, ys, w, P)``: rows, grid, row masses and row-stochastic kernels."""
    xs, ys, Z = pi.to_matrix(ys)
    w = Z.sum(axis=1)
    P = Z / np.where(w > 0, w, 1.0)[:, None]
    return xs, ys, w, P


def eval_cost(C: CostSpec, pi: FiniteCoupling) -> float:
    """``int C(x, pi_x) mu(dx) = sum_i w_i C(x_i, k_i)``.

    Raises:
        CostDomainError: a pairwise grid misses an atom pair of ``pi``.
    """
    if pi.size == 0:
        return 0.0
    xs, ys, w, P = coupling_matrix(pi)
    return float(w @ C.row_values(xs, ys, P))
