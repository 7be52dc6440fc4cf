"""Finitely supported measures on the real line and their order calculus."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._config import DUST, MERGE_TOL, resolve_tol
from .errors import DomainError, MassError, OrderError
from .potential import PiecewiseLinear, full_potential, measure_from_put, put_potential


@dataclass(frozen=True)
class Interval:
    """Interval with explicit open/closed endpoints; endpoints may be infinite."""

    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise DomainError("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise DomainError("interval lower endpoint exceeds upper endpoint", lo=self.lo, hi=self.hi)
        # infinite endpoints are never attained
        if math.isinf(self.lo):
            object.__setattr__(self, "lo_closed", False)
        if math.isinf(self.hi):
            object.__setattr__(self, "hi_closed", False)

    @classmethod
    def open(cls, lo, hi):
        return cls(float(lo), float(hi), False, False)

    @classmethod
    def closed(cls, lo, hi):
        return cls(float(lo), float(hi), True, True)

    @classmethod
    def parse(cls, text: str) -> "Interval":
        """Parse ``"(a,b]"``-style notation; ``inf`` and ``-inf`` are accepted."""
        s = text.strip()
        if len(s) < 5 or s[0] not in "([" or s[-1] not in ")]" or "," not in s:
            raise DomainError(f"cannot parse interval {text!r}")
        lo_txt, hi_txt = s[1:-1].split(",", 1)
        try:
            lo, hi = float(lo_txt), float(hi_txt)
        except ValueError as exc:
            raise DomainError(f"cannot parse interval {text!r}") from exc
        return cls(lo, hi, s[0] == "[", s[-1] == "]")

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        left = x >= self.lo if self.lo_closed else x > self.lo
        right = x <= self.hi if self.hi_closed else x < self.hi
        return left & right

    @property
    def is_empty(self) -> bool:
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    def to_json(self):
        return {"lo": _json_float(self.lo), "hi": _json_float(self.hi),
                "lo_closed": self.lo_closed, "hi_closed": self.hi_closed}

    def __str__(self):
        return f"{'[' if self.lo_closed else '('}{self.lo:g}, {self.hi:g}{']' if self.hi_closed else ')'}"


REAL_LINE = Interval()


def _json_float(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite positive measure ``sum_i w_i delta_{x_i}``.

    On construction atoms are sorted, atoms closer than ``MERGE_TOL`` to the
    current group representative are merged into it, zero weights are
    dropped, and negative weights raise ``DomainError``.  The total mass is
    not required to be one.
    """

    atoms: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __init__(self, atoms: Iterable[float] = (), weights: Iterable[float] = ()):
        x = np.asarray(list(atoms) if not isinstance(atoms, np.ndarray) else atoms, dtype=float).reshape(-1)
        w = np.asarray(list(weights) if not isinstance(weights, np.ndarray) else weights,
                       dtype=float).reshape(-1)
        if x.shape != w.shape:
            raise DomainError("atoms and weights must have the same length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise DomainError("atoms and weights must be finite")
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative", min_weight=float(w.min()))
        x, w = _canonical(x, w)
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", x)
        object.__setattr__(self, "weights", w)

    # -- constructors -----------------------------------------------------
    @classmethod
    def dirac(cls, x: float, w: float = 1.0) -> "DiscreteMeasure":
        return cls([x], [w])

    @classmethod
    def zero(cls) -> "DiscreteMeasure":
        return cls()

    @classmethod
    def uniform(cls, atoms) -> "DiscreteMeasure":
        atoms = list(atoms)
        return cls(atoms, [1.0 / len(atoms)] * len(atoms))

    # -- summaries ----------------------------------------------------------
    @property
    def size(self) -> int:
        return int(self.atoms.size)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def first_moment(self) -> float:
        return float(self.weights @ self.atoms)

    @property
    def bary(self) -> float:
        """Barycentre; ``nan`` for the zero measure."""
        m = self.mass
        return self.first_moment / m if m > 0 else math.nan

    @property
    def is_zero(self) -> bool:
        return self.atoms.size == 0

    @property
    def support_min(self) -> float:
        return float(self.atoms[0]) if self.size else math.nan

    @property
    def support_max(self) -> float:
        return float(self.atoms[-1]) if self.size else math.nan

    def cdf(self, x):
        """``F(x) = m((-inf, x])``."""
        cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        return cum[np.searchsorted(self.atoms, x, side="right")]

    def integrate(self, f) -> float:
        if self.is_zero:
            return 0.0
        return float(self.weights @ np.asarray(f(self.atoms), dtype=float))

    def abs_moment(self, r: float = 1.0) -> float:
        return float(self.weights @ np.abs(self.atoms) ** r)

    def measure_of(self, interval: Interval) -> float:
        return float(self.weights[interval.contains(self.atoms)].sum())

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return DiscreteMeasure(np.concatenate([self.atoms, other.atoms]),
                               np.concatenate([self.weights, other.weights]))

    def subtract(self, other: "DiscreteMeasure", tol: float | None = None) -> "DiscreteMeasure":
        """``self - other``; negative parts of size at most ``tol`` are clipped.

        Raises:
            DomainError: ``other`` is not dominated by ``self`` up to ``tol``.
        """
        tol = resolve_tol(tol)
        grid = _merge_grid(np.concatenate([self.atoms, other.atoms]))
        diff = _weights_on(self, grid) - _weights_on(other, grid)
        if np.any(diff < -tol):
            i = int(np.argmin(diff))
            raise DomainError("subtraction leaves a negative weight", at=float(grid[i]),
                              weight=float(diff[i]))
        diff[diff <= max(DUST, tol * 1e-3)] = 0.0
        return DiscreteMeasure(grid, diff)

    def scale_mass(self, s: float) -> "DiscreteMeasure":
        if s < 0:
            raise DomainError("scale factor must be nonnegative", scale=s)
        return DiscreteMeasure(self.atoms, self.weights * s)

    def normalized(self) -> "DiscreteMeasure":
        m = self.mass
        return self if m == 0 else self.scale_mass(1.0 / m)

    def translate(self, delta: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms + delta, self.weights)

    def push(self, f) -> "DiscreteMeasure":
        """Image measure under a vectorised map."""
        return DiscreteMeasure(np.asarray(f(self.atoms), dtype=float), self.weights)

    def restrict(self, interval: Interval) -> "DiscreteMeasure":
        keep = interval.contains(self.atoms)
        return DiscreteMeasure(self.atoms[keep], self.weights[keep])

    # -- comparison and I/O -------------------------------------------------
    def allclose(self, other: "DiscreteMeasure", atol: float = 1e-12) -> bool:
        if self.size != other.size:
            return False
        return bool(np.allclose(self.atoms, other.atoms, rtol=0, atol=atol)
                    and np.allclose(self.weights, other.weights, rtol=0, atol=atol))

    def to_json(self):
        return {"atoms": [[float(x), float(w)] for x, w in zip(self.atoms, self.weights)]}

    @classmethod
    def from_json(cls, obj) -> "DiscreteMeasure":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            pairs = obj["atoms"]
            atoms = [float(p[0]) for p in pairs]
            weights = [float(p[1]) for p in pairs]
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise DomainError("measure JSON must look like {\"atoms\": [[x, w], ...]}") from exc
        if any(b <= a for a, b in zip(atoms, atoms[1:])):
            raise DomainError("measure JSON atoms must be strictly increasing")
        return cls(atoms, weights)

    def __repr__(self):
        body = ", ".join(f"{w:.6g}@{x:.6g}" for x, w in zip(self.atoms, self.weights))
        return f"DiscreteMeasure({body})"


def _canonical(x, w):
    if x.size == 0:
        return x.copy(), w.copy()
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    reps, sums = [x[0]], [w[0]]
    for xi, wi in zip(x[1:], w[1:]):
        if xi - reps[-1] <= MERGE_TOL:
            sums[-1] += wi
        else:
            reps.append(xi)
            sums.append(wi)
    x, w = np.asarray(reps), np.asarray(sums)
    keep = w > 0
    return x[keep], w[keep]


def _merge_grid(values):
    values = np.sort(values)
    if values.size == 0:
        return values
    out = [values[0]]
    for v in values[1:]:
        if v - out[-1] > MERGE_TOL:
            out.append(v)
    return np.asarray(out)


def _weights_on(m: DiscreteMeasure, grid: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.size)
    if m.size:
        idx = np.clip(np.searchsorted(grid, m.atoms - MERGE_TOL, side="left"), 0, grid.size - 1)
        np.add.at(out, idx, m.weights)
    return out


def _check_mass(m1, m2, tol=1e-9):
    if abs(m1.mass - m2.mass) > tol:
        raise MassError("measures must have equal mass", mass1=m1.mass, mass2=m2.mass)


# -- quantiles and distances --------------------------------------------------

def quantile(m: DiscreteMeasure, u: float) -> float:
    """Left-continuous quantile ``inf{x : F(x) >= u}`` for ``0 < u <= mass``."""
    mass = m.mass
    if not (0 < u <= mass * (1 + 1e-15)):
        raise DomainError("quantile level must lie in (0, mass]", u=u, mass=mass)
    cum = np.cumsum(m.weights)
    i = int(np.searchsorted(cum, u, side="left"))
    return float(m.atoms[min(i, m.size - 1)])


def quantile_partition(m1: DiscreteMeasure, m2: DiscreteMeasure):
    """Common refinement of the two quantile functions.

    Returns ``(lengths, x1, x2)``: the level set ``(0, mass]`` splits into
    pieces of the given lengths on which both quantile functions are constant
    with values ``x1`` and ``x2``.
    """
    c1, c2 = np.cumsum(m1.weights), np.cumsum(m2.weights)
    top = min(c1[-1], c2[-1])
    cuts = np.unique(np.concatenate([c1, c2]))
    cuts = cuts[cuts < top]
    cuts = np.concatenate([[0.0], cuts, [top]])
    lengths = np.diff(cuts)
    keep = lengths > 0
    mids = 0.5 * (cuts[:-1] + cuts[1:])[keep]
    i1 = np.minimum(np.searchsorted(c1, mids, side="left"), m1.size - 1)
    i2 = np.minimum(np.searchsorted(c2, mids, side="left"), m2.size - 1)
    return lengths[keep], m1.atoms[i1], m2.atoms[i2]


def wasserstein(m1: DiscreteMeasure, m2: DiscreteMeasure, r: float = 1.0) -> float:
    """``W_r`` between measures of equal mass via the quantile formula."""
    if r < 1:
        raise DomainError("order r must be at least 1", r=r)
    _check_mass(m1, m2)
    if m1.is_zero or m2.is_zero:
        return 0.0
    lengths, x1, x2 = quantile_partition(m1, m2)
    total = float(lengths @ np.abs(x1 - x2) ** r)
    return total ** (1.0 / r)


def quantile_coupling_plan(m1: DiscreteMeasure, m2: DiscreteMeasure):
    """Comonotone plan as ``(x1, x2, mass)`` triples, one per quantile piece."""
    _check_mass(m1, m2)
    if m1.is_zero:
        return np.empty(0), np.empty(0), np.empty(0)
    lengths, x1, x2 = quantile_partition(m1, m2)
    return x1, x2, lengths


# -- orders -----------------------------------------------------------------

def cd_gap(m1: DiscreteMeasure, m2: DiscreteMeasure):
    """Largest value of ``P_{m1} - P_{m2}`` and a point where it is attained.

    Breakpoints of both potentials suffice: the difference is affine between
    them and, for equal masses, constant beyond the last one.
    """
    _check_mass(m1, m2)
    grid = np.concatenate([m1.atoms, m2.atoms])
    if grid.size == 0:
        return 0.0, 0.0
    diff = put_potential(m1)(grid) - put_potential(m2)(grid)
    i = int(np.argmax(diff))
    return float(diff[i]), float(grid[i])


def leq_cd(m1: DiscreteMeasure, m2: DiscreteMeasure, tol: float | None = None) -> bool:
    """Convex-decreasing order ``m1 <=_cd m2`` (put potentials ordered)."""
    tol = resolve_tol(tol)
    gap, _ = cd_gap(m1, m2)
    return gap <= tol


def leq_c(m1: DiscreteMeasure, m2: DiscreteMeasure, tol: float | None = None) -> bool:
    """Convex order: ``<=_cd`` plus equal first moments."""
    tol = resolve_tol(tol)
    return leq_cd(m1, m2, tol) and abs(m1.first_moment - m2.first_moment) <= tol


def require_leq_cd(m1, m2, tol=None, what="measures"):
    tol = resolve_tol(tol)
    gap, at = cd_gap(m1, m2)
    if gap > tol:
        raise OrderError(f"{what} are not ordered in the convex-decreasing order",
                         breakpoint=at, gap=gap)


# -- lattice ------------------------------------------------------------------

def _check_bary(result, expected, what):
    if result.mass > 0 and abs(result.bary - expected) > 1e-7 * max(1.0, abs(expected)):
        raise AssertionError(f"{what}: barycentre {result.bary} differs from {expected}")


def sup_cd(m1: DiscreteMeasure, m2: DiscreteMeasure) -> DiscreteMeasure:
    """Least upper bound ``m1 v_cd m2``: measure of the larger put potential.

    Both operands lie below it in the convex-decreasing order.
    """
    _check_mass(m1, m2)
    if m1.is_zero:
        return m2
    f = put_potential(m1).maximum(put_potential(m2))
    out = measure_from_put(f)
    _check_bary(out, min(m1.bary, m2.bary), "sup_cd")
    return out


def inf_cd(m1: DiscreteMeasure, m2: DiscreteMeasure) -> DiscreteMeasure:
    """``m1 ^_cd m2``: measure of the convex hull of the smaller put potential.

    It lies below both operands in the convex-decreasing order.
    """
    _check_mass(m1, m2)
    if m1.is_zero:
        return m2
    f = put_potential(m1).minimum(put_potential(m2)).convex_hull()
    out = measure_from_put(f)
    _check_bary(out, max(m1.bary, m2.bary), "inf_cd")
    return out


def inf_c(m1: DiscreteMeasure, m2: DiscreteMeasure, tol: float | None = None) -> DiscreteMeasure:
    """Convex-order envelope for operands with a common mean.

    With equal means the hull of the smaller put potential has the common
    mean, so the result coincides with ``inf_cd`` and lies below both operands
    in the convex order.

    Raises:
        OrderError: the first moments differ by more than ``tol``.
    """
    tol = resolve_tol(tol)
    _check_mass(m1, m2)
    if abs(m1.first_moment - m2.first_moment) > tol:
        raise OrderError("convex-order envelope needs operands with equal means",
                         mean1=m1.first_moment, mean2=m2.first_moment)
    return inf_cd(m1, m2)


def potential_csv_rows(f: PiecewiseLinear):
    return f.to_csv_rows()


__all__ = [
    "DiscreteMeasure",
    "Interval",
    "REAL_LINE",
    "quantile",
    "quantile_partition",
    "quantile_coupling_plan",
    "wasserstein",
    "weight_gap",
    "cd_gap",
    "leq_cd",
    "leq_c",
    "require_leq_cd",
    "sup_cd",
    "inf_cd",
    "inf_c",
    "put_potential",
    "full_potential",
    "measure_from_put",
]


def weight_gap(m1: DiscreteMeasure, m2: DiscreteMeasure) -> float:
    """Largest atom-wise weight difference after aligning atoms within ``MERGE_TOL``."""
    grid = _merge_grid(np.concatenate([m1.atoms, m2.atoms]))
    if grid.size == 0:
        return 0.0
    return float(np.max(np.abs(_weights_on(m1, grid) - _weights_on(m2, grid))))
