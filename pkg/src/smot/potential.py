"""Piecewise-linear functions on the real line.

Put potentials ``P(x) = sum_i w_i (x - t_i)^+`` of finitely supported measures
are piecewise linear and convex; pointwise max, min and the largest convex
minorant of such functions are again piecewise linear.  ``PiecewiseLinear``
stores breakpoints, values at the breakpoints and the slope of every linear
piece, including both unbounded ones.  The slopes are kept authoritative
(never re-derived from values when avoidable) because the weights of the
measure encoded by a potential are its slope increments.
"""

from __future__ import annotations

import numpy as np

from ._config import DUST, MERGE_TOL
from .errors import InvalidPotentialError


class PiecewiseLinear:
    """Continuous piecewise-linear function.

    Args:
        xs: strictly increasing breakpoints (at least one).
        vals: function values at ``xs``.
        slopes: ``len(xs) + 1`` slopes; ``slopes[0]`` applies on
            ``(-inf, xs[0]]`` and ``slopes[i]`` on ``[xs[i-1], xs[i]]``.
    """

    __slots__ = ("xs", "vals", "slopes")

    def __init__(self, xs, vals, slopes):
        xs = np.asarray(xs, dtype=float).reshape(-1)
        vals = np.asarray(vals, dtype=float).reshape(-1)
        slopes = np.asarray(slopes, dtype=float).reshape(-1)
        if xs.size == 0:
            raise ValueError("a piecewise-linear function needs at least one breakpoint")
        if vals.shape != xs.shape or slopes.size != xs.size + 1:
            raise ValueError("inconsistent breakpoint/value/slope lengths")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        self.xs = xs
        self.vals = vals
        self.slopes = slopes
        for arr in (self.xs, self.vals, self.slopes):
            arr.setflags(write=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def affine(cls, slope, intercept, at=0.0):
        return cls([at], [intercept + slope * at], [slope, slope])

    @classmethod
    def from_values(cls, xs, vals, left_slope, right_slope):
        """Build from breakpoint values; inner slopes are chord slopes."""
        xs = np.asarray(xs, dtype=float)
        vals = np.asarray(vals, dtype=float)
        inner = np.diff(vals) / np.diff(xs) if xs.size > 1 else np.empty(0)
        return cls(xs, vals, np.concatenate([[left_slope], inner, [right_slope]]))

    # -- basic accessors ----------------------------------------------------
    @property
    def left_slope(self):
        return float(self.slopes[0])

    @property
    def right_slope(self):
        return float(self.slopes[-1])

    @property
    def slope_increments(self):
        return np.diff(self.slopes)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        flat = t_arr.reshape(-1)
        idx = np.searchsorted(self.xs, flat, side="right") - 1
        out = np.empty_like(flat)
        left = idx < 0
        out[left] = self.vals[0] + self.slopes[0] * (flat[left] - self.xs[0])
        inside = ~left
        j = idx[inside]
        out[inside] = self.vals[j] + self.slopes[j + 1] * (flat[inside] - self.xs[j])
        if t_arr.ndim == 0:
            return float(out[0])
        return out.reshape(t_arr.shape)

    def __repr__(self):
        return (
            f"PiecewiseLinear(xs={self.xs.tolist()}, vals={self.vals.tolist()}, "
            f"slopes={self.slopes.tolist()})"
        )

    # -- algebra ------------------------------------------------------------
    def _on_grid(self, grid):
        """Slopes of ``self`` on the pieces induced by a finer grid."""
        mids = _piece_probes(grid)
        idx = np.searchsorted(self.xs, mids, side="right")
        return self.slopes[idx]

    def _combine(self, other, op):
        grid = _union_grid(self.xs, other.xs)
        vals = op(self(grid), other(grid))
        slopes = op(self._on_grid(grid), other._on_grid(grid))
        return PiecewiseLinear(grid, vals, slopes)

    def __add__(self, other):
        if np.isscalar(other):
            return PiecewiseLinear(self.xs, self.vals + other, self.slopes)
        return self._combine(other, np.add)

    def __sub__(self, other):
        if np.isscalar(other):
            return PiecewiseLinear(self.xs, self.vals - other, self.slopes)
        return self._combine(other, np.subtract)

    def __neg__(self):
        return PiecewiseLinear(self.xs, -self.vals, -self.slopes)

    def scale(self, s):
        return PiecewiseLinear(self.xs, self.vals * s, self.slopes * s)

    def maximum(self, other):
        """Pointwise maximum."""
        return _pointwise_extremum(self, other, take_max=True)

    def minimum(self, other):
        """Pointwise minimum."""
        return _pointwise_extremum(self, other, take_max=False)

    def simplify(self, tol=1e-13):
        """Drop breakpoints at which the slope does not change."""
        scale = max(1.0, float(np.max(np.abs(self.slopes))))
        inc = np.diff(self.slopes)
        keep = np.abs(inc) > tol * scale
        if not np.any(keep):
            # keep a single anchor
            j = 0
            return PiecewiseLinear(self.xs[j : j + 1], self.vals[j : j + 1],
                                   [self.slopes[0], self.slopes[-1]])
        xs = self.xs[keep]
        vals = self.vals[keep]
        kept_idx = np.nonzero(keep)[0]
        slopes = np.concatenate([[self.slopes[0]], self.slopes[kept_idx[1:]], [self.slopes[-1]]])
        return PiecewiseLinear(xs, vals, slopes)

    def is_convex(self, tol=1e-12):
        scale = max(1.0, float(np.max(np.abs(self.slopes))))
        return bool(np.all(np.diff(self.slopes) >= -tol * scale))

    def convex_hull(self):
        """Largest convex minorant.

        Requires ``left_slope <= right_slope`` (otherwise no finite convex
        minorant exists).  Slopes on pieces that survive unchanged are taken
        from ``self``; bridges get chord slopes.
        """
        sl, sr = self.left_slope, self.right_slope
        if sl > sr:
            raise InvalidPotentialError("no finite convex minorant: left slope exceeds right slope")
        xs, vs = self.xs, self.vals
        scale = max(1.0, float(np.max(np.abs(vs))), float(np.max(np.abs(self.slopes))))
        eps = 1e-15 * scale
        stack = []
        for i in range(xs.size):
            # pop the top while it lies on or above the chord (or the left ray)
            while stack:
                j = stack[-1]
                if len(stack) == 1:
                    if vs[i] - vs[j] < sl * (xs[i] - xs[j]) - eps:
                        stack.pop()
                        continue
                    break
                k = stack[-2]
                cross = (xs[j] - xs[k]) * (vs[i] - vs[k]) - (xs[i] - xs[k]) * (vs[j] - vs[k])
                if cross <= eps * (xs[i] - xs[k]):
                    stack.pop()
                    continue
                break
            stack.append(i)
        while len(stack) >= 2:
            j, k = stack[-1], stack[-2]
            if vs[j] - vs[k] > sr * (xs[j] - xs[k]) + eps:
                stack.pop()
                continue
            break
        idx = np.asarray(stack)
        slopes = [sl]
        for a, b in zip(idx[:-1], idx[1:]):
            if b == a + 1:
                slopes.append(self.slopes[b])
            else:
                slopes.append((vs[b] - vs[a]) / (xs[b] - xs[a]))
        slopes.append(sr)
        return PiecewiseLinear(xs[idx], vs[idx], slopes)

    def zero_breakpoints(self, tol):
        return self.xs[np.abs(self.vals) <= tol]

    def to_csv_rows(self):
        return list(zip(self.xs.tolist(), self.vals.tolist()))


def _piece_probes(grid):
    """One interior probe per piece of ``grid`` (two unbounded, rest bounded)."""
    if grid.size == 1:
        return np.array([grid[0] - 1.0, grid[0] + 1.0])
    inner = 0.5 * (grid[:-1] + grid[1:])
    span = max(1.0, float(grid[-1] - grid[0]))
    return np.concatenate([[grid[0] - span], inner, [grid[-1] + span]])


def _merge_sorted(values):
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        return values
    keep = np.concatenate([[True], np.diff(values) > MERGE_TOL])
    return values[keep]


def _union_grid(a, b):
    return _merge_sorted(np.concatenate([a, b]))


def _pointwise_extremum(f, g, take_max):
    grid = _union_grid(f.xs, g.xs)
    d = f(grid) - g(grid)
    sf, sg = f._on_grid(grid), g._on_grid(grid)
    scale = max(1.0, float(np.max(np.abs(f(grid)))), float(np.max(np.abs(g(grid)))))
    eps = 1e-14 * scale
    extra = []
    # bounded pieces: strict sign change
    for i in range(grid.size - 1):
        if (d[i] > eps and d[i + 1] < -eps) or (d[i] < -eps and d[i + 1] > eps):
            r = grid[i] + (grid[i + 1] - grid[i]) * d[i] / (d[i] - d[i + 1])
            extra.append(r)
    # unbounded pieces
    ds_left = sf[0] - sg[0]
    if ds_left != 0.0 and abs(d[0]) > eps:
        r = grid[0] - d[0] / ds_left
        if r < grid[0]:
            extra.append(r)
    ds_right = sf[-1] - sg[-1]
    if ds_right != 0.0 and abs(d[-1]) > eps:
        r = grid[-1] - d[-1] / ds_right
        if r > grid[-1]:
            extra.append(r)
    if extra:
        grid = _union_grid(grid, np.asarray(extra))
    fv, gv = f(grid), g(grid)
    vals = np.maximum(fv, gv) if take_max else np.minimum(fv, gv)
    probes = _piece_probes(grid)
    fp, gp = f(probes), g(probes)
    sf, sg = f._on_grid(grid), g._on_grid(grid)
    pick_f = fp >= gp if take_max else fp <= gp
    slopes = np.where(pick_f, sf, sg)
    # far tails are decided by slopes, not by the probe value
    if sf[0] != sg[0]:
        slopes[0] = min(sf[0], sg[0]) if take_max else max(sf[0], sg[0])
    if sf[-1] != sg[-1]:
        slopes[-1] = max(sf[-1], sg[-1]) if take_max else min(sf[-1], sg[-1])
    return PiecewiseLinear(grid, vals, slopes).simplify()


def put_potential(measure):
    """Put potential ``x -> sum_i w_i (x - t_i)^+`` of a discrete measure."""
    atoms, weights = measure.atoms, measure.weights
    if atoms.size == 0:
        return PiecewiseLinear([0.0], [0.0], [0.0, 0.0])
    cum = np.cumsum(weights)
    slopes = np.concatenate([[0.0], cum])
    gaps = np.diff(atoms)
    vals = np.concatenate([[0.0], np.cumsum(cum[:-1] * gaps)])
    return PiecewiseLinear(atoms, vals, slopes)


def full_potential(measure):
    """Potential ``x -> sum_i w_i |x - t_i|``."""
    atoms, weights = measure.atoms, measure.weights
    if atoms.size == 0:
        return PiecewiseLinear([0.0], [0.0], [0.0, 0.0])
    mass = float(weights.sum())
    cum = np.cumsum(weights)
    slopes = np.concatenate([[-mass], 2.0 * cum - mass])
    vals = np.abs(atoms[:, None] - atoms[None, :]) @ weights
    return PiecewiseLinear(atoms, vals, slopes)


def measure_from_put(f, tol=1e-9):
    """Recover the measure whose put potential is ``f``.

    Raises:
        InvalidPotentialError: ``f`` is not convex, has a nonzero left slope,
            or does not vanish at minus infinity.
    """
    from .measure import DiscreteMeasure

    if abs(f.left_slope) > tol:
        raise InvalidPotentialError("put potential must have zero left slope",
                                    left_slope=f.left_slope)
    if abs(f.vals[0]) > tol * max(1.0, abs(f.right_slope)):
        raise InvalidPotentialError("put potential must vanish at -inf", left_value=float(f.vals[0]))
    inc = f.slope_increments
    scale = max(1.0, float(np.max(np.abs(f.slopes))))
    if np.any(inc < -tol * scale):
        raise InvalidPotentialError("put potential is not convex",
                                    at=float(f.xs[int(np.argmin(inc))]))
    keep = inc > DUST * scale
    return DiscreteMeasure(f.xs[keep], inc[keep])
