"""Finitely supported couplings stored through their disintegration."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._config import DUST, MERGE_TOL, resolve_tol
from .errors import ChainingError, DomainError, MassError
from .lp import LinearProgram, solve_lp
from .measure import DiscreteMeasure, Interval, wasserstein, weight_gap


def mix(weights: Sequence[float], kernels: Sequence[DiscreteMeasure]) -> DiscreteMeasure:
    """Intensity of a weighted family of measures: ``sum_i w_i k_i``."""
    if len(kernels) == 0:
        return DiscreteMeasure.zero()
    atoms = np.concatenate([k.atoms for k in kernels])
    wts = np.concatenate([w * k.weights for w, k in zip(weights, kernels)])
    return DiscreteMeasure(atoms, wts)


@dataclass(frozen=True, eq=False)
class FiniteCoupling:
    """Coupling ``sum_i w_i delta_{x_i} (x) k_i`` with probability kernels ``k_i``.

    Rows are sorted by ``x``; rows whose ``x`` agree within ``MERGE_TOL`` are
    merged by weight-proportional mixing of their kernels, which
    canonicalises the disintegration.  Total mass need not be one.
    """

    xs: np.ndarray
    ws: np.ndarray
    kernels: tuple

    def __init__(self, rows: Iterable = ()):
        rows = [(float(x), float(w), k) for x, w, k in rows]
        for x, w, k in rows:
            if not (math.isfinite(x) and math.isfinite(w)) or w < 0:
                raise DomainError("row positions must be finite and weights nonnegative", x=x, w=w)
            if w > 0 and k.mass <= 0:
                raise DomainError("a row with positive weight needs a nonzero kernel", x=x)
        rows = [r for r in rows if r[1] > 0]
        rows.sort(key=lambda r: r[0])
        groups: list = []
        for x, w, k in rows:
            k = k.normalized()
            if groups and x - groups[-1][0] <= MERGE_TOL:
                groups[-1][1].append(w)
                groups[-1][2].append(k)
            else:
                groups.append((x, [w], [k]))
        xs, ws, ks = [], [], []
        for x, wl, kl in groups:
            total = sum(wl)
            xs.append(x)
            ws.append(total)
            ks.append(kl[0] if len(kl) == 1 else mix([w / total for w in wl], kl))
        xs_arr, ws_arr = np.asarray(xs, dtype=float), np.asarray(ws, dtype=float)
        xs_arr.setflags(write=False)
        ws_arr.setflags(write=False)
        object.__setattr__(self, "xs", xs_arr)
        object.__setattr__(self, "ws", ws_arr)
        object.__setattr__(self, "kernels", tuple(ks))

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls, m: DiscreteMeasure) -> "FiniteCoupling":
        return cls((x, w, DiscreteMeasure.dirac(x)) for x, w in zip(m.atoms, m.weights))

    @classmethod
    def product(cls, mu: DiscreteMeasure, nu: DiscreteMeasure) -> "FiniteCoupling":
        if abs(mu.mass - nu.mass) > 1e-9:
            raise MassError("product coupling needs equal masses", mass1=mu.mass, mass2=nu.mass)
        k = nu.normalized()
        return cls((x, w, k) for x, w in zip(mu.atoms, mu.weights))

    @classmethod
    def from_matrix(cls, x_atoms, y_atoms, Z) -> "FiniteCoupling":
        """Coupling with mass ``Z[i, j]`` on ``(x_atoms[i], y_atoms[j])``."""
        Z = np.asarray(Z, dtype=float)
        y_atoms = np.asarray(y_atoms, dtype=float)
        rows = []
        for x, z in zip(x_atoms, Z):
            z = np.where(z > DUST, z, 0.0)
            w = float(z.sum())
            if w > 0:
                rows.append((x, w, DiscreteMeasure(y_atoms, z / w)))
        return cls(rows)

    @classmethod
    def intensity_hat(cls, weighted_rows) -> "FiniteCoupling":
        """Flatten a weighted family of ``(x, kernel)`` pairs into a coupling."""
        return cls((x, w, k) for w, x, k in weighted_rows)

    # -- accessors ----------------------------------------------------------
    @property
    def size(self) -> int:
        return int(self.xs.size)

    @property
    def mass(self) -> float:
        return float(self.ws.sum())

    @property
    def rows(self):
        return list(zip(self.xs.tolist(), self.ws.tolist(), self.kernels))

    def embed(self):
        """Weighted pairs ``(w, x, kernel)``: the canonical embedding of the coupling."""
        return [(w, x, k) for x, w, k in self.rows]

    @property
    def first_marginal(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.xs, self.ws)

    @property
    def second_marginal(self) -> DiscreteMeasure:
        return mix(self.ws, self.kernels)

    def marginals(self):
        return self.first_marginal, self.second_marginal

    @property
    def barycentres(self) -> np.ndarray:
        return np.array([k.bary for k in self.kernels], dtype=float)

    def y_grid(self) -> np.ndarray:
        return self.second_marginal.atoms

    def to_matrix(self, y_grid=None):
        """Dense ``(x_atoms, y_atoms, Z)`` representation."""
        y = self.y_grid() if y_grid is None else np.asarray(y_grid, dtype=float)
        Z = np.zeros((self.size, y.size))
        for i, k in enumerate(self.kernels):
            idx = np.searchsorted(y, k.atoms - MERGE_TOL, side="left")
            if np.any(idx >= y.size) or np.any(np.abs(y[np.minimum(idx, y.size - 1)] - k.atoms) > MERGE_TOL):
                raise DomainError("kernel atom missing from the target grid")
            np.add.at(Z[i], idx, self.ws[i] * k.weights)
        return self.xs.copy(), y, Z

    # -- supermartingale diagnostics ---------------------------------------
    def defect(self) -> float:
        """``sum_i w_i (bary(k_i) - x_i)^+``."""
        if self.size == 0:
            return 0.0
        return float(self.ws @ np.maximum(self.barycentres - self.xs, 0.0))

    def reverse_defect(self) -> float:
        if self.size == 0:
            return 0.0
        return float(self.ws @ np.maximum(self.xs - self.barycentres, 0.0))

    def is_supermartingale(self, tol: float | None = None) -> bool:
        return self.defect() <= resolve_tol(tol)

    def is_martingale(self, tol: float | None = None) -> bool:
        tol = resolve_tol(tol)
        return self.defect() <= tol and self.reverse_defect() <= tol

    def marginal_residual(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        return max(weight_gap(self.first_marginal, mu), weight_gap(self.second_marginal, nu))

    # -- algebra ------------------------------------------------------------
    def __add__(self, other: "FiniteCoupling") -> "FiniteCoupling":
        return FiniteCoupling(self.rows + other.rows)

    def scale(self, s: float) -> "FiniteCoupling":
        if s < 0:
            raise DomainError("scale factor must be nonnegative", scale=s)
        return FiniteCoupling((x, w * s, k) for x, w, k in self.rows)

    def restrict_first(self, interval: Interval) -> "FiniteCoupling":
        keep = interval.contains(self.xs)
        return FiniteCoupling(r for r, kp in zip(self.rows, keep) if kp)

    def map_kernels(self, f) -> "FiniteCoupling":
        """Replace each kernel ``k`` at ``x`` by ``f(x, k)``."""
        return FiniteCoupling((x, w, f(x, k)) for x, w, k in self.rows)

    def allclose(self, other: "FiniteCoupling", atol: float = 1e-12) -> bool:
        if self.size != other.size:
            return False
        if not (np.allclose(self.xs, other.xs, rtol=0, atol=atol)
                and np.allclose(self.ws, other.ws, rtol=0, atol=atol)):
            return False
        return all(a.allclose(b, atol) for a, b in zip(self.kernels, other.kernels))

    # -- I/O ----------------------------------------------------------------
    def to_json(self):
        return {"rows": [{"x": x, "w": w, "kernel": k.to_json()["atoms"]} for x, w, k in self.rows]}

    @classmethod
    def from_json(cls, obj) -> "FiniteCoupling":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            raw = obj["rows"]
            rows = []
            for r in raw:
                k = DiscreteMeasure([p[0] for p in r["kernel"]], [p[1] for p in r["kernel"]])
                if abs(k.mass - 1.0) > 1e-9:
                    raise DomainError("kernel probabilities must sum to 1", x=r["x"], mass=k.mass)
                rows.append((float(r["x"]), float(r["w"]), k))
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError("coupling JSON must look like {\"rows\": [{\"x\", \"w\", \"kernel\"}]}") from exc
        return cls(rows)

    def __repr__(self):
        body = "; ".join(f"{w:.4g}@{x:.4g}->{k!r}" for x, w, k in self.rows)
        return f"FiniteCoupling({body})"


def intensity(weighted_kernels) -> DiscreteMeasure:
    """Mix ``(weight, kernel)`` pairs into one measure."""
    pairs = list(weighted_kernels)
    return mix([w for w, _ in pairs], [k for _, k in pairs])


def marginals(pi: FiniteCoupling):
    return pi.marginals()


def defect(pi: FiniteCoupling) -> float:
    return pi.defect()


def add(pi1: FiniteCoupling, pi2: FiniteCoupling) -> FiniteCoupling:
    return pi1 + pi2


def restrict_first(pi: FiniteCoupling, interval: Interval) -> FiniteCoupling:
    return pi.restrict_first(interval)


# -- adapted Wasserstein distance ---------------------------------------------

def aw_cost_matrix(p: FiniteCoupling, q: FiniteCoupling, r: float = 1.0, threads: int = 1):
    """``|x - x'|^r + W_r(p_x, q_x')^r`` over all row pairs."""

    def row(i):
        k = p.kernels[i]
        return [abs(p.xs[i] - q.xs[j]) ** r + wasserstein(k, q.kernels[j], r) ** r
                for j in range(q.size)]

    if threads > 1 and p.size > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(row, range(p.size)))
    else:
        rows = [row(i) for i in range(p.size)]
    return np.asarray(rows, dtype=float).reshape(p.size, q.size)


def transport_lp(a, b, cost) -> LinearProgram:
    """Balanced transport between weight vectors ``a`` and ``b``."""
    n, m = cost.shape
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j::m] = 1.0
    return LinearProgram(cost.reshape(-1), A, np.concatenate([a, b]))


def aw_distance(p: FiniteCoupling, q: FiniteCoupling, r: float = 1.0, return_plan: bool = False,
                threads: int = 1):
    """Adapted Wasserstein distance of order ``r``.

    The outer problem couples the first marginals with cost
    ``|x - x'|^r + W_r(p_x, q_x')^r`` and is solved exactly as an LP.

    Args:
        p, q: couplings whose first marginals have equal mass.
        r: order, at least 1.
        return_plan: also return the optimal outer plan as a matrix indexed
            by the rows of ``p`` and ``q``.
        threads: worker count for assembling the cost matrix.

    Returns:
        The distance, or ``(distance, plan)`` when ``return_plan`` is set.
    """
    if r < 1:
        raise DomainError("order r must be at least 1", r=r)
    if abs(p.mass - q.mass) > 1e-9:
        raise MassError("couplings must have first marginals of equal mass", mass1=p.mass, mass2=q.mass)
    if p.size == 0 or q.size == 0:
        return (0.0, np.zeros((p.size, q.size))) if return_plan else 0.0
    cost = aw_cost_matrix(p, q, r, threads)
    if p.size == 1 or q.size == 1:
        # a single row on either side forces the outer plan
        plan = np.outer(p.ws, q.ws) / (q.mass if p.size == 1 else p.mass)
        value = float((plan * cost).sum())
    else:
        b = q.ws * (p.mass / q.mass)
        res = solve_lp(transport_lp(p.ws, b, cost))
        if not res.ok:
            raise MassError("outer transport problem is not feasible", status=res.status)
        plan = res.x.reshape(cost.shape)
        value = res.value
    dist = max(value, 0.0) ** (1.0 / r)
    return (dist, plan) if return_plan else dist


# -- composition -------------------------------------------------------------

def compose(pi: FiniteCoupling, M: FiniteCoupling, tol: float | None = None) -> FiniteCoupling:
    """Chain ``pi`` with ``M``: row kernels become ``sum_z pi_x(z) M_z``.

    Raises:
        ChainingError: the second marginal of ``pi`` differs from the first
            marginal of ``M``.
    """
    tol = resolve_tol(tol)
    gap = weight_gap(pi.second_marginal, M.first_marginal)
    if gap > tol:
        raise ChainingError("second marginal of the first coupling must equal the first marginal of the second",
                            weight_gap=gap)
    mx = M.xs

    def chain(x, k):
        idx = np.searchsorted(mx, k.atoms - MERGE_TOL, side="left")
        idx = np.minimum(idx, mx.size - 1)
        return mix(k.weights, [M.kernels[j] for j in idx])

    out = pi.map_kernels(chain)
    if pi.is_supermartingale(tol) and M.is_martingale(tol) and not out.is_supermartingale(10 * tol):
        raise AssertionError("composition of a supermartingale and a martingale coupling lost the supermartingale property")
    return out
