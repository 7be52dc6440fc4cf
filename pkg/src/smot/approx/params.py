"""Parameter selection for one irreducible component."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..coupling import FiniteCoupling, aw_distance
from ..errors import ParameterSearchError, PreconditionError
from ..measure import DiscreteMeasure, Interval, leq_c
from .stages import contract, diagonal_aw_bound, truncate

MAX_R = 2.0 ** 40


@dataclass(frozen=True)
class PipelineParams:
    """Constants fixed before the perturbed marginals are used.

    ``I = (ell, rho)`` is the component's interval, ``K = [a, b]`` carries
    mass at least ``1 - eps`` of the first marginal, ``a_t < a`` and
    ``b_t > b`` are the tilde points, ``L`` is a compact interval inside
    ``I`` whose interior carries the localised kernels, ``L_minus`` is a
    compact interval left of ``K`` charged by ``nu_ra``, ``L_minus_t`` and
    ``K_t`` are the open enlargements used by the correction, ``e`` is their
    distance, ``J = [ell_t, rho_t]`` and ``delta`` is half the
    ``nu_ra``-mass of ``L_minus``.
    """

    eps: float
    ell: float
    rho: float
    a: float
    b: float
    a_t: float
    b_t: float
    R: float
    alpha: float
    alpha_bound: float
    L: tuple
    L_minus: tuple
    L_minus_t: tuple
    K_t: tuple
    ell_t: float
    rho_t: float
    e: float
    delta: float
    truncation_gap: float
    contraction_gap: float

    @property
    def K(self) -> Interval:
        return Interval.closed(self.a, self.b)

    @property
    def K_open(self) -> Interval:
        return Interval.open(*self.K_t)

    @property
    def L_interior(self) -> Interval:
        return Interval.open(*self.L)

    @property
    def L_minus_t_interval(self) -> Interval:
        return Interval.open(*self.L_minus_t)

    @property
    def J(self) -> Interval:
        return Interval.closed(self.ell_t, self.rho_t)

    def to_json(self):
        def f(v):
            if isinstance(v, tuple):
                return [f(t) for t in v]
            if isinstance(v, float) and math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return v

        return {k: f(v) for k, v in self.__dict__.items()}


def _smallest_window(mu: DiscreteMeasure, eps: float):
    """Shortest atom window ``[x_i, x_j]`` with mass at least ``1 - eps`` (leftmost on ties)."""
    x, w = mu.atoms, mu.weights
    cum = np.concatenate([[0.0], np.cumsum(w)])
    target = (1.0 - eps) * mu.mass - 1e-15
    best = None
    j = 0
    for i in range(x.size):
        j = max(j, i)
        while j < x.size and cum[j + 1] - cum[i] < target:
            j += 1
        if j >= x.size:
            break
        if best is None or x[j] - x[i] < best[1] - best[0]:
            best = (float(x[i]), float(x[j]))
    return best


def _toward(v, end, default_step):
    """Midpoint between ``v`` and ``end``, or a unit step when ``end`` is infinite."""
    if math.isinf(end):
        return v + math.copysign(max(default_step, abs(v)), end)
    return 0.5 * (v + end)


def choose_params(pi: FiniteCoupling, mu: DiscreteMeasure, nu: DiscreteMeasure, eps: float,
                  interval: Interval) -> PipelineParams:
    """Choose ``K``, ``R``, ``alpha`` and the auxiliary intervals for accuracy ``eps``.

    ``interval`` is the open interval ``I`` on which the pair is irreducible;
    the first marginal must live inside it.

    Raises:
        PreconditionError: ``eps`` is outside ``(0, 1/2)``, the masses are
            not one, or the first marginal leaves ``I``.
        ParameterSearchError: no suitable ``R`` below ``2**40`` or ``alpha``.
    """
    if not 0 < eps < 0.5:
        raise PreconditionError("accuracy eps must lie in (0, 1/2)", eps=eps)
    if abs(mu.mass - 1.0) > 1e-9 or abs(nu.mass - 1.0) > 1e-9:
        raise PreconditionError("parameters are chosen for probability measures", mass=mu.mass)
    ell, rho = interval.lo, interval.hi
    if not np.all(interval.contains(mu.atoms)):
        raise PreconditionError("first marginal is not supported inside the irreducible interval",
                                interval=str(interval))
    a, b = _smallest_window(mu, eps)
    a_t = _toward(a, ell, 1.0)
    b_t = _toward(b, rho, 1.0)
    left_probe = Interval(ell, a_t, True, False) if not math.isinf(ell) else Interval(-math.inf, a_t)

    # truncation level: doubling search
    R = 1.0
    while True:
        pi_R = truncate(pi, R)
        gap_R = diagonal_aw_bound(pi_R, pi)
        nu_R = pi_R.second_marginal
        if gap_R < eps / 2 and nu_R.measure_of(left_probe) > 0:
            break
        R *= 2.0
        if R > MAX_R:
            raise ParameterSearchError("no truncation level below 2**40 meets the accuracy target", eps=eps)
    if not leq_c(nu_R, nu, 1e-8):
        raise ParameterSearchError("truncated second marginal is not below the original in convex order")

    # contraction factor
    alpha_bound = max((2 * R - a - a_t) / (2 * R - 2 * a_t), (2 * R + b + b_t) / (2 * R + 2 * b_t))
    M = mu.abs_moment() + nu_R.abs_moment()
    base = max(alpha_bound, 1.0 - eps / (2.0 * M) if M > 0 else 0.0)
    alpha = base + min(1e-6, (1.0 - base) / 2.0)
    left_target = Interval.open(ell, 0.5 * (a + a_t))
    for _ in range(60):
        pi_ra = contract(pi_R, alpha, check=False)
        nu_ra = pi_ra.second_marginal
        if nu_ra.measure_of(left_target) > 0:
            break
        alpha = 0.5 * (1.0 + alpha)
    else:
        raise ParameterSearchError("contracted second marginal does not charge the left of K")
    gap_a = aw_distance(pi_ra, pi_R)

    # L: compact inside I containing the formula interval and the kernels on K
    lo_f = max(-R, alpha * ell + (1 - alpha) * a) if not math.isinf(ell) else -R
    hi_f = min(R, alpha * rho + (1 - alpha) * b) if not math.isinf(rho) else R
    on_K = pi_ra.restrict_first(Interval.closed(a, b))
    ys = np.concatenate([k.atoms for k in on_K.kernels])
    lo_L0, hi_L0 = min(lo_f, float(ys.min())), max(hi_f, float(ys.max()))
    L = (_pad_inside(lo_L0, ell, -1), _pad_inside(hi_L0, rho, +1))

    charged = nu_ra.restrict(left_target)
    L_minus = (float(charged.atoms[0]), float(charged.atoms[-1]))
    delta = charged.mass / 2.0
    inner = min(L[0], L_minus[0])
    ell_t = 0.5 * (ell + inner) if not math.isinf(ell) else inner - 1.0
    rho_t = 0.5 * (L[1] + rho) if not math.isinf(rho) else L[1] + 1.0
    L_minus_t = (ell_t, 0.5 * (a + a_t))
    K_t = ((3 * a + a_t) / 4.0, (3 * b + b_t) / 4.0)
    e = (a - a_t) / 4.0
    return PipelineParams(
        eps=eps, ell=ell, rho=rho, a=a, b=b, a_t=a_t, b_t=b_t, R=R, alpha=alpha,
        alpha_bound=alpha_bound, L=L, L_minus=L_minus, L_minus_t=L_minus_t, K_t=K_t,
        ell_t=ell_t, rho_t=rho_t, e=e, delta=delta, truncation_gap=gap_R, contraction_gap=gap_a,
    )


def _pad_inside(v, end, direction):
    """Move ``v`` halfway toward ``end`` (or one unit when ``end`` is infinite)."""
    if math.isinf(end):
        return v + direction * 1.0
    return 0.5 * (v + end)
