"""Individual stages of the approximation construction.

Every stage is a pure function of its inputs.  Quantitative bounds that are
guaranteed (the contraction estimate and the defect inequality) are checked at
runtime and raise ``StageBoundError`` if they ever fail.
"""

from __future__ import annotations

import numpy as np

from .._config import resolve_tol
from ..coupling import FiniteCoupling, aw_distance, compose, mix
from ..errors import (
    CompletionError,
    CorrectionError,
    DomainError,
    LocalizationError,
    MassError,
    OrderError,
    StageBoundError,
    TargetConstructionError,
)
from ..measure import (
    DiscreteMeasure,
    Interval,
    cd_gap,
    inf_c,
    inf_cd,
    leq_c,
    leq_cd,
    quantile_coupling_plan,
    sup_cd,
)
from ..potential import put_potential
from ..strassen import feasible_supermartingale, quantitative_martingale

BOUND_SLACK = 1e-9


# -- regularisations ---------------------------------------------------------

def truncate_kernel(x: float, kernel: DiscreteMeasure, R: float) -> DiscreteMeasure:
    """Kernel truncated at level ``R``.

    For ``|x| <= R`` the kernel is replaced by its ``^_cd`` envelope with the
    two-point law on ``{-R, R}`` sharing its mean; for ``|x| > R`` it becomes
    ``delta_x``.  A kernel whose mean lies outside ``[-R, R]`` has no such
    two-point law and is left unchanged.
    """
    if abs(x) > R:
        return DiscreteMeasure.dirac(x)
    m = kernel.bary
    if abs(m) > R:
        return kernel
    two = DiscreteMeasure([-R, R], [(R - m) / (2 * R), (R + m) / (2 * R)])
    return inf_cd(kernel, two)


def truncate(pi: FiniteCoupling, R: float) -> FiniteCoupling:
    """Row-wise kernel truncation at level ``R > 0``."""
    if not R > 0:
        raise DomainError("truncation level must be positive", R=R)
    return pi.map_kernels(lambda x, k: truncate_kernel(x, k, R))


def contract(pi: FiniteCoupling, alpha: float, check: bool = True) -> FiniteCoupling:
    """Push each kernel through ``y -> alpha y + (1 - alpha) x``.

    With ``check`` the bound
    ``AW_1(out, pi) <= (1 - alpha)(int |x| dmu + int |y| dnu)`` is verified.
    """
    if not 0 < alpha <= 1:
        raise DomainError("contraction factor must lie in (0, 1]", alpha=alpha)
    if alpha == 1:
        return pi
    out = pi.map_kernels(lambda x, k: k.push(lambda y: alpha * y + (1 - alpha) * x))
    if check:
        mu, nu = pi.marginals()
        bound = (1 - alpha) * (mu.abs_moment() + nu.abs_moment())
        gap = aw_distance(out, pi)
        if gap > bound + BOUND_SLACK:
            raise StageBoundError("contraction bound violated", gap=gap, bound=bound)
    return out


def diagonal_aw_bound(p: FiniteCoupling, q: FiniteCoupling) -> float:
    """``sum_i w_i W_1(p_x, q_x)`` for couplings sharing their rows; bounds ``AW_1``."""
    from ..measure import wasserstein

    return float(sum(w * wasserstein(k1, k2) for w, k1, k2 in zip(p.ws, p.kernels, q.kernels)))


# -- target measure -----------------------------------------------------------

def build_target(nu_k: DiscreteMeasure, mu_k: DiscreteMeasure, nu_ra: DiscreteMeasure,
                 tol: float | None = None) -> DiscreteMeasure:
    """``nu_k ^_c (mu_k v_cd T nu_ra)`` with ``T`` the barycentre-matching shift.

    The result lies above ``mu_k`` in the convex-decreasing order and below
    ``nu_k`` in the convex order; both relations are verified.
    """
    tol = resolve_tol(tol)
    delta = nu_k.bary - nu_ra.bary
    shifted = nu_ra.translate(delta)
    try:
        out = inf_c(nu_k, sup_cd(mu_k, shifted), tol=10 * tol)
    except OrderError as exc:
        raise TargetConstructionError("operands of the convex-order envelope have different means",
                                      **exc.detail) from exc
    if not leq_cd(mu_k, out, tol) or not leq_c(out, nu_k, 10 * tol):
        f_mu, f_out, f_nu = put_potential(mu_k), put_potential(out), put_potential(nu_k)
        raise TargetConstructionError(
            "target measure violates its order relations",
            mu_k=f_mu.to_csv_rows(), target=f_out.to_csv_rows(), nu_k=f_nu.to_csv_rows())
    return out


# -- approximating coupling with prescribed marginals ----------------------

def quantile_transfer(pi: FiniteCoupling, mu_k: DiscreteMeasure, nu_k: DiscreteMeasure) -> FiniteCoupling:
    """Coupling of ``(mu_k, nu_k)`` that follows ``pi`` through quantile couplings.

    Rows of ``mu_k`` mix the kernels of the ``pi`` rows they are matched with
    by the comonotone coupling of ``mu_k`` and the first marginal of ``pi``;
    the resulting second marginal is then moved onto ``nu_k`` by the
    comonotone coupling.  As both marginals converge, so does the output to
    ``pi`` in ``AW_1``.
    """
    mu, nu = pi.marginals()
    xk, x, m = quantile_coupling_plan(mu_k, mu)
    index = {float(v): i for i, v in enumerate(pi.xs)}
    rows = [(a, w, pi.kernels[index[float(b)]]) for a, b, w in zip(xk, x, m)]
    lifted = FiniteCoupling(rows)
    y, yk, mm = quantile_coupling_plan(lifted.second_marginal, nu_k)
    mover = FiniteCoupling((a, w, DiscreteMeasure.dirac(b)) for a, b, w in zip(y, yk, mm))
    return compose(lifted, mover)


# -- localisation -----------------------------------------------------------

def localize(pi_k: FiniteCoupling, pi_ref: FiniteCoupling, A: Interval, B: Interval, C: Interval,
             tol: float | None = None):
    """Localise ``pi_k`` to first coordinates near ``A`` and second coordinates in ``C``.

    With ``gamma`` the optimal outer plan of ``AW_1(pi_k, pi_ref)``,
    ``mu_tilde = gamma(. x A)`` (kept on ``B``) carries the kernels of
    ``pi_k``.  The mass those kernels put on ``C`` is then redistributed so
    that every row keeps the common fraction
    ``beta = nu_tilde(C) / mu_tilde(R)``: rows with a larger share give their
    surplus (proportionally to their restricted kernels) to rows with a
    smaller one.

    Returns:
        ``(mu_hat, pi_hat, eps_k, eps_prime_k)``.

    Raises:
        LocalizationError: ``A`` carries no mass of the reference first
            marginal, or nothing survives the localisation.
    """
    tol = resolve_tol(tol)
    mu_A = float(pi_ref.ws[A.contains(pi_ref.xs)].sum())
    if mu_A <= 0:
        raise LocalizationError("localisation set carries no reference mass", A=str(A))
    _, plan = aw_distance(pi_k, pi_ref, 1.0, return_plan=True)
    w_tilde = plan[:, A.contains(pi_ref.xs)].sum(axis=1)
    w_tilde = np.where(B.contains(pi_k.xs), w_tilde, 0.0)
    w_tilde[w_tilde <= 1e-15] = 0.0
    mass_tilde = float(w_tilde.sum())
    eps_k = max(1.0 - mass_tilde / mu_A, 0.0)
    if mass_tilde <= 0:
        raise LocalizationError("no mass of the approximating coupling is matched with the localisation set")
    rows = [(x, w, k) for x, w, k in zip(pi_k.xs, w_tilde, pi_k.kernels) if w > 0]
    q = np.array([k.measure_of(C) for _, _, k in rows])
    ws = np.array([w for _, w, _ in rows])
    nu_C = float(ws @ q)
    if nu_C <= 0:
        raise LocalizationError("localised kernels put no mass on the target set", C=str(C))
    beta = nu_C / mass_tilde
    eps_prime = 1.0 - nu_C / mu_A
    restricted = [k.restrict(C) for _, _, k in rows]
    surplus = np.maximum(ws * q - beta * ws, 0.0)
    deficit = np.maximum(beta * ws - ws * q, 0.0)
    pool_parts = []
    keep_parts = []
    for i, k in enumerate(restricted):
        own = ws[i] * q[i]
        if own > 0 and surplus[i] > 0:
            frac = surplus[i] / own
            pool_parts.append(k.scale_mass(ws[i] * frac))
            keep_parts.append(k.scale_mass(ws[i] * (1 - frac)))
        else:
            keep_parts.append(k.scale_mass(ws[i]))
    pool = mix([1.0] * len(pool_parts), pool_parts)
    total_deficit = float(deficit.sum())
    hat_rows = []
    for i, (x, _, _) in enumerate(rows):
        part = keep_parts[i]
        if deficit[i] > 0 and total_deficit > 0:
            part = part + pool.scale_mass(deficit[i] / total_deficit)
        if beta * ws[i] > 0 and part.mass > 0:
            hat_rows.append((x, beta * ws[i], part))
    pi_hat = FiniteCoupling(hat_rows)
    mu_hat = pi_hat.first_marginal
    if eps_prime < eps_k - tol:
        raise StageBoundError("localisation produced eps' below eps", eps=eps_k, eps_prime=eps_prime)
    return mu_hat, pi_hat, eps_k, max(eps_prime, 0.0)


# -- barycentre correction ----------------------------------------------------

def correct_barycentres(pi_hat: FiniteCoupling, nu_minus: DiscreteMeasure, e: float | None = None,
                        tol: float | None = None) -> FiniteCoupling:
    """Mix ``nu_minus`` into kernels whose barycentre exceeds ``x``.

    ``c(x) = (bary(k_x) - x)^+ / int (x - y) nu_minus(dy)`` and
    ``d(x) = 1 + c(x) nu_minus(R)``; the corrected kernel is
    ``(k_x + c(x) nu_minus) / d(x)``, whose barycentre equals ``x`` whenever
    a correction was needed.

    Raises:
        CorrectionError: ``nu_minus`` is empty or not strictly left of a row
            that needs correcting (by at least ``e`` when given).
    """
    tol = resolve_tol(tol)
    if pi_hat.defect() <= 0:
        return pi_hat
    if nu_minus.is_zero or nu_minus.mass <= 0:
        raise CorrectionError("correction measure is empty")
    mass_minus = nu_minus.mass
    rows = []
    for x, w, k in pi_hat.rows:
        excess = k.bary - x
        if excess <= 0:
            rows.append((x, w, k))
            continue
        denom = mass_minus * x - nu_minus.first_moment
        gap = x - nu_minus.support_max
        if denom <= 0 or gap <= 0 or (e is not None and gap < e - 1e-12):
            raise CorrectionError("correction measure is not strictly left of the row", x=x, gap=gap)
        c = excess / denom
        d = 1.0 + c * mass_minus
        rows.append((x, w, (k + nu_minus.scale_mass(c)).scale_mass(1.0 / d)))
    out = FiniteCoupling(rows)
    bad = out.barycentres - out.xs
    if np.any(bad > 1e-12 * np.maximum(1.0, np.abs(out.xs))):
        raise CorrectionError("corrected kernel still exceeds its row position", excess=float(bad.max()))
    return out


# -- completion and final adjustment ---------------------------------------

def complete(mu_rem: DiscreteMeasure, nu_rem: DiscreteMeasure, tol: float | None = None) -> FiniteCoupling:
    """Supermartingale coupling of the remainders, after checking their order.

    Raises:
        MassError: the remainders have different masses.
        CompletionError: ``mu_rem`` is not below ``nu_rem`` in the
            convex-decreasing order; carries the gap, the breakpoint and both
            potentials as CSV rows.
    """
    tol = resolve_tol(tol)
    if abs(mu_rem.mass - nu_rem.mass) > 1e-9:
        raise MassError("remainders must have equal mass", mass1=mu_rem.mass, mass2=nu_rem.mass)
    if mu_rem.is_zero and nu_rem.is_zero:
        return FiniteCoupling()
    gap, at = cd_gap(mu_rem, nu_rem)
    if gap > tol:
        raise CompletionError(
            "remainders are not ordered in the convex-decreasing order",
            gap=gap, breakpoint=at,
            mu_rem_potential=put_potential(mu_rem).to_csv_rows(),
            nu_rem_potential=put_potential(nu_rem).to_csv_rows())
    return feasible_supermartingale(mu_rem, nu_rem, tol)


def final_adjust(pi_bar: FiniteCoupling, nu_k: DiscreteMeasure, tol: float | None = None,
                 return_cost: bool = False):
    """Compose ``pi_bar`` with a cheapest martingale coupling onto ``nu_k``."""
    tol = resolve_tol(tol)
    nu_mid = pi_bar.second_marginal
    M, cost = quantitative_martingale(nu_mid, nu_k, tol, return_cost=True)
    out = compose(pi_bar, M, tol)
    return (out, cost) if return_cost else out


def defect_bound_check(pi_hat: FiniteCoupling, reference: FiniteCoupling, stage: str):
    """Verify ``defect(pi_hat) <= AW_1(pi_hat, reference)`` for a supermartingale reference."""
    d = pi_hat.defect()
    if pi_hat.size == 0:
        return d, 0.0
    gap = aw_distance(pi_hat, reference)
    if d > gap + BOUND_SLACK * max(1.0, gap):
        raise StageBoundError("defect inequality violated", stage=stage, defect=d, aw=gap)
    return d, gap


__all__ = [
    "truncate",
    "truncate_kernel",
    "contract",
    "build_target",
    "quantile_transfer",
    "localize",
    "correct_barycentres",
    "complete",
    "final_adjust",
    "defect_bound_check",
    "diagonal_aw_bound",
]
