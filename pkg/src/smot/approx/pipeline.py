"""Orchestration: approximate a supermartingale coupling under perturbed marginals."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .._config import resolve_tol
from ..coupling import FiniteCoupling, aw_distance
from ..decomposition import (
    DIAGONAL,
    approx_decomposition,
    decompose_coupling,
    irreducible_components,
)
from ..errors import (
    CompletionError,
    CorrectionError,
    DomainError,
    LocalizationError,
    OrderError,
    ParameterSearchError,
    PipelineError,
    StageBoundError,
    TargetConstructionError,
)
from ..measure import DiscreteMeasure, require_leq_cd
from ..strassen import feasible_supermartingale
from .params import PipelineParams, choose_params
from .stages import (
    build_target,
    complete,
    contract,
    correct_barycentres,
    defect_bound_check,
    final_adjust,
    localize,
    quantile_transfer,
    truncate,
)

DEFAULT_SCHEDULE = tuple(2.0 ** -j for j in range(2, 8))

# failures after which the next eps of the schedule is tried
RECOVERABLE = (CompletionError, CorrectionError, LocalizationError, ParameterSearchError,
               TargetConstructionError, OrderError, DomainError)


@dataclass
class StageRecord:
    component: int
    eps: float
    stage: str
    aw_gap: float
    defect: float
    mass: float

    def row(self):
        return [self.component, self.eps, self.stage, self.aw_gap, self.defect, self.mass]


@dataclass
class ComponentRun:
    """Outcome of the construction for one component at one ``eps``."""

    component: int
    eps: float
    params: Optional[PipelineParams] = None
    couplings: Dict[str, FiniteCoupling] = field(default_factory=dict)
    measures: Dict[str, DiscreteMeasure] = field(default_factory=dict)
    scalars: Dict[str, float] = field(default_factory=dict)
    records: List[StageRecord] = field(default_factory=list)
    output: Optional[FiniteCoupling] = None
    aw: float = math.inf
    error: Optional[dict] = None


@dataclass
class PipelineTrace:
    """Per-stage diagnostics of an ``approximate`` call."""

    x_star: float = math.inf
    runs: List[ComponentRun] = field(default_factory=list)
    chosen: Dict[int, float] = field(default_factory=dict)
    component_aw: Dict[int, float] = field(default_factory=dict)
    aw: float = math.nan
    stage_bound_checks: int = 0

    @property
    def records(self) -> List[StageRecord]:
        return [r for run in self.runs for r in run.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["component", "eps", "stage", "aw_gap", "defect", "mass"])
        for r in self.records:
            w.writerow([r.component, _fmt(r.eps), r.stage, _fmt(r.aw_gap), _fmt(r.defect), _fmt(r.mass)])
        return buf.getvalue()

    def to_json(self):
        return {
            "x_star": "inf" if math.isinf(self.x_star) else self.x_star,
            "aw": self.aw,
            "chosen_eps": {str(k): v for k, v in sorted(self.chosen.items())},
            "component_aw": {str(k): v for k, v in sorted(self.component_aw.items())},
            "stage_bound_checks": self.stage_bound_checks,
            "runs": [
                {
                    "component": run.component,
                    "eps": run.eps,
                    "aw": None if math.isinf(run.aw) else run.aw,
                    "error": run.error,
                    "params": None if run.params is None else run.params.to_json(),
                    "scalars": run.scalars,
                }
                for run in self.runs
            ],
        }


def _fmt(v):
    return "%.17g" % v if isinstance(v, float) else str(v)


def _record(run, stage, coupling, reference=None, aw_gap=None):
    if aw_gap is None:
        aw_gap = aw_distance(coupling, reference) if reference is not None else math.nan
    run.records.append(StageRecord(run.component, run.eps, stage, float(aw_gap), coupling.defect(),
                                   coupling.mass))


def run_component(pi: FiniteCoupling, mu_k: DiscreteMeasure, nu_k: DiscreteMeasure, interval,
                  eps: float, index: int = 0, tol: float | None = None) -> ComponentRun:
    """All stages for one irreducible component of unit mass.

    Recoverable stage failures are stored in ``run.error``; stage-bound
    violations propagate.
    """
    tol = resolve_tol(tol)
    run = ComponentRun(index, eps)
    stage = "choose_params"
    try:
        mu, nu = pi.marginals()
        p = choose_params(pi, mu, nu, eps, interval)
        run.params = p

        stage = "truncate"
        pi_R = truncate(pi, p.R)
        run.couplings["pi_R"] = pi_R
        _record(run, stage, pi_R, pi)

        stage = "contract"
        pi_ra = contract(pi_R, p.alpha)
        nu_ra = pi_ra.second_marginal
        run.couplings["pi_R_alpha"] = pi_ra
        run.measures["nu_R_alpha"] = nu_ra
        _record(run, stage, pi_ra, pi)

        stage = "build_target"
        target = build_target(nu_k, mu_k, nu_ra, tol)
        run.measures["nu_R_alpha_k"] = target

        stage = "transfer"
        pi_rak = quantile_transfer(pi_ra, mu_k, target)
        run.couplings["pi_R_alpha_k"] = pi_rak
        _record(run, stage, pi_rak, pi_ra)

        stage = "localize"
        mu_hat, pi_hat, eps_k, eps_p = localize(pi_rak, pi_ra, p.K, p.K_open, p.L_interior, tol)
        run.couplings["pi_hat"] = pi_hat
        run.measures["mu_hat"] = mu_hat
        run.scalars.update(eps_k=eps_k, eps_prime_k=eps_p)
        reference = pi_ra.restrict_first(p.K).scale(1.0 - eps_p)
        d, gap = defect_bound_check(pi_hat, reference, stage)
        run.scalars["defect_bound_checked"] = 1.0
        _record(run, stage, pi_hat, aw_gap=gap)

        stage = "correct_barycentres"
        nu_minus = target.restrict(p.L_minus_t_interval)
        pi_tilde = correct_barycentres(pi_hat, nu_minus, p.e, tol)
        nu_tilde = pi_tilde.second_marginal
        run.couplings["pi_tilde"] = pi_tilde
        run.measures["nu_tilde"] = nu_tilde
        _record(run, stage, pi_tilde, reference)

        stage = "complete"
        s = 1.0 - 2.0 * eps
        mu_rem = mu_k.subtract(mu_hat.scale_mass(s), tol)
        nu_mid = nu_k.scale_mass(eps) + target.scale_mass(1.0 - eps)
        nu_rem = nu_mid.subtract(nu_tilde.scale_mass(s), tol)
        run.measures.update(mu_rem=mu_rem, nu_rem=nu_rem)
        eta = complete(mu_rem, nu_rem, tol)
        run.couplings["eta"] = eta

        stage = "glue"
        pi_bar = pi_tilde.scale(s) + eta
        run.couplings["pi_bar"] = pi_bar
        _record(run, stage, pi_bar, pi)

        stage = "final_adjust"
        out, cost = final_adjust(pi_bar, nu_k, tol, return_cost=True)
        run.scalars["martingale_cost"] = cost
        run.couplings["pi_k"] = out
        run.output = out
        run.aw = aw_distance(out, pi)
        _record(run, stage, out, aw_gap=run.aw)
    except StageBoundError:
        raise
    except RECOVERABLE as exc:
        run.error = {"stage": stage, **exc.to_json()}
    return run


def _validate(out, mu_k, nu_k, tol):
    res = out.marginal_residual(mu_k, nu_k)
    if res > tol:
        raise PipelineError("output marginals are not exact", stage="validate", residual=res)
    if out.defect() > tol:
        raise PipelineError("output is not a supermartingale coupling", stage="validate", defect=out.defect())


def approximate(pi: FiniteCoupling, mu_k: DiscreteMeasure, nu_k: DiscreteMeasure,
                schedule: Sequence[float] = DEFAULT_SCHEDULE, tol: float | None = None,
                threads: int = 1):
    """Supermartingale coupling of ``(mu_k, nu_k)`` close to ``pi`` in ``AW_1``.

    The pair ``(mu, nu)`` of marginals of ``pi`` is split into irreducible
    components and the split is transferred to ``(mu_k, nu_k)``.  Diagonal
    pieces are coupled by the cheapest supermartingale coupling in
    ``|x - y|``; every other piece is normalised to unit mass and run through
    truncation, contraction, target construction, localisation,
    barycentre correction, completion, gluing and the final martingale
    adjustment, for each ``eps`` of the schedule.  Per component the run
    closest to the reference is kept.

    Returns:
        ``(coupling, trace)``.

    Raises:
        OrderError: ``mu_k`` is not below ``nu_k`` or ``pi`` is not a
            supermartingale coupling.
        PipelineError: every schedule entry failed for some component, or
            the glued output fails validation.
    """
    tol = resolve_tol(tol)
    require_leq_cd(mu_k, nu_k, tol, what="perturbed marginals")
    if not pi.is_supermartingale(tol):
        raise OrderError("reference coupling is not a supermartingale coupling", defect=pi.defect())
    mu, nu = pi.marginals()
    if abs(mu.mass - mu_k.mass) > 1e-9:
        raise PipelineError("perturbed marginals must have the reference mass", stage="input")
    schedule = [float(e) for e in schedule]
    if not schedule or any(not 0 < e < 0.5 for e in schedule):
        raise PipelineError("schedule entries must lie in (0, 1/2)", stage="input")
    dec = irreducible_components(mu, nu, tol)
    ref_pieces = decompose_coupling(pi, dec, tol)
    pi_k0 = feasible_supermartingale(mu_k, nu_k, tol)
    parts = approx_decomposition(mu, nu, pi_k0, mu_k, nu_k, dec, tol)

    trace = PipelineTrace(x_star=dec.x_star)
    outputs = []
    for part, ref in zip(parts, ref_pieces):
        comp = part.component
        if part.mu_k.is_zero:
            continue
        if comp.kind == DIAGONAL:
            piece = feasible_supermartingale(part.mu_k, part.nu_k, tol)
            trace.component_aw[comp.index] = aw_distance(piece, ref)
            outputs.append(piece)
            continue
        m = comp.mu.mass
        ref_n = ref.scale(1.0 / m)
        mu_n, nu_n = part.mu_k.scale_mass(1.0 / m), part.nu_k.scale_mass(1.0 / m)

        def job(eps, ref_n=ref_n, mu_n=mu_n, nu_n=nu_n, comp=comp):
            return run_component(ref_n, mu_n, nu_n, comp.interval, eps, comp.index, tol)

        if threads > 1 and len(schedule) > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                runs = list(ex.map(job, schedule))
        else:
            runs = [job(e) for e in schedule]
        trace.runs.extend(runs)
        trace.stage_bound_checks += 2 * sum(1 for r in runs if "defect_bound_checked" in r.scalars)
        good = [r for r in runs if r.output is not None]
        if not good:
            raise PipelineError("every schedule entry failed for a component", stage=runs[-1].error["stage"],
                                component=comp.index, errors=[r.error for r in runs])
        best = min(good, key=lambda r: (r.aw, -r.eps))
        trace.chosen[comp.index] = best.eps
        trace.component_aw[comp.index] = best.aw * m
        outputs.append(best.output.scale(m))

    out = FiniteCoupling()
    for piece in outputs:
        out = out + piece
    _validate(out, mu_k, nu_k, 10 * tol)
    trace.aw = aw_distance(out, pi)
    return out, trace
