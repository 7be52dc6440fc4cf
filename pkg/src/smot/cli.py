"""Command-line interface.

Every subcommand prints a JSON document (or writes it to ``--out``) and
exits with status 0.  Domain failures print ``{"error": kind, "detail": ...}``
and exit with 1; malformed command lines print the same shape with kind
``usage`` and exit with 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io as sio
from .approx import DEFAULT_SCHEDULE, approximate
from .coupling import aw_distance
from .decomposition import irreducible_components
from .errors import SmotError
from .measure import leq_c, leq_cd, put_potential, wasserstein
from .strassen import feasible_martingale, feasible_supermartingale
from .wsot import (
    Perturbation,
    check_monotone,
    solve_convex,
    solve_linear,
    stability_run,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _existing(text):
    if not Path(text).is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return text


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}")


def _schedule(text):
    """``"2..7"`` gives ``2**-2, ..., 2**-7``; otherwise comma-separated values."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        try:
            a, b = int(lo), int(hi)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an exponent range like 2..7: {text!r}")
        return [2.0 ** -j for j in range(a, b + 1)]
    return _floats(text)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=_positive, default=None, help="comparison tolerance (default SMOT_TOL or 1e-9)")
    common.add_argument("--threads", type=int, default=1, help="worker cap for parallel sections")
    common.add_argument("--seed", type=int, default=0, help="seed for randomised steps")
    common.add_argument("--out", default=None, help="write the result here instead of stdout")

    p = _Parser(prog="smot", description="Supermartingale optimal transport on finitely supported measures.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("order-check", parents=[common], help="compare two measures in the convex orders")
    s.add_argument("--mu", type=_existing, required=True)
    s.add_argument("--nu", type=_existing, required=True)

    s = sub.add_parser("potential", parents=[common], help="put potential at its breakpoints")
    s.add_argument("--mu", type=_existing, required=True)
    s.add_argument("--format", choices=["json", "csv"], default="json")

    s = sub.add_parser("wasserstein", parents=[common], help="W_r distance between two measures")
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("a", type=_existing)
    s.add_argument("b", type=_existing)

    s = sub.add_parser("aw-distance", parents=[common], help="adapted Wasserstein distance between couplings")
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("p", type=_existing)
    s.add_argument("q", type=_existing)

    s = sub.add_parser("decompose", parents=[common], help="irreducible decomposition of a pair")
    s.add_argument("--mu", type=_existing, required=True)
    s.add_argument("--nu", type=_existing, required=True)

    s = sub.add_parser("feasible-coupling", parents=[common], help="a supermartingale (or martingale) coupling")
    s.add_argument("--mu", type=_existing, required=True)
    s.add_argument("--nu", type=_existing, required=True)
    s.add_argument("--martingale", action="store_true")

    s = sub.add_parser("approximate", parents=[common], help="approximate a coupling under new marginals")
    s.add_argument("--pi", type=_existing, required=True)
    s.add_argument("--mu-k", type=_existing, required=True)
    s.add_argument("--nu-k", type=_existing, required=True)
    s.add_argument("--schedule", type=_schedule, default=list(DEFAULT_SCHEDULE),
                   help="eps values, or an exponent range such as 2..7")
    s.add_argument("--csv", default=None, help="also write the per-stage CSV here")

    s = sub.add_parser("wsot-solve", parents=[common], help="optimal weak supermartingale transport")
    s.add_argument("--mu", type=_existing, required=True)
    s.add_argument("--nu", type=_existing, required=True)
    s.add_argument("--cost", type=_existing, required=True)

    s = sub.add_parser("monotonicity-check", parents=[common], help="search for improving competitors")
    s.add_argument("--pi", type=_existing, required=True)
    s.add_argument("--cost", type=_existing, required=True)
    s.add_argument("--n-max", type=int, default=3)

    s = sub.add_parser("stability-run", parents=[common], help="optimal values along perturbed marginals")
    s.add_argument("--mu", type=_existing, required=True)
    s.add_argument("--nu", type=_existing, required=True)
    s.add_argument("--cost", type=_existing, required=True)
    s.add_argument("--levels", type=_floats, default=[0.2, 0.1, 0.05, 0.025])
    s.add_argument("--perturbation", choices=["translate", "spread", "jitter"], default="spread")
    return p


# -- commands -------------------------------------------------------------------

def _order_check(a):
    mu, nu = sio.load_measure(a.mu), sio.load_measure(a.nu)
    return {"leq_cd": leq_cd(mu, nu, a.tol), "leq_c": leq_c(mu, nu, a.tol)}


def _potential(a):
    rows = put_potential(sio.load_measure(a.mu)).to_csv_rows()
    if a.format == "csv":
        return sio.rows_to_csv(["x", "P"], rows)
    return {"x": [r[0] for r in rows], "P": [r[1] for r in rows]}


def _wasserstein(a):
    return {"w": wasserstein(sio.load_measure(a.a), sio.load_measure(a.b), a.r)}


def _aw(a):
    return {"aw": aw_distance(sio.load_coupling(a.p), sio.load_coupling(a.q), a.r, threads=a.threads)}


def _decompose(a):
    return irreducible_components(sio.load_measure(a.mu), sio.load_measure(a.nu), a.tol).to_json()


def _feasible(a):
    mu, nu = sio.load_measure(a.mu), sio.load_measure(a.nu)
    f = feasible_martingale if a.martingale else feasible_supermartingale
    return f(mu, nu, a.tol).to_json()


def _approximate(a):
    pi = sio.load_coupling(a.pi)
    mu_k, nu_k = sio.load_measure(a.mu_k), sio.load_measure(a.nu_k)
    out, trace = approximate(pi, mu_k, nu_k, a.schedule, a.tol, a.threads)
    if a.csv:
        sio.write_text(a.csv, trace.to_csv())
    return {"coupling": out.to_json(), "trace": trace.to_json()}


def _solve(a, mu, nu, cost):
    if cost.is_linear:
        value, pi = solve_linear(mu, nu, cost, a.tol)
        return {"value": value, "method": "simplex", "coupling": pi.to_json()}
    res = solve_convex(mu, nu, cost, a.tol)
    return {"method": "frank_wolfe", **res.to_json()}


def _wsot(a):
    mu, nu = sio.load_measure(a.mu), sio.load_measure(a.nu)
    cost = sio.load_cost(a.cost, mu.atoms, nu.atoms)
    return _solve(a, mu, nu, cost)


def _monotone(a):
    pi = sio.load_coupling(a.pi)
    mu, nu = pi.marginals()
    cost = sio.load_cost(a.cost, mu.atoms, nu.atoms)
    dec = irreducible_components(mu, nu, a.tol)
    return check_monotone(pi, cost, dec, a.n_max, a.threads, a.tol).to_json()


def _stability(a):
    mu, nu = sio.load_measure(a.mu), sio.load_measure(a.nu)
    cost = sio.load_cost(a.cost, mu.atoms, nu.atoms)
    table = stability_run(mu, nu, cost, Perturbation(a.perturbation, a.seed), a.levels, a.tol)
    if a.out and a.out.endswith(".csv"):
        return table.to_csv()
    return table.to_json()


COMMANDS = {
    "order-check": _order_check,
    "potential": _potential,
    "wasserstein": _wasserstein,
    "aw-distance": _aw,
    "decompose": _decompose,
    "feasible-coupling": _feasible,
    "approximate": _approximate,
    "wsot-solve": _wsot,
    "monotonicity-check": _monotone,
    "stability-run": _stability,
}


def run(argv=None, stdout=None) -> int:
    """Execute one command; returns the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
    except UsageError as exc:
        stdout.write(sio.dumps({"error": "usage", "detail": str(exc)}) + "\n")
        return 2
    try:
        result = COMMANDS[args.command](args)
    except SmotError as exc:
        stdout.write(sio.dumps(exc.to_json()) + "\n")
        return 1
    except (ValueError, ArithmeticError, AssertionError, RuntimeError, KeyError, TypeError) as exc:
        stdout.write(sio.dumps({"error": "internal", "detail": f"{type(exc).__name__}: {exc}"}) + "\n")
        return 1
    text = result if isinstance(result, str) else sio.dumps(result) + "\n"
    if args.out:
        sio.write_text(args.out, text)
    else:
        stdout.write(text)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
