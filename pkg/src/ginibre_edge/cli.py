"""Command-line front end.

    ginibre-edge gumbel --n 200 --kind complex --trials 10000 --seed 7 \\
        --abs-thresholds 1.10,1.15,1.20 --out g.json

Exit status: 0 on success, 1 on invalid input, 2 when the request is outside
the numerical regime (for instance gamma_n <= 0 for a rescaled window).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys

from . import __version__
from . import ensemble as E
from . import fredholm as F
from . import harness as H
from . import kernel as K
from .specfun import DomainError, RegimeError

EXIT_OK, EXIT_INVALID, EXIT_REGIME = 0, 1, 2
THREADS_ENV = "GINIBRE_EDGE_THREADS"


class CliError(Exception):
    def __init__(self, message, status=EXIT_INVALID):
        super().__init__(message)
        self.status = status


# ---------------------------------------------------------------------------
# argument types


def int_n(text) -> int:
    """Positive integer, scientific notation allowed (``1e12``)."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v) or v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"not a positive integer: {text!r}")
    if "e" not in text.lower():
        return int(text)
    return int(v)


def float_list(text) -> list:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def n_list(text) -> list:
    return [int_n(s.strip()) for s in text.split(",") if s.strip()]


def orders(text) -> tuple:
    try:
        a, b = (int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"orders must look like '48,32', got {text!r}") from None
    return a, b


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def _common(p, out_help="output file (JSON unless noted)"):
    p.add_argument("--config", help="JSON file with option values; flags on the command line take precedence")
    p.add_argument("--out", help=out_help)
    p.add_argument("--json", action="store_true", help="report errors as JSON on stderr")
    p.add_argument("--threads", type=int, help=f"worker processes (default: ${THREADS_ENV} or 1)")


def _mc(p):
    p.add_argument("--n", type=int_n, help="matrix size (scientific notation allowed)")
    p.add_argument("--kind", choices=F.KINDS, help="ensemble")
    p.add_argument("--trials", type=int_n, help="number of Monte Carlo trials")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--csv", help="write the comparison table as CSV here")
    p.add_argument("--samples-csv", help="write per-trial statistics as CSV here")


def _windows(p):
    p.add_argument("--abs-thresholds", type=float_list, help="absolute thresholds s (windows Re z >= s)")
    p.add_argument("--ts", type=float_list, help="rescaled thresholds t")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ginibre-edge", description="Edge statistics of Ginibre matrices.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="sample one matrix and print its extreme statistics")
    _common(p)
    p.add_argument("--n", type=int_n, help="matrix size")
    p.add_argument("--kind", choices=F.KINDS, help="ensemble")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--trial", type=int, help="trial index (default 0)")
    p.add_argument("--eigenvalues", action="store_true", help="include all eigenvalues in the output")

    p = sub.add_parser("gumbel", help="MC gap probabilities against Fredholm values and limits")
    _common(p)
    _mc(p)
    _windows(p)
    p.add_argument("--real-max", action="store_true",
                   help="real kind: distribution of the largest real eigenvalue at 1 + t/sqrt(n), t from --ts")

    p = sub.add_parser("poisson", help="MC counts and Laplace functionals in edge windows")
    _common(p)
    _mc(p)
    _windows(p)

    p = sub.add_parser("radius", help="MC rescaled spectral radius against the Gumbel law")
    _common(p)
    _mc(p)
    p.add_argument("--ts", type=float_list, help="rescaled thresholds t")

    p = sub.add_parser("fredholm", help="gap probability of one window")
    _common(p)
    p.add_argument("--n", type=int_n, help="matrix size (scientific notation allowed)")
    p.add_argument("--kind", choices=F.KINDS, help="ensemble")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--t", type=float, help="rescaled threshold")
    g.add_argument("--s", type=float, help="absolute threshold")
    p.add_argument("--method", choices=("auto", "nystrom", "trace_series"), help="determinant method")
    p.add_argument("--orders", type=orders, help="quadrature orders 'mx,my' for the window")

    p = sub.add_parser("kernel-check", help="exact kernel identities at finite n")
    _common(p)
    p.add_argument("--n", type=int_n, help="matrix size (at most 1e5)")
    p.add_argument("--pairs", type=int, help="random pairs for the reproducing and Cauchy-Schwarz checks")
    p.add_argument("--seed", type=int, help="seed for the random pairs")

    p = sub.add_parser("drift", help="finite-n gap probabilities against the Gumbel limit (CSV)")
    _common(p, out_help="output CSV")
    p.add_argument("--ns", type=n_list, help="comma-separated n values")
    p.add_argument("--ts", type=float_list, help="comma-separated t values")
    p.add_argument("--kind", choices=F.KINDS, help="ensemble")
    return parser


DEFAULTS = {
    "sample": {"kind": "complex", "seed": 0, "trial": 0},
    "gumbel": {"kind": "complex", "seed": 0, "trials": 1000},
    "poisson": {"kind": "complex", "seed": 0, "trials": 1000},
    "radius": {"kind": "complex", "seed": 0, "trials": 1000},
    "fredholm": {"kind": "complex", "method": "auto"},
    "kernel-check": {"pairs": 20, "seed": 0},
    "drift": {"kind": "complex"},
}
_INTERNAL = {"verb", "config", "json"}


def resolve(argv, parser=None) -> tuple:
    """Parse argv and merge with defaults and the config file (file < flags)."""
    parser = parser or build_parser()
    ns = parser.parse_args(argv)
    eff = dict(DEFAULTS[ns.verb])
    if ns.config:
        try:
            with open(ns.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise CliError("config file must hold a JSON object")
        known = set(vars(ns)) - _INTERNAL
        unknown = set(k.replace("-", "_") for k in cfg) - known
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        eff.update({k.replace("-", "_"): v for k, v in cfg.items()})
    for k, v in vars(ns).items():
        if k in _INTERNAL:
            continue
        if v is not None and v is not False:
            eff[k] = v
        else:
            eff.setdefault(k, v)
    if eff.get("threads") is None:
        env = os.environ.get(THREADS_ENV)
        try:
            eff["threads"] = int(env) if env else 1
        except ValueError:
            raise CliError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if eff["threads"] < 1:
        raise CliError("--threads must be >= 1")
    return ns.verb, eff, ns.json


def _require(eff, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if eff.get(n) in (None, [])]
    if missing:
        raise CliError(f"missing required option(s): {', '.join(missing)}")


def _int(eff, name):
    v = eff[name]
    if isinstance(v, str):
        return int_n(v)
    if isinstance(v, float):
        if v != int(v):
            raise CliError(f"{name} must be an integer")
        return int(v)
    return v


# ---------------------------------------------------------------------------
# output


def _emit(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        H.atomic_write_text(path, text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _echo(verb, eff) -> dict:
    return {"verb": verb, **{k: v for k, v in sorted(eff.items()) if k != "threads"}}


# ---------------------------------------------------------------------------
# verbs


def _windows_from(eff, n) -> list:
    ws = [F.EdgeWindow.absolute(s) for s in eff.get("abs_thresholds") or []]
    ts = eff.get("ts") or []
    if ts:
        K.gamma_n(n)
    ws += [F.EdgeWindow.rescaled(t) for t in ts]
    if not ws:
        raise CliError("give --abs-thresholds and/or --ts")
    return ws


def _experiment(verb, eff):
    _require(eff, "n", "kind", "trials", "seed")
    n = _int(eff, "n")
    common = dict(n=n, kind=eff["kind"], trials=_int(eff, "trials"), master_seed=int(eff["seed"]),
                  output=eff.get("out"), workers=eff["threads"])
    if verb == "radius":
        _require(eff, "ts")
        cfg = H.ExperimentConfig(experiment="radius", ts=eff["ts"], **common)
    elif verb == "gumbel" and eff.get("real_max"):
        _require(eff, "ts")
        cfg = H.ExperimentConfig(experiment="real_max", ts=eff["ts"], **common)
    else:
        cfg = H.ExperimentConfig(experiment="gumbel" if verb == "gumbel" else "poisson_count",
                                 windows=_windows_from(eff, n), **common)
    result = H.run_experiment(cfg)
    doc = result.to_json()
    doc["effective_config"] = _echo(verb, eff)
    _emit(eff.get("out"), _dumps(doc))
    if eff.get("csv"):
        H.atomic_write_text(eff["csv"], H.comparison_csv(result.rows))
    if eff.get("samples_csv"):
        H.atomic_write_text(eff["samples_csv"], H.samples_csv(result))


def _sample(eff):
    _require(eff, "n", "kind", "seed")
    n = _int(eff, "n")
    eigs = E.spectrum(E.sample_ginibre(n, eff["kind"], int(eff["seed"]), int(eff["trial"])), eff["kind"])
    doc = {"summary": E.extreme_stats(eigs, n, eff["kind"], int(eff["seed"])).to_json(),
           "effective_config": _echo("sample", eff)}
    if eff.get("eigenvalues"):
        doc["eigenvalues"] = [[float(z.real), float(z.imag)] for z in eigs]
    _emit(eff.get("out"), _dumps(doc))


def _fredholm(eff):
    _require(eff, "n", "kind")
    n = _int(eff, "n")
    kw = {"orders": tuple(eff["orders"])} if eff.get("orders") else {}
    if eff.get("t") is not None:
        window = F.EdgeWindow.rescaled(eff["t"], **kw)
        limit = F.gumbel_limit_cdf(eff["t"], eff["kind"])
    elif eff.get("s") is not None:
        window = F.EdgeWindow.absolute(eff["s"], **kw)
        limit = None
    else:
        raise CliError("give --t or --s")
    rep = F.gap_probability(n, window, eff["kind"], method=eff["method"])
    doc = {"report": rep.to_json(), "window": window.to_json(), "limit": limit,
           "effective_config": _echo("fredholm", eff)}
    _emit(eff.get("out"), _dumps(doc))


def _kernel_check(eff):
    _require(eff, "n")
    n = _int(eff, "n")
    if n > 100_000:
        raise RegimeError("kernel-check needs n <= 1e5 (direct summation)")
    from .checks import kernel_identities

    doc = {"checks": kernel_identities(n, int(eff["pairs"]), int(eff["seed"])),
           "effective_config": _echo("kernel-check", eff)}
    _emit(eff.get("out"), _dumps(doc))


def _drift(eff):
    _require(eff, "ns", "ts", "kind")
    rows = H.drift_table(eff["ns"], eff["ts"], eff["kind"])
    _emit(eff.get("out"), H.drift_csv(rows))


_LIST_FLAGS = ("--ts", "--abs-thresholds", "--ns")
_NEGATIVE = re.compile(r"^-[0-9.]")


def _join_negative_lists(argv) -> list:
    """``--ts -1,0`` -> ``--ts=-1,0``; argparse would read ``-1,0`` as a flag."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _LIST_FLAGS and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def run_command(argv) -> int:
    argv = _join_negative_lists(list(argv))
    as_json = "--json" in argv
    try:
        verb, eff, as_json = resolve(argv)
        if verb == "sample":
            _sample(eff)
        elif verb in ("gumbel", "poisson", "radius"):
            _experiment(verb, eff)
        elif verb == "fredholm":
            _fredholm(eff)
        elif verb == "kernel-check":
            _kernel_check(eff)
        else:
            _drift(eff)
        return EXIT_OK
    except K.GammaPositivityError as exc:
        msg = f"gamma_n <= 0; minimal n ≈ {K.min_gamma_positive_n():.2g} (n={exc.n:g}, gamma_n={exc.value:.6g})"
        return _fail(msg, EXIT_REGIME, "regime", as_json)
    except (RegimeError, DomainError, F.TruncationError, F.NegativeDeterminantError, ArithmeticError) as exc:
        return _fail(str(exc), EXIT_REGIME, "regime", as_json)
    except CliError as exc:
        return _fail(str(exc), exc.status, "validation", as_json)
    except (ValueError, TypeError, OSError) as exc:
        return _fail(str(exc), EXIT_INVALID, "validation", as_json)


def _fail(message, status, category, as_json) -> int:
    if as_json:
        sys.stderr.write(json.dumps({"error": category, "message": message, "exit_status": status}) + "\n")
    else:
        sys.stderr.write(f"error: {message}\n")
    return status


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
