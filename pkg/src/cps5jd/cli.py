"""Command-line entry point ``cps5``.

Subcommands::

    cps5 sim1       collinear fifth-order decomposition benchmark
    cps5 sim2       trilinear ICA benchmark
    cps5 decompose  decompose a CT1 tensor file
    cps5 selftest   fast invariant checks

Simulation settings come from an optional INI file (section named after
the subcommand, ``key = value`` lines) and are overridden by flags. The
default seed is taken from ``CPS5_SEED`` when set.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from .ct1 import CT1FormatError, read_ct1, write_ct1
from .experiments import (
    METHODS,
    Sim1Config,
    Sim2Config,
    format_time_table,
    run_simulation,
    write_csv,
    write_summary,
)
from .icacpa import run_backend
from .cps5_eals import AlsOptions
from .selftest import CHECKS, run_selftest
from .tensor_core import relative_residual

logger = logging.getLogger("cps5jd")


class ConfigError(ValueError):
    """Invalid configuration file or flag value."""


class RankError(ValueError):
    """Requested rank cannot be decomposed for the given tensor shape."""


def _float_list(text):
    try:
        return tuple(float(v) for v in str(text).replace(",", " ").split())
    except ValueError:
        raise ConfigError("cannot parse SNR list %r" % text) from None


def _method_list(text):
    methods = tuple(m for m in str(text).replace(",", " ").split() if m)
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError("unknown method %r; choose from %s" % (bad[0], ", ".join(METHODS)))
    return methods


# keys accepted in each config section, with their parsers
_SIM_KEYS = {
    "snr": _float_list,
    "trials": int,
    "seed": int,
    "methods": _method_list,
    "jobs": int,
    "max_iters": int,
    "tol": float,
    "i": int,
    "j": int,
    "k": int,
    "r": int,
    "out": str,
}
_SECTION_KEYS = {
    "sim1": dict(_SIM_KEYS, step=float),
    "sim2": dict(_SIM_KEYS, noise_corr=float),
    "decompose": {"rank": int, "method": str, "seed": int, "max_iters": int,
                  "tol": float, "out": str},
    "selftest": {"seed": int},
}


def load_config(path, section):
    """Parsed ``key = value`` settings of ``section``; unknown keys are errors."""
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from None
    except configparser.Error as exc:
        raise ConfigError("malformed config %s: %s" % (path, exc)) from None
    unknown_sections = [s for s in parser.sections() if s not in _SECTION_KEYS]
    if unknown_sections:
        raise ConfigError("unknown config section [%s]" % unknown_sections[0])
    if not parser.has_section(section):
        return {}
    allowed = _SECTION_KEYS[section]
    out = {}
    for key, raw in parser.items(section):
        if key not in allowed:
            raise ConfigError("unknown key %r in section [%s]" % (key, section))
        try:
            out[key] = allowed[key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError("bad value for %r: %s" % (key, exc)) from None
    return out


def _default_seed():
    raw = os.environ.get("CPS5_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError("CPS5_SEED must be an integer, got %r" % raw) from None


def _merged(args, section):
    """Config-file values overridden by explicitly given flags."""
    settings = load_config(args.config, section) if args.config else {}
    for key in _SECTION_KEYS[section]:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    if "seed" not in settings:
        settings["seed"] = _default_seed()
    return settings


# subcommands ----------------------------------------------------------------

def _cmd_sim(args, name):
    settings = _merged(args, name)
    cfg_cls = Sim1Config if name == "sim1" else Sim2Config
    fields = {f.name for f in dataclasses.fields(cfg_cls)}
    kwargs = {}
    for key, value in settings.items():
        if key == "snr":
            kwargs["snr_grid"] = value
        elif key.upper() in ("I", "J", "K", "R"):
            kwargs[key.upper()] = value
        elif key in fields:
            kwargs[key] = value
    try:
        cfg = cfg_cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    methods = settings.get("methods", METHODS)
    jobs = settings.get("jobs", 1)
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    out = settings.get("out", ".")
    os.makedirs(out, exist_ok=True)

    def progress(batch):
        for r in batch:
            logger.info("%s snr=%g trial=%d pi_a=%.3g pi_b=%.3g t=%.3fs %s",
                        r.method, r.snr_db, r.trial, r.pi_a, r.pi_b, r.time_s, r.status)

    results = run_simulation(cfg, methods, jobs=jobs, progress=progress)
    csv_path = os.path.join(out, "%s_results.csv" % name)
    write_csv(results, csv_path)
    write_summary(results, os.path.join(out, "%s_summary.json" % name), cfg)
    table = format_time_table(results) if results else "(no results)"
    with open(os.path.join(out, "%s_times.txt" % name), "w") as fh:
        fh.write(table + "\n")
    print(table)
    failed = [r for r in results if r.status != "ok"]
    print("%d rows written to %s (%d failed)" % (len(results), csv_path, len(failed)))
    if failed and not args.allow_partial:
        print("error: %d trial(s) failed; rerun with --allow-partial to accept" % len(failed),
              file=sys.stderr)
        return 1
    return 0


def _cmd_decompose(args):
    settings = _merged(args, "decompose")
    if "rank" not in settings:
        raise ConfigError("--rank is required")
    method = settings.get("method", "jd")
    if method not in METHODS:
        raise ConfigError("unknown method %r; choose from %s" % (method, ", ".join(METHODS)))
    T = read_ct1(args.input)
    if T.ndim != 5 or T.shape[0] != T.shape[2] or T.shape[1] != T.shape[3]:
        raise CT1FormatError("expected an (I, J, I, J, K) tensor, got shape %s" % (T.shape,), 8)
    I, J, _, _, K = T.shape
    R = settings["rank"]
    upper = min(I * I, J * J * K) if method != "eals" else None
    if R < 1 or (upper is not None and R > upper):
        raise RankError("rank %d infeasible for shape %s (must be in [1, %s])"
                        % (R, T.shape, upper if upper is not None else "inf"))
    als = AlsOptions(rank=R, max_iters=settings.get("max_iters", 1000),
                     rel_fit_tol=settings.get("tol", 1e-8), seed=settings["seed"])
    factors, report, seconds = run_backend(T, R, method, als_options=als)
    out = settings.get("out", ".")
    os.makedirs(out, exist_ok=True)
    for label, mat in (("A", factors.A), ("B", factors.B), ("D", factors.D)):
        write_ct1(os.path.join(out, "%s.ct1" % label), mat)
    residual = relative_residual(T, factors)
    doc = {"method": method, "rank": R, "shape": list(T.shape), "seconds": seconds,
           "residual": residual, "stages": {k: v.to_dict() for k, v in report.items()}}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
    print("relative residual: %.6e" % residual)
    return 0


def _cmd_selftest(args):
    settings = _merged(args, "selftest")
    start = time.perf_counter()
    results = run_selftest(seed=settings["seed"], inject=args.inject)
    for r in results:
        print("%s  %-15s %s (%.2fs)" % ("PASS" if r.passed else "FAIL", r.name, r.detail,
                                        r.seconds))
    n_fail = sum(not r.passed for r in results)
    print("%d/%d checks passed in %.1fs" % (len(results) - n_fail, len(results),
                                            time.perf_counter() - start))
    return 1 if n_fail else 0


# parser ---------------------------------------------------------------------

def _add_sim_flags(p, default_grid):
    p.add_argument("--snr", type=_float_list, metavar="LIST",
                   help="SNR values in dB, comma separated (default %s)" % default_grid)
    p.add_argument("--trials", type=int, help="trials per SNR point")
    p.add_argument("--methods", type=_method_list, metavar="LIST",
                   help="subset of %s" % ",".join(METHODS))
    p.add_argument("--jobs", type=int, help="worker processes (timing stays single-threaded)")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="ALS iteration cap")
    p.add_argument("--tol", type=float, help="ALS relative-improvement tolerance")
    p.add_argument("--allow-partial", action="store_true",
                   help="exit 0 even if some trials failed")


def build_parser():
    parser = argparse.ArgumentParser(prog="cps5", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a section per subcommand")
    common.add_argument("--seed", type=int, help="base seed (default $CPS5_SEED or 0)")
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("sim1", parents=[common], help="collinear decomposition benchmark")
    _add_sim_flags(p1, "20,30,...,80")
    p1.add_argument("--step", type=float, help="collinearity step (default 0.08)")
    p2 = sub.add_parser("sim2", parents=[common], help="trilinear ICA benchmark")
    _add_sim_flags(p2, "-10,0,...,50")
    p2.add_argument("--noise-corr", dest="noise_corr", type=float,
                    help="adjacent-channel noise correlation (default 0.9)")

    pd = sub.add_parser("decompose", parents=[common], help="decompose a CT1 tensor")
    pd.add_argument("input", help="CT1 file holding an (I, J, I, J, K) tensor")
    pd.add_argument("--rank", type=int)
    pd.add_argument("--method", choices=METHODS)
    pd.add_argument("--max-iters", dest="max_iters", type=int)
    pd.add_argument("--tol", type=float)

    ps = sub.add_parser("selftest", parents=[common], help="fast invariant checks")
    ps.add_argument("--inject", choices=sorted(CHECKS),
                    help="perturb the named check to demonstrate failure reporting")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.verbose == 0:
        warnings.simplefilter("ignore")
    np.seterr(all="ignore")
    handlers = {
        "sim1": lambda: _cmd_sim(args, "sim1"),
        "sim2": lambda: _cmd_sim(args, "sim2"),
        "decompose": lambda: _cmd_decompose(args),
        "selftest": lambda: _cmd_selftest(args),
    }
    try:
        return handlers[args.command]()
    except (ConfigError, RankError, CT1FormatError) as exc:
        print("error: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 2
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
