"""Synthetic experiments: data generators, the Amari index and a Monte-Carlo runner.

Two setups are provided. ``sim1`` decomposes a noisy partially symmetric
tensor built from collinear loadings; ``sim2`` separates random-phase
sources from a trilinear mixture in spatially coloured Gaussian noise.
Every trial draws its data from a seed derived from the base seed, the
SNR and the trial index, so runs are reproducible and trials independent.
"""
from __future__ import annotations

import csv
import json
import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .cps5_eals import AlsOptions, cps5_eals
from .cps5_jd import cps5_jd
from .icacpa import build_target
from .linalg import pseudo_inverse
from .tensor_core import FactorSet, khatri_rao, synthesize_cp5

__all__ = [
    "METHODS",
    "Sim1Config",
    "Sim2Config",
    "TrialResult",
    "gen_collinear_matrix",
    "gen_sim1",
    "gen_sim2",
    "toeplitz_noise_factor",
    "amari_pi",
    "pi_of_estimate",
    "trial_seed",
    "run_simulation",
    "write_csv",
    "read_csv",
    "summarize",
    "write_summary",
    "format_time_table",
]

logger = logging.getLogger(__name__)

METHODS = ("jd", "eals", "eals_jd")
CSV_HEADER = ["method", "snr_db", "trial", "seed", "pi_a", "pi_b", "time_s", "status"]


@dataclass
class Sim1Config:
    """Collinear fifth-order decomposition benchmark."""

    I: int = 6
    J: int = 6
    K: int = 6
    R: int = 5
    step: float = 0.08
    snr_grid: tuple = (20, 30, 40, 50, 60, 70, 80)
    trials: int = 200
    seed: int = 0
    max_iters: int = 1000
    tol: float = 1e-8

    def __post_init__(self):
        _check_common(self)
        if not self.step >= 0:
            raise ValueError("step must be non-negative")


@dataclass
class Sim2Config:
    """Trilinear mixture separation benchmark."""

    I: int = 6
    J: int = 5
    K: int = 1000
    R: int = 3
    noise_corr: float = 0.9
    snr_grid: tuple = (-10, 0, 10, 20, 30, 40, 50)
    trials: int = 200
    seed: int = 0
    max_iters: int = 1000
    tol: float = 1e-8

    def __post_init__(self):
        _check_common(self)
        if self.R > self.I * self.J:
            raise ValueError("R=%d exceeds I*J=%d" % (self.R, self.I * self.J))
        if not -1 < self.noise_corr < 1:
            raise ValueError("noise_corr must lie in (-1, 1)")


def _check_common(cfg):
    for name in ("I", "J", "K", "R", "max_iters"):
        value = getattr(cfg, name)
        if int(value) != value or value < 1:
            raise ValueError("%s must be a positive integer, got %r" % (name, value))
    if int(cfg.trials) != cfg.trials or cfg.trials < 0:
        raise ValueError("trials must be a non-negative integer")
    cfg.snr_grid = tuple(float(s) for s in cfg.snr_grid)
    if not all(np.isfinite(s) for s in cfg.snr_grid):
        raise ValueError("snr values must be finite")


@dataclass
class TrialResult:
    method: str
    snr_db: float
    trial: int
    seed: int
    pi_a: float
    pi_b: float
    time_s: float
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)

    def key(self):
        return (self.method, self.snr_db, self.trial)


# generators -----------------------------------------------------------------

def _complex_normal(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def gen_collinear_matrix(I, R, step, rng):
    """Columns ``a_1 = v_1`` and ``a_j = a_{j-1} + step * v_j``.

    The ``v_j`` have standard normal real and imaginary parts.
    """
    rng = np.random.default_rng(rng)
    V = _complex_normal(rng, (I, R))
    return np.cumsum(V * np.r_[1.0, np.full(R - 1, step)][None, :], axis=1)


def gen_sim1(cfg, snr_db, seed):
    """Noisy collinear tensor ``T/||T|| + sigma N/||N||``, ``sigma = 10**(-snr/10)``.

    Returns
    -------
    T_noisy : ndarray, shape (I, J, I, J, K)
    truth : FactorSet
    """
    rng = np.random.default_rng(seed)
    A = gen_collinear_matrix(cfg.I, cfg.R, cfg.step, rng)
    B = gen_collinear_matrix(cfg.J, cfg.R, cfg.step, rng)
    D = rng.standard_normal((cfg.K, cfg.R))
    truth = FactorSet(A, B, D)
    T = synthesize_cp5(truth)
    T = T / np.linalg.norm(T)
    if np.isinf(snr_db):
        return T, truth
    N = _complex_normal(rng, T.shape)
    sigma = 10.0 ** (-snr_db / 10.0)
    return T + sigma * N / np.linalg.norm(N), truth


def toeplitz_noise_factor(n, rho):
    """Cholesky factor of the ``n x n`` covariance ``rho**|p - q|``."""
    idx = np.arange(n)
    return np.linalg.cholesky(rho ** np.abs(idx[:, None] - idx[None, :]))


def gen_sim2(cfg, snr_db, seed):
    """Random-phase sources mixed by ``A (.) B`` plus coloured noise.

    The noise is complex Gaussian, white in time, with covariance
    ``noise_corr**|p - q|`` across the ``I*J`` channels, scaled so that
    ``10 log10(signal power / noise power)`` equals ``snr_db`` exactly on
    the generated sample.

    Returns
    -------
    X3 : ndarray, shape (I, J, K)
    A, B : ndarray
    S : ndarray, shape (K, R)
    """
    rng = np.random.default_rng(seed)
    A = _complex_normal(rng, (cfg.I, cfg.R))
    B = _complex_normal(rng, (cfg.J, cfg.R))
    S = np.exp(2j * np.pi * rng.random((cfg.K, cfg.R)))
    X = khatri_rao(A, B) @ S.T
    if not np.isinf(snr_db):
        L = toeplitz_noise_factor(cfg.I * cfg.J, cfg.noise_corr)
        N = L @ _complex_normal(rng, X.shape)
        p_s = np.mean(np.abs(X) ** 2)
        p_n = np.mean(np.abs(N) ** 2)
        X = X + N * np.sqrt(p_s / (p_n * 10.0 ** (snr_db / 10.0)))
    return X.reshape(cfg.I, cfg.J, cfg.K), A, B, S


# metrics --------------------------------------------------------------------

def amari_pi(P):
    """Amari performance index of a square matrix; 0 iff ``P`` is a scaled permutation.

    ``[sum_i (sum_j |p_ij| / max_k |p_ik| - 1) + sum_j (sum_i |p_ij| / max_k |p_kj| - 1)] / (2R(R-1))``
    """
    P = np.abs(np.asarray(P))
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square, got shape %s" % (P.shape,))
    R = P.shape[0]
    if R < 2:
        raise ValueError("the index needs R >= 2, got %d" % R)
    row_max = P.max(axis=1)
    col_max = P.max(axis=0)
    if np.any(row_max == 0) or np.any(col_max == 0):
        raise ValueError("P has an all-zero row or column")
    rows = np.sum(P / row_max[:, None]) - R
    cols = np.sum(P / col_max[None, :]) - R
    return float((rows + cols) / (2 * R * (R - 1)))


def pi_of_estimate(est, truth):
    """``amari_pi(pinv(est) @ truth)``."""
    est = np.asarray(est)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise ValueError("shape mismatch: %s vs %s" % (est.shape, truth.shape))
    return amari_pi(pseudo_inverse(est) @ truth)


# runner ---------------------------------------------------------------------

def trial_seed(base_seed, snr_db, trial):
    """Per-trial seed: ``base_seed`` XOR a CRC32 of ``"<snr>:<trial>"``."""
    tag = ("%g:%d" % (float(snr_db), int(trial))).encode()
    return (int(base_seed) ^ zlib.crc32(tag)) & 0xFFFFFFFF


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def _run_methods(T5, R, methods, cfg, als_seed):
    """Run the requested backends on one tensor.

    ``eals_jd`` reuses the ``jd`` result when both are requested; its time
    is the JD time plus the ALS time. Returns ``{method: (factors, seconds,
    diagnostics)}`` with exceptions in place of failed methods.
    """
    out = {}
    jd = None
    if "jd" in methods or "eals_jd" in methods:
        try:
            (factors, report), t_jd = _timed(cps5_jd, T5, R)
            jd = (factors, t_jd, {"jd_residual": report.residual})
        except Exception as exc:  # recorded, not raised
            jd = exc
        if "jd" in methods:
            out["jd"] = jd
    for method in ("eals", "eals_jd"):
        if method not in methods:
            continue
        if method == "eals_jd" and isinstance(jd, Exception):
            out[method] = jd
            continue
        init = "random" if method == "eals" else jd[0]
        opts = AlsOptions(rank=R, max_iters=cfg.max_iters, rel_fit_tol=cfg.tol,
                          init=init, seed=als_seed)
        try:
            (factors, trace), t = _timed(cps5_eals, T5, options=opts)
        except Exception as exc:
            out[method] = exc
            continue
        diag = {"iterations": trace.iterations, "converged": trace.converged,
                "residual": trace.residuals[-1]}
        if method == "eals_jd":
            t += jd[1]
        out[method] = (factors, t, diag)
    return out


def _one_trial(args):
    cfg, methods, snr, trial = args
    seed = trial_seed(cfg.seed, snr, trial)
    results = []
    with threadpool_limits(limits=1):
        try:
            if isinstance(cfg, Sim1Config):
                T5, truth = gen_sim1(cfg, snr, seed)
                A0, B0, front = truth.A, truth.B, 0.0
            else:
                X3, A0, B0, _ = gen_sim2(cfg, snr, seed)
                (T5, _), front = _timed(build_target, X3, cfg.R)
            ran = _run_methods(T5, cfg.R, methods, cfg, seed)
        except Exception as exc:
            ran = {m: exc for m in methods}
            front = 0.0
    for method in methods:
        res = ran[method]
        if isinstance(res, Exception):
            logger.warning("trial %s/%g/%d failed: %s", method, snr, trial, res)
            results.append(TrialResult(method, snr, trial, seed, np.nan, np.nan, np.nan,
                                       "failed: %s" % type(res).__name__))
            continue
        factors, t, diag = res
        results.append(TrialResult(
            method, snr, trial, seed,
            pi_of_estimate(factors.A, A0), pi_of_estimate(factors.B, B0),
            t + front, "ok", diag,
        ))
    return results


def run_simulation(cfg, methods=METHODS, jobs=1, progress=None):
    """Monte-Carlo runner over ``cfg.snr_grid`` x ``cfg.trials``.

    Every method sees the same data in a given trial. Methods run with
    BLAS limited to one thread, whatever ``jobs`` is. For ``sim2`` the
    cumulant front end is timed once per trial and added to every method.

    Parameters
    ----------
    cfg : Sim1Config or Sim2Config
    methods : iterable of {'jd', 'eals', 'eals_jd'}
    jobs : int
        Worker processes for independent trials.
    progress : callable, optional
        Called with each trial's list of results as it completes.

    Returns
    -------
    list of TrialResult
        Sorted by (method, snr, trial). Failed trials carry NaN metrics
        and a ``failed: ...`` status.
    """
    methods = tuple(dict.fromkeys(methods))
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError("unknown method(s) %s; choose from %s" % (unknown, METHODS))
    if not methods:
        return []
    tasks = [(cfg, methods, snr, t) for snr in cfg.snr_grid for t in range(cfg.trials)]
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for batch in pool.map(_one_trial, tasks):
                results.extend(batch)
                if progress:
                    progress(batch)
    else:
        for task in tasks:
            batch = _one_trial(task)
            results.extend(batch)
            if progress:
                progress(batch)
    return sorted(results, key=lambda r: (METHODS.index(r.method), r.snr_db, r.trial))


# serialization --------------------------------------------------------------

def _fmt(x):
    return "nan" if not np.isfinite(x) else repr(float(x))


def write_csv(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in results:
            w.writerow([r.method, "%g" % r.snr_db, r.trial, r.seed,
                        _fmt(r.pi_a), _fmt(r.pi_b), _fmt(r.time_s), r.status])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        TrialResult(row["method"], float(row["snr_db"]), int(row["trial"]), int(row["seed"]),
                    float(row["pi_a"]), float(row["pi_b"]), float(row["time_s"]), row["status"])
        for row in rows
    ]


def _stats(values):
    v = np.asarray([x for x in values if np.isfinite(x)])
    if v.size == 0:
        return {"median": None, "q1": None, "q3": None, "mean": None}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3), "mean": float(v.mean())}


def summarize(results):
    """Median and quartiles of PI and time per (method, snr)."""
    groups = {}
    for r in results:
        groups.setdefault((r.method, r.snr_db), []).append(r)
    out = []
    for (method, snr), rows in sorted(groups.items(),
                                      key=lambda kv: (METHODS.index(kv[0][0]), kv[0][1])):
        ok = [r for r in rows if r.status == "ok"]
        out.append({
            "method": method,
            "snr_db": snr,
            "trials": len(rows),
            "failed": len(rows) - len(ok),
            "pi_a": _stats([r.pi_a for r in ok]),
            "pi_b": _stats([r.pi_b for r in ok]),
            "time_s": _stats([r.time_s for r in ok]),
        })
    return out


def write_summary(results, path, config=None):
    doc = {"summary": summarize(results)}
    if config is not None:
        doc["config"] = asdict(config)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


_LABELS = {"jd": "CPS5-JD", "eals": "CPS5-EALS", "eals_jd": "CPS5-EALS-JD"}


def format_time_table(results):
    """Mean running time in seconds, methods by rows and SNR by columns."""
    summary = summarize(results)
    snrs = sorted({s["snr_db"] for s in summary})
    methods = [m for m in METHODS if any(s["method"] == m for s in summary)]
    cell = {(s["method"], s["snr_db"]): s["time_s"]["mean"] for s in summary}
    head = "%-14s" % "SNR (dB)" + "".join("%9g" % s for s in snrs)
    lines = [head, "-" * len(head)]
    for m in methods:
        vals = [cell.get((m, s)) for s in snrs]
        lines.append("%-14s" % _LABELS[m]
                     + "".join("%9s" % ("-" if v is None else "%.4f" % v) for v in vals))
    return "\n".join(lines)
