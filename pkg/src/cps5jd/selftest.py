"""Fast invariant checks run by ``cps5 selftest``.

Each check compares a library result against an independent oracle and
returns a :class:`CheckResult`. ``inject`` names a check whose computed
value is perturbed before comparison, to show that a failure is caught
and reported under the right name.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cps5_jd import cps5_jd
from .ct1 import dumps_ct1, loads_ct1
from .cumulants import sample_quadricov
from .detectors import phi1, phi2
from .experiments import pi_of_estimate
from .rnjd import JdProblem, rnjd_solve
from .tensor_core import FactorSet, khatri_rao, synthesize_cp5

__all__ = ["CheckResult", "CHECKS", "run_selftest"]

_PERTURB = 1e-3


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _cn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def brute_force_cumulant(X):
    """Loop evaluation of ``cum(x_i, x_j*, x_k*, x_l)`` from sample moments."""
    n, T = X.shape
    C = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    xi, xj, xk, xl = X[i], X[j].conj(), X[k].conj(), X[l]
                    C[i * n + j, k * n + l] = (
                        np.sum(xi * xj * xk * xl) / T
                        - np.sum(xi * xj) * np.sum(xk * xl) / T**2
                        - np.sum(xi * xk) * np.sum(xj * xl) / T**2
                        - np.sum(xi * xl) * np.sum(xj * xk) / T**2
                    )
    return C


def _check_khatri_rao(rng, bump):
    A, B = _cn(rng, 3, 2), _cn(rng, 4, 2)
    got = khatri_rao(A, B) + bump
    ref = np.array([[A[i, r] * B[j, r] for r in range(2)] for i in range(3) for j in range(4)])
    err = np.max(np.abs(got - ref))
    return err < 1e-14, "max abs error %.2e" % err


def _check_cumulant(rng, bump):
    X = _cn(rng, 3, 40)
    err = np.max(np.abs(sample_quadricov(X).C + bump - brute_force_cumulant(X)))
    return err < 1e-12, "max abs error vs loop %.2e" % err


def _check_detector_rank1(rng, bump):
    worst = 0.0
    for _ in range(20):
        X = np.outer(_cn(rng, 4), _cn(rng, 5))
        worst = max(worst, np.linalg.norm(phi1(X, X)) / np.linalg.norm(X) ** 2)
        Y = np.einsum("j,k,m->jkm", _cn(rng, 3), _cn(rng, 3), _cn(rng, 2))
        worst = max(worst, np.linalg.norm(phi2(Y, Y)) / np.linalg.norm(Y) ** 2)
    worst += abs(bump)
    return worst < 1e-13, "largest relative norm on rank-1 inputs %.2e" % worst


def _check_detector_rank2(rng, bump):
    best = np.inf
    for _ in range(20):
        X = _cn(rng, 4, 2) @ _cn(rng, 2, 5)
        X /= np.linalg.norm(X)
        best = min(best, np.linalg.norm(phi1(X, X)))
    best -= abs(bump) * 1e3
    return best > 1e-3, "smallest norm on rank-2 inputs %.2e" % best


def _check_rnjd(rng, bump):
    F0 = rng.standard_normal((5, 5))
    G = np.stack([F0 @ np.diag(rng.standard_normal(5)) @ F0.T for _ in range(20)])
    sol = rnjd_solve(JdProblem(G))
    P = np.abs(np.linalg.solve(sol.F, F0)) + abs(bump)
    P /= P.max(axis=1, keepdims=True)
    off = np.sum(P) - P.shape[0]
    return off < 1e-6 and sol.offdiag_final < 1e-12, "off-pattern mass %.2e" % off


def _check_jd_noiseless(rng, bump):
    truth = FactorSet(_cn(rng, 6, 5), _cn(rng, 6, 5), rng.standard_normal((6, 5)))
    est, report = cps5_jd(synthesize_cp5(truth), 5)
    pa = pi_of_estimate(est.A + bump, truth.A)
    pb = pi_of_estimate(est.B, truth.B)
    ok = pa < 1e-8 and pb < 1e-8 and report.residual < 1e-10
    return ok, "PI(A) %.2e, PI(B) %.2e, residual %.2e" % (pa, pb, report.residual)


def _check_ct1(rng, bump):
    T = _cn(rng, 2, 3, 2, 3, 2)
    back = loads_ct1(dumps_ct1(T)) + bump
    return bool(np.array_equal(back, T)), "round trip of a %s tensor" % (T.shape,)


CHECKS = {
    "khatri_rao": _check_khatri_rao,
    "cumulant": _check_cumulant,
    "detector_rank1": _check_detector_rank1,
    "detector_rank2": _check_detector_rank2,
    "rnjd": _check_rnjd,
    "jd_noiseless": _check_jd_noiseless,
    "ct1": _check_ct1,
}


def run_selftest(seed=0, inject=None):
    """Run every check; ``inject`` perturbs the named one."""
    if inject is not None and inject not in CHECKS:
        raise ValueError("unknown check %r; choose from %s" % (inject, sorted(CHECKS)))
    results = []
    for name, fn in CHECKS.items():
        rng = np.random.default_rng([seed, len(results)])
        bump = _PERTURB if name == inject else 0.0
        start = time.perf_counter()
        try:
            ok, detail = fn(rng, bump)
        except Exception as exc:  # a crash is a failed check, not an abort
            ok, detail = False, "%s: %s" % (type(exc).__name__, exc)
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - start))
    return results
