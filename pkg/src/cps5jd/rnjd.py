"""Real non-orthogonal joint diagonalization by congruence.

Given real symmetric targets ``G_k = F diag(l_k) F^T`` find ``W = F^{-1}``
(up to row scaling and permutation) by minimising

    sum_k || off(W G_k W^T) ||_F^2

with sweeps of elementary unit-triangular updates ``w_i <- w_i + a w_j``.
Each update touches only row/column ``i`` of the transformed targets, so the
criterion is a quadratic in ``a`` and the exact minimiser is closed form.
Lower-triangular (``i > j``) and upper-triangular (``i < j``) passes
alternate inside a sweep and rows of ``W`` are renormalised after each
sweep.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RnjdDivergenceError",
    "JdProblem",
    "JdSolution",
    "offdiag_criterion",
    "rnjd_solve",
]


class RnjdDivergenceError(RuntimeError):
    """The off-diagonal criterion blew up across a sweep."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class JdProblem:
    targets: np.ndarray
    max_sweeps: int = 200
    tol: float = 1e-12

    def __post_init__(self):
        G = np.asarray(self.targets, dtype=float)
        if G.ndim == 2:
            G = G[None]
        if G.ndim != 3 or G.shape[1] != G.shape[2] or G.shape[0] == 0:
            raise ValueError("targets must be a non-empty stack of square matrices")
        self.targets = 0.5 * (G + G.transpose(0, 2, 1))


@dataclass
class JdSolution:
    F: np.ndarray
    diags: np.ndarray
    offdiag_final: float
    sweeps: int
    history: list = field(default_factory=list)
    converged: bool = True

    @property
    def W(self):
        return np.linalg.inv(self.F)


_FLOOR = 1e-30
_STALL = 1e-6


def _off2(C):
    off = C.copy()
    np.einsum("kii->ki", off)[...] = 0.0
    return float(np.sum(off * off))


def offdiag_criterion(W, targets):
    """``sum_k ||off(W G_k W^T)||_F^2`` for candidate inverse factor ``W``."""
    W = np.asarray(W, dtype=float)
    G = np.asarray(targets, dtype=float)
    if G.ndim == 2:
        G = G[None]
    return _off2(W @ G @ W.T)


def _whitener(G):
    k = int(np.argmax(np.linalg.norm(G, axis=(1, 2))))
    w, Q = np.linalg.eigh(G[k])
    aw = np.abs(w)
    if aw.max() == 0 or aw.min() < 1e-12 * aw.max():
        return np.eye(G.shape[1])
    return Q.T / np.sqrt(aw)[:, None]


def _normalize_rows(W, C):
    s = 1.0 / np.linalg.norm(W, axis=1)
    return W * s[:, None], C * s[None, :, None] * s[None, None, :]


def _sweep(W, C, pairs):
    R = W.shape[0]
    mask = np.ones(R, dtype=bool)
    for i, j in pairs:
        mask[i] = False
        ci = C[:, i, mask]
        cj = C[:, j, mask]
        mask[i] = True
        den = np.sum(cj * cj)
        if den <= 0:
            continue
        a = -np.sum(ci * cj) / den
        if a == 0:
            continue
        W[i] += a * W[j]
        C[:, i, :] += a * C[:, j, :]
        C[:, :, i] += a * C[:, :, j]
    return W, C


def rnjd_solve(problem, init=None):
    """Joint diagonalizer ``F`` (targets ``~ F diag F^T``) of real symmetric targets.

    Parameters
    ----------
    problem : JdProblem
    init : ndarray, shape (R, R), optional
        Starting inverse factor ``W``. Defaults to whitening by the target
        of largest Frobenius norm (identity if that target is singular).

    Returns
    -------
    JdSolution
        ``F = W^{-1}`` with rows of ``W`` of unit norm and columns of ``F``
        sorted by descending norm. ``offdiag_final`` is the criterion of
        that ``W`` relative to ``sum_k ||G_k||^2``.
    """
    G = problem.targets
    R = G.shape[1]
    scale = float(np.sum(G**2))
    if scale == 0:
        F = np.eye(R)
        return JdSolution(F, np.zeros((G.shape[0], R)), 0.0, 0, [0.0])

    W = (_whitener(G) if init is None else np.array(init, dtype=float))
    C = W @ G @ W.T
    W, C = _normalize_rows(W, C)

    lower = [(i, j) for i in range(R) for j in range(i)]
    upper = [(i, j) for i in range(R) for j in range(i + 1, R)]
    crit = _off2(C) / scale
    history = [crit]
    sweeps = 0
    # Sweeps continue past ``tol`` until progress stalls: the criterion is
    # quadratic in the factor error, so tol=1e-12 alone leaves ~1e-6 error.
    while sweeps < problem.max_sweeps and crit > _FLOOR and R > 1:
        W, C = _sweep(W, C, lower)
        W, C = _sweep(W, C, upper)
        W, C = _normalize_rows(W, C)
        sweeps += 1
        new = _off2(C) / scale
        history.append(new)
        if not np.isfinite(new) or new > 1e3 * max(crit, np.finfo(float).tiny):
            raise RnjdDivergenceError(
                "joint diagonalization diverged at sweep %d (%.3g -> %.3g)"
                % (sweeps, crit, new),
                history,
            )
        stalled = 0 <= crit - new <= _STALL * crit
        crit = new
        if stalled:
            break

    # recompute from scratch to shed accumulated update error
    C = W @ G @ W.T
    crit = _off2(C) / scale
    F = np.linalg.inv(W)
    order = np.argsort(-np.linalg.norm(F, axis=0), kind="stable")
    F = F[:, order]
    diags = np.einsum("kii->ki", C)[:, order]
    return JdSolution(F, diags, crit, sweeps, history, crit <= problem.tol)
