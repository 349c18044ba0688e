"""Alternating least squares with enhanced line search (CPS5-EALS).

Three free blocks ``(A, B, D)``; modes 3 and 4 are always the conjugates of
modes 1 and 2, so the iterates stay in the partially symmetric model class.
``A`` is refit from the mode-1 unfolding and the conjugated mode-3
unfolding stacked together (likewise ``B`` from modes 2 and 4); ``D`` is a
real least-squares fit on mode 5.

Along a search direction the model is degree 5 in a real step ``rho``, so
the squared residual is a degree-10 polynomial. It is recovered exactly by
interpolation at 11 Chebyshev points and minimised globally.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive, check_rank, check_tensor5
from .tensor_core import FactorSet, khatri_rao, relative_residual, synthesize_cp5

__all__ = [
    "AlsOptions",
    "AlsTrace",
    "als_sweep",
    "els_step",
    "random_factors",
    "cps5_eals",
    "CPS5EALS",
]

ELS_DEGREE = 10
ELS_INTERVAL = (-2.0, 3.0)
_RESIDUAL_FLOOR = 1e-14


@dataclass
class AlsOptions:
    rank: int
    max_iters: int = 1000
    rel_fit_tol: float = 1e-8
    els_enabled: bool = True
    init: object = "random"
    seed: object = None

    def __post_init__(self):
        check_rank(self.rank, name="rank")
        check_positive(self.rel_fit_tol, "rel_fit_tol")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class AlsTrace:
    residuals: list = field(default_factory=list)
    rhos: list = field(default_factory=list)
    iterations: int = 0
    wall_time: float = 0.0
    converged: bool = False
    guarded_sweeps: int = 0
    els_accepted: int = 0

    def to_dict(self):
        return {
            "residuals": [float(r) for r in self.residuals],
            "rhos": [float(r) for r in self.rhos],
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "converged": self.converged,
            "guarded_sweeps": self.guarded_sweeps,
            "els_accepted": self.els_accepted,
        }


def _unfold(T, mode):
    return np.moveaxis(T, mode, 0).reshape(T.shape[mode], -1)


def _solve(Z, Y):
    """Least-squares ``X`` with ``Y ~= X @ Z.T``."""
    G = Z.conj().T @ Z
    if np.linalg.cond(G) < 1e10:
        return np.linalg.solve(G, Z.conj().T @ Y.T).T
    sol, _, rank, _ = np.linalg.lstsq(Z, Y.T, rcond=None)
    if rank < Z.shape[1]:
        warnings.warn(
            "rank-deficient ALS coefficient matrix (rank %d < %d)" % (rank, Z.shape[1]),
            RuntimeWarning,
            stacklevel=3,
        )
    return sol.T


def als_sweep(T, factors, return_d_imag=False):
    """One pass of conditional least-squares updates ``A -> B -> D``."""
    A, B, D = factors.A, factors.B, factors.D
    Ac = A.conj()
    # modes 1 and 3 (conjugated) both carry A
    Z1 = khatri_rao(B, Ac, B.conj(), D)
    Z3 = khatri_rao(A, B, B.conj(), D)
    Y = np.concatenate([_unfold(T, 0), _unfold(T, 2).conj()], axis=1)
    A = _solve(np.concatenate([Z1, Z3.conj()], axis=0), Y)
    Ac = A.conj()
    Z2 = khatri_rao(A, Ac, B.conj(), D)
    Z4 = khatri_rao(A, B, Ac, D)
    Y = np.concatenate([_unfold(T, 1), _unfold(T, 3).conj()], axis=1)
    B = _solve(np.concatenate([Z2, Z4.conj()], axis=0), Y)
    Z5 = khatri_rao(A, B, Ac, B.conj())
    Dc = _solve(Z5, _unfold(T, 4))
    nrm = np.linalg.norm(Dc)
    d_imag = 0.0 if nrm == 0 else float(np.linalg.norm(Dc.imag) / nrm)
    out = FactorSet(A, B, Dc.real.copy())
    if return_d_imag:
        return out, d_imag
    return out


def _step(factors, direction, rho):
    dA, dB, dD = direction
    return FactorSet(factors.A + rho * dA, factors.B + rho * dB, factors.D + rho * dD)


def _sq_residual(T, factors):
    diff = T - synthesize_cp5(factors)
    return float(np.vdot(diff, diff).real)


def _line_sq_residuals(T, factors, direction, rhos):
    """Squared residuals at several points on a line, evaluated in one batch."""
    dA, dB, dD = direction
    rhos = np.asarray(rhos, dtype=float)[:, None, None]
    A = factors.A[None] + rhos * dA[None]
    B = factors.B[None] + rhos * dB[None]
    D = factors.D[None] + rhos * dD[None]
    n, I, R = A.shape
    J = B.shape[1]
    AB = (A[:, :, None, :] * B[:, None, :, :]).reshape(n, I * J, R)
    Z = (AB[:, :, None, :] * AB.conj()[:, None, :, :]).reshape(n, -1, R)
    model = Z @ D.transpose(0, 2, 1)
    diff = T.reshape(1, -1, T.shape[-1]) - model
    return np.einsum("pij,pij->p", diff.conj(), diff).real


def els_polynomial(T, factors, direction):
    """Exact squared residual along ``factors + rho * direction`` as a Chebyshev series."""
    lo, hi = ELS_INTERVAL
    nodes = Chebyshev.basis(ELS_DEGREE + 1, domain=[lo, hi]).roots()
    values = _line_sq_residuals(T, factors, direction, nodes)
    if not np.all(np.isfinite(values)):
        return None
    return Chebyshev.fit(nodes, values, ELS_DEGREE, domain=[lo, hi])


def els_step(T, factors, direction):
    """Globally optimal real step along ``direction``; 1.0 when nothing beats it.

    ``direction`` is ``(dA, dB, dD)``.
    """
    dA, dB, dD = direction
    if not (np.any(dA) or np.any(dB) or np.any(dD)):
        return 1.0
    poly = els_polynomial(T, factors, direction)
    if poly is None:
        return 1.0
    crit = poly.deriv().roots()
    cands = [r.real for r in crit if abs(r.imag) <= 1e-8 * max(1.0, abs(r))]
    cands += list(ELS_INTERVAL) + [1.0]
    cands = np.array(cands)
    vals = poly(cands)
    best = float(cands[int(np.argmin(vals))])
    # confirm against the direct residual; the fit is poorer far outside the probes
    at_best, at_one = _line_sq_residuals(T, factors, direction, [best, 1.0])
    return best if at_best < at_one else 1.0


def _diff(new, old):
    return (new.A - old.A, new.B - old.B, new.D - old.D)


def _balance(factors):
    # unit-norm, phase-fixed A/B; the generated tensor is unchanged
    return factors.normalized()


def random_factors(shape, rank, random_state=None):
    """Standard complex normal ``A``, ``B``; standard real normal ``D``."""
    I, J, _, _, K = shape
    rng = check_random_state(random_state)

    def cn(*s):
        return rng.standard_normal(s) + 1j * rng.standard_normal(s)

    return FactorSet(cn(I, rank), cn(J, rank), rng.standard_normal((K, rank)))


def cps5_eals(T, rank=None, options=None):
    """Fit the partially symmetric model by ALS accelerated with ELS.

    Each iteration first tries an ELS extrapolation along the previous
    update (kept only if it lowers the residual), then runs one ALS sweep.
    A sweep that would raise the residual is replaced by the best point on
    the line through it, so the recorded residuals never increase.

    Returns
    -------
    factors : FactorSet
        Normalized as in :meth:`FactorSet.normalized`.
    trace : AlsTrace
    """
    if options is None:
        if rank is None:
            raise ValueError("rank is required")
        options = AlsOptions(rank=rank)
    T = check_tensor5(T)
    R = options.rank
    start = time.perf_counter()
    if isinstance(options.init, FactorSet):
        factors = options.init
        if factors.shape != T.shape or factors.rank != R:
            raise ValueError("initial factors do not match tensor shape / rank")
    elif options.init == "random":
        factors = random_factors(T.shape, R, options.seed)
    else:
        raise ValueError("init must be 'random' or a FactorSet, got %r" % (options.init,))
    factors = _balance(factors)

    tnorm2 = float(np.vdot(T, T).real)
    scale = tnorm2 if tnorm2 > 0 else 1.0
    r2 = _sq_residual(T, factors)
    trace = AlsTrace(residuals=[np.sqrt(r2 / scale)])
    direction = None
    for it in range(options.max_iters):
        r2_start = r2
        prev = factors
        rho = 1.0
        if options.els_enabled and direction is not None:
            rho = els_step(T, factors, direction)
            cand = _balance(_step(factors, direction, rho))
            c2 = _sq_residual(T, cand)
            if c2 < r2:
                factors, r2 = cand, c2
                trace.els_accepted += 1
            else:
                rho = 0.0
        base = factors
        new = _balance(als_sweep(T, base))
        n2 = _sq_residual(T, new)
        if not n2 <= r2:
            trace.guarded_sweeps += 1
            d = _diff(new, base)
            poly = els_polynomial(T, base, d)
            best = None
            if poly is not None:
                crit = poly.deriv().roots()
                cands = [c.real for c in crit if abs(c.imag) <= 1e-8 * max(1.0, abs(c))]
                for c in cands:
                    cand = _balance(_step(base, d, c))
                    c2 = _sq_residual(T, cand)
                    if c2 < r2 and (best is None or c2 < best[1]):
                        best = (cand, c2)
            new, n2 = best if best is not None else (base, r2)
        direction = _diff(new, prev)
        factors, r2 = new, n2
        trace.residuals.append(np.sqrt(r2 / scale))
        trace.rhos.append(rho)
        trace.iterations = it + 1
        if np.sqrt(r2 / scale) < _RESIDUAL_FLOOR or r2_start - r2 <= options.rel_fit_tol * r2_start:
            trace.converged = True
            break
    trace.wall_time = time.perf_counter() - start
    return factors.normalized(), trace


class CPS5EALS(BaseEstimator):
    """ALS + enhanced line search for the partially symmetric fifth-order CPD.

    Parameters
    ----------
    n_components : int
    max_iter : int, default=1000
    tol : float, default=1e-8
        Stop when an iteration lowers the squared residual by less than
        this fraction.
    els : bool, default=True
    init : {'random', 'jd'} or FactorSet, default='random'
        ``'jd'`` starts from :func:`~cps5jd.cps5_jd.cps5_jd` (CPS5-EALS-JD).
    random_state : int, RandomState or None

    Attributes
    ----------
    factors_ : FactorSet
    trace_ : AlsTrace
    init_report_ : Cps5Report or None
        Report of the JD initialization when ``init='jd'``.
    n_iter_ : int
    """

    def __init__(self, n_components=2, *, max_iter=1000, tol=1e-8, els=True,
                 init="random", random_state=None):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.els = els
        self.init = init
        self.random_state = random_state

    def fit(self, X, y=None):
        from .cps5_jd import cps5_jd

        T = check_tensor5(X)
        init = self.init
        self.init_report_ = None
        if isinstance(init, str) and init == "jd":
            init, self.init_report_ = cps5_jd(T, self.n_components)
        opts = AlsOptions(
            rank=self.n_components,
            max_iters=self.max_iter,
            rel_fit_tol=self.tol,
            els_enabled=self.els,
            init=init,
            seed=self.random_state,
        )
        self.factors_, self.trace_ = cps5_eals(T, options=opts)
        self.n_iter_ = self.trace_.iterations
        self.reconstruction_error_ = self.trace_.residuals[-1]
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).factors_

    def inverse_transform(self, factors=None):
        check_is_fitted(self, "factors_")
        return (self.factors_ if factors is None else factors).to_tensor()

    def score(self, X, y=None):
        check_is_fitted(self, "factors_")
        return -relative_residual(check_tensor5(X), self.factors_)
