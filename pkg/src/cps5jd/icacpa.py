"""Blind separation of trilinear mixtures through the fifth-order CPD.

Observations ``X[i, j, t] = sum_r a_r[i] b_r[j] s_r[t] + noise`` are unfolded
to ``(I*J, K)``; the dominant eigenmatrices of their quadricovariance are
stacked into a partially symmetric ``(I, J, I, J, R)`` tensor whose CPD
returns ``A`` and ``B``. Sources follow from the pseudo-inverse of the
Khatri-Rao mixing matrix.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from ._validation import check_rank, check_tensor
from .cps5_eals import AlsOptions, cps5_eals
from .cps5_jd import Cps5JdOptions, cps5_jd
from .cumulants import assemble_t5, dominant_eigenmatrices, sample_quadricov
from .linalg import pseudo_inverse
from .tensor_core import khatri_rao, matricize3

__all__ = ["BACKENDS", "IcaCpaResult", "ica_cpa", "recover_sources", "ICACPA"]

BACKENDS = ("jd", "eals", "eals_jd")


@dataclass
class IcaCpaResult:
    """Everything produced on the way from data to sources.

    Attributes
    ----------
    A, B : ndarray
        Unit-norm, phase-fixed loadings.
    S : ndarray, shape (K, R)
        Recovered sources, one per column.
    D : ndarray, shape (R, R)
        Fifth-mode loadings with the eigenvalue signs folded in.
    report : dict
        Backend diagnostics keyed by stage (``'jd'`` and/or ``'eals'``).
    spectrum : ndarray
        Quadricovariance eigenvalues sorted by decreasing modulus.
    tensor : ndarray
        The assembled fifth-order tensor.
    front_end_time : float
        Seconds spent on cumulant, eigen-decomposition and assembly.
    """

    A: np.ndarray
    B: np.ndarray
    S: np.ndarray
    D: np.ndarray
    report: dict = field(default_factory=dict)
    spectrum: np.ndarray = None
    tensor: np.ndarray = None
    front_end_time: float = 0.0


def recover_sources(X, A, B):
    """Least-squares sources ``(pinv(A (.) B) @ X).T`` for ``X`` of shape (I*J, K)."""
    X = np.asarray(X)
    A = np.asarray(A)
    B = np.asarray(B)
    if X.ndim != 2:
        raise ValueError("X must be (I*J, K), got ndim=%d" % X.ndim)
    M = khatri_rao(A, B)
    if X.shape[0] != M.shape[0]:
        raise ValueError(
            "X has %d rows but A (.) B has %d" % (X.shape[0], M.shape[0])
        )
    return (pseudo_inverse(M) @ X).T


def build_target(X3, R, quadricov=None):
    """Fifth-order tensor and eigenmatrices for ``R`` sources.

    ``quadricov`` replaces the sampled cumulant matrix when given (e.g. the
    exact one from :func:`~cps5jd.cumulants.analytic_quadricov`).
    """
    I, J, _ = X3.shape
    C = sample_quadricov(matricize3(X3)) if quadricov is None else quadricov
    eig = dominant_eigenmatrices(C, R)
    return assemble_t5(eig, I, J), eig


def run_backend(T5, R, backend, jd_options=None, als_options=None):
    """Run one CPD backend on ``T5``; returns ``(factors, report, seconds)``.

    ``eals_jd`` is ``jd`` followed by ``eals`` initialised at its output,
    and its report carries both stages.
    """
    if backend not in BACKENDS:
        raise ValueError("backend must be one of %s, got %r" % (BACKENDS, backend))
    report = {}
    start = time.perf_counter()
    if backend in ("jd", "eals_jd"):
        jd_opts = jd_options or Cps5JdOptions(rank=R)
        factors, report["jd"] = cps5_jd(T5, options=jd_opts)
    if backend in ("eals", "eals_jd"):
        base = als_options or AlsOptions(rank=R)
        opts = AlsOptions(
            rank=R,
            max_iters=base.max_iters,
            rel_fit_tol=base.rel_fit_tol,
            els_enabled=base.els_enabled,
            init=factors if backend == "eals_jd" else base.init,
            seed=base.seed,
        )
        factors, report["eals"] = cps5_eals(T5, options=opts)
    return factors, report, time.perf_counter() - start


def ica_cpa(X3, R, backend="jd", jd_options=None, als_options=None, quadricov=None):
    """Separate ``R`` sources from an ``(I, J, K)`` trilinear mixture.

    Parameters
    ----------
    X3 : array_like, shape (I, J, K)
    R : int
        Number of sources, at most ``I*J``.
    backend : {'jd', 'eals', 'eals_jd'}
    jd_options : Cps5JdOptions, optional
    als_options : AlsOptions, optional
        Iteration limits, tolerance and seed for the ALS stages.
    quadricov : QuadricovarianceMatrix, optional
        Use this instead of the sampled cumulant matrix.

    Returns
    -------
    IcaCpaResult
    """
    X3 = check_tensor(X3, 3, "X3")
    I, J, _ = X3.shape
    R = check_rank(R, I * J, name="R")
    start = time.perf_counter()
    T5, eig = build_target(X3, R, quadricov)
    front = time.perf_counter() - start
    factors, report, _ = run_backend(T5, R, backend, jd_options, als_options)
    # signs[k] * E_k = M diag M^H: fold the eigenvalue sign into the k-th row of D
    D = factors.D * eig.signs[:, None]
    S = recover_sources(matricize3(X3), factors.A, factors.B)
    return IcaCpaResult(
        A=factors.A,
        B=factors.B,
        S=S,
        D=D,
        report=report,
        spectrum=eig.spectrum,
        tensor=T5,
        front_end_time=front,
    )


class ICACPA(TransformerMixin, BaseEstimator):
    """ICA with Khatri-Rao structured mixing, via the fifth-order CPD.

    Parameters
    ----------
    n_components : int
        Number of sources R.
    backend : {'jd', 'eals', 'eals_jd'}, default='jd'
    max_iter : int, default=1000
        ALS iteration cap (ALS backends only).
    tol : float, default=1e-8
        ALS relative-improvement stopping threshold.
    random_state : int, RandomState or None
        Seeds the random ALS start of the ``'eals'`` backend.

    Attributes
    ----------
    mixing_a_, mixing_b_ : ndarray
        Estimated loadings ``A`` (I x R) and ``B`` (J x R).
    mixing_ : ndarray, shape (I*J, R)
        ``A (.) B``.
    components_ : ndarray, shape (R, I*J)
        Demixing matrix, ``pinv(mixing_)``.
    result_ : IcaCpaResult
    """

    def __init__(self, n_components=2, *, backend="jd", max_iter=1000, tol=1e-8,
                 random_state=None):
        self.n_components = n_components
        self.backend = backend
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        """Estimate the loadings from an ``(I, J, K)`` data tensor."""
        seed = self.random_state
        if seed is not None and not isinstance(seed, (int, np.integer)):
            seed = int(check_random_state(seed).randint(2**31 - 1))
        als = AlsOptions(
            rank=self.n_components, max_iters=self.max_iter, rel_fit_tol=self.tol, seed=seed
        )
        self.result_ = ica_cpa(X, self.n_components, self.backend, als_options=als)
        self.mixing_a_ = self.result_.A
        self.mixing_b_ = self.result_.B
        self.mixing_ = khatri_rao(self.mixing_a_, self.mixing_b_)
        self.components_ = pseudo_inverse(self.mixing_)
        self.n_features_in_ = self.mixing_.shape[0]
        return self

    def transform(self, X):
        """Sources ``(K, R)`` from an ``(I, J, K)`` tensor or ``(I*J, K)`` matrix."""
        check_is_fitted(self, "components_")
        X = np.asarray(X)
        if X.ndim == 3:
            X = matricize3(check_tensor(X, 3, "X"))
        elif X.ndim == 2:
            X = check_tensor(X, 2, "X")
        else:
            raise ValueError("X must be 2-D or 3-D, got ndim=%d" % X.ndim)
        if X.shape[0] != self.n_features_in_:
            raise ValueError(
                "X has %d channels, estimator was fitted with %d"
                % (X.shape[0], self.n_features_in_)
            )
        return (self.components_ @ X).T

    def inverse_transform(self, S):
        """Noise-free observations ``(I*J, K)`` for sources ``S`` of shape (K, R)."""
        check_is_fitted(self, "components_")
        return self.mixing_ @ np.asarray(S).T
