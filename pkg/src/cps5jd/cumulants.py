"""Fourth-order cumulants of complex mixtures and the derived fifth-order tensor.

For an ``n``-channel observation ``X`` the quadricovariance is the
``n**2 x n**2`` Hermitian matrix ``cum(x_i, x_j*, x_k*, x_l)`` with row
``i*n + j`` and column ``k*n + l``. Its dominant eigenvectors, reshaped to
``n x n``, are jointly diagonalized by the mixing matrix; stacking them along
a fifth mode gives a partially symmetric tensor whose CPD carries the
Khatri-Rao factors of the mixing matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import hermitian_evd

SPECTRUM_EXTRA = 8

__all__ = [
    "QuadricovarianceMatrix",
    "EigenmatrixSet",
    "sample_quadricov",
    "analytic_quadricov",
    "dominant_eigenmatrices",
    "assemble_t5",
    "hermitian_phase",
]


@dataclass(frozen=True)
class QuadricovarianceMatrix:
    n: int
    C: np.ndarray

    @property
    def eigenvalues(self):
        return hermitian_evd(self.C, assume_hermitian=False).eigenvalues


@dataclass(frozen=True)
class EigenmatrixSet:
    """Scaled eigenmatrices ``E_r = sqrt(|lambda_r|) * reshape(e_r)``.

    ``signs[r]`` is ``sign(lambda_r)``; the eigenmatrix model is
    ``signs[r] * E_r = M D_r M^H``, so the sign can be folded into the
    fifth-mode loadings. ``spectrum`` holds the leading eigenvalues by
    modulus, ``R`` of them plus a few more for judging the gap.
    """

    E: np.ndarray
    lambdas: np.ndarray
    signs: np.ndarray
    spectrum: np.ndarray

    @property
    def rank(self):
        return self.E.shape[0]

    @property
    def n(self):
        return self.E.shape[1]


def sample_quadricov(X):
    """Sampled ``cum(X, X*, X*, X)`` for an ``(n, T)`` complex array.

    Entry ``(i*n + j, k*n + l)`` is::

        1/T   sum_t x_i x_j* x_k* x_l
      - 1/T^2 (sum_t x_i x_j*)(sum_t x_k* x_l)
      - 1/T^2 (sum_t x_i x_k*)(sum_t x_j* x_l)
      - 1/T^2 (sum_t x_i x_l)(sum_t x_j* x_k*)
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2:
        raise ValueError("expected an (n, T) array, got ndim=%d" % X.ndim)
    n, T = X.shape
    if T < 2:
        raise ValueError("need at least 2 samples, got %d" % T)
    Xc = X.conj()
    # Z[(i, j), t] = x_i x_j*
    Z = (X[:, None, :] * Xc[None, :, :]).reshape(n * n, T)
    C = (Z @ Z.conj().T) / T
    R = (X @ Xc.T) / T  # E x_i x_j*
    P = (X @ X.T) / T  # E x_i x_l
    # term 2: R[i,j] * conj(R[k,l])  (since sum x_k* x_l = conj(sum x_k x_l*))
    r = R.reshape(-1)
    C -= np.outer(r, r.conj())
    # term 3: R[i,k] * R[l,j]  (sum x_j* x_l = R[l, j])
    C -= np.einsum("ik,lj->ijkl", R, R).reshape(n * n, n * n)
    # term 4: P[i,l] * conj(P[j,k])
    C -= np.einsum("il,jk->ijkl", P, P.conj()).reshape(n * n, n * n)
    return QuadricovarianceMatrix(n, C)


def analytic_quadricov(M, kurtoses):
    """Exact quadricovariance ``sum_r k_r vec(m_r m_r^H) vec(m_r m_r^H)^H``.

    This is the infinite-sample limit for independent circular sources
    with unit power and fourth-order cumulants ``kurtoses``.
    """
    M = np.asarray(M, dtype=complex)
    kurtoses = np.asarray(kurtoses, dtype=float)
    if M.ndim != 2 or kurtoses.shape != (M.shape[1],):
        raise ValueError(
            "need M of shape (n, R) and R kurtoses, got %s and %s"
            % (M.shape, kurtoses.shape)
        )
    n, R = M.shape
    V = (M[:, None, :] * M.conj()[None, :, :]).reshape(n * n, R)
    return QuadricovarianceMatrix(n, (V * kurtoses) @ V.conj().T)


def hermitian_phase(E):
    """Unit-modulus ``alpha`` such that ``alpha * E`` is Hermitian.

    Exact when ``E`` is a Hermitian matrix times a phase: then
    ``tr(E @ E) / ||E||_F**2`` is that phase squared, conjugated.
    """
    E = np.asarray(E)
    nrm2 = np.vdot(E, E).real
    if nrm2 == 0:
        raise ValueError("zero matrix has no phase")
    c = np.trace(E @ E) / nrm2
    if c == 0:
        return 1.0 + 0.0j
    return np.sqrt(np.conj(c) / abs(c))


def dominant_eigenmatrices(C, R):
    """The ``R`` eigenmatrices of largest ``|lambda|``.

    Each eigenvector is rotated to its Hermitian phase before reshaping.
    Negative eigenvalues use ``sqrt(|lambda|)``; the sign is kept in
    ``signs``.
    """
    if isinstance(C, QuadricovarianceMatrix):
        n, Cm = C.n, C.C
    else:
        Cm = np.asarray(C)
        n = int(round(np.sqrt(Cm.shape[0])))
    if Cm.shape != (n * n, n * n):
        raise ValueError("quadricovariance must be n^2 x n^2, got %s" % (Cm.shape,))
    if not 1 <= R <= n * n:
        raise ValueError("rank %d out of range [1, %d]" % (R, n * n))
    # a few eigenvalues past R are kept so callers can inspect the gap
    evd = hermitian_evd(Cm, assume_hermitian=False, count=min(n * n, R + SPECTRUM_EXTRA))
    lam = evd.eigenvalues[:R]
    E = np.empty((R, n, n), dtype=complex)
    for r in range(R):
        Er = evd.eigenvectors[:, r].reshape(n, n)
        Er = hermitian_phase(Er) * Er
        Er = 0.5 * (Er + Er.conj().T)
        E[r] = np.sqrt(abs(lam[r])) * Er
    signs = np.where(lam < 0, -1.0, 1.0)
    return EigenmatrixSet(E=E, lambdas=lam, signs=signs, spectrum=evd.eigenvalues)


def assemble_t5(E, I, J):
    """Stack eigenmatrices into ``T[i1, j1, i2, j2, k] = E_k[i1*J + j1, i2*J + j2]``."""
    mats = E.E if isinstance(E, EigenmatrixSet) else np.asarray(E)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ValueError("expected (R, n, n) eigenmatrices, got %s" % (mats.shape,))
    R, n, _ = mats.shape
    if n != I * J:
        raise ValueError("eigenmatrix size %d != I*J = %d" % (n, I * J))
    return mats.reshape(R, I, J, I, J).transpose(1, 2, 3, 4, 0).copy()
