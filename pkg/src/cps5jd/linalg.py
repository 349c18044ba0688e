"""Complex dense linear-algebra kernels.

Thin wrappers over LAPACK (via numpy) that pin down ordering, phase and
tolerance conventions used throughout the package.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .tensor_core import phase_normalize

DEFAULT_RCOND = 1e-12
_LANCZOS_MIN = 200

__all__ = [
    "SvdResult",
    "EvdResult",
    "truncated_svd",
    "hermitian_evd",
    "pseudo_inverse",
    "nullspace_vectors",
    "hermitian_rank1_vector",
    "rank1_matrix_approx",
    "least_squares",
    "hermitian_deviation",
]


class SvdResult(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


class EvdResult(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def truncated_svd(M, r):
    """Leading ``r`` singular triples, ``M ~= U @ diag(S) @ V.conj().T``."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("expected a matrix, got ndim=%d" % M.ndim)
    if not 1 <= r <= min(M.shape):
        raise ValueError("rank %d out of range [1, %d]" % (r, min(M.shape)))
    U, S, Vh = np.linalg.svd(M, full_matrices=False)
    return SvdResult(U[:, :r], S[:r], Vh[:r].conj().T)


def hermitian_deviation(M):
    """``||M - M^H||_F / ||M||_F`` (0 for the zero matrix)."""
    M = np.asarray(M)
    nrm = np.linalg.norm(M)
    if nrm == 0:
        return 0.0
    return float(np.linalg.norm(M - M.conj().T) / nrm)


def hermitian_evd(M, assume_hermitian=True, count=None):
    """Eigen-decomposition of a Hermitian matrix, sorted by descending ``|lambda|``.

    With ``assume_hermitian`` the input is checked and a deviation above
    ``1e-8`` (relative) raises ``ValueError``. The Hermitian part is
    decomposed in all cases. Ties keep LAPACK's output order.

    ``count`` limits the output to the leading eigenpairs. For large
    matrices these come from a Lanczos solver with a fixed start vector,
    falling back to the dense solver if it does not converge.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix, got shape %s" % (M.shape,))
    if assume_hermitian:
        dev = hermitian_deviation(M)
        if dev > 1e-8:
            raise ValueError("matrix is not Hermitian (relative deviation %.3g)" % dev)
    H = 0.5 * (M + M.conj().T)
    n = H.shape[0]
    if count is not None and n >= _LANCZOS_MIN and count < n // 4:
        try:
            w, V = eigsh(H, k=count, which="LM", tol=0, v0=np.ones(n, dtype=H.dtype))
        except ArpackNoConvergence:
            pass
        else:
            order = np.argsort(-np.abs(w), kind="stable")
            return EvdResult(w[order], V[:, order])
    w, V = np.linalg.eigh(H)
    order = np.argsort(-np.abs(w), kind="stable")
    if count is not None:
        order = order[:count]
    return EvdResult(w[order], V[:, order])


def pseudo_inverse(M, rcond=DEFAULT_RCOND):
    """Moore-Penrose inverse; singular values below ``rcond * s_max`` are dropped."""
    return np.linalg.pinv(np.asarray(M), rcond=rcond)


def nullspace_vectors(M, count):
    """Right singular vectors for the ``count`` smallest singular values.

    Returns
    -------
    vectors : ndarray, shape (n, count)
        Orthonormal columns, smallest singular value first.
    sigma : ndarray, shape (n,)
        All singular values in ascending order, zero-padded when ``M`` has
        fewer rows than columns. ``sigma[:count]`` go with ``vectors``.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("expected a matrix, got ndim=%d" % M.ndim)
    m, n = M.shape
    if not 0 <= count <= n:
        raise ValueError("count %d out of range [0, %d]" % (count, n))
    if m > 2 * n:
        # same right singular vectors, far cheaper for tall systems
        M = np.linalg.qr(M, mode="r")
    _, s, Vh = np.linalg.svd(M, full_matrices=M.shape[0] < n)
    sigma = np.zeros(n)
    sigma[: s.size] = s
    # Vh rows are ordered by descending sigma
    order = np.argsort(sigma, kind="stable")
    return Vh[order[:count]].conj().T, sigma[order]


def hermitian_rank1_vector(M):
    """Dominant eigenpair of the Hermitian part of ``M``.

    Returns ``(a, mu)`` with ``||a|| = 1``, largest-modulus entry of ``a``
    real positive, and ``mu`` the eigenvalue of largest magnitude (may be
    negative).
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix, got shape %s" % (M.shape,))
    if M.shape[0] == 0:
        raise ValueError("empty matrix")
    H = 0.5 * (M + M.conj().T)
    w, V = np.linalg.eigh(H)
    idx = int(np.argmax(np.abs(w)))
    return phase_normalize(V[:, idx]), float(w[idx])


def rank1_matrix_approx(M):
    """Leading singular triple ``(u, v, sigma)`` with ``M ~= sigma * outer(u, v.conj())``."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("expected a matrix, got ndim=%d" % M.ndim)
    U, S, Vh = np.linalg.svd(M, full_matrices=False)
    return U[:, 0], Vh[0].conj(), float(S[0])


def least_squares(A, Y, rcond=DEFAULT_RCOND):
    """Minimum-norm minimiser of ``||A @ X - Y||_F``."""
    A = np.asarray(A)
    Y = np.asarray(Y)
    if A.shape[0] != Y.shape[0]:
        raise ValueError("row mismatch: A%s Y%s" % (A.shape, Y.shape))
    return pseudo_inverse(A, rcond) @ Y
