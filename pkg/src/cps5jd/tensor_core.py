"""Dense complex tensors: index maps, matricizations and the rank-R model.

Tensors are plain ``numpy`` arrays in C order (last index fastest), so the
row-major flat layout needed by the CT1 file format is ``arr.ravel()``.
The fifth-order model tensor has shape ``(I, J, I, J, K)`` and entries

    T[i1, j1, i2, j2, k] = sum_r a_r[i1] b_r[j1] conj(a_r[i2]) conj(b_r[j2]) d_r[k]
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FactorSet",
    "khatri_rao",
    "synthesize_cp5",
    "synthesize_cp3",
    "matricize5",
    "dematricize5",
    "matricize3",
    "dematricize3",
    "check_partial_symmetry",
    "symmetrize_partial",
    "column_to_square",
    "square_to_column",
    "column_to_cube",
    "cube_to_column",
    "phase_normalize",
    "relative_residual",
]


def khatri_rao(*matrices):
    """Column-wise Kronecker product.

    Parameters
    ----------
    *matrices : ndarray, each of shape (n_i, R)

    Returns
    -------
    ndarray, shape (prod(n_i), R)
        Row ``(i1, i2, ...)`` is stored at flat offset ``i1*n2*... + i2*... + ...``
        so that for two inputs column ``r`` equals ``kron(a_r, b_r)``.
    """
    if len(matrices) == 0:
        raise ValueError("khatri_rao needs at least one matrix")
    mats = [np.asarray(m) for m in matrices]
    for m in mats:
        if m.ndim != 2:
            raise ValueError("khatri_rao operands must be 2-D, got ndim=%d" % m.ndim)
    n_cols = mats[0].shape[1]
    if any(m.shape[1] != n_cols for m in mats):
        raise ValueError(
            "khatri_rao column mismatch: %s" % [m.shape for m in mats]
        )
    out = mats[0]
    for m in mats[1:]:
        out = (out[:, None, :] * m[None, :, :]).reshape(-1, n_cols)
    return out


def phase_normalize(v, axis=0):
    """Rotate vectors so the largest-modulus entry is real and positive.

    Works column-wise for matrices (``axis=0``). Zero vectors are returned
    unchanged.
    """
    v = np.asarray(v, dtype=complex)
    if v.ndim == 1:
        idx = np.argmax(np.abs(v))
        pivot = v[idx]
        if pivot == 0:
            return v.copy()
        out = v * (np.abs(pivot) / pivot)
        out[idx] = np.abs(pivot)  # exactly real, not merely to rounding
        return out
    moved = np.moveaxis(v, axis, 0)
    idx = np.argmax(np.abs(moved), axis=0)
    pivot = np.take_along_axis(moved, idx[None, ...], axis=0)[0]
    rot = np.ones_like(pivot)
    nz = pivot != 0
    rot[nz] = np.abs(pivot[nz]) / pivot[nz]
    out = moved * rot[None, ...]
    np.put_along_axis(out, idx[None, ...], np.abs(pivot)[None, ...], axis=0)
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True)
class FactorSet:
    """Loading matrices of the partially symmetric fifth-order model.

    Attributes
    ----------
    A : ndarray, shape (I, R), complex
    B : ndarray, shape (J, R), complex
    D : ndarray, shape (K, R), real
    """

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        B = np.asarray(self.B, dtype=complex)
        D = np.asarray(self.D)
        if np.iscomplexobj(D):
            raise TypeError("D must be real-valued")
        D = D.astype(float)
        if A.ndim != 2 or B.ndim != 2 or D.ndim != 2:
            raise ValueError("A, B, D must be 2-D")
        if not A.shape[1] == B.shape[1] == D.shape[1]:
            raise ValueError(
                "rank mismatch: A%s B%s D%s" % (A.shape, B.shape, D.shape)
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "D", D)

    @property
    def rank(self):
        return self.A.shape[1]

    @property
    def shape(self):
        """Shape ``(I, J, I, J, K)`` of the tensor these factors generate."""
        I, J, K = self.A.shape[0], self.B.shape[0], self.D.shape[0]
        return (I, J, I, J, K)

    def normalized(self):
        """Unit-norm, phase-fixed A and B with all scale pushed into D.

        The term ``a o b o a* o b* o d`` is blind to the phase of ``a`` and
        ``b``, and scaling ``a`` by ``c`` scales the term by ``|c|**2``.
        """
        na = np.linalg.norm(self.A, axis=0)
        nb = np.linalg.norm(self.B, axis=0)
        na_safe = np.where(na > 0, na, 1.0)
        nb_safe = np.where(nb > 0, nb, 1.0)
        A = phase_normalize(self.A / na_safe)
        B = phase_normalize(self.B / nb_safe)
        D = self.D * (na**2 * nb**2)[None, :]
        return FactorSet(A, B, D)

    def permuted(self, perm):
        perm = np.asarray(perm)
        return FactorSet(self.A[:, perm], self.B[:, perm], self.D[:, perm])

    def to_tensor(self):
        return synthesize_cp5(self)


def synthesize_cp5(factors, weights=None):
    """Build the partially symmetric tensor generated by ``factors``.

    Parameters
    ----------
    factors : FactorSet
    weights : array_like of shape (R,), optional
        Real per-term weights; all ones by default.

    Returns
    -------
    ndarray, shape (I, J, I, J, K), complex
    """
    A, B, D = factors.A, factors.B, factors.D
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (factors.rank,):
            raise ValueError(
                "weights must have shape (%d,), got %s" % (factors.rank, weights.shape)
            )
        D = D * weights[None, :]
    I, J, K = A.shape[0], B.shape[0], D.shape[0]
    Z = khatri_rao(A, B, A.conj(), B.conj())
    return (Z @ D.T).reshape(I, J, I, J, K)


def synthesize_cp3(A, B, S):
    """Trilinear tensor ``sum_r a_r o b_r o s_r`` of shape (I, J, K)."""
    A, B, S = (np.asarray(m) for m in (A, B, S))
    if not A.shape[1] == B.shape[1] == S.shape[1]:
        raise ValueError("rank mismatch: A%s B%s S%s" % (A.shape, B.shape, S.shape))
    return np.einsum("ir,jr,kr->ijk", A, B, S)


def _check_order5(T):
    T = np.asarray(T)
    if T.ndim != 5:
        raise ValueError("expected a 5-way tensor, got ndim=%d" % T.ndim)
    I, J, I2, J2, _ = T.shape
    if I != I2 or J != J2:
        raise ValueError(
            "fifth-order tensor must have shape (I, J, I, J, K), got %s" % (T.shape,)
        )
    return T


def matricize5(T):
    """Unfold ``(I, J, I, J, K)`` into ``(I*I, J*J*K)``.

    Row ``i1*I + i2`` and column ``j1*J*K + j2*K + k`` hold
    ``T[i1, j1, i2, j2, k]``, so a model tensor unfolds to
    ``khatri_rao(A, A.conj()) @ khatri_rao(B, B.conj(), D).T``.
    """
    T = _check_order5(T)
    I, J, _, _, K = T.shape
    return T.transpose(0, 2, 1, 3, 4).reshape(I * I, J * J * K)


def dematricize5(M, I, J, K):
    """Inverse of :func:`matricize5`."""
    M = np.asarray(M)
    if M.shape != (I * I, J * J * K):
        raise ValueError(
            "expected shape %s, got %s" % ((I * I, J * J * K), M.shape)
        )
    return M.reshape(I, I, J, J, K).transpose(0, 2, 1, 3, 4)


def matricize3(X):
    """Unfold ``(I, J, K)`` into ``(I*J, K)`` with row ``i*J + j``."""
    X = np.asarray(X)
    if X.ndim != 3:
        raise ValueError("expected a 3-way tensor, got ndim=%d" % X.ndim)
    I, J, K = X.shape
    return X.reshape(I * J, K)


def dematricize3(M, I, J):
    """Inverse of :func:`matricize3`."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != I * J:
        raise ValueError("expected %d rows, got shape %s" % (I * J, M.shape))
    return M.reshape(I, J, M.shape[1])


def _partner(T):
    # T*(i2, j2, i1, j1, k) laid out at (i1, j1, i2, j2, k)
    return T.transpose(2, 3, 0, 1, 4).conj()


def check_partial_symmetry(T, tol=None):
    """Largest violation of ``T[i1,j1,i2,j2,k] == conj(T[i2,j2,i1,j1,k])``.

    If ``tol`` is given and exceeded, a ``RuntimeWarning`` is emitted; the
    deviation is returned either way.
    """
    T = _check_order5(T)
    if T.size == 0:
        return 0.0
    dev = float(np.max(np.abs(T - _partner(T))))
    if tol is not None and dev > tol:
        warnings.warn(
            "partial symmetry deviation %.3g exceeds %.3g" % (dev, tol),
            RuntimeWarning,
            stacklevel=2,
        )
    return dev


def symmetrize_partial(T):
    """Orthogonal projection onto partially symmetric tensors."""
    T = _check_order5(T)
    return 0.5 * (T + _partner(T))


def column_to_square(v, n=None):
    """Reshape a length ``n*n`` vector into ``(n, n)``; entry (i1, i2) <- v[i1*n + i2]."""
    v = np.asarray(v)
    if n is None:
        n = int(round(np.sqrt(v.size)))
    if v.ndim != 1 or v.size != n * n:
        raise ValueError("vector of length %d is not %d**2" % (v.size, n))
    return v.reshape(n, n)


def square_to_column(M):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix, got shape %s" % (M.shape,))
    return M.reshape(-1)


def column_to_cube(v, J, K):
    """Reshape a length ``J*J*K`` vector into ``(J, J, K)``.

    Entry (j1, j2, k) <- v[j1*J*K + j2*K + k].
    """
    v = np.asarray(v)
    if v.ndim != 1 or v.size != J * J * K:
        raise ValueError("vector of length %d is not J*J*K = %d" % (v.size, J * J * K))
    return v.reshape(J, J, K)


def cube_to_column(C):
    C = np.asarray(C)
    if C.ndim != 3 or C.shape[0] != C.shape[1]:
        raise ValueError("expected a (J, J, K) cube, got shape %s" % (C.shape,))
    return C.reshape(-1)


def relative_residual(T, factors):
    """``||T - T_hat||_F / ||T||_F`` for the tensor generated by ``factors``."""
    T = np.asarray(T)
    nrm = np.linalg.norm(T)
    diff = np.linalg.norm(T - synthesize_cp5(factors))
    if nrm == 0:
        return float(diff)
    return float(diff / nrm)
