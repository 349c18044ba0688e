"""Rank-1 detection tensors and the linear systems built from them.

``phi1(X, X)`` vanishes exactly when the matrix ``X`` has rank one, and
``phi2(X, X)`` when the mode-1 unfolding ``J x (J*K)`` of a cube does. Both
maps are bilinear and symmetric, so for a family ``{U_r}`` the relations
``sum_{s,t} M[s,t] phi(U_s, U_t) = 0`` with symmetric ``M`` are linear in
the ``R(R+1)/2`` free entries of ``M``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg import nullspace_vectors
from .tensor_core import phase_normalize

__all__ = [
    "DetectionWarning",
    "DetectionSystem",
    "SymmetricMatrixSet",
    "phi1",
    "phi2",
    "pair_index",
    "build_p_system",
    "build_q_system",
    "solve_detection",
]


class DetectionWarning(UserWarning):
    """The null space of a detection system is not well separated."""


def phi1(X, Y):
    """``[phi1]_{ijkl} = x_ik y_jl + x_jl y_ik - x_il y_jk - x_jk y_il``.

    Inputs of shape ``(n, m)``; output ``(n, n, m, m)``.
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.ndim != 2 or X.shape != Y.shape:
        raise ValueError("phi1 needs equal-shape matrices, got %s and %s" % (X.shape, Y.shape))
    a = np.einsum("ik,jl->ijkl", X, Y)
    b = np.einsum("il,jk->ijkl", X, Y)
    return a + a.transpose(1, 0, 3, 2) - b - b.transpose(1, 0, 3, 2)


def phi2(X, Y):
    """Detector on ``(J, J, K)`` cubes, output ``(J, J, J, J, K, K)``.

    ``[phi2]_{ijklmn} = x_ikm y_jln + x_jln y_ikm - x_jkm y_iln - x_iln y_jkm``,
    i.e. :func:`phi1` of the mode-1 unfoldings with columns ``(k, m)`` and
    ``(l, n)`` split back out.
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.ndim != 3 or X.shape != Y.shape:
        raise ValueError("phi2 needs equal-shape cubes, got %s and %s" % (X.shape, Y.shape))
    a = np.einsum("ikm,jln->ijklmn", X, Y)
    b = np.einsum("iln,jkm->ijklmn", X, Y)
    return a + a.transpose(1, 0, 3, 2, 5, 4) - b - b.transpose(1, 0, 3, 2, 5, 4)


def pair_index(R):
    """Unordered pairs ``(s, t)`` with ``s <= t`` in row-major order."""
    return [(s, t) for s in range(R) for t in range(s, R)]


@dataclass
class DetectionSystem:
    """Stacked detector columns, one per unordered pair ``(s, t)``.

    Off-diagonal columns carry a factor 2 so that a null vector ``x`` unfolds
    to the symmetric matrix with ``M[s,t] = M[t,s] = x[(s,t)]``.
    """

    stacked: np.ndarray
    index_map: list
    rank: int
    smallest_singulars: np.ndarray = field(default=None)


@dataclass
class SymmetricMatrixSet:
    mats: np.ndarray
    gap: float
    singular_values: np.ndarray

    @property
    def gram_condition(self):
        V = self.mats.reshape(len(self.mats), -1)
        return float(np.linalg.cond(V @ V.conj().T))


def _build(items, detector):
    R = len(items)
    if R == 0:
        raise ValueError("empty list of matrices")
    pairs = pair_index(R)
    cols = []
    for s, t in pairs:
        col = detector(items[s], items[t]).reshape(-1)
        cols.append(col if s == t else 2.0 * col)
    return DetectionSystem(np.stack(cols, axis=1), pairs, R)


def build_p_system(U):
    """Detection system of ``phi1(U_s, U_t)`` over a list of square matrices."""
    U = [np.asarray(u) for u in U]
    if any(u.ndim != 2 or u.shape != U[0].shape for u in U):
        raise ValueError("P system needs equal-shape matrices")
    return _build(U, phi1)


def build_q_system(V):
    """Detection system of ``phi2(V_s, V_t)`` over a list of ``(J, J, K)`` cubes.

    Only the mode-1 unfolding is tested; for cubes with Hermitian frontal
    slices the mode-2 test is redundant.
    """
    V = [np.asarray(v) for v in V]
    if any(v.ndim != 3 or v.shape != V[0].shape for v in V):
        raise ValueError("Q system needs equal-shape cubes")
    return _build(V, phi2)


def solve_detection(system, R=None, gap_warning=10.0):
    """Null space of a detection system as ``R`` complex symmetric matrices.

    The gap reported is ``sigma_(R+1) / sigma_R`` counted from the bottom of
    the spectrum; below ``gap_warning`` a :class:`DetectionWarning` is issued.
    """
    R = system.rank if R is None else R
    n_unknowns = len(system.index_map)
    if system.stacked.shape[0] < n_unknowns - R:
        raise ValueError(
            "underdetermined detection system: %d rows for %d unknowns"
            % (system.stacked.shape[0], n_unknowns)
        )
    vecs, sigma = nullspace_vectors(system.stacked, R)
    vecs = phase_normalize(vecs)
    system.smallest_singulars = sigma
    if R < n_unknowns:
        lo = sigma[R - 1]
        gap = np.inf if lo == 0 else float(sigma[R] / lo)
    else:
        gap = np.inf
    if gap < gap_warning:
        warnings.warn(
            "detection null space poorly separated (gap %.3g)" % gap,
            DetectionWarning,
            stacklevel=2,
        )
    Rm = system.rank
    mats = np.zeros((R, Rm, Rm), dtype=complex)
    for p, (s, t) in enumerate(system.index_map):
        mats[:, s, t] = vecs[p]
        mats[:, t, s] = vecs[p]
    return SymmetricMatrixSet(mats, gap, sigma)
