"""Partially symmetric fifth-order CPD by joint diagonalization (CPS5-JD).

The unfolding ``T = matricize5(T5)`` factors as

    T = khatri_rao(A, A*) @ khatri_rao(B, B*, D).T = U Lambda V^H

so there is an ``R x R`` matrix ``F`` with ``U F = A (.) A*`` and
``V* Lambda F^{-T} = B (.) B* (.) D``. After rotating each singular pair to
its Hermitian phase, ``F`` is real. Rank-1 detectors turn the Khatri-Rao
requirements on both sides into two families of symmetric matrices that
``F`` (resp. ``F^{-T}``) diagonalizes by congruence, and a real joint
diagonalization delivers ``F``. The loadings are then read off column by
column with rank-1 approximations; nothing is iterated on A, B or D.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_rank, check_tensor5
from .cumulants import hermitian_phase
from .detectors import build_p_system, build_q_system, solve_detection
from .linalg import (
    hermitian_deviation,
    hermitian_rank1_vector,
    least_squares,
    rank1_matrix_approx,
    truncated_svd,
)
from .rnjd import JdProblem, rnjd_solve
from .tensor_core import (
    FactorSet,
    check_partial_symmetry,
    column_to_cube,
    column_to_square,
    khatri_rao,
    matricize5,
    phase_normalize,
    relative_residual,
    symmetrize_partial,
)

__all__ = [
    "Cps5JdOptions",
    "Cps5Report",
    "alpha_normalize",
    "realify_f",
    "estimate_f_complex",
    "recover_a",
    "recover_bd",
    "refit_d",
    "cps5_jd",
    "CPS5JD",
]


class PartialSymmetryWarning(RuntimeWarning):
    pass


@dataclass
class Cps5JdOptions:
    rank: int
    svd_rcond: float = 1e-12
    gap_warning: float = 10.0
    w_cond_cap: float = 1e10
    rnjd_max_sweeps: int = 200
    rnjd_tol: float = 1e-12
    refit_d: bool = True
    symmetrize: bool = True
    symmetry_tol: float = 1e-6
    f_estimator: str = "rnjd"

    def __post_init__(self):
        check_rank(self.rank, name="rank")
        for name in ("svd_rcond", "gap_warning", "w_cond_cap", "rnjd_tol", "symmetry_tol"):
            if not getattr(self, name) > 0:
                raise ValueError("%s must be positive" % name)
        if self.f_estimator not in ("rnjd", "complex"):
            raise ValueError("f_estimator must be 'rnjd' or 'complex', got %r" % self.f_estimator)


@dataclass
class Cps5Report:
    singular_values: np.ndarray = None
    alphas: np.ndarray = None
    hermitian_defect_u: float = 0.0
    hermitian_defect_v: float = 0.0
    symmetry_deviation: float = 0.0
    gap_p: float = np.inf
    gap_q: float = np.inf
    w_dropped: int = 0
    rnjd_criterion: float = 0.0
    rnjd_sweeps: int = 0
    f_imag_defect: float = 0.0
    d_imag_residue: float = 0.0
    residual: float = np.nan
    op_counts: dict = field(default_factory=dict)

    def to_dict(self):
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, np.ndarray):
                value = value.tolist()
            if isinstance(value, list):
                value = [
                    {"re": v.real, "im": v.imag} if isinstance(v, complex) else v
                    for v in value
                ]
            if isinstance(value, float) and not np.isfinite(value):
                value = str(value)
            out[key] = value
        return out


def alpha_normalize(Ur, Vr):
    """Rotate one singular pair so both halves become Hermitian.

    ``c = tr(Ur @ Ur) / ||Ur||_F**2`` is unit modulus for a partially
    symmetric tensor; ``alpha = sqrt(conj(c))`` makes ``alpha * Ur``
    Hermitian. The same ``alpha`` applied to ``Vr`` keeps
    ``u v^H`` unchanged and makes every frontal slice Hermitian.

    Returns
    -------
    alpha : complex
    Ur_h : ndarray, shape (I, I)
    Vr_h : ndarray, shape (J, J, K)
    defects : tuple of float
        Relative Hermitian deviation of ``Ur_h`` and of the stacked slices
        of ``Vr_h``.
    """
    Ur = np.asarray(Ur)
    Vr = np.asarray(Vr)
    if not np.any(Ur):
        raise ValueError("cannot normalize a zero singular vector")
    alpha = hermitian_phase(Ur)
    Uh = alpha * Ur
    Vh = alpha * Vr
    du = hermitian_deviation(Uh)
    vn = np.linalg.norm(Vh)
    dv = 0.0 if vn == 0 else float(np.linalg.norm(Vh - Vh.transpose(1, 0, 2).conj()) / vn)
    return alpha, Uh, Vh, (du, dv)


def realify_f(F_raw):
    """Real part of ``F_raw`` and its relative imaginary defect."""
    F_raw = np.asarray(F_raw)
    nrm = np.linalg.norm(F_raw)
    defect = 0.0 if nrm == 0 else float(np.linalg.norm(F_raw.imag) / nrm)
    return F_raw.real.copy(), defect


_PENCIL_RNG = np.random.default_rng(20140504)
_PENCIL_W = _PENCIL_RNG.standard_normal((2, 64)) + 1j * _PENCIL_RNG.standard_normal((2, 64))


def estimate_f_complex(mats):
    """``F`` from the eigenvectors of a pencil of ``M_r = F S_r F^T``.

    Works in complex arithmetic; columns are phase-fixed so that a real
    ``F`` comes out with (numerically) zero imaginary part.
    """
    mats = np.asarray(mats)
    R = mats.shape[1]
    if R == 1:
        return np.ones((1, 1), dtype=complex)
    k = mats.shape[0]
    if k > _PENCIL_W.shape[1]:
        raise ValueError("too many matrices for the fixed pencil weights")
    Ma = np.tensordot(_PENCIL_W[0, :k], mats, axes=1)
    Mb = np.tensordot(_PENCIL_W[1, :k], mats, axes=1)
    _, vecs = np.linalg.eig(Ma @ np.linalg.inv(Mb))
    F = phase_normalize(vecs)
    order = np.argsort(-np.linalg.norm(F, axis=0), kind="stable")
    return F[:, order]


def recover_a(UF):
    """Columns of ``A`` from ``A (.) A*`` (up to scale and sign per column).

    Returns ``(A, mu)`` where ``mu[r]`` is the dominant eigenvalue of the
    ``r``-th reshaped column.
    """
    UF = np.asarray(UF)
    n2, R = UF.shape
    n = int(round(np.sqrt(n2)))
    if n * n != n2:
        raise ValueError("UF must have a square number of rows, got %d" % n2)
    A = np.empty((n, R), dtype=complex)
    mu = np.empty(R)
    for r in range(R):
        A[:, r], mu[r] = hermitian_rank1_vector(column_to_square(UF[:, r], n))
    return A, mu


def recover_bd(VF, J, K):
    """``(B, D)`` from columns of ``B (.) B* (.) D``.

    Each column is viewed as a ``J*J x K`` matrix ``vec(b b^H) d^T``. Its
    leading singular pair gives the ``J x J`` part up to a phase, which is
    undone with the Hermitian phase; ``b`` is the dominant eigenvector and
    ``d`` collects every scalar left over.

    Returns
    -------
    B : ndarray, shape (J, R)
    D : ndarray, shape (K, R)
    im_residue : float
        Largest relative imaginary part discarded from a ``d`` column.
    """
    VF = np.asarray(VF)
    R = VF.shape[1]
    B = np.empty((J, R), dtype=complex)
    D = np.empty((K, R))
    residue = 0.0
    for r in range(R):
        cube = column_to_cube(VF[:, r], J, K)
        u, v, sigma = rank1_matrix_approx(cube.reshape(J * J, K))
        if sigma == 0:
            B[:, r] = 0.0
            B[0, r] = 1.0
            D[:, r] = 0.0
            continue
        Um = u.reshape(J, J)
        rot = hermitian_phase(Um)
        b, mu = hermitian_rank1_vector(rot * Um)
        d = sigma * mu * np.conj(rot) * v.conj()
        dn = np.linalg.norm(d)
        if dn > 0:
            residue = max(residue, float(np.linalg.norm(d.imag) / dn))
        B[:, r] = b
        D[:, r] = d.real
    return B, D, residue


def refit_d(T, A, B, return_defect=False):
    """Least-squares ``D`` for fixed ``A``, ``B`` in the partially symmetric model.

    The Gram matrix of ``khatri_rao(A, B, A*, B*)`` is real, so the real part
    of the complex solution is the real-constrained optimum.
    """
    T = np.asarray(T)
    K = T.shape[-1]
    Z = khatri_rao(A, B, A.conj(), B.conj())
    Dt = least_squares(Z, T.reshape(-1, K))
    D = Dt.T
    nrm = np.linalg.norm(D)
    defect = 0.0 if nrm == 0 else float(np.linalg.norm(D.imag) / nrm)
    if return_defect:
        return D.real.copy(), defect
    return D.real.copy()


def _jd_targets(M_set, W_set, cond_cap):
    targets = [M_set.real, M_set.imag]
    dropped = 0
    inverses = []
    for W in W_set:
        if np.linalg.cond(W) > cond_cap:
            dropped += 1
            continue
        Wi = np.linalg.inv(W)
        inverses.append(Wi / np.linalg.norm(Wi))
    if inverses:
        inverses = np.stack(inverses)
        targets += [inverses.real, inverses.imag]
    G = np.concatenate(targets, axis=0)
    norms = np.linalg.norm(G, axis=(1, 2))
    keep = norms > 1e-14 * norms.max()
    return G[keep], dropped


def cps5_jd(T, rank=None, options=None):
    """Decompose a partially symmetric ``(I, J, I, J, K)`` tensor.

    Parameters
    ----------
    T : array_like, shape (I, J, I, J, K)
    rank : int, optional
        Number of rank-1 terms; required unless ``options`` is given.
    options : Cps5JdOptions, optional

    Returns
    -------
    factors : FactorSet
        Unit-norm, phase-fixed ``A`` and ``B``; scale and sign in ``D``.
    report : Cps5Report
    """
    if options is None:
        if rank is None:
            raise ValueError("rank is required")
        options = Cps5JdOptions(rank=rank)
    elif rank is not None and rank != options.rank:
        raise ValueError("rank %d disagrees with options.rank %d" % (rank, options.rank))
    T = check_tensor5(T)
    I, J, _, _, K = T.shape
    R = check_rank(options.rank, min(I * I, J * J * K), name="rank")
    report = Cps5Report()
    ops = dict(svd=0, alpha_normalize=0, detection_solve=0, rnjd=0, rank1=0)

    nrm = np.linalg.norm(T)
    dev = check_partial_symmetry(T)
    report.symmetry_deviation = dev / nrm if nrm > 0 else 0.0
    if report.symmetry_deviation > options.symmetry_tol:
        warnings.warn(
            "input deviates from partial symmetry by %.3g (relative)" % report.symmetry_deviation,
            PartialSymmetryWarning,
            stacklevel=2,
        )
    T_work = symmetrize_partial(T) if options.symmetrize else T

    # step 1: unfold + truncated SVD, singular values folded into V
    svd = truncated_svd(matricize5(T_work), R)
    ops["svd"] += 1
    report.singular_values = svd.S
    if svd.S[0] == 0:
        raise ValueError("input tensor is zero")
    if svd.S[-1] <= options.svd_rcond * svd.S[0]:
        warnings.warn(
            "unfolding has numerical rank below %d (s_R/s_1 = %.3g)" % (R, svd.S[-1] / svd.S[0]),
            RuntimeWarning,
            stacklevel=2,
        )
    U = np.empty_like(svd.U)
    V = svd.V * svd.S[None, :]
    alphas = np.empty(R, dtype=complex)
    Ulist, Vlist = [], []
    du = dv = 0.0
    for r in range(R):
        a, Uh, Vh, (d1, d2) = alpha_normalize(
            column_to_square(svd.U[:, r], I), column_to_cube(V[:, r], J, K)
        )
        ops["alpha_normalize"] += 2  # U_r and V_r
        alphas[r] = a
        du, dv = max(du, d1), max(dv, d2)
        Uh = 0.5 * (Uh + Uh.conj().T)
        Vh = 0.5 * (Vh + Vh.transpose(1, 0, 2).conj())
        Ulist.append(Uh)
        Vlist.append(Vh)
        U[:, r] = Uh.reshape(-1)
        V[:, r] = Vh.reshape(-1)
    report.alphas = alphas
    report.hermitian_defect_u = du
    report.hermitian_defect_v = dv

    # steps 2-4: detection systems and F
    if R == 1:
        F = np.ones((1, 1))
    else:
        M_set = solve_detection(build_p_system(Ulist), R, options.gap_warning)
        W_set = solve_detection(build_q_system(Vlist), R, options.gap_warning)
        ops["detection_solve"] += 2
        report.gap_p, report.gap_q = M_set.gap, W_set.gap
        F_raw = estimate_f_complex(M_set.mats)
        F_complex, report.f_imag_defect = realify_f(F_raw)
        if options.f_estimator == "complex":
            F = F_complex
        else:
            G, report.w_dropped = _jd_targets(M_set.mats, W_set.mats, options.w_cond_cap)
            sol = rnjd_solve(
                JdProblem(G, max_sweeps=options.rnjd_max_sweeps, tol=options.rnjd_tol)
            )
            ops["rnjd"] += 1
            report.rnjd_criterion = sol.offdiag_final
            report.rnjd_sweeps = sol.sweeps
            F = sol.F

    # step 5: rank-1 read-out of the loadings
    A, _ = recover_a(U @ F)
    B, D, report.d_imag_residue = recover_bd(V.conj() @ np.linalg.inv(F).T, J, K)
    ops["rank1"] += 2 * R
    if options.refit_d:
        D = refit_d(T, A, B)
    factors = FactorSet(A, B, D).normalized()
    report.residual = relative_residual(T, factors)
    report.op_counts = ops
    return factors, report


class CPS5JD(BaseEstimator):
    """Partially symmetric fifth-order CPD via joint diagonalization.

    Parameters
    ----------
    n_components : int
        Rank R of the decomposition.
    gap_warning : float, default=10.0
        Detection null-space separation below which a warning is issued.
    w_cond_cap : float, default=1e10
        Detection matrices on the ``F^{-T}`` side with a larger condition
        number are left out of the joint diagonalization.
    max_sweeps : int, default=200
    tol : float, default=1e-12
        Joint-diagonalization convergence threshold (relative criterion).
    refit_d : bool, default=True
        Re-estimate ``D`` by least squares once ``A`` and ``B`` are known.
    symmetrize : bool, default=True
        Project the input onto partially symmetric tensors first.
    f_estimator : {'rnjd', 'complex'}, default='rnjd'
        How ``F`` is obtained from the detection matrices.

    Attributes
    ----------
    factors_ : FactorSet
    report_ : Cps5Report
    reconstruction_error_ : float
        Relative Frobenius residual on the training tensor.
    """

    def __init__(
        self,
        n_components=2,
        *,
        gap_warning=10.0,
        w_cond_cap=1e10,
        max_sweeps=200,
        tol=1e-12,
        refit_d=True,
        symmetrize=True,
        f_estimator="rnjd",
    ):
        self.n_components = n_components
        self.gap_warning = gap_warning
        self.w_cond_cap = w_cond_cap
        self.max_sweeps = max_sweeps
        self.tol = tol
        self.refit_d = refit_d
        self.symmetrize = symmetrize
        self.f_estimator = f_estimator

    def _options(self):
        return Cps5JdOptions(
            rank=self.n_components,
            gap_warning=self.gap_warning,
            w_cond_cap=self.w_cond_cap,
            rnjd_max_sweeps=self.max_sweeps,
            rnjd_tol=self.tol,
            refit_d=self.refit_d,
            symmetrize=self.symmetrize,
            f_estimator=self.f_estimator,
        )

    def fit(self, X, y=None):
        self.factors_, self.report_ = cps5_jd(X, options=self._options())
        self.reconstruction_error_ = self.report_.residual
        return self

    def fit_transform(self, X, y=None):
        """Fit and return the loadings ``(A, B, D)``."""
        self.fit(X)
        return self.factors_

    def inverse_transform(self, factors=None):
        """Tensor generated by ``factors`` (the fitted ones by default)."""
        check_is_fitted(self, "factors_")
        return (self.factors_ if factors is None else factors).to_tensor()

    def score(self, X, y=None):
        """Negative relative residual of ``X`` against the fitted model."""
        check_is_fitted(self, "factors_")
        return -relative_residual(check_tensor5(X), self.factors_)
