import numpy as np
import pytest

from cps5jd.cumulants import (
    analytic_quadricov,
    assemble_t5,
    dominant_eigenmatrices,
    hermitian_phase,
    sample_quadricov,
)
from cps5jd.selftest import brute_force_cumulant
from cps5jd.tensor_core import FactorSet, check_partial_symmetry, khatri_rao, matricize5, synthesize_cp5

from conftest import cn


def congruence_residual(E, M):
    """``min_D ||E - M D M^H|| / ||E||`` over diagonal ``D`` (a linear LS in diag D)."""
    Z = np.stack([np.outer(M[:, r], M[:, r].conj()).ravel() for r in range(M.shape[1])], 1)
    d, *_ = np.linalg.lstsq(Z, E.ravel(), rcond=None)
    return np.linalg.norm(E.ravel() - Z @ d) / np.linalg.norm(E)


def test_matches_quadruple_loop(rng):
    X = cn(rng, 2, 50)
    np.testing.assert_allclose(sample_quadricov(X).C, brute_force_cumulant(X), atol=1e-12, rtol=0)


def test_symmetries(rng):
    X = cn(rng, 3, 200)
    C = sample_quadricov(X).C
    assert np.max(np.abs(C - C.conj().T)) < 1e-13 * np.abs(C).max()
    n = 3
    C4 = C.reshape(n, n, n, n)
    assert np.max(np.abs(C4 - C4.transpose(1, 0, 3, 2).conj())) < 1e-13 * np.abs(C).max()


def test_gaussian_channel_has_vanishing_cumulant():
    rng = np.random.default_rng(0)
    x = (rng.standard_normal((1, 100000)) + 1j * rng.standard_normal((1, 100000))) / np.sqrt(2)
    assert abs(sample_quadricov(x).C[0, 0]) < 0.05


def test_constant_modulus_kurtosis():
    rng = np.random.default_rng(1)
    s = np.exp(2j * np.pi * rng.random((1, 100000)))
    assert sample_quadricov(s).C[0, 0].real == pytest.approx(-1.0, abs=0.05)


def test_too_few_samples():
    with pytest.raises(ValueError):
        sample_quadricov(np.ones((2, 1)))


def test_analytic_single_entry():
    C = analytic_quadricov(np.array([[1.0], [0.0]]), [-1.0]).C
    expected = np.zeros((4, 4))
    expected[0, 0] = -1
    np.testing.assert_array_equal(C, expected)


def test_analytic_rank_and_sample_convergence(rng):
    A, B = cn(rng, 2, 2), cn(rng, 2, 2)
    M = khatri_rao(A, B)
    Ca = analytic_quadricov(M, -np.ones(2))
    w = np.linalg.eigvalsh(Ca.C)
    assert np.sum(np.abs(w) > 1e-10 * np.abs(w).max()) == 2
    S = np.exp(2j * np.pi * np.random.default_rng(5).random((2, 100000)))
    Cs = sample_quadricov(M @ S)
    assert np.linalg.norm(Cs.C - Ca.C) / np.linalg.norm(Ca.C) < 0.05


def test_eigenmatrices_hermitian_and_diagonalizable(rng):
    M = khatri_rao(cn(rng, 6, 3), cn(rng, 5, 3))
    eig = dominant_eigenmatrices(analytic_quadricov(M, -np.ones(3)), 3)
    assert np.all(eig.signs == -1)
    for E in eig.E:
        assert np.linalg.norm(E - E.conj().T) < 1e-10 * np.linalg.norm(E)
        assert congruence_residual(E, M) < 1e-9
    assert len(eig.spectrum) >= 3


def test_sampled_eigenmatrices_nearly_diagonalizable():
    rng = np.random.default_rng(3)
    M = khatri_rao(cn(rng, 6, 3), cn(rng, 5, 3))
    S = np.exp(2j * np.pi * rng.random((3, 100000)))
    eig = dominant_eigenmatrices(sample_quadricov(M @ S), 3)
    assert max(congruence_residual(E, M) for E in eig.E) < 0.1


def test_rank_one_eigenmatrix(rng):
    m = cn(rng, 3, 1)
    C = analytic_quadricov(m, [2.0])
    eig = dominant_eigenmatrices(C, 1)
    mm = np.outer(m[:, 0], m[:, 0].conj())
    # the single eigenmatrix is sqrt(lambda) times the normalised vec(m m^H)
    expected = np.sqrt(eig.lambdas[0]) * mm / np.linalg.norm(mm)
    np.testing.assert_allclose(eig.E[0], expected, atol=1e-12)
    with pytest.raises(ValueError):
        dominant_eigenmatrices(C, 10)


def test_hermitian_phase(rng):
    H = cn(rng, 3, 3)
    H = H + H.conj().T
    alpha = hermitian_phase(np.exp(0.7j) * H)
    assert abs(abs(alpha) - 1) < 1e-14
    R = alpha * np.exp(0.7j) * H
    assert np.linalg.norm(R - R.conj().T) < 1e-12 * np.linalg.norm(H)
    with pytest.raises(ValueError):
        hermitian_phase(np.zeros((2, 2)))


def test_assemble_t5_layout_and_symmetry(rng):
    E = cn(rng, 2, 6, 6)
    E = E + E.conj().transpose(0, 2, 1)
    T = assemble_t5(E, 2, 3)
    assert T.shape == (2, 3, 2, 3, 2)
    assert T[1, 2, 0, 1, 1] == E[1, 1 * 3 + 2, 0 * 3 + 1]
    assert check_partial_symmetry(T) < 1e-12
    with pytest.raises(ValueError):
        assemble_t5(E, 3, 3)


def test_assemble_t5_is_cp5_of_induced_d(rng):
    A, B = cn(rng, 3, 2), cn(rng, 2, 2)
    M = khatri_rao(A, B)
    eig = dominant_eigenmatrices(analytic_quadricov(M, np.array([-1.0, -2.0])), 2)
    T = assemble_t5(eig, 3, 2)
    P = np.linalg.pinv(M)
    D = np.stack([np.real(np.diag(P @ E @ P.conj().T)) for E in eig.E])
    np.testing.assert_allclose(T, synthesize_cp5(FactorSet(A, B, D)), atol=1e-8)


def test_pipeline_tensor_has_exact_rank(rng):
    M = khatri_rao(cn(rng, 6, 3), cn(rng, 5, 3))
    T = assemble_t5(dominant_eigenmatrices(analytic_quadricov(M, -np.ones(3)), 3), 6, 5)
    s = np.linalg.svd(matricize5(T), compute_uv=False)
    assert s[3] / s[2] < 1e-8
