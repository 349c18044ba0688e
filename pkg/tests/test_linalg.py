import numpy as np
import pytest

from cps5jd.linalg import (
    hermitian_evd,
    hermitian_rank1_vector,
    least_squares,
    nullspace_vectors,
    pseudo_inverse,
    rank1_matrix_approx,
    truncated_svd,
)

from conftest import cn, column_angle


def test_truncated_svd_diag():
    res = truncated_svd(np.diag([3.0, 2.0, 1.0]), 2)
    np.testing.assert_allclose(res.S, [3, 2])


def test_truncated_svd_low_rank_reconstruction(rng):
    M = cn(rng, 7, 2) @ cn(rng, 5, 2).conj().T
    U, S, V = truncated_svd(M, 2)
    assert np.linalg.norm(M - U @ np.diag(S) @ V.conj().T) / np.linalg.norm(M) < 1e-12
    np.testing.assert_allclose(U.conj().T @ U, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(V.conj().T @ V, np.eye(2), atol=1e-12)


def test_truncated_svd_zero_and_range():
    assert not np.any(truncated_svd(np.zeros((3, 3)), 2).S)
    with pytest.raises(ValueError):
        truncated_svd(np.eye(3), 4)
    with pytest.raises(ValueError):
        truncated_svd(np.eye(3), 0)


@pytest.mark.parametrize("n", [6, 50, 200])
def test_svd_reconstruction_sizes(rng, n):
    M = cn(rng, n, n)
    U, S, V = truncated_svd(M, n)
    assert np.linalg.norm(M - (U * S) @ V.conj().T) / np.linalg.norm(M) < 1e-9


def test_hermitian_evd_examples(rng):
    res = hermitian_evd(np.diag([1.0, -3.0, 2.0]))
    np.testing.assert_allclose(res.eigenvalues, [-3, 2, 1])
    a = cn(rng, 4)
    res = hermitian_evd(np.outer(a, a.conj()))
    assert res.eigenvalues[0] == pytest.approx(np.linalg.norm(a) ** 2)
    np.testing.assert_allclose(res.eigenvalues[1:], 0, atol=1e-12)
    H = cn(rng, 6, 6)
    H = H + H.conj().T
    res = hermitian_evd(H)
    assert res.eigenvalues.sum() == pytest.approx(np.trace(H).real, abs=1e-10)
    V, w = res.eigenvectors, res.eigenvalues
    np.testing.assert_allclose(H @ V, V * w, atol=1e-9 * np.abs(w).max())


def test_hermitian_evd_rejects():
    with pytest.raises(ValueError, match="not Hermitian"):
        hermitian_evd(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        hermitian_evd(np.ones((2, 3)))


def test_hermitian_evd_leading_subset_matches_dense(rng):
    # above the size threshold the leading pairs come from a Lanczos solver
    G = cn(rng, 300, 5)
    H = (G * np.array([5.0, -4, 3, -2, 1])) @ G.conj().T
    H = H + 1e-3 * (lambda E: E + E.conj().T)(cn(rng, 300, 300))
    full = hermitian_evd(H)
    part = hermitian_evd(H, count=8)
    np.testing.assert_allclose(part.eigenvalues, full.eigenvalues[:8], rtol=1e-10)
    for r in range(5):
        assert column_angle(part.eigenvectors[:, r], full.eigenvectors[:, r]) < 1e-8


def test_pseudo_inverse(rng):
    np.testing.assert_allclose(pseudo_inverse(np.eye(3)), np.eye(3))
    M = cn(rng, 6, 3)
    np.testing.assert_allclose(pseudo_inverse(M) @ M, np.eye(3), atol=1e-10)
    P = pseudo_inverse(M)
    np.testing.assert_allclose(M @ P @ M, M, atol=1e-9)
    np.testing.assert_allclose(P @ M @ P, P, atol=1e-9)
    assert pseudo_inverse(np.zeros((2, 3))).shape == (3, 2)


def test_nullspace_vectors(rng):
    N = cn(rng, 5, 2)
    Q, _ = np.linalg.qr(N)
    M = cn(rng, 40, 5) @ (np.eye(5) - Q @ Q.conj().T)
    vecs, sigma = nullspace_vectors(M, 2)
    assert np.linalg.norm(M @ vecs) <= 1e-10 * sigma.max()
    np.testing.assert_allclose(vecs.conj().T @ vecs, np.eye(2), atol=1e-12)
    assert np.all(np.diff(sigma) >= 0)
    v, s = nullspace_vectors(np.eye(3), 1)
    assert s[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        nullspace_vectors(np.eye(3), 4)


def test_nullspace_wide_matrix_pads(rng):
    M = cn(rng, 2, 4)
    vecs, sigma = nullspace_vectors(M, 2)
    np.testing.assert_allclose(sigma[:2], 0)
    assert np.linalg.norm(M @ vecs) < 1e-12


def test_hermitian_rank1_vector(rng):
    a = cn(rng, 4)
    a /= np.linalg.norm(a)
    vec, mu = hermitian_rank1_vector(2 * np.outer(a, a.conj()))
    assert mu == pytest.approx(2.0)
    assert column_angle(vec, a) < 1e-12
    k = np.argmax(np.abs(vec))
    assert vec[k].imag == 0 and vec[k].real > 0
    # idempotent under the phase convention
    vec2, mu2 = hermitian_rank1_vector(mu * np.outer(vec, vec.conj()))
    np.testing.assert_allclose(vec2, vec, atol=1e-12)
    assert mu2 == pytest.approx(mu, rel=1e-12)


def test_hermitian_rank1_vector_perturbation(rng):
    a = cn(rng, 5)
    b = cn(rng, 5)
    b -= np.vdot(a, b) / np.vdot(a, a) * a
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    vec, _ = hermitian_rank1_vector(np.outer(a, a.conj()) + 0.01 * np.outer(b, b.conj()))
    assert column_angle(vec, a) < 0.02
    vec, mu = hermitian_rank1_vector(np.eye(2))
    assert mu == pytest.approx(1.0) and np.linalg.norm(vec) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        hermitian_rank1_vector(np.zeros((0, 0)))


def test_rank1_matrix_approx(rng):
    u0, v0 = cn(rng, 4), cn(rng, 3)
    u, v, s = rank1_matrix_approx(np.outer(u0, v0.conj()))
    np.testing.assert_allclose(s * np.outer(u, v.conj()), np.outer(u0, v0.conj()), atol=1e-12)
    M = cn(rng, 4, 2) @ cn(rng, 2, 3)
    u, v, s = rank1_matrix_approx(M)
    sv = np.linalg.svd(M, compute_uv=False)
    assert np.linalg.norm(M - s * np.outer(u, v.conj())) == pytest.approx(sv[1])
    assert rank1_matrix_approx(np.zeros((2, 2)))[2] == 0


def test_least_squares(rng):
    Y = cn(rng, 3, 2)
    np.testing.assert_allclose(least_squares(np.eye(3), Y), Y)
    A = cn(rng, 8, 3)
    X0 = cn(rng, 3, 2)
    np.testing.assert_allclose(least_squares(A, A @ X0), X0, atol=1e-10)
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    X = least_squares(A, np.array([[2.0], [2.0]]))
    np.testing.assert_allclose(X, [[1.0], [1.0]])
