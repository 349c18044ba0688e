import numpy as np
import pytest
from sklearn.base import clone

from cps5jd.cps5_eals import (
    CPS5EALS,
    AlsOptions,
    _line_sq_residuals,
    als_sweep,
    cps5_eals,
    els_polynomial,
    els_step,
    random_factors,
)
from cps5jd.tensor_core import FactorSet, relative_residual, synthesize_cp5

from conftest import cn, random_factorset


def test_exact_factors_fixed_point(rng):
    f = random_factorset(rng, 4, 3, 3, 2)
    T = synthesize_cp5(f)
    g, d_imag = als_sweep(T, f, return_d_imag=True)
    assert relative_residual(T, g) < 1e-12
    assert d_imag < 1e-10


def test_symmetry_is_structural(rng):
    # iterates are FactorSets, so modes 3 and 4 are conj(A), conj(B) by construction
    f = random_factorset(rng, 3, 3, 2, 2)
    T = cn(rng, 3, 3, 3, 3, 2)
    g = als_sweep(T, f)
    Tm = synthesize_cp5(g)
    np.testing.assert_allclose(Tm, Tm.transpose(2, 3, 0, 1, 4).conj(), atol=1e-12)


def test_residual_decreases_over_first_sweeps():
    rng = np.random.default_rng(7)
    truth = random_factorset(rng, 4, 4, 3, 2)
    T = synthesize_cp5(truth)
    f = random_factors(T.shape, 2, 1)
    res = [relative_residual(T, f)]
    for _ in range(10):
        f = als_sweep(T, f)
        res.append(relative_residual(T, f))
    assert all(b < a for a, b in zip(res, res[1:]))


def test_els_zero_direction(rng):
    f = random_factorset(rng, 3, 3, 2, 2)
    zero = (np.zeros_like(f.A), np.zeros_like(f.B), np.zeros_like(f.D))
    assert els_step(synthesize_cp5(f), f, zero) == 1.0


def test_els_exact_step(rng):
    truth = random_factorset(rng, 3, 3, 2, 2)
    T = synthesize_cp5(truth)
    start = FactorSet(truth.A + 0.3 * cn(rng, 3, 2), truth.B + 0.3 * cn(rng, 3, 2),
                      truth.D + 0.3 * rng.standard_normal((2, 2)))
    direction = (truth.A - start.A, truth.B - start.B, truth.D - start.D)
    rho = els_step(T, start, direction)
    r2 = _line_sq_residuals(T, start, direction, [rho])[0]
    assert np.sqrt(r2) / np.linalg.norm(T) < 1e-10


def test_els_polynomial_held_out_probe(rng):
    f = random_factorset(rng, 4, 3, 3, 3)
    T = synthesize_cp5(random_factorset(rng, 4, 3, 3, 3))
    direction = (cn(rng, 4, 3), cn(rng, 3, 3), rng.standard_normal((3, 3)))
    poly = els_polynomial(T, f, direction)
    for rho in (0.123, 1.7, -1.3):
        direct = _line_sq_residuals(T, f, direction, [rho])[0]
        assert abs(poly(rho) - direct) <= 1e-9 * direct


def test_exact_init_terminates_quickly(rng):
    f = random_factorset(rng, 4, 3, 3, 2)
    T = synthesize_cp5(f)
    g, trace = cps5_eals(T, options=AlsOptions(rank=2, init=f))
    assert trace.iterations <= 2
    assert trace.residuals[-1] < 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_trace_nonincreasing(seed):
    rng = np.random.default_rng(seed)
    T = synthesize_cp5(random_factorset(rng, 4, 4, 3, 3)) + 1e-3 * cn(rng, 4, 4, 4, 4, 3)
    _, trace = cps5_eals(T, options=AlsOptions(rank=3, max_iters=200, seed=seed))
    r = np.array(trace.residuals)
    assert np.all(np.diff(r) <= 0)
    assert len(trace.rhos) == trace.iterations


def test_random_init_success_rate():
    ok = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        T = synthesize_cp5(random_factorset(rng, 4, 4, 3, 2))
        _, trace = cps5_eals(T, options=AlsOptions(rank=2, seed=seed))
        ok += trace.residuals[-1] < 1e-6
    assert ok >= 160


def test_options_validation():
    with pytest.raises(ValueError):
        AlsOptions(rank=2, rel_fit_tol=0)
    with pytest.raises(ValueError):
        AlsOptions(rank=2, max_iters=0)
    with pytest.raises(ValueError):
        cps5_eals(np.ones((2, 2, 2, 2, 2)), options=AlsOptions(rank=2, init="bogus"))


def test_estimator_api(rng):
    f = random_factorset(rng, 4, 3, 3, 2)
    T = synthesize_cp5(f)
    est = CPS5EALS(n_components=2, random_state=0)
    assert clone(est).get_params()["random_state"] == 0
    est.fit(T)
    assert est.reconstruction_error_ < 1e-8
    assert est.init_report_ is None
    jd = CPS5EALS(n_components=2, init="jd").fit(T)
    assert jd.init_report_ is not None and jd.n_iter_ <= 2
    np.testing.assert_allclose(jd.inverse_transform(), T, atol=1e-8)
    # same seed, same answer
    again = CPS5EALS(n_components=2, random_state=0).fit(T)
    np.testing.assert_array_equal(again.factors_.A, est.factors_.A)
