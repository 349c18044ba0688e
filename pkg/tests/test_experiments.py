import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cps5jd.experiments import (
    Sim1Config,
    Sim2Config,
    amari_pi,
    format_time_table,
    gen_collinear_matrix,
    gen_sim1,
    gen_sim2,
    pi_of_estimate,
    read_csv,
    run_simulation,
    summarize,
    trial_seed,
    write_csv,
    write_summary,
)
from cps5jd.cumulants import sample_quadricov
from cps5jd.tensor_core import khatri_rao, synthesize_cp5

from conftest import cn


def corr(x, y):
    return abs(np.vdot(x, y)) / (np.linalg.norm(x) * np.linalg.norm(y))


def test_collinear_step_zero(rng):
    A = gen_collinear_matrix(6, 5, 0.0, rng)
    for j in range(1, 5):
        np.testing.assert_array_equal(A[:, j], A[:, 0])


def test_collinear_large_step_nearly_independent():
    cs = []
    for seed in range(100):
        A = gen_collinear_matrix(6, 5, 1e6, seed)
        cs.append(corr(A[:, 0], A[:, 1]))
    # independent complex Gaussians in C^6 have mean correlation ~0.4
    assert np.mean(cs) < 0.5


def test_collinear_definition_and_correlation():
    rng = np.random.default_rng(0)
    A = gen_collinear_matrix(6, 5, 0.08, np.random.default_rng(0))
    V = rng.standard_normal((6, 5)) + 1j * rng.standard_normal((6, 5))
    np.testing.assert_allclose(A[:, 0], V[:, 0])
    np.testing.assert_allclose(A[:, 2] - A[:, 1], 0.08 * V[:, 2])
    cs = [corr(M[:, j], M[:, j - 1]) for seed in range(100)
          for M in [gen_collinear_matrix(6, 5, 0.08, seed)] for j in range(1, 5)]
    assert np.median(cs) > 0.99


def test_gen_sim1_noise_and_determinism():
    cfg = Sim1Config()
    T_clean, truth = gen_sim1(cfg, np.inf, 3)
    assert np.linalg.norm(T_clean) == pytest.approx(1.0)
    np.testing.assert_allclose(T_clean, synthesize_cp5(truth) / np.linalg.norm(synthesize_cp5(truth)))
    T, truth2 = gen_sim1(cfg, 40, 3)
    np.testing.assert_array_equal(truth.A, truth2.A)
    assert np.linalg.norm(T - T_clean) == pytest.approx(10 ** (-40 / 10), rel=1e-10)
    np.testing.assert_array_equal(gen_sim1(cfg, 40, 3)[0], T)
    assert not np.iscomplexobj(truth.D)


def test_gen_sim2_snr_and_determinism():
    cfg = Sim2Config()
    X_clean, A, B, S = gen_sim2(cfg, np.inf, 1)
    np.testing.assert_allclose(X_clean.reshape(30, -1), khatri_rao(A, B) @ S.T)
    np.testing.assert_allclose(np.abs(S), 1)
    for snr in (-10.0, 7.0, 50.0):
        X, *_ = gen_sim2(cfg, snr, 1)
        p_s = np.mean(np.abs(X_clean) ** 2)
        p_n = np.mean(np.abs(X - X_clean) ** 2)
        assert abs(10 * np.log10(p_s / p_n) - snr) < 0.1
    np.testing.assert_array_equal(gen_sim2(cfg, 7.0, 1)[0], gen_sim2(cfg, 7.0, 1)[0])


def test_sim2_noise_is_spatially_coloured():
    cfg = Sim2Config(K=20000)
    X_clean, *_ = gen_sim2(cfg, np.inf, 2)
    X, *_ = gen_sim2(cfg, 0.0, 2)
    N = (X - X_clean).reshape(30, -1)
    R = N @ N.conj().T / N.shape[1]
    adj = np.mean([R[p, p + 1].real / np.sqrt(R[p, p].real * R[p + 1, p + 1].real)
                   for p in range(29)])
    assert adj == pytest.approx(0.9, abs=0.02)


def test_source_kurtosis():
    _, _, _, S = gen_sim2(Sim2Config(K=10000), np.inf, 0)
    C = sample_quadricov(S[:, :1].T).C
    assert C[0, 0].real == pytest.approx(-1.0, abs=0.05)


def test_amari_examples():
    assert amari_pi(np.eye(4)) == 0
    P = np.eye(3)[[2, 0, 1]] @ np.diag([2.0, -0.5, 3j])
    assert amari_pi(P) == pytest.approx(0, abs=1e-15)
    assert amari_pi(np.ones((2, 2))) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        amari_pi(np.ones((1, 1)))
    with pytest.raises(ValueError):
        amari_pi(np.ones((2, 3)))
    with pytest.raises(ValueError):
        amari_pi(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_amari_formula_by_loops(rng):
    P = cn(rng, 4, 4)
    a = np.abs(P)
    R = 4
    rows = sum(sum(a[i, j] / a[i].max() for j in range(R)) - 1 for i in range(R))
    cols = sum(sum(a[i, j] / a[:, j].max() for i in range(R)) - 1 for j in range(R))
    assert amari_pi(P) == pytest.approx((rows + cols) / (2 * R * (R - 1)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), R=st.integers(2, 6))
def test_amari_invariances(seed, R):
    rng = np.random.default_rng(seed)
    P = cn(rng, R, R)
    p1, p2 = rng.permutation(R), rng.permutation(R)
    base = amari_pi(P)
    assert amari_pi(P[p1][:, p2]) == pytest.approx(base, rel=1e-12)
    # row scaling leaves the row term unchanged, column scaling the column term
    delta = rng.uniform(0.1, 10, R)
    a = np.abs(P)
    row_term = lambda M: np.sum(M / M.max(axis=1, keepdims=True))
    col_term = lambda M: np.sum(M / M.max(axis=0, keepdims=True))
    assert row_term(np.diag(delta) @ a) == pytest.approx(row_term(a))
    assert col_term(a @ np.diag(delta)) == pytest.approx(col_term(a))
    assert 0 <= base <= 1


def test_pi_of_estimate(rng):
    T = cn(rng, 6, 5)
    assert pi_of_estimate(T, T) < 1e-14
    perm = np.eye(5)[[1, 3, 0, 4, 2]]
    assert pi_of_estimate(T @ perm @ np.diag(cn(rng, 5)), T) < 1e-12
    rand = [pi_of_estimate(cn(rng, 6, 5), T) for _ in range(50)]
    assert np.median(rand) > 0.3
    with pytest.raises(ValueError):
        pi_of_estimate(T[:, :4], T)


def test_trial_seed():
    assert trial_seed(7, 60, 0) == trial_seed(7, 60.0, 0)
    assert len({trial_seed(7, s, t) for s in (20, 40) for t in range(10)}) == 20
    assert trial_seed(0, 20, 1) != trial_seed(1, 20, 1)


def test_run_simulation_empty_and_bad_methods():
    cfg = Sim1Config(snr_grid=(60,), trials=1)
    assert run_simulation(cfg, []) == []
    with pytest.raises(ValueError):
        run_simulation(cfg, ["nope"])


def test_run_simulation_deterministic_and_sorted(tmp_path):
    cfg = Sim1Config(snr_grid=(60, 40), trials=2, seed=9, max_iters=30)
    a = run_simulation(cfg, ["eals", "jd"])
    b = run_simulation(cfg, ["jd", "eals"])
    assert [(r.method, r.snr_db, r.trial) for r in a] == [
        (m, s, t) for m in ("jd", "eals") for s in (40.0, 60.0) for t in range(2)]
    assert [r.pi_a for r in a] == [r.pi_a for r in b]
    assert all(r.status == "ok" and r.time_s > 0 and 0 <= r.pi_a <= 1 for r in a)
    path = tmp_path / "r.csv"
    write_csv(a, path)
    assert path.read_text().splitlines()[0] == "method,snr_db,trial,seed,pi_a,pi_b,time_s,status"
    back = read_csv(path)
    assert [r.pi_a for r in back] == [r.pi_a for r in a]
    write_summary(a, tmp_path / "s.json", cfg)
    doc = json.loads((tmp_path / "s.json").read_text())
    row = doc["summary"][0]
    assert row["pi_a"]["q1"] <= row["pi_a"]["median"] <= row["pi_a"]["q3"]
    assert "CPS5-EALS" in format_time_table(a)


def test_eals_jd_time_includes_jd(monkeypatch):
    cfg = Sim1Config(snr_grid=(60,), trials=1, max_iters=5)
    res = {r.method: r for r in run_simulation(cfg, ["jd", "eals_jd"])}
    assert res["eals_jd"].time_s > res["jd"].time_s


def test_failures_are_recorded(monkeypatch):
    import cps5jd.experiments as ex

    def boom(*args, **kwargs):
        raise np.linalg.LinAlgError("forced")

    monkeypatch.setattr(ex, "cps5_jd", boom)
    res = run_simulation(Sim1Config(snr_grid=(60,), trials=1, max_iters=5), ["jd", "eals_jd", "eals"])
    status = {r.method: r.status for r in res}
    assert status["jd"].startswith("failed") and status["eals_jd"].startswith("failed")
    assert status["eals"] == "ok"
    s = summarize(res)
    assert next(x for x in s if x["method"] == "jd")["failed"] == 1


def test_sim2_runner_adds_front_end_time():
    cfg = Sim2Config(snr_grid=(20,), trials=1, K=300)
    res = run_simulation(cfg, ["jd"])
    assert res[0].status == "ok" and res[0].pi_a < 0.5


def test_config_validation():
    with pytest.raises(ValueError):
        Sim1Config(R=0)
    with pytest.raises(ValueError):
        Sim1Config(snr_grid=(np.inf,))
    with pytest.raises(ValueError):
        Sim2Config(R=40)
    with pytest.raises(ValueError):
        Sim2Config(noise_corr=1.0)
