import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bandcov.errors import ParameterError
from bandcov.simgen import (
    GAMMA,
    NORMAL,
    InnovationLaw,
    MAModelSpec,
    coefficient_matrix,
    generate,
    make_design,
    population_quantities,
    population_sigma,
    replication_rng,
    run_experiment,
)


class TestInnovations:
    @pytest.mark.parametrize("law,third,fourth", [(NORMAL, 0.0, 3.0), (GAMMA, 2.0, 9.0)])
    def test_moments(self, law, third, fourth):
        z = law.sample(np.random.default_rng(11), 1_000_000)
        assert abs(z.mean()) <= 0.005
        assert z.var() == pytest.approx(1.0, abs=0.01)
        assert np.mean(z**3) == pytest.approx(third, abs=0.05)
        assert np.mean(z**4) == pytest.approx(fourth, abs=0.3)

    def test_closed_form_moments(self):
        assert GAMMA.excess_kurtosis == 6.0
        assert GAMMA.skewness == 2.0
        assert NORMAL.excess_kurtosis == 0.0

    def test_gamma_is_shifted_exponential(self):
        z = GAMMA.sample(np.random.default_rng(1), 100_000)
        assert z.min() >= -1.0

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            InnovationLaw("cauchy")


class TestGenerate:
    def test_deterministic(self):
        spec = MAModelSpec((1.0, 0.5), n=10, p=7, seed=3)
        assert np.array_equal(generate(spec), generate(spec))
        assert np.array_equal(generate(spec, replication_rng(2, 5)), generate(spec, replication_rng(2, 5)))
        assert not np.array_equal(generate(spec, replication_rng(2, 5)), generate(spec, replication_rng(2, 6)))

    def test_identity_model_is_raw_innovations(self):
        spec = MAModelSpec((1.0,), n=6, p=4)
        rng_a, rng_b = replication_rng(0, 0), replication_rng(0, 0)
        assert np.array_equal(generate(spec, rng_a), rng_b.standard_normal((6, 4)))

    def test_shape(self):
        assert generate(MAModelSpec((1.0, 1.0, 1.0), n=5, p=9)).shape == (5, 9)

    def test_lag_one_covariance(self):
        x = generate(MAModelSpec((1.0, 1.0), n=5000, p=50, seed=8))
        s = np.cov(x, rowvar=False)
        assert np.diag(s).mean() == pytest.approx(2.0, abs=0.05)
        assert np.diag(s, 1).mean() == pytest.approx(1.0, abs=0.05)
        assert abs(np.diag(s, 2).mean()) <= 0.05

    def test_sample_covariance_band_within_se(self):
        spec = MAModelSpec((1.0, 1.0, 1.0), n=4000, p=30, innovation=GAMMA, seed=9)
        s = np.cov(generate(spec), rowvar=False)
        sigma = population_sigma(spec)
        # crude per-entry SE bound sqrt((s_ii s_jj + s_ij^2 + excess term) / n)
        se = np.sqrt((np.outer(np.diag(sigma), np.diag(sigma)) + sigma**2) * 4 / spec.n)
        assert np.mean(np.abs(s - sigma) <= 4 * se) >= 0.99

    def test_bad_spec(self):
        with pytest.raises(ParameterError):
            MAModelSpec((), n=5, p=5)
        with pytest.raises(ParameterError):
            MAModelSpec((1.0,), n=0, p=5)


class TestPopulation:
    def test_sigma_example(self):
        sigma = population_sigma(MAModelSpec((1.0, 1.0, 1.0), n=10, p=4))
        expected = [[3, 2, 1, 0], [2, 3, 2, 1], [1, 2, 3, 2], [0, 1, 2, 3]]
        assert_allclose(sigma, expected)

    @pytest.mark.parametrize("gammas", [(1.0,), (1.0, 0.5), (1.0, 0.4, 0.4, -0.3), (2.0,) * 7])
    def test_sigma_is_gamma_gamma_transpose(self, gammas):
        spec = MAModelSpec(gammas, n=10, p=12)
        g = coefficient_matrix(spec)
        assert_allclose(population_sigma(spec), g @ g.T, rtol=1e-12, atol=1e-12)
        assert_allclose(population_sigma(spec, sparse=True).toarray(), g @ g.T, atol=1e-12)

    def test_traces_match_entries(self):
        spec = MAModelSpec((1.0, 0.5, 0.25, 0.1), n=20, p=40)
        sigma = population_sigma(spec)
        pq = population_quantities(spec, 10)
        assert pq.tr_sigma2 == pytest.approx(np.sum(sigma**2), rel=1e-12)
        idx = np.subtract.outer(np.arange(40), np.arange(40))
        for k in range(11):
            assert pq.tr_bk2[k] == pytest.approx(np.sum(sigma[np.abs(idx) <= k] ** 2), rel=1e-12)
        s2 = sigma @ sigma
        assert pq.tr_ratio == pytest.approx(np.trace(s2 @ s2) / np.trace(s2) ** 2, rel=1e-12)

    def test_r_for_bandwidth_two(self):
        p = 100
        pq = population_quantities(MAModelSpec((1.0, 1.0, 1.0), n=50, p=p), 4)
        assert pq.one_minus_r[1] == pytest.approx(2 * (p - 2) / (9 * p + 8 * (p - 1) + 2 * (p - 2)), rel=1e-12)
        assert pq.r[2] == 1.0 and pq.r[4] == 1.0
        assert np.all(np.diff(pq.r) >= 0)

    def test_nu_at_and_beyond_truth(self):
        spec = MAModelSpec((1.0, 1.0, 1.0), n=50, p=100)
        pq = population_quantities(spec, 5)
        lead = 2 * pq.tr_sigma2 / spec.n
        assert_allclose(pq.nu[2:], lead, rtol=1e-12)
        assert np.all(pq.nu[:2] > lead)
        assert np.all(pq.delta_snr[2:] == 0.0)
        assert np.all(pq.delta_snr[:2] > 0.0)

    def test_nu_dense_cross_check(self):
        spec = MAModelSpec((1.0, 0.6, -0.3), n=30, p=25, innovation=GAMMA)
        pq = population_quantities(spec, 3)
        sigma = population_sigma(spec)
        g = coefficient_matrix(spec)
        idx = np.abs(np.subtract.outer(np.arange(25), np.arange(25)))
        for k in range(4):
            off = np.where(idx > k, sigma, 0.0)
            m = sigma @ off
            inner = np.diag(g.T @ off @ g)
            nu2 = (4 / spec.n**2 * np.trace(sigma @ sigma) ** 2
                   + 8 / spec.n * np.trace(m @ m) + 4 * 6.0 / spec.n * np.sum(inner**2))
            assert pq.nu[k] == pytest.approx(math.sqrt(nu2), rel=1e-10)

    def test_identity_has_no_signal(self):
        pq = population_quantities(MAModelSpec((1.0,), n=10, p=20), 5)
        assert np.all(pq.signal == 0.0)
        assert np.all(pq.delta_snr == 0.0)
        assert_allclose(pq.a_np, 1 / 100 + np.arange(6) ** 2 / 200)

    def test_k_max_range(self):
        with pytest.raises(ParameterError):
            population_quantities(MAModelSpec((1.0,), n=10, p=20), 20)


class TestExperiment:
    def test_size_design_is_deterministic_and_thread_invariant(self):
        d = make_design("table1b", n=20, p=30, reps=12, master_seed=4)
        base = run_experiment(d, threads=1)
        assert run_experiment(d, threads=1) == base
        assert run_experiment(d, threads=2) == base
        assert run_experiment(d, threads=0) == base
        assert len(base["t"]) == 12
        assert base["rejection_se"] == pytest.approx(
            math.sqrt(base["rejection_rate"] * (1 - base["rejection_rate"]) / 12))

    def test_bandwidth_design(self):
        d = make_design("table3_bw3", n=30, p=60, reps=4, master_seed=1,
                        methods=("fixed", "changepoint", "bl-a", "bl-b"), n_splits=3)
        out = run_experiment(d)
        assert out["true_bandwidth"] == 3
        assert set(out["methods"]) == {"fixed", "changepoint", "bl-a", "bl-b"}
        assert run_experiment(d, threads=2) == out
        for m in out["methods"].values():
            assert len(m["k_hat"]) == 4

    def test_seed_changes_draws(self):
        a = run_experiment(make_design("table1a", n=10, p=20, reps=3, master_seed=1))
        b = run_experiment(make_design("table1a", n=10, p=20, reps=3, master_seed=2))
        assert a["t"] != b["t"]

    @pytest.mark.parametrize("reps", [0, -3])
    def test_reps_must_be_positive(self, reps):
        with pytest.raises(ParameterError):
            make_design("table1a", n=10, p=20, reps=reps)

    def test_unknown_preset(self):
        with pytest.raises(ParameterError):
            make_design("table9", n=10, p=20)

    def test_unknown_method(self):
        with pytest.raises(ParameterError):
            make_design("table3_bw5", n=10, p=20, methods=("oracle",))
