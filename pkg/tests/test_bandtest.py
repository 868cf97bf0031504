import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bandcov.bandtest import critical_value, run_test, scan
from bandcov.errors import DegenerateError, ParameterError
from bandcov.simgen import BANDWIDTH5, MAModelSpec, generate, replication_rng


@pytest.fixture(scope="module")
def ma2_sample():
    return generate(MAModelSpec((1.0, 1.0, 1.0), n=30, p=40, seed=4))


def test_critical_value_default():
    assert critical_value() == pytest.approx(3.2897072539029435, rel=1e-12)


def test_result_invariants(ma2_sample):
    res = run_test(ma2_sample, 2, 0.05)
    assert res.t == pytest.approx(30 * res.w / res.v, rel=1e-15)
    assert res.p_value == pytest.approx(math.erfc(res.t / 2 / math.sqrt(2)) / 2, abs=1e-12)
    assert res.reject == (res.t >= critical_value(0.05))
    assert res.reject == (res.p_value <= 0.05)


def test_run_test_is_deterministic(ma2_sample):
    assert run_test(ma2_sample, 1) == run_test(ma2_sample, 1)


def test_last_k_is_rejected_as_parameter(ma2_sample):
    with pytest.raises(ParameterError):
        run_test(ma2_sample, ma2_sample.shape[1] - 1)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5])
def test_alpha_out_of_range(ma2_sample, alpha):
    with pytest.raises(ParameterError):
        run_test(ma2_sample, 1, alpha)


def test_scan_matches_run_test(ma2_sample):
    sc = scan(ma2_sample, 10, 0.05)
    assert sc.k_max == 10
    for k in (0, 3, 10):
        assert sc.results[k] == run_test(ma2_sample, k, 0.05)
    assert_allclose(sc.tilde_t * sc.n, [r.t for r in sc.results], rtol=1e-14)


def test_scan_default_k_max(ma2_sample):
    assert scan(ma2_sample).k_max == min(40 - 2, 30)


@pytest.mark.parametrize("k_max", [0, 39])
def test_scan_k_max_range(ma2_sample, k_max):
    with pytest.raises(ParameterError):
        scan(ma2_sample, k_max)


def test_scan_zero_data_is_degenerate():
    with pytest.raises(DegenerateError):
        scan(np.zeros((10, 6)), 3)


@pytest.mark.slow
def test_size_bandwidth_one():
    # Nominal level 0.05; 1000 reps give a binomial SE near 0.007.
    spec = MAModelSpec((1.0, 1.0), n=40, p=100)
    rejects = [run_test(generate(spec, replication_rng(31, r)), 1).reject for r in range(1000)]
    assert 0.03 <= np.mean(rejects) <= 0.08


@pytest.mark.slow
def test_power_one_below_truth():
    spec = MAModelSpec((1.0, 1.0), n=60, p=100)
    rejects = [run_test(generate(spec, replication_rng(32, r)), 0).reject for r in range(200)]
    assert np.mean(rejects) >= 0.99


@pytest.fixture(scope="module")
def bw5_scans():
    spec = MAModelSpec(BANDWIDTH5, n=60, p=600)
    return [scan(generate(spec, replication_rng(5, r)), 12) for r in range(100)]


@pytest.mark.slow
def test_first_accepted_bandwidth(bw5_scans):
    # H_{4,0} has power near 0.3 here, so k0 - 1 is accepted about as often
    # as k0; the first non-rejected k sits at 4 or 5.
    first = [sc.first_accepted() for sc in bw5_scans]
    assert np.mean([k in (4, 5) for k in first]) >= 0.85
    assert all(k is None or k >= 3 for k in first)


@pytest.mark.slow
def test_tilde_t_structure(bw5_scans):
    tt = np.array([sc.tilde_t for sc in bw5_scans])
    mean = tt.mean(axis=0)
    assert np.all(np.abs(mean[5:]) <= 0.05)
    assert np.all(np.diff(mean[:6]) < 0)
    gap = tt[:, 4] - tt[:, 5]
    se = gap.std(ddof=1) / math.sqrt(gap.size)
    assert gap.mean() >= 5 * se


def test_scan_thread_free_determinism(ma2_sample):
    a = scan(ma2_sample, 8)
    b = scan(ma2_sample.copy(), 8)
    assert np.array_equal(a.tilde_t, b.tilde_t)
    assert a.results == b.results
