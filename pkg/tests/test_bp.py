import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit

from afcs import kernels
from afcs.bp import BpConfig, decode_bp, min_sampling_ratio
from afcs.errors import DegreeTooLargeForExactEnumeration, DimensionMismatch, NotAchieved
from afcs.measure import (MeasurementGraph, MeasurementVector, add_awgn, build_graph, encode,
                          random_signal, snr_to_sigma)
from afcs.sumverify import decode_sv
from afcs.weightset import sample_gaussian_weightset

BACKENDS = kernels.available()


def _noisy(n, m, L, k, snr, seed):
    rng = np.random.default_rng(seed)
    g = build_graph(n, m, L, sample_gaussian_weightset(L, rng), rng)
    b = random_signal(n, k, rng)
    c = encode(g, b)
    sigma = snr_to_sigma(g, b, snr)
    return g, b, c, add_awgn(c, sigma, rng), sigma


def _gauss(x, sigma):
    return math.exp(-x * x / (2 * sigma * sigma))


def test_single_measurement_bayes():
    g = MeasurementGraph.from_rows(1, [[(0, 1.0)]])
    res = decode_bp(g, MeasurementVector([0.99]), BpConfig(0.1, 30, 0.1))
    a = 0.1 * _gauss(0.99 - 1.0, 0.1)
    b = 0.9 * _gauss(0.99, 0.1)
    assert res.posterior_one[0] == pytest.approx(a / (a + b), rel=1e-12)
    assert res.posterior_one[0] > 0.999 and res.hard_decision.bits[0] == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 31), st.floats(0.05, 1.0), st.floats(0.02, 0.5))
def test_degree_one_checks_are_exact(reps, seed, sigma, prior):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.2, 2.0, reps)
    y = rng.normal(w * rng.integers(0, 2), sigma)
    # variable 0 is seen only by degree-1 checks; variables 1..3 share another row
    rows = [[(0, float(wi))] for wi in w] + [[(1, 0.7), (2, 1.3), (3, 0.4)]]
    g = MeasurementGraph.from_rows(4, rows)
    yv = MeasurementVector(np.append(y, 1.1))
    res = decode_bp(g, yv, BpConfig(sigma, 10, prior))
    l1 = math.log(prior) + sum(-(yi - wi) ** 2 for yi, wi in zip(y, w)) / (2 * sigma ** 2)
    l0 = math.log1p(-prior) + sum(-yi ** 2 for yi in y) / (2 * sigma ** 2)
    expected = float(expit(l1 - l0))
    assert res.posterior_one[0] == pytest.approx(expected, rel=1e-9, abs=1e-300)


def _brute_messages(W, y, sigma, q0, q1):
    """Direct check-to-variable messages of one row by listing every configuration."""
    L = len(W)
    out = np.zeros((L, 2))
    for cfg in itertools.product((0, 1), repeat=L):
        lik = _gauss(y - float(np.dot(W, cfg)), sigma)
        for j in range(L):
            pr = 1.0
            for t in range(L):
                if t != j:
                    pr *= q1[t] if cfg[t] else q0[t]
            out[j, cfg[j]] += lik * pr
    return out / out.sum(axis=1, keepdims=True)


@pytest.mark.parametrize("backend", BACKENDS)
@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2 ** 31))
def test_check_update_matches_enumeration(backend, L, seed):
    rng = np.random.default_rng(seed)
    W = rng.uniform(0.1, 2.0, L)
    q1 = rng.uniform(0.01, 0.99, L)
    y = float(W @ rng.integers(0, 2, L) + rng.normal(0, 0.3))
    sigma = 0.3
    indptr = np.array([0, L], dtype=np.int64)
    m0 = np.empty(L)
    m1 = np.empty(L)
    kernels.get(backend)["bp_check_update"](indptr, W, np.array([y]), sigma,
                                            np.log1p(-q1), np.log(q1), m0, m1)
    ref = _brute_messages(W, y, sigma, 1 - q1, q1)
    np.testing.assert_allclose(np.exp(m1), ref[:, 1], rtol=1e-9, atol=1e-14)


@pytest.mark.parametrize("backend", BACKENDS)
def test_far_tail_messages_stay_finite(backend):
    # y far from every configuration: group sums underflow after the global shift
    W = np.array([1.0, 2.0, 3.5])
    q1 = np.full(3, 1e-300)
    m0 = np.empty(3)
    m1 = np.empty(3)
    kernels.get(backend)["bp_check_update"](np.array([0, 3], dtype=np.int64), W,
                                            np.array([40.0]), 0.05, np.log1p(-q1), np.log(q1),
                                            m0, m1)
    assert np.all(np.isfinite(m0)) and np.all(np.isfinite(m1))
    np.testing.assert_allclose(np.exp(m0) + np.exp(m1), 1.0)


def test_messages_are_normalized_every_iteration():
    g, b, c, y, sigma = _noisy(300, 60, 8, 30, 20, 1)
    seen = []

    def cb(it, q0, q1, m0, m1):
        seen.append(it)
        np.testing.assert_allclose(q0 + q1, 1.0, rtol=0, atol=1e-12)
        np.testing.assert_allclose(m0 + m1, 1.0, rtol=0, atol=1e-12)
        for arr in (q0, q1, m0, m1):
            assert np.all(np.isfinite(arr)) and np.all(arr >= 0)

    decode_bp(g, y, BpConfig(sigma, 12, 0.1), callback=cb)
    assert seen == list(range(1, 13))


def test_vanishing_noise_matches_sum_verification():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        g = build_graph(1000, 160, 12, sample_gaussian_weightset(12, rng), rng)
        b = random_signal(1000, 100, rng)
        c = encode(g, b)
        sv = decode_sv(g, c, 2)
        if not sv.complete:
            continue
        res = decode_bp(g, c, BpConfig(1e-4, 30, 0.1))
        assert res.hard_decision == sv.signal == b


def test_mirror_symmetry():
    g, b, c, y, sigma = _noisy(200, 40, 8, 20, 25, 3)
    a = decode_bp(g, y, BpConfig(sigma, 20, 0.1))
    total = encode(g, type(b)(np.ones(200, dtype=np.int8))).values
    flipped = decode_bp(g, MeasurementVector(total - y.values, y.noise_variance),
                        BpConfig(sigma, 20, 0.9))
    np.testing.assert_allclose(flipped.posterior_one, 1 - a.posterior_one, atol=1e-9)


def test_decision_rule_and_determinism():
    g, b, c, y, sigma = _noisy(300, 60, 10, 30, 20, 4)
    cfg = BpConfig(sigma, 30, 0.1)
    a = decode_bp(g, y, cfg)
    z = decode_bp(g, y, cfg)
    assert np.array_equal(a.posterior_one, z.posterior_one)
    assert np.array_equal(a.hard_decision.bits == 1, a.posterior_one > 0.5)
    assert a.iterations_run == 30


@pytest.mark.skipif(len(BACKENDS) < 2, reason="extension not built")
def test_backends_agree():
    g, b, c, y, sigma = _noisy(400, 70, 10, 40, 25, 5)
    cfg = BpConfig(sigma, 15, 0.1)
    a = decode_bp(g, y, cfg, backend="python")
    z = decode_bp(g, y, cfg, backend="cython")
    np.testing.assert_allclose(a.posterior_one, z.posterior_one, rtol=1e-9, atol=1e-12)


def test_errors_and_config():
    g = MeasurementGraph.from_rows(30, [[(j, 1.0 + j) for j in range(22)]])
    with pytest.raises(DegreeTooLargeForExactEnumeration):
        decode_bp(g, MeasurementVector([1.0]), BpConfig(0.1))
    g = MeasurementGraph.from_rows(3, [[(0, 1.0)]])
    with pytest.raises(DimensionMismatch):
        decode_bp(g, MeasurementVector([1.0, 2.0]), BpConfig(0.1))
    for bad in ({"sigma_z": 0.0}, {"sigma_z": 1.0, "prior_one": 1.0},
                {"sigma_z": 1.0, "max_iters": 0}):
        with pytest.raises(ValueError):
            BpConfig(**bad)


def test_min_sampling_ratio_behaviour():
    grid = np.round(np.arange(0.1, 0.61, 0.05), 3)
    betas = [min_sampling_ratio(200, 10, 8, snr, grid, trials=20, seed=1)
             for snr in (15, 25, 60)]
    assert betas == sorted(betas, reverse=True)
    # high SNR: BP needs no more than sum verification with T = 2 needs noiselessly
    from afcs.sumverify import min_measurements
    m_sv = min_measurements(200, 10, 8, 2, [int(b * 200) for b in grid], trials=20, required=1.0)
    assert betas[-1] <= m_sv / 200 + 1e-9
    with pytest.raises(NotAchieved):
        min_sampling_ratio(200, 60, 8, 0.0, [0.05, 0.1], trials=20)
    with pytest.raises(ValueError):
        min_sampling_ratio(200, 10, 8, 20, grid, trials=5)
