import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afcs.errors import DegreeTooLarge, DimensionMismatch, ZeroSignal
from afcs.measure import (BinarySignal, MeasurementGraph, MeasurementVector, add_awgn,
                          build_graph, encode, random_signal, snr_to_sigma)
from afcs.weightset import sample_gaussian_weightset


def _graph(n=200, m=30, L=10, seed=0, D=None):
    ws = sample_gaussian_weightset(D or L, seed)
    return build_graph(n, m, L, ws, seed + 1), ws


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 120), st.integers(1, 40), st.integers(1, 12), st.integers(0, 10 ** 6))
def test_build_graph_is_balanced(n, m, L, seed):
    L = min(L, n)
    g, ws = _graph(n, m, L, seed)
    assert g.m == m and g.L == L
    assert np.all(g.row_degrees == L)
    cols = g.column_degrees
    assert cols.sum() == m * L
    assert cols.max() - cols.min() <= 1
    for i in range(m):
        vars_ = [j for j, _ in g.row(i)]
        ws_row = [w for _, w in g.row(i)]
        assert len(set(vars_)) == L
        # weights drawn from the set without repetition inside a row
        assert len(set(ws_row)) == L and set(ws_row) <= set(ws.weights)


def test_no_orphans_over_many_trials():
    orphans = 0
    for t in range(1000):
        g, _ = _graph(100, 12, 9, t)
        orphans += int((g.column_degrees == 0).sum())
    assert orphans == 0


def test_degree_errors():
    ws = sample_gaussian_weightset(5, 0)
    with pytest.raises(DegreeTooLarge):
        build_graph(100, 10, 6, ws, 0)
    with pytest.raises(DegreeTooLarge):
        build_graph(4, 10, 5, ws, 0)


def test_build_graph_is_seeded():
    a, _ = _graph(seed=3)
    b, _ = _graph(seed=3)
    assert np.array_equal(a.indices, b.indices) and np.array_equal(a.weights, b.weights)


def test_encode_matches_dense_product():
    g, _ = _graph(300, 40, 12, 4)
    b = random_signal(300, 30, 5)
    np.testing.assert_allclose(encode(g, b).values, g.dense() @ b.bits, rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_encode_is_linear(seed):
    g, _ = _graph(120, 20, 8, seed)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(120)
    a = np.zeros(120, dtype=np.int8)
    b = np.zeros(120, dtype=np.int8)
    a[perm[:10]] = 1
    b[perm[10:25]] = 1
    lhs = encode(g, BinarySignal(a + b)).values
    rhs = encode(g, BinarySignal(a)).values + encode(g, BinarySignal(b)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_encode_handles_empty_rows():
    g = MeasurementGraph.from_rows(4, [[], [(1, 0.5), (3, 2.0)], []])
    c = encode(g, BinarySignal([1, 1, 0, 1]))
    np.testing.assert_array_equal(c.values, [0.0, 2.5, 0.0])


def test_encode_dimension_mismatch():
    g, _ = _graph()
    with pytest.raises(DimensionMismatch):
        encode(g, BinarySignal(np.zeros(5, dtype=np.int8)))


def test_random_signal_has_exact_weight():
    b = random_signal(1000, 100, 1)
    assert b.k == 100 and b.n == 1000 and b.support.size == 100
    with pytest.raises(ValueError):
        random_signal(10, 11)


def test_snr_to_sigma_formula():
    g = MeasurementGraph.from_rows(3, [[(0, 1.0), (1, 2.0)], [(2, 3.0)]])
    b = BinarySignal([1, 1, 1])
    # ||Gb||^2 = 9 + 9 = 18 over m = 2 rows at 10 dB
    assert snr_to_sigma(g, b, 10.0) == pytest.approx(math.sqrt(18 / 2 / 10))
    assert snr_to_sigma(g, b, math.inf) == 0.0
    with pytest.raises(ZeroSignal):
        snr_to_sigma(g, BinarySignal([0, 0, 0]), 10.0)


def test_awgn_statistics_and_seed():
    c = MeasurementVector(np.zeros(20000))
    y = add_awgn(c, 0.3, 9)
    assert y.noise_variance == pytest.approx(0.09)
    assert np.std(y.values) == pytest.approx(0.3, rel=0.03)
    np.testing.assert_array_equal(y.values, add_awgn(c, 0.3, 9).values)


def test_graph_json_round_trip():
    g, _ = _graph(50, 8, 6, 2)
    d = json.loads(json.dumps(g.to_dict()))
    assert all(len(pair) == 2 for row in d["rows"] for pair in row)
    h = MeasurementGraph.from_dict(d)
    assert h.n == g.n and np.array_equal(h.indptr, g.indptr)
    assert np.array_equal(h.indices, g.indices) and np.array_equal(h.weights, g.weights)


def test_csc_view_is_consistent():
    g, _ = _graph(60, 10, 7, 8)
    colptr, rowidx, edge = g.csc()
    dense = g.dense()
    for j in range(g.n):
        for q in range(colptr[j], colptr[j + 1]):
            assert g.indices[edge[q]] == j
            assert dense[rowidx[q], j] == g.weights[edge[q]]
    assert colptr[-1] == g.indices.size


def test_degree_examples():
    g, _ = _graph(4, 2, 2, 0)
    assert np.all(g.column_degrees == 1)
    g, _ = _graph(1000, 200, 25, 1)
    assert np.all(g.column_degrees == 5)
    g, _ = _graph(1000, 184, 25, 2)
    hist = np.bincount(g.column_degrees, minlength=6)
    assert abs(hist[5] - 600) <= 1 and abs(hist[4] - 400) <= 1


def test_awgn_variance_and_zero_noise():
    c = MeasurementVector(np.zeros(100_000))
    z = add_awgn(c, 1.0, 11).values
    # 3 sigma of the sample variance is 3 * sqrt(2 / m) ~ 0.0134
    assert 0.985 <= z.var() <= 1.015
    c2 = MeasurementVector(np.arange(5.0))
    np.testing.assert_array_equal(add_awgn(c2, 0.0, 1).values, c2.values)


def test_mean_measurement_power_estimate():
    # E||Gb||^2 / m = L s E[w^2] + L (L - 1) P(two given bits are one) E|w|^2;
    # the cross term is not negligible because |N(0,1)| weights have mean sqrt(2/pi)
    n, k, L = 1000, 100, 12
    expected = L * k / n + L * (L - 1) * k * (k - 1) / (n * (n - 1)) * 2 / math.pi
    powers = []
    for t in range(200):
        g, _ = _graph(1000, 160, 12, 100 + t)
        c = encode(g, random_signal(1000, 100, t)).values
        powers.append(c @ c / g.m)
    assert expected == pytest.approx(2.0328, abs=1e-4)
    assert np.mean(powers) == pytest.approx(expected, rel=0.03)
