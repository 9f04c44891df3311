import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afcs import kernels
from afcs.analysis import density_evolution
from afcs.errors import AmbiguousMatch, DimensionMismatch, NoisyInput
from afcs.measure import (BinarySignal, MeasurementGraph, MeasurementVector, build_graph,
                          encode, random_signal)
from afcs.sumverify import decode_sv, error_rate, sv_trial
from afcs.weightset import sample_gaussian_weightset


def _instance(seed, n=None, m=None, L=None, k=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(20, 200))
    L = L or int(rng.integers(2, min(n, 16) + 1))
    m = m or int(rng.integers(max(1, n // L), 2 * n // L + 4))
    k = int(rng.integers(0, n // 4 + 1)) if k is None else k
    ws = sample_gaussian_weightset(L, rng)
    g = build_graph(n, m, L, ws, rng)
    b = random_signal(n, k, rng)
    return g, b, encode(g, b)


def test_worked_example():
    # one row over variables 1, 2, 3 and n-2 = 5, ones at 1 and 3
    w = [0.31, 1.7, 0.9, 2.45]
    g = MeasurementGraph.from_rows(7, [[(1, w[0]), (2, w[1]), (3, w[2]), (5, w[3])]])
    c = MeasurementVector([w[0] + w[2]])
    res = decode_sv(g, c, T=2)
    assert res.values[[1, 2, 3, 5]].tolist() == [1, 0, 1, 0]
    assert set(res.unresolved.tolist()) == {0, 4, 6} and res.status == "stalled"


@pytest.mark.parametrize("T", [0, 1, 2])
def test_all_zero_signal_decodes(T):
    g, _, _ = _instance(1, n=300, m=40, L=10, k=0)
    res = decode_sv(g, encode(g, BinarySignal(np.zeros(300, dtype=np.int8))), T)
    assert res.complete and res.signal.k == 0 and res.iterations > 0


def test_soundness_over_ten_thousand_instances():
    mislabels = ambiguous = 0
    for seed in range(10_000):
        g, b, c = _instance(seed)
        T = seed % 4
        try:
            res = decode_sv(g, c, T)
        except AmbiguousMatch:
            ambiguous += 1
            continue
        known = res.values >= 0
        mislabels += int(np.sum(res.values[known] != b.bits[known]))
        assert res.complete == (res.unresolved.size == 0)
    assert mislabels == 0 and ambiguous == 0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_unresolved_shrinks_with_t(seed):
    g, b, c = _instance(seed)
    prev = None
    for T in range(0, 4):
        cur = set(decode_sv(g, c, T).unresolved.tolist())
        if prev is not None:
            assert cur <= prev
        prev = cur


def test_fixed_point_ignores_scan_order():
    rng = np.random.default_rng(0)
    for seed in range(1000):
        g, b, c = _instance(seed)
        T = seed % 3
        base = decode_sv(g, c, T).values
        order = rng.permutation(g.m)
        np.testing.assert_array_equal(decode_sv(g, c, T, order=order).values, base)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2 ** 31))
def test_t_equal_l_decodes_a_row(L, seed):
    rng = np.random.default_rng(seed)
    w = sample_gaussian_weightset(L, rng).array
    bits = rng.integers(0, 2, L)
    g = MeasurementGraph.from_rows(L, [list(zip(range(L), w))])
    res = decode_sv(g, MeasurementVector([float(w @ bits)]), T=L)
    assert res.complete and np.array_equal(res.signal.bits, bits)


@pytest.mark.skipif("cython" not in kernels.available(), reason="extension not built")
def test_backends_agree():
    for seed in range(300):
        g, b, c = _instance(seed)
        T = seed % 3
        a = decode_sv(g, c, T, backend="python")
        z = decode_sv(g, c, T, backend="cython")
        np.testing.assert_array_equal(a.values, z.values)
        assert a.iterations == z.iterations


def test_errors():
    g, b, c = _instance(3, n=100, m=20, L=10)
    with pytest.raises(NoisyInput):
        decode_sv(g, MeasurementVector(c.values, 0.01), 1)
    with pytest.raises(DimensionMismatch):
        decode_sv(g, MeasurementVector(c.values[:-1]), 1)
    # 1 + 2 = 3: both {3} and {1, 2} match a residual of 3
    bad = MeasurementGraph.from_rows(3, [[(0, 1.0), (1, 2.0), (2, 3.0)]])
    with pytest.raises(AmbiguousMatch) as info:
        decode_sv(bad, MeasurementVector([3.0]), T=2)
    assert set(map(frozenset, info.value.subsets)) == {frozenset({2}), frozenset({0, 1})}


def test_error_rate_definition():
    g, b, c = _instance(5, n=100, m=20, L=8, k=20)
    done = decode_sv(g, c, 8)
    assert error_rate([done], 1000) == 0.0
    stalled = decode_sv(MeasurementGraph.from_rows(1000, [[(0, 1.0), (1, 2.0), (2, 4.0)]]),
                        MeasurementVector([0.0]), 0)
    assert stalled.unresolved.size == 997
    assert error_rate([stalled], 1000) == pytest.approx(0.997)
    with pytest.raises(ValueError):
        error_rate([], 1000)


@pytest.mark.parametrize("T,beta", [(1, 0.06), (1, 0.10), (1, 0.15), (2, 0.06), (2, 0.10)])
def test_error_rate_tracks_density_evolution(T, beta):
    n, s, L = 1000, 0.1, 25
    m = int(round(beta * n))
    results = [sv_trial(n, 100, m, L, T, np.random.SeedSequence(42, spawn_key=(t,)))
               for t in range(40)]
    mc = error_rate(results, n)
    de = density_evolution(L, T, s, beta)[-1].unresolved
    assert abs(mc - de) <= 0.05
