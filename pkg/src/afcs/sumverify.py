"""Noiseless sum-verification (peeling) decoding.

A measurement whose residual equals the sum of the weights on at most ``T``
of its unresolved neighbors verifies all of them at once: that subset is
one, the rest are zero.  Resolved variables are subtracted from every
residual they touch and the process repeats until no row can verify.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import AmbiguousMatch, DimensionMismatch, NoisyInput
from .measure import BinarySignal, MeasurementGraph, MeasurementVector

DEFAULT_EPS = 1e-10


@dataclass(frozen=True, eq=False)
class DecodeResult:
    signal: BinarySignal
    status: str
    iterations: int
    unresolved: np.ndarray
    values: np.ndarray  # -1 for unresolved, else the verified bit

    @property
    def complete(self) -> bool:
        return self.status == "complete"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "signal": self.signal.bits.tolist(),
            "unresolved": self.unresolved.tolist(),
        }


def decode_sv(g: MeasurementGraph, c: MeasurementVector, T: int, eps: float = DEFAULT_EPS,
              order=None, backend: str | None = None) -> DecodeResult:
    """Peel ``c = G b`` to its fixed point.

    ``order`` sets the initial row scan order (defaults to 0..m-1).  The
    unresolved entries of the returned signal are reported as 0.
    """
    if c.noise_variance > 0:
        raise NoisyInput("sum verification needs noiseless measurements")
    if c.m != g.m:
        raise DimensionMismatch(f"{c.m} measurements for a graph with {g.m} rows")
    if T < 0:
        raise ValueError("T must be nonnegative")
    peel = kernels.peel if backend is None else kernels.get(backend)["peel"]
    colptr, rowidx, edge = g.csc()
    order = np.arange(g.m, dtype=np.int64) if order is None else np.ascontiguousarray(order, dtype=np.int64)
    residual = np.array(c.values, dtype=np.float64)
    values, steps, amb = peel(g.indptr, g.indices, g.weights, colptr, rowidx, edge,
                              residual, g.n, int(T), float(eps), order)
    values = np.asarray(values)
    if amb >= 0:
        raise AmbiguousMatch(int(amb), _matches(g, values, residual[amb], amb, T, eps))
    unresolved = np.flatnonzero(values < 0)
    bits = np.where(values == 1, 1, 0).astype(np.int8)
    status = "complete" if unresolved.size == 0 else "stalled"
    return DecodeResult(BinarySignal(bits), status, int(steps), unresolved, values)


def _matches(g, values, r, i, T, eps):
    from itertools import combinations

    nbr = [(j, w) for j, w in g.row(i) if values[j] < 0]
    found = []
    for t in range(min(T, len(nbr)) + 1):
        for sub in combinations(nbr, t):
            if abs(r - sum(w for _, w in sub)) <= eps:
                found.append(tuple(j for j, _ in sub))
    return found


def error_rate(results, n: int) -> float:
    """Mean fraction of unresolved variables across decode results."""
    results = list(results)
    if not results:
        raise ValueError("need at least one result")
    return float(np.mean([r.unresolved.size / n for r in results]))


def sv_trial(n: int, k: int, m: int, L: int, T: int, rng_seed, eps: float = DEFAULT_EPS,
             D: int | None = None, backend: str | None = None) -> DecodeResult | None:
    """One noiseless trial on a fresh weight set, graph and signal.

    Returns ``None`` when the decoder hit an ambiguous row, which callers
    count as a failed trial.
    """
    from .measure import build_graph, encode, random_signal
    from .weightset import sample_gaussian_weightset

    rng = np.random.default_rng(rng_seed)
    ws = sample_gaussian_weightset(D or L, rng)
    g = build_graph(n, m, L, ws, rng)
    b = random_signal(n, k, rng)
    try:
        return decode_sv(g, encode(g, b), T, eps, backend=backend)
    except AmbiguousMatch:
        return None


def min_measurements(n: int, k: int, L: int, T: int, ms, trials: int = 100,
                     required: float = 0.95, seed=0, eps: float = DEFAULT_EPS) -> int:
    """Smallest ``m`` in ``ms`` at which at least ``required`` of the trials decode completely.

    Grid point ``pi`` (in sorted order) and trial ``ti`` use the sub-seed
    ``SeedSequence(seed, spawn_key=(pi, ti))``.
    """
    import math

    from .errors import NotAchieved

    allowed = trials - math.ceil(required * trials - 1e-9)
    for pi, m in enumerate(sorted(ms)):
        if m * L < n:
            continue
        failures = 0
        for ti in range(trials):
            res = sv_trial(n, k, m, L, T, np.random.SeedSequence(seed, spawn_key=(pi, ti)), eps)
            if res is None or not res.complete:
                failures += 1
                if failures > allowed:
                    break
        if failures <= allowed:
            return int(m)
    raise NotAchieved(f"no m in the grid reached {required:.0%} complete recovery")
