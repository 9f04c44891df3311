"""Balanced sparse measurement graphs and the measurement process.

Graphs are stored row-compressed: row ``i`` owns the slice
``indptr[i]:indptr[i + 1]`` of ``indices`` (variable ids) and ``weights``.
The same structure carries WSN channel matrices, whose rows have varying
length.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegreeTooLarge, DimensionMismatch, ZeroSignal
from .weightset import WeightSet


@dataclass(frozen=True, eq=False)
class MeasurementGraph:
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    _csc: tuple = field(init=False, repr=False, default=None)

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if indptr.ndim != 1 or indptr.size < 1 or indptr[0] != 0 or indptr[-1] != indices.size:
            raise ValueError("malformed indptr")
        if indices.size != weights.size:
            raise ValueError("indices and weights differ in length")
        if indices.size and (indices.min() < 0 or indices.max() >= self.n):
            raise ValueError("variable index out of range")
        for a in (indptr, indices, weights):
            a.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "weights", weights)

    @property
    def m(self) -> int:
        return self.indptr.size - 1

    @property
    def row_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def L(self) -> int | None:
        """Common row degree, or None when rows differ in length."""
        deg = self.row_degrees
        if deg.size == 0:
            return None
        return int(deg[0]) if np.all(deg == deg[0]) else None

    @property
    def column_degrees(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.n)

    def row(self, i: int) -> list[tuple[int, float]]:
        a, b = self.indptr[i], self.indptr[i + 1]
        return [(int(j), float(w)) for j, w in zip(self.indices[a:b], self.weights[a:b])]

    @property
    def rows(self) -> list[list[tuple[int, float]]]:
        return [self.row(i) for i in range(self.m)]

    def csc(self):
        """Column-compressed view ``(colptr, rowidx, edge)`` where ``edge`` maps back into the CSR arrays."""
        if self._csc is None:
            edge = np.argsort(self.indices, kind="stable")
            colptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(self.column_degrees, out=colptr[1:])
            rowidx = np.repeat(np.arange(self.m, dtype=np.int64), self.row_degrees)[edge]
            object.__setattr__(self, "_csc", (colptr, rowidx, edge.astype(np.int64)))
        return self._csc

    def dense(self) -> np.ndarray:
        G = np.zeros((self.m, self.n))
        rows = np.repeat(np.arange(self.m), self.row_degrees)
        np.add.at(G, (rows, self.indices), self.weights)
        return G

    @classmethod
    def from_rows(cls, n: int, rows) -> "MeasurementGraph":
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(r) for r in rows])
        idx = [int(j) for r in rows for j, _ in r]
        w = [float(x) for r in rows for _, x in r]
        return cls(n, indptr, np.array(idx, dtype=np.int64), np.array(w, dtype=float))

    def to_dict(self) -> dict:
        return {"n": self.n, "rows": [[[j, w] for j, w in r] for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementGraph":
        return cls.from_rows(int(d["n"]), [[(int(j), float(w)) for j, w in r] for r in d["rows"]])


@dataclass(frozen=True, eq=False)
class BinarySignal:
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 1 or not np.all((b == 0) | (b == 1)):
            raise ValueError("a binary signal is a 1-d vector over {0, 1}")
        b = b.astype(np.int8)
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def n(self) -> int:
        return self.bits.size

    @property
    def k(self) -> int:
        return int(self.bits.sum())

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return isinstance(other, BinarySignal) and np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MeasurementVector:
    values: np.ndarray
    noise_variance: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")

    @property
    def m(self) -> int:
        return self.values.size

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "noise_variance": self.noise_variance}

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementVector":
        return cls(np.array(d["values"], dtype=float), float(d.get("noise_variance", 0.0)))


def random_signal(n: int, k: int, rng_seed=None) -> BinarySignal:
    """Exactly ``k`` ones at uniformly random positions."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    rng = np.random.default_rng(rng_seed)
    b = np.zeros(n, dtype=np.int8)
    b[rng.choice(n, size=k, replace=False)] = 1
    return BinarySignal(b)


def build_graph(n: int, m: int, L: int, ws: WeightSet, rng_seed=None) -> MeasurementGraph:
    """Generate ``m`` rows of degree ``L`` with near-uniform column degrees.

    Each row draws its variables uniformly from those with the currently
    lowest degree, spilling into the next degree class when the lowest one
    holds fewer than ``L`` variables.  Row weights are drawn from ``ws``
    without replacement.
    """
    if L < 1 or L > n:
        raise DegreeTooLarge(f"L={L} must lie in [1, n={n}]")
    if L > ws.D:
        raise DegreeTooLarge(f"L={L} exceeds the weight set size D={ws.D}")
    rng = np.random.default_rng(rng_seed)
    # Variables are consumed from a shuffled pool of the lowest degree class;
    # all variables reach the next class at the moment the pool empties.
    indices = np.empty(m * L, dtype=np.int64)
    pool = rng.permutation(n)
    pos = 0
    for i in range(m):
        take = min(L, pool.size - pos)
        row = pool[pos:pos + take]
        pos += take
        if take < L:
            # Next class is every variable except those already in this row.
            fresh = np.setdiff1d(np.arange(n), row, assume_unique=True)
            rest = rng.permutation(fresh)
            extra = rest[:L - take]
            # Variables of this row that came from the old class now join the
            # new class alongside the untouched ones.
            pool = rng.permutation(np.concatenate([rest[L - take:], row]))
            row = np.concatenate([row, extra])
            pos = 0
        elif pos == pool.size:
            pool = rng.permutation(n)
            pos = 0
        indices[i * L:(i + 1) * L] = row
    wsel = np.argsort(rng.random((m, ws.D)), axis=1)[:, :L]
    weights = ws.array[wsel].ravel()
    return MeasurementGraph(n, np.arange(m + 1, dtype=np.int64) * L, indices, weights)


def encode(g: MeasurementGraph, b: BinarySignal) -> MeasurementVector:
    if b.n != g.n:
        raise DimensionMismatch(f"signal length {b.n} != graph n {g.n}")
    contrib = g.weights * b.bits[g.indices]
    rows = np.repeat(np.arange(g.m), g.row_degrees)
    values = np.bincount(rows, weights=contrib, minlength=g.m).astype(np.float64)
    return MeasurementVector(values, 0.0)


def add_awgn(c: MeasurementVector, sigma_z: float, rng_seed=None) -> MeasurementVector:
    if sigma_z < 0:
        raise ValueError("sigma_z must be nonnegative")
    if sigma_z == 0:
        return MeasurementVector(c.values, c.noise_variance)
    rng = np.random.default_rng(rng_seed)
    return MeasurementVector(c.values + sigma_z * rng.standard_normal(c.m),
                             c.noise_variance + sigma_z ** 2)


def snr_to_sigma(g: MeasurementGraph, b: BinarySignal, snr_db: float) -> float:
    """Noise std for a per-measurement SNR of ``snr_db``: sigma^2 = ||Gb||^2 / (m 10^(snr/10))."""
    c = encode(g, b).values
    power = float(c @ c)
    if power == 0:
        raise ZeroSignal("Gb is zero; SNR is undefined")
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return math.sqrt(power / (g.m * 10.0 ** (snr_db / 10.0)))


def save_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj.to_dict(), fh)
