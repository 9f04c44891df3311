"""Weight sets whose signed {-1, 0, 1} combinations never vanish.

A weight set W = {w_1, ..., w_D} is usable for measurement generation when
no nonzero v in {-1, 0, 1}^D gives sum(v_i * w_i) == 0.  Writing v as the
difference of two disjoint 0/1 indicator vectors shows this is the same as
requiring all 2^D subset sums of W to be pairwise distinct, which is what
the exhaustive path checks.  Larger sets use a meet-in-the-middle search
over the signed half-sums.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SetTooLarge

DEFAULT_EPSILON = 1e-9
EXHAUSTIVE_MAX_D = 24
MITM_MAX_D = 30


@dataclass(frozen=True)
class WeightSet:
    weights: tuple[float, ...]
    verified: bool = False
    epsilon: float = DEFAULT_EPSILON
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("a weight set needs at least one weight")
        if not np.all(w > 0):
            raise ValueError("weights must be strictly positive")
        if np.unique(w).size != w.size:
            raise ValueError("weights must be pairwise distinct")
        w.setflags(write=False)
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "_array", w)

    @property
    def D(self) -> int:
        return len(self.weights)

    @property
    def array(self) -> np.ndarray:
        return self._array

    def __len__(self):
        return self.D

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "verified": self.verified, "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightSet":
        return cls(tuple(d["weights"]), bool(d.get("verified", False)),
                   float(d.get("epsilon", DEFAULT_EPSILON)))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


def sample_gaussian_weightset(D: int, rng_seed=None) -> WeightSet:
    """Draw ``D`` distinct magnitudes of standard-normal samples.

    Zeros and duplicates are replaced by fresh draws, never perturbed.
    """
    if D < 1:
        raise ValueError("D must be >= 1")
    rng = np.random.default_rng(rng_seed)
    w = np.abs(rng.standard_normal(D))
    while True:
        _, first = np.unique(w, return_index=True)
        bad = np.ones(D, dtype=bool)
        bad[first] = False
        bad |= w == 0.0
        if not bad.any():
            return WeightSet(tuple(w))
        w[bad] = np.abs(rng.standard_normal(int(bad.sum())))


def subset_sums(w: np.ndarray) -> np.ndarray:
    """All 2^D subset sums; entry ``mask`` is the sum of the weights whose bit is set."""
    sums = np.zeros(1)
    for x in w:
        sums = np.concatenate([sums, sums + x])
    return sums


def signed_sums(w: np.ndarray) -> np.ndarray:
    """All 3^D sums of v_i * w_i; entry index is v in base 3 with digit (v_i + 1)."""
    sums = np.zeros(1)
    for x in w:
        sums = np.concatenate([sums - x, sums, sums + x])
    return sums


def _mask_to_vector(mask: int, D: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(D)], dtype=np.int8)


def _base3_to_vector(code: int, D: int) -> np.ndarray:
    v = np.empty(D, dtype=np.int8)
    for i in range(D):
        code, digit = divmod(code, 3)
        v[i] = digit - 1
    return v


def _verify_exhaustive(w, eps):
    D = w.size
    sums = subset_sums(w)
    order = np.argsort(sums, kind="stable")
    gaps = np.diff(sums[order])
    k = int(np.argmin(gaps)) if gaps.size else -1
    if k < 0 or gaps[k] > eps:
        return True, None
    a, b = int(order[k + 1]), int(order[k])
    return False, _mask_to_vector(a, D) - _mask_to_vector(b, D)


def _near_zero_pairs(xa, xb, eps):
    """Index pair (i, j) with |xa[i] + xb[j]| <= eps, or None."""
    if xa.size == 0 or xb.size == 0:
        return None
    ob = np.argsort(xb)
    sb = xb[ob]
    pos = np.searchsorted(sb, -xa)
    best = np.full(xa.size, np.inf)
    arg = np.zeros(xa.size, dtype=np.int64)
    for cand in (pos - 1, pos):
        ok = (cand >= 0) & (cand < sb.size)
        c = np.clip(cand, 0, sb.size - 1)
        dist = np.where(ok, np.abs(xa + sb[c]), np.inf)
        better = dist < best
        best[better] = dist[better]
        arg[better] = c[better]
    i = int(np.argmin(best))
    if best[i] <= eps:
        return i, int(ob[arg[i]])
    return None


def _verify_mitm(w, eps):
    D = w.size
    h = (D + 1) // 2
    wa, wb = w[:h], w[h:]
    sa, sb = signed_sums(wa), signed_sums(wb)
    za, zb = (3 ** h - 1) // 2, (3 ** (D - h) - 1) // 2  # all-zero codes

    def vec(ca, cb):
        return np.concatenate([_base3_to_vector(ca, h), _base3_to_vector(cb, D - h)])

    for s, z, own in ((sa, za, "a"), (sb, zb, "b")):
        near = np.flatnonzero(np.abs(s) <= eps)
        near = near[near != z]
        if near.size:
            c = int(near[0])
            return False, vec(c, zb) if own == "a" else vec(za, c)

    ia = np.delete(np.arange(sa.size), za)
    ib = np.delete(np.arange(sb.size), zb)
    hit = _near_zero_pairs(sa[ia], sb[ib], eps)
    if hit is None:
        return True, None
    return False, vec(int(ia[hit[0]]), int(ib[hit[1]]))


def verify_condition(ws: WeightSet | np.ndarray, eps: float = DEFAULT_EPSILON):
    """Check that every nonzero signed combination of the weights exceeds ``eps``.

    Returns ``(ok, witness)`` where ``witness`` is a violating vector in
    {-1, 0, 1}^D when ``ok`` is False.
    """
    w = ws.array if isinstance(ws, WeightSet) else np.asarray(ws, dtype=float)
    D = w.size
    if D <= EXHAUSTIVE_MAX_D:
        return _verify_exhaustive(w, eps)
    if D <= MITM_MAX_D:
        return _verify_mitm(w, eps)
    raise SetTooLarge(f"D={D} exceeds the verification budget (max {MITM_MAX_D})")


def verified(ws: WeightSet, eps: float = DEFAULT_EPSILON) -> WeightSet:
    """Return a copy of ``ws`` flagged as verified, or raise if it violates the condition."""
    ok, witness = verify_condition(ws, eps)
    if not ok:
        raise ValueError(f"weight set violates the uniqueness condition, witness {witness.tolist()}")
    return WeightSet(ws.weights, True, eps)
