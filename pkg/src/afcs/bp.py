"""Belief-propagation reconstruction from noisy measurements y = Gb + z.

Check-to-variable messages are computed exactly by enumerating every
configuration of a check's neighbors; messages live in the log domain.
Updates are flooding (all checks, then all variables), each phase reading
only the previous phase's messages.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegreeTooLargeForExactEnumeration, DimensionMismatch, NotAchieved
from .measure import BinarySignal, MeasurementGraph, MeasurementVector

MAX_ENUM_DEGREE = 21  # 2^(L-1) other-neighbor configurations, L - 1 <= 20
DEFAULT_ITERS = 30
DEFAULT_PRIOR = 0.05


@dataclass(frozen=True)
class BpConfig:
    sigma_z: float
    max_iters: int = DEFAULT_ITERS
    prior_one: float = DEFAULT_PRIOR

    def __post_init__(self):
        if not self.sigma_z > 0:
            raise ValueError("sigma_z must be positive")
        if not 0 < self.prior_one < 1:
            raise ValueError("prior_one must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class PosteriorResult:
    posterior_one: np.ndarray
    hard_decision: BinarySignal
    iterations_run: int

    def to_dict(self) -> dict:
        return {
            "posterior_one": self.posterior_one.tolist(),
            "hard_decision": self.hard_decision.bits.tolist(),
            "iterations_run": self.iterations_run,
        }


def _normalize(l0, l1):
    norm = np.logaddexp(l0, l1)
    return l0 - norm, l1 - norm


def decode_bp(g: MeasurementGraph, y: MeasurementVector, cfg: BpConfig,
              backend: str | None = None, callback=None) -> PosteriorResult:
    """Run ``cfg.max_iters`` flooding iterations and return the posteriors.

    ``callback(iteration, q0, q1, m0, m1)`` receives each iteration's
    variable-to-check and check-to-variable messages (probability domain).
    """
    if y.m != g.m:
        raise DimensionMismatch(f"{y.m} measurements for a graph with {g.m} rows")
    deg = g.row_degrees
    if deg.size and deg.max() > MAX_ENUM_DEGREE:
        raise DegreeTooLargeForExactEnumeration(
            f"row degree {int(deg.max())} exceeds {MAX_ENUM_DEGREE} for exact enumeration")
    check = kernels.bp_check_update if backend is None else kernels.get(backend)["bp_check_update"]

    E = g.indices.size
    var = g.indices
    lp0, lp1 = math.log1p(-cfg.prior_one), math.log(cfg.prior_one)
    q0 = np.full(E, lp0)
    q1 = np.full(E, lp1)
    q0, q1 = _normalize(q0, q1)
    m0 = np.empty(E)
    m1 = np.empty(E)
    yv = np.ascontiguousarray(y.values, dtype=np.float64)
    for it in range(1, cfg.max_iters + 1):
        check(g.indptr, g.weights, yv, float(cfg.sigma_z), q0, q1, m0, m1)
        # variable update: prior times all incoming messages except the edge's own
        t0 = lp0 + np.bincount(var, weights=m0, minlength=g.n)
        t1 = lp1 + np.bincount(var, weights=m1, minlength=g.n)
        q0, q1 = _normalize(t0[var] - m0, t1[var] - m1)
        q0 = np.ascontiguousarray(q0)
        q1 = np.ascontiguousarray(q1)
        if callback is not None:
            callback(it, np.exp(q0), np.exp(q1), np.exp(m0), np.exp(m1))
    post0, post1 = _normalize(t0, t1)
    posterior_one = np.exp(post1)
    hard = (posterior_one > 0.5).astype(np.int8)
    return PosteriorResult(posterior_one, BinarySignal(hard), cfg.max_iters)


def _exact_success(b, res):
    return bool(np.array_equal(res.hard_decision.bits, b.bits))


def _pcd_success(b, res, level=0.99):
    sup = b.support
    if sup.size == 0:
        return True
    return float(res.hard_decision.bits[sup].mean()) >= level


def _nonzero_success(b, res):
    return _pcd_success(b, res, level=1.0)


CRITERIA = {"exact": _exact_success, "pcd": _pcd_success, "nonzeros": _nonzero_success}


def min_sampling_ratio(n: int, k: int, L: int, snr_db: float, betas, trials: int = 50,
                       criterion: str = "exact", required: float = 1.0, seed=0,
                       max_iters: int = DEFAULT_ITERS, backend: str | None = None,
                       D: int | None = None) -> float:
    """Smallest ``beta`` in ``betas`` at which at least ``required`` of the trials succeed.

    ``criterion`` is ``"exact"`` (hard decision equals the signal),
    ``"nonzeros"`` (every nonzero detected, false alarms allowed) or
    ``"pcd"`` (at least 99% of the nonzeros detected).  A grid point is
    abandoned as soon as too many trials have failed.
    """
    from .measure import add_awgn, build_graph, encode, random_signal, snr_to_sigma
    from .weightset import sample_gaussian_weightset

    if trials < 20:
        raise ValueError("use at least 20 trials per grid point")
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    ok = CRITERIA[criterion]
    allowed = trials - math.ceil(required * trials - 1e-9)
    for pi, beta in enumerate(sorted(betas)):
        m = int(round(beta * n))
        if m < 1 or m * L < n:
            continue
        failures = 0
        for ti in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(pi, ti)))
            ws = sample_gaussian_weightset(D or L, rng)
            gr = build_graph(n, m, L, ws, rng)
            b = random_signal(n, k, rng)
            c = encode(gr, b)
            sigma = snr_to_sigma(gr, b, snr_db)
            y = add_awgn(c, sigma, rng)
            cfg = BpConfig(max(sigma, 1e-12), max_iters, k / n if 0 < k < n else DEFAULT_PRIOR)
            if not ok(b, decode_bp(gr, y, cfg, backend=backend)):
                failures += 1
                if failures > allowed:
                    break
        if failures <= allowed:
            return float(beta)
    raise NotAchieved(f"no beta in the grid reached the success criterion (L={L}, {snr_db} dB)")
