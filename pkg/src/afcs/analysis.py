"""Density evolution, degree optimization and measurement-count bounds
for the sum-verification decoder.

Density evolution follows the tree picture: a check verifies the variable
below it when the unresolved nonzero variables among its other ``d = L - 1``
neighbors, plus the variable itself if it is one, number at most ``T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.stats import binom

from .errors import NumericalRange

CONVERGENCE_TOL = 1e-10
DEFAULT_ITERS = 500
DEFAULT_L_MAX = 200
RANGE_TOL = 1e-9
# unresolved edge mass treated as zero
MISS_FLOOR = 1e-15
Q_UPDATES = ("split", "evolving", "static")


@dataclass(frozen=True)
class EdgeDegreeDist:
    beta: float
    L: int
    d_v: int
    v1: float
    v2: float

    def delta(self, x):
        """Edge-perspective variable degree polynomial."""
        x = np.asarray(x, dtype=float)
        bl = self.beta * self.L
        return (self.v1 * self.d_v * x ** (self.d_v - 1)
                + self.v2 * (self.d_v - 1) * x ** max(self.d_v - 2, 0)) / bl

    def Delta(self, x):
        """Node-perspective variable degree polynomial."""
        x = np.asarray(x, dtype=float)
        return self.v1 * x ** self.d_v + self.v2 * x ** (self.d_v - 1)

    @property
    def delta_coefficients(self) -> dict[int, float]:
        bl = self.beta * self.L
        out = {self.d_v - 1: self.v1 * self.d_v / bl}
        if self.d_v >= 2 and self.v2 > 0:
            out[self.d_v - 2] = out.get(self.d_v - 2, 0.0) + self.v2 * (self.d_v - 1) / bl
        return out


def edge_degree_dist(beta: float, L: int) -> EdgeDegreeDist:
    bl = beta * L
    if bl < 1:
        raise ValueError("need beta * L >= 1")
    d_v = math.ceil(bl - 1e-12)
    v1 = 1.0 - d_v + bl
    v2 = d_v - bl
    if abs(v2) < 1e-12:
        v1, v2 = 1.0, 0.0
    return EdgeDegreeDist(beta, L, d_v, v1, v2)


@dataclass(frozen=True)
class DeState:
    iteration: int
    p: float
    f: float
    f0: float
    f1: float
    q0: float
    q1: float
    unresolved: float = 1.0  # fraction of variables not yet recovered (node perspective)

    @property
    def lam(self) -> float:
        return self.q1 / self.q0 if self.q0 > 0 else math.inf


def check_verify_prob(d: int, T: int, p: float, q0: float, q1: float) -> tuple[float, float]:
    """Probabilities that a check verifies its parent as zero (``f0``) and as one (``f1``).

    Double sum over the number ``a`` of already recovered neighbors and the
    number ``j`` of unresolved nonzero ones among the rest.  Their total is the
    usual verification probability; ``f0`` collects the configurations with the parent
    zero and ``f1`` those with the parent one.
    """
    le_tm1 = 0.0
    eq_t = 0.0
    for a in range(d + 1):
        pa = comb(d, a) * p ** a
        rest = d - a
        for j in range(min(T, rest) + 1):
            term = pa * comb(rest, j) * ((1 - p) * q0) ** (rest - j) * ((1 - p) * q1) ** j
            if j <= T - 1:
                le_tm1 += term
            else:
                eq_t += term
    f1 = q1 * le_tm1
    f0 = q0 * (le_tm1 + eq_t)
    return f0, f1


def _verify_given_parent(d: int, T: int, miss: float, q1: float) -> tuple[float, float]:
    """Chance a check verifies its parent when the parent is zero / one.

    The other ``d`` neighbors hide ``N ~ Bin(d, miss * q1)`` unresolved ones;
    a zero parent needs ``N <= T`` and a one parent ``N <= T - 1``.
    """
    r = min(max(miss * q1, 0.0), 1.0)
    return float(binom.cdf(T, d, r)), float(binom.cdf(T - 1, d, r)) if T >= 1 else 0.0


def _clamp(name, x):
    if x < -RANGE_TOL or x > 1 + RANGE_TOL:
        raise NumericalRange(f"{name}={x!r} left [0, 1]")
    return min(max(x, 0.0), 1.0)


def density_evolution(L: int, T: int, s: float, beta: float, iters: int = DEFAULT_ITERS,
                      q_update: str = "split", tol: float = CONVERGENCE_TOL) -> list[DeState]:
    """Recovery-probability trajectory of the sum-verification decoder.

    ``q_update`` picks how the share of ones among unresolved variables moves:

    * ``"split"`` (default) tracks recovery of zero and one variables
      separately, ``p_b = 1 - delta(1 - g_b)`` with ``g_b`` the chance a check
      verifies a parent of value b, and sets ``q1 = s (1 - p_1) / (1 - p)``
      with ``p = (1 - s) p_0 + s p_1``;
    * ``"evolving"`` uses ``q1 = (s - f1) / (1 - p)`` with ``p = 1 - delta(1 - f)``;
    * ``"static"`` keeps ``q1 = s`` with ``p = 1 - delta(1 - f)``.

    ``p`` is the edge-perspective recovery probability; ``unresolved`` uses
    all edges of a variable and is the quantity to compare with a decoder's
    error rate.  Iteration stops once p changes by less than ``tol`` or
    nothing is left unresolved.
    """
    if not 0 <= s < 1:
        raise ValueError("need 0 <= s < 1")
    if q_update not in Q_UPDATES:
        raise ValueError(f"unknown q_update {q_update!r}")
    dist = edge_degree_dist(beta, L)
    d = L - 1
    p, miss, q1 = 0.0, 1.0, s
    states = [DeState(0, 0.0, 0.0, 0.0, 0.0, 1 - s, s, 1.0)]
    for it in range(1, iters + 1):
        f0, f1 = check_verify_prob(d, T, p, 1 - q1, q1)
        f = _clamp("f", f0 + f1)
        if q_update == "split":
            g0, g1 = _verify_given_parent(d, T, miss, q1)
            u0 = (1 - s) * float(dist.delta(1.0 - g0))
            u1 = s * float(dist.delta(1.0 - g1))
            miss = u0 + u1
            unres = (1 - s) * float(dist.Delta(1.0 - g0)) + s * float(dist.Delta(1.0 - g1))
            if miss > MISS_FLOOR:
                q1 = _clamp("q1", u1 / miss)
        else:
            miss = float(dist.delta(1.0 - f))
            unres = float(dist.Delta(1.0 - f))
            if q_update == "evolving" and miss > MISS_FLOOR:
                q1 = _clamp("q1", (s - f1) / miss)
        p_new = _clamp("p", 1.0 - miss)
        states.append(DeState(it, p_new, f, f0, f1, 1 - q1, q1, _clamp("unresolved", unres)))
        done = abs(p_new - p) < tol or miss <= MISS_FLOOR
        p = p_new
        if done:
            break
    return states


def de_threshold(L: int, T: int, s: float, betas, target: float = 1e-3,
                 q_update: str = "split", iters: int = DEFAULT_ITERS) -> float | None:
    """Smallest ``beta`` in ``betas`` whose DE fixed point leaves at most ``target`` of the variables unresolved."""
    for beta in sorted(betas):
        if beta * L < 1:
            continue
        states = density_evolution(L, T, s, beta, iters, q_update)
        if states[-1].unresolved <= target:
            return float(beta)
    return None


def expected_verified(L: int, T: int, s: float) -> float:
    """Average number of variables a single measurement verifies in the first round."""
    if not 0 <= s < 1:
        raise ValueError("need 0 <= s < 1")
    if not 0 <= T:
        raise ValueError("need T >= 0")
    q0 = 1.0 - s
    return L * sum(comb(L, j) * q0 ** (L - j) * s ** j for j in range(min(T, L) + 1))


def optimal_degree(T: int, s: float, L_max: int = DEFAULT_L_MAX) -> tuple[int, int]:
    """``(L_exact, L_approx)``: argmax of :func:`expected_verified` and the closed-form estimate."""
    if not 0 < s < 1:
        raise ValueError("need 0 < s < 1")
    values = [expected_verified(L, T, s) for L in range(1, L_max + 1)]
    L_exact = 1 + int(np.argmax(values))
    L_approx = math.ceil(-(T + 2) / (2 * math.log(1 - s)))
    return L_exact, L_approx


@dataclass(frozen=True)
class MeasurementBounds:
    L_opt: int
    m_lower: int
    m_upper: int
    closed_lower: float
    closed_upper: float


def measurement_bounds(n: int, s: float, T: int) -> MeasurementBounds:
    if not 0 < s < 1:
        raise ValueError("need 0 < s < 1")
    _, L_opt = optimal_degree(T, s, L_max=1)
    log1ms = math.log(1 - s)
    return MeasurementBounds(
        L_opt,
        math.ceil(n / L_opt),
        math.ceil(math.e * n / L_opt),
        -2 * n * log1ms / (T + 2),
        -2 * math.e * n * log1ms / (T + 2),
    )
