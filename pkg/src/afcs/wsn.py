"""Sparse event detection in a sensor network as a binary compressive-sensing problem.

Sensors observe the sum of path-loss gains of the active events inside their
sensing disc; the resulting channel matrix plays the role of the measurement
graph, so either decoder can recover the active set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom, norm

from .bp import BpConfig, decode_bp
from .errors import NotPerfectSquare
from .measure import BinarySignal, MeasurementGraph, MeasurementVector, add_awgn, encode
from .sumverify import DEFAULT_EPS, decode_sv

D_FLOOR = 1.0
DEFAULT_ALPHA = 3.0
DEFAULT_ETA = 1.0
DEPLOYMENTS = ("random", "uniform")
DECODERS = ("bp", "sumverify")
# quadrature nodes for disc/square overlap areas
OVERLAP_NODES = 4096


@dataclass(frozen=True, eq=False)
class WsnScenario:
    field_side: float
    n_events: int
    m_sensors: int
    R_s: float
    deployment: str
    event_positions: np.ndarray
    sensor_positions: np.ndarray
    alpha: float = DEFAULT_ALPHA
    eta: float = DEFAULT_ETA
    grid_dims: tuple[int, int] | None = None

    def __post_init__(self):
        if self.deployment not in DEPLOYMENTS:
            raise ValueError(f"unknown deployment {self.deployment!r}")
        ev = np.asarray(self.event_positions, dtype=float).reshape(-1, 2)
        se = np.asarray(self.sensor_positions, dtype=float).reshape(-1, 2)
        if ev.shape[0] != self.n_events or se.shape[0] != self.m_sensors:
            raise ValueError("position counts do not match n_events / m_sensors")
        for pts in (ev, se):
            if pts.size and (pts.min() < 0 or pts.max() > self.field_side):
                raise ValueError("positions must lie inside the field")
        object.__setattr__(self, "event_positions", ev)
        object.__setattr__(self, "sensor_positions", se)

    @property
    def area(self) -> float:
        return self.field_side ** 2

    @property
    def P(self) -> float:
        """Coverage fraction of one sensing disc, ignoring the field boundary."""
        return math.pi * self.R_s ** 2 / self.area

    def distances(self) -> np.ndarray:
        """(m, n) sensor-to-event distances."""
        diff = self.sensor_positions[:, None, :] - self.event_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def with_events(self, event_positions) -> "WsnScenario":
        ev = np.asarray(event_positions, dtype=float).reshape(-1, 2)
        return WsnScenario(self.field_side, ev.shape[0], self.m_sensors, self.R_s,
                           self.deployment, ev, self.sensor_positions, self.alpha,
                           self.eta, self.grid_dims)


@dataclass(frozen=True)
class DetectionMetrics:
    pcd: float
    pfd: float


def lattice_positions(m: int, side: float) -> np.ndarray:
    """Centered sqrt(m) x sqrt(m) lattice with half-spacing offset from the border."""
    r = math.isqrt(m)
    if r * r != m:
        raise NotPerfectSquare(f"uniform deployment needs a perfect square, got m={m}")
    a = side / r
    c = (np.arange(r) + 0.5) * a
    xx, yy = np.meshgrid(c, c, indexing="xy")
    return np.column_stack([xx.ravel(), yy.ravel()])


def grid_centers(nx: int, ny: int, side: float) -> np.ndarray:
    cx = (np.arange(nx) + 0.5) * side / nx
    cy = (np.arange(ny) + 0.5) * side / ny
    xx, yy = np.meshgrid(cx, cy, indexing="xy")
    return np.column_stack([xx.ravel(), yy.ravel()])


def deploy(field_side: float, n_events: int, m_sensors: int, R_s: float,
           deployment: str = "random", rng_seed=None, alpha: float = DEFAULT_ALPHA,
           eta: float = DEFAULT_ETA, grid_dims: tuple[int, int] | None = None) -> WsnScenario:
    """Place sensors and events in a square field.

    Sensors are i.i.d. uniform (``random``) or on a centered lattice
    (``uniform``).  Events are i.i.d. uniform unless ``grid_dims`` is given,
    in which case each event is a grid cell located at its center.
    """
    if deployment not in DEPLOYMENTS:
        raise ValueError(f"unknown deployment {deployment!r}")
    rng = np.random.default_rng(rng_seed)
    if deployment == "uniform":
        sensors = lattice_positions(m_sensors, field_side)
    else:
        sensors = rng.random((m_sensors, 2)) * field_side
    if grid_dims is not None:
        nx, ny = grid_dims
        if nx * ny != n_events:
            raise ValueError("grid_dims must multiply to n_events")
        events = grid_centers(nx, ny, field_side)
    else:
        events = rng.random((n_events, 2)) * field_side
    return WsnScenario(field_side, n_events, m_sensors, R_s, deployment, events, sensors,
                       alpha, eta, None if grid_dims is None else tuple(grid_dims))


def channel_matrix(sc: WsnScenario) -> MeasurementGraph:
    """Sensor-by-event gains eta / max(d, 1)^(alpha/2) for every event in the closed disc."""
    d = sc.distances()
    mask = d <= sc.R_s
    rows, cols = np.nonzero(mask)
    gains = sc.eta / np.maximum(d[rows, cols], D_FLOOR) ** (sc.alpha / 2)
    indptr = np.zeros(sc.m_sensors + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(mask.sum(axis=1))
    return MeasurementGraph(sc.n_events, indptr, cols, gains)


def empirical_degrees(sc: WsnScenario) -> tuple[np.ndarray, np.ndarray]:
    """(sensor degrees, event degrees) of a deployed scenario."""
    mask = sc.distances() <= sc.R_s
    return mask.sum(axis=1), mask.sum(axis=0)


def _binom_pmf(N: int, p: float) -> np.ndarray:
    return binom.pmf(np.arange(N + 1), N, p)


def disc_overlap_fraction(points, R: float, side: float, nodes: int = OVERLAP_NODES) -> np.ndarray:
    """Fraction of the field covered by a radius-R disc centered at each point.

    The disc/square intersection area is integrated column by column with
    the midpoint rule.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    t = (np.arange(nodes) + 0.5) / nodes * 2 - 1
    x = pts[:, :1] + R * t
    h = R * np.sqrt(1 - t * t)
    lo = np.maximum(pts[:, 1:] - h, 0.0)
    hi = np.minimum(pts[:, 1:] + h, side)
    chord = np.clip(hi - lo, 0.0, None) * ((x >= 0) & (x <= side))
    return chord.sum(axis=1) * (2 * R / nodes) / side ** 2


def _mixture(fracs, N: int) -> np.ndarray:
    return np.mean([_binom_pmf(N, f) for f in np.atleast_1d(fracs)], axis=0)


def _field_samples(side: float, per_axis: int) -> np.ndarray:
    c = (np.arange(per_axis) + 0.5) * side / per_axis
    xx, yy = np.meshgrid(c, c)
    return np.column_stack([xx.ravel(), yy.ravel()])


def sensor_degree_dist(sc: WsnScenario, model: str = "closed",
                       resolution: int = 100) -> dict[str, np.ndarray | None]:
    """Analytical sensor- and event-degree pmfs.

    ``model="closed"`` uses the closed forms: binomials with coverage
    probability P for random deployment; for uniform deployment the
    corner/edge/interior mixture with P/4, P/2, P (the event pmf is then
    ``None``).  ``model="geometric"`` accounts for discs clipped by the field
    boundary, averaging over a ``resolution`` x ``resolution`` grid of
    positions where a position is random.
    """
    n, m, P = sc.n_events, sc.m_sensors, sc.P
    if not P < 1:
        raise ValueError("coverage fraction P must be below 1")
    if model == "closed":
        if sc.deployment == "random":
            return {"sensor": _binom_pmf(n, P), "event": _binom_pmf(m, P)}
        r = math.isqrt(m)
        if r * r != m:
            raise NotPerfectSquare(f"m={m} is not a perfect square")
        if r == 1:
            a1, a2, a3 = 1.0, 0.0, 0.0
        else:
            a2 = 4 / m
            a3 = 4 * (r - 2) / m
            a1 = 1 - a2 - a3
        pmf = a1 * _binom_pmf(n, P) + a2 * _binom_pmf(n, P / 4) + a3 * _binom_pmf(n, P / 2)
        return {"sensor": pmf, "event": None}
    if model != "geometric":
        raise ValueError(f"unknown model {model!r}")
    side, R = sc.field_side, sc.R_s
    samples = _field_samples(side, resolution)
    if sc.deployment == "uniform":
        sensor = _mixture(disc_overlap_fraction(sc.sensor_positions, R, side), n)
        d = np.hypot(*(samples[:, None, :] - sc.sensor_positions[None, :, :]).transpose(2, 0, 1))
        deg = (d <= R).sum(axis=1)
        event = np.bincount(deg, minlength=m + 1)[:m + 1] / deg.size
        return {"sensor": sensor, "event": event}
    fr = disc_overlap_fraction(samples, R, side)
    return {"sensor": _mixture(fr, n), "event": _mixture(fr, m)}


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    size = max(p.size, q.size)
    p = np.pad(p, (0, size - p.size))
    q = np.pad(q, (0, size - q.size))
    return 0.5 * float(np.abs(p - q).sum())


def coverage_lower_bounds(S: float, R_s: float, zeta: float) -> tuple[int, int]:
    """(uniform-deployment minimum, random-deployment minimum) sensor counts."""
    if not 0 < zeta < 1:
        raise ValueError("zeta must lie in (0, 1)")
    ratio = math.sqrt(S) / (2 * R_s)
    m_uniform = math.ceil(ratio) ** 2 + (math.floor(ratio) + 1) ** 2
    P = math.pi * R_s ** 2 / S
    if P >= 1:
        return m_uniform, 1
    return m_uniform, math.ceil(math.log(zeta) / math.log1p(-P))


def pfd_upper_bound(m: int, R_s: float, S: float, sigma_z: float) -> float:
    P = math.pi * R_s ** 2 / S
    if not 0 < P < 1:
        raise ValueError("coverage fraction P must lie in (0, 1)")
    if sigma_z == 0:
        return 0.0
    arg = math.sqrt(m * P * (1 - P) * R_s ** -0.75) / (2 * sigma_z)
    return float(norm.sf(arg))


def detection_metrics(truth: BinarySignal, estimate: np.ndarray) -> DetectionMetrics:
    b = truth.bits.astype(bool)
    e = np.asarray(estimate).astype(bool)
    k = int(b.sum())
    pcd = 1.0 if k == 0 else float((b & e).sum() / k)
    pfd = 0.0 if k == truth.n else float((~b & e).sum() / (truth.n - k))
    return DetectionMetrics(pcd, pfd)


@dataclass(frozen=True)
class TrialOutcome:
    pcd: float
    pfd: float
    unresolved: int


def detection_trials(sc: WsnScenario, k: int, snr_db: float = math.inf, decoder: str = "sumverify",
                     trials: int = 100, rng_seed=0, T: int = 2, eps: float = DEFAULT_EPS,
                     max_iters: int = 30, redeploy_events: bool = True) -> list[TrialOutcome]:
    """Per-trial detection outcomes.

    Each trial redraws the event positions (unless the scenario is a grid or
    ``redeploy_events`` is false) and the active set, forms ``x = He + z``
    and decodes it.  The noise level follows the per-measurement SNR of the
    realized ``He``; if ``He`` is zero the trial is noiseless.
    """
    if decoder not in DECODERS:
        raise ValueError(f"unknown decoder {decoder!r}")
    if decoder == "sumverify" and not math.isinf(snr_db):
        raise ValueError("sum verification needs noiseless measurements (snr_db=inf)")
    if not 0 <= k <= sc.n_events:
        raise ValueError("k must lie in [0, n_events]")
    ss = np.random.SeedSequence(rng_seed)
    out = []
    g = channel_matrix(sc)
    for child in ss.spawn(trials):
        rng = np.random.default_rng(child)
        cur = sc
        if redeploy_events and sc.grid_dims is None:
            cur = sc.with_events(rng.random((sc.n_events, 2)) * sc.field_side)
            g = channel_matrix(cur)
        bits = np.zeros(sc.n_events, dtype=np.int8)
        bits[rng.choice(sc.n_events, size=k, replace=False)] = 1
        b = BinarySignal(bits)
        c = encode(g, b)
        if decoder == "sumverify":
            res = decode_sv(g, c, T, eps)
            est, unresolved = res.signal.bits, int(res.unresolved.size)
        else:
            power = float(c.values @ c.values)
            sigma = 0.0
            if power > 0 and not math.isinf(snr_db):
                sigma = math.sqrt(power / (g.m * 10.0 ** (snr_db / 10.0)))
            y = add_awgn(c, sigma, rng) if sigma > 0 else c
            prior = k / sc.n_events if 0 < k < sc.n_events else 0.05
            res = decode_bp(g, y, BpConfig(max(sigma, 1e-12), max_iters, prior))
            est, unresolved = res.hard_decision.bits, 0
        met = detection_metrics(b, est)
        out.append(TrialOutcome(met.pcd, met.pfd, unresolved))
    return out


def simulate_detection(sc: WsnScenario, k: int, snr_db: float = math.inf, decoder: str = "sumverify",
                       trials: int = 100, rng_seed=0, **kw) -> DetectionMetrics:
    """Average PCD and PFD over ``trials`` seeded trials."""
    res = detection_trials(sc, k, snr_db, decoder, trials, rng_seed, **kw)
    return DetectionMetrics(float(np.mean([r.pcd for r in res])),
                            float(np.mean([r.pfd for r in res])))
