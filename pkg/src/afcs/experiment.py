"""Seeded parameter sweeps: config parsing, presets, execution and CSV/manifest output."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__, kernels
from .errors import NotAchieved, NotPerfectSquare, ParseError, RangeError

EXPERIMENTS = ("fig6", "fig7", "fig8", "lopt", "de", "wsn-pcd", "wsn-minbeta", "custom")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int = 1000
    s: tuple[float, ...] = (0.1,)
    k: int | None = None
    L: tuple[int, ...] = (20,)
    T: tuple[int, ...] = (1,)
    betas: tuple[float, ...] = ()
    snr_db: tuple[float, ...] = (math.inf,)
    decoder: str = "sumverify"
    criterion: str = "exact"
    required: float = 1.0
    q_update: str = "split"
    deployment: str = "uniform"
    R_s: tuple[float, ...] = (50.0,)
    field: float = 500.0
    m_sensors: tuple[int, ...] = ()
    max_iters: int = 30
    trials: int = 100
    seed: int = 0
    out: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, val in d.items():
            if isinstance(val, tuple):
                d[key] = [_json_number(v) for v in val]
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _json_number(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


PRESETS: dict[str, dict] = {
    "fig6": {"n": 1000, "s": [0.1], "L": [20, 25, 30], "T": [1],
             "betas": {"start": 0.05, "stop": 0.30, "step": 0.01}, "trials": 200},
    "fig7": {"n": 1000, "s": [0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2],
             "T": [0, 1, 2], "betas": {"start": 0.02, "stop": 0.8, "step": 0.01},
             "required": 0.95, "trials": 100},
    "fig8": {"n": 1000, "k": 100, "L": [8, 10, 12], "snr_db": [20, 25, 30, 35, 40],
             "betas": {"start": 0.1, "stop": 0.5, "step": 0.02}, "decoder": "bp",
             "criterion": "nonzeros", "trials": 50},
    "lopt": {"s": [0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3], "T": [0, 1, 2]},
    "de": {"L": [25], "T": [1, 2], "s": [0.1],
           "betas": {"start": 0.05, "stop": 0.3, "step": 0.01}},
    "wsn-pcd": {"n": 256, "k": 10, "R_s": [50.0], "field": 500.0,
                "m_sensors": [16, 25, 36, 49, 64, 81, 100], "T": [2], "trials": 100},
    "wsn-minbeta": {"n": 256, "s": [0.01, 0.02, 0.04, 0.06], "R_s": [30.0, 40.0, 50.0, 60.0],
                    "field": 500.0, "T": [2], "required": 0.99, "trials": 100,
                    "m_sensors": [r * r for r in range(2, 21)]},
    "custom": {},
}

_SEQ_FIELDS = {"s": float, "L": int, "T": int, "betas": float, "snr_db": float,
               "R_s": float, "m_sensors": int}
_SCALAR_FIELDS = {"n": int, "k": (int, type(None)), "decoder": str, "criterion": str,
                  "required": float, "q_update": str, "deployment": str, "field": float,
                  "max_iters": int, "trials": int, "seed": int, "out": (str, type(None)),
                  "experiment": str}


def _as_number(v, kind):
    if isinstance(v, str) and kind is float and v in ("inf", "-inf"):
        return float(v)
    if isinstance(v, bool):
        raise TypeError
    if kind is int:
        if isinstance(v, int):
            return v
        if isinstance(v, float) and v.is_integer():
            return int(v)
        raise TypeError
    if isinstance(v, (int, float)):
        return float(v)
    raise TypeError


def _expand_range(spec, name, errors):
    try:
        start, stop, step = (float(spec[key]) for key in ("start", "stop", "step"))
    except (KeyError, TypeError, ValueError):
        errors.append(f"{name}: range needs numeric start, stop and step")
        return ()
    if step <= 0:
        errors.append(f"{name}: step must be positive")
        return ()
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(max(count, 0)))


def _parse_fields(raw: dict, errors: list) -> dict:
    out = {}
    known = {f.name for f in fields(ExperimentConfig)}
    for key, val in raw.items():
        if key not in known:
            errors.append(f"{key}: unknown field")
            continue
        if key in _SEQ_FIELDS:
            kind = _SEQ_FIELDS[key]
            if isinstance(val, dict):
                out[key] = _expand_range(val, key, errors)
                continue
            seq = val if isinstance(val, list) else [val]
            try:
                out[key] = tuple(_as_number(v, kind) for v in seq)
            except TypeError:
                errors.append(f"{key}: expected {kind.__name__} values")
        else:
            kind = _SCALAR_FIELDS[key]
            optional = isinstance(kind, tuple)
            base = kind[0] if optional else kind
            if val is None and optional:
                out[key] = None
            elif base is str:
                if isinstance(val, str):
                    out[key] = val
                else:
                    errors.append(f"{key}: expected a string")
            else:
                try:
                    out[key] = _as_number(val, base)
                except TypeError:
                    errors.append(f"{key}: expected {base.__name__}")
    return out


def _range_check(cfg: ExperimentConfig) -> list[str]:
    from .bp import CRITERIA
    from .analysis import Q_UPDATES
    from .wsn import DECODERS, DEPLOYMENTS

    v = []
    if cfg.n < 1:
        v.append("n: must be positive")
    if any(not 0 < s < 1 for s in cfg.s):
        v.append("s: every value must lie in (0, 1)")
    if cfg.k is not None and not 0 <= cfg.k <= cfg.n:
        v.append("k: must lie in [0, n]")
    if any(L < 1 for L in cfg.L):
        v.append("L: must be positive")
    if any(T < 0 for T in cfg.T):
        v.append("T: must be nonnegative")
    if cfg.experiment in ("fig6", "de", "custom") and any(T > L for T in cfg.T for L in cfg.L):
        v.append("T: T exceeds L")
    if any(b <= 0 for b in cfg.betas):
        v.append("betas: must be positive")
    if cfg.decoder not in DECODERS:
        v.append(f"decoder: must be one of {', '.join(DECODERS)}")
    if cfg.criterion not in CRITERIA:
        v.append(f"criterion: must be one of {', '.join(sorted(CRITERIA))}")
    if not 0 < cfg.required <= 1:
        v.append("required: must lie in (0, 1]")
    if cfg.q_update not in Q_UPDATES:
        v.append(f"q_update: must be one of {', '.join(Q_UPDATES)}")
    if cfg.deployment not in DEPLOYMENTS:
        v.append(f"deployment: must be one of {', '.join(DEPLOYMENTS)}")
    if any(r <= 0 for r in cfg.R_s):
        v.append("R_s: must be positive")
    if cfg.field <= 0:
        v.append("field: must be positive")
    if any(m < 1 for m in cfg.m_sensors):
        v.append("m_sensors: must be positive")
    if cfg.max_iters < 1:
        v.append("max_iters: must be positive")
    if cfg.trials < 1:
        v.append("trials: must be positive")
    if cfg.experiment == "fig8" and cfg.trials < 20:
        v.append("trials: fig8 needs at least 20 trials per grid point")
    if cfg.seed < 0:
        v.append("seed: must be nonnegative")
    if cfg.decoder == "sumverify" and any(not math.isinf(g) for g in cfg.snr_db) \
            and cfg.experiment in ("custom", "wsn-pcd"):
        v.append("snr_db: sum verification needs snr_db = inf")
    return v


def validate_config(text: str) -> ExperimentConfig:
    """Parse a JSON config, apply the experiment's preset and check every field.

    Raises :class:`ParseError` for malformed input and :class:`RangeError`
    for out-of-range values; either lists every violation found.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError([f"invalid JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ParseError(["config must be a JSON object"])
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ParseError([f"experiment: must be one of {', '.join(EXPERIMENTS)}"])
    errors: list[str] = []
    merged = {**PRESETS[exp], **raw}
    parsed = _parse_fields(merged, errors)
    if errors:
        raise ParseError(errors)
    cfg = ExperimentConfig(**parsed)
    violations = _range_check(cfg)
    if violations:
        raise RangeError(violations)
    return cfg


def sub_seed(master: int, point: int, trial: int) -> np.random.SeedSequence:
    """Seed for one trial; a pure function of (master seed, point, trial)."""
    return np.random.SeedSequence(master, spawn_key=(point, trial))


# grid construction ---------------------------------------------------------

def _k_for(cfg, s):
    return cfg.k if cfg.k is not None else int(round(s * cfg.n))


def grid_points(cfg: ExperimentConfig) -> list[dict]:
    e = cfg.experiment
    if e in ("fig6", "custom"):
        return [dict(s=s, L=L, T=T, beta=b, snr_db=g) for s, L, T, b, g in
                itertools.product(cfg.s, cfg.L, cfg.T, cfg.betas, cfg.snr_db)]
    if e == "fig7":
        return [dict(s=s, T=T) for s, T in itertools.product(cfg.s, cfg.T)]
    if e == "fig8":
        return [dict(L=L, snr_db=g) for L, g in itertools.product(cfg.L, cfg.snr_db)]
    if e == "lopt":
        return [dict(s=s, T=T) for s, T in itertools.product(cfg.s, cfg.T)]
    if e == "de":
        return [dict(s=s, L=L, T=T, beta=b) for s, L, T, b in
                itertools.product(cfg.s, cfg.L, cfg.T, cfg.betas)]
    if e == "wsn-pcd":
        return [dict(R_s=r, m=m, snr_db=g) for r, m, g in
                itertools.product(cfg.R_s, cfg.m_sensors, cfg.snr_db)]
    if e == "wsn-minbeta":
        return [dict(s=s, R_s=r) for s, r in itertools.product(cfg.s, cfg.R_s)]
    raise ValueError(e)


COLUMNS = {
    "fig6": ["s", "L", "T", "beta", "snr_db", "m", "error_rate_mean", "error_rate_stderr", "trials"],
    "custom": ["s", "L", "T", "beta", "snr_db", "m", "error_rate_mean", "error_rate_stderr", "trials"],
    "fig7": ["s", "T", "L", "beta_min"],
    "fig8": ["L", "snr_db", "beta_min"],
    "lopt": ["s", "T", "L_exact", "L_approx"],
    "de": ["s", "L", "T", "beta", "p_final", "iterations"],
    "wsn-pcd": ["R_s", "m", "snr_db", "beta", "pcd_mean", "pcd_stderr", "pfd_mean",
                "pfd_stderr", "trials"],
    "wsn-minbeta": ["s", "R_s", "k", "m_min", "beta_min"],
}


def _mean_stderr(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _betas_to_ms(cfg, betas):
    return sorted({int(round(b * cfg.n)) for b in betas})


def _run_point(cfg: ExperimentConfig, pi: int, p: dict) -> dict:
    from . import analysis, bp, sumverify, wsn
    from .measure import add_awgn, build_graph, encode, random_signal, snr_to_sigma
    from .weightset import sample_gaussian_weightset

    e = cfg.experiment
    row = dict(p)
    if e in ("fig6", "custom"):
        k = _k_for(cfg, p["s"])
        m = int(round(p["beta"] * cfg.n))
        rates = []
        for ti in range(cfg.trials):
            seed = sub_seed(cfg.seed, pi, ti)
            if cfg.decoder == "sumverify":
                res = sumverify.sv_trial(cfg.n, k, m, p["L"], p["T"], seed)
                rates.append(1.0 if res is None else res.unresolved.size / cfg.n)
            else:
                rng = np.random.default_rng(seed)
                g = build_graph(cfg.n, m, p["L"], sample_gaussian_weightset(p["L"], rng), rng)
                b = random_signal(cfg.n, k, rng)
                sigma = snr_to_sigma(g, b, p["snr_db"]) if k else 0.0
                y = add_awgn(encode(g, b), sigma, rng)
                prior = k / cfg.n if 0 < k < cfg.n else bp.DEFAULT_PRIOR
                res = bp.decode_bp(g, y, bp.BpConfig(max(sigma, 1e-12), cfg.max_iters, prior))
                rates.append(float(np.mean(res.hard_decision.bits != b.bits)))
        row["m"] = m
        row["error_rate_mean"], row["error_rate_stderr"] = _mean_stderr(rates)
        row["trials"] = cfg.trials
    elif e == "fig7":
        L = analysis.optimal_degree(p["T"], p["s"], L_max=1)[1]
        row["L"] = L
        try:
            m = sumverify.min_measurements(cfg.n, _k_for(cfg, p["s"]), L, p["T"],
                                           _betas_to_ms(cfg, cfg.betas), cfg.trials,
                                           cfg.required, seed=[cfg.seed, pi])
            row["beta_min"] = m / cfg.n
        except NotAchieved:
            row["beta_min"] = math.nan
    elif e == "fig8":
        k = cfg.k if cfg.k is not None else _k_for(cfg, cfg.s[0])
        try:
            row["beta_min"] = bp.min_sampling_ratio(
                cfg.n, k, p["L"], p["snr_db"], cfg.betas, cfg.trials, cfg.criterion,
                cfg.required, seed=[cfg.seed, pi], max_iters=cfg.max_iters)
        except NotAchieved:
            row["beta_min"] = math.nan
    elif e == "lopt":
        row["L_exact"], row["L_approx"] = analysis.optimal_degree(p["T"], p["s"])
    elif e == "de":
        states = analysis.density_evolution(p["L"], p["T"], p["s"], p["beta"],
                                            q_update=cfg.q_update)
        row["p_final"] = states[-1].p
        row["iterations"] = states[-1].iteration
    elif e == "wsn-pcd":
        k = cfg.k if cfg.k is not None else _k_for(cfg, cfg.s[0])
        sc = wsn.deploy(cfg.field, cfg.n, p["m"], p["R_s"], cfg.deployment,
                        sub_seed(cfg.seed, pi, 0))
        res = wsn.detection_trials(sc, k, p["snr_db"], cfg.decoder, cfg.trials, [cfg.seed, pi],
                                   T=cfg.T[0], max_iters=cfg.max_iters)
        row["beta"] = p["m"] / cfg.n
        row["pcd_mean"], row["pcd_stderr"] = _mean_stderr([r.pcd for r in res])
        row["pfd_mean"], row["pfd_stderr"] = _mean_stderr([r.pfd for r in res])
        row["trials"] = cfg.trials
    elif e == "wsn-minbeta":
        k = max(1, _k_for(cfg, p["s"]))
        row["k"] = k
        row["m_min"] = math.nan
        row["beta_min"] = math.nan
        for mi, m in enumerate(sorted(cfg.m_sensors)):
            try:
                sc = wsn.deploy(cfg.field, cfg.n, m, p["R_s"], cfg.deployment,
                                sub_seed(cfg.seed, pi, mi))
            except NotPerfectSquare:
                continue
            met = wsn.simulate_detection(sc, k, math.inf, "sumverify", cfg.trials,
                                         [cfg.seed, pi, mi], T=cfg.T[0])
            if met.pcd >= cfg.required:
                row["m_min"], row["beta_min"] = m, m / cfg.n
                break
    return row


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("AFCS_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Run every grid point and return the rows in grid order.

    Grid points run in parallel worker processes (at most ``AFCS_THREADS``);
    each trial's randomness depends only on its sub-seed, so results do not
    depend on the worker count.  If ``cfg.out`` is set, the CSV and a
    manifest next to it are written.
    """
    points = grid_points(cfg)
    workers = min(_threads(), len(points))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_run_point, [cfg] * len(points), range(len(points)), points))
    else:
        rows = [_run_point(cfg, i, p) for i, p in enumerate(points)]
    if cfg.out:
        write_csv(rows, COLUMNS[cfg.experiment], cfg.out)
        with open(manifest_path(cfg.out), "w") as fh:
            json.dump(manifest(cfg), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return rows


def manifest_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return root + ".manifest.json"


def manifest(cfg: ExperimentConfig) -> dict:
    return {
        "config": cfg.to_dict(),
        "afcs_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "seeding": "numpy SeedSequence(seed, spawn_key=(point, trial))",
    }


def format_value(v) -> str:
    """CSV cell: plain decimal, scientific notation below 1e-3, empty for NaN."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v != 0 and abs(v) < 1e-3:
        return f"{v:.6e}"
    return f"{v:.10g}"


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(rows: list[dict], columns: list[str], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, columns))
