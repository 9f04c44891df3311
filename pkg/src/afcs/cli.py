"""Command-line entry point: ``afcs <subcommand> ...``.

Exit codes: 0 success, 1 other library errors, 2 configuration or usage
errors, 3 decode failure when ``--strict`` is given.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import analysis, bp, experiment, measure, sumverify, weightset, wsn
from .errors import AfcsError, AmbiguousMatch, ConfigError

EXIT_CONFIG = 2
EXIT_DECODE = 3


def _write_json(obj, path):
    text = json.dumps(obj, indent=None)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _sibling(path, suffix):
    root, _ = os.path.splitext(path)
    return root + suffix


def cmd_weights(a):
    ws = weightset.sample_gaussian_weightset(a.size, a.seed)
    if a.verify:
        ws = weightset.verified(ws, a.epsilon)
    _write_json(ws.to_dict(), a.out)
    return 0


def cmd_encode(a):
    rng = np.random.default_rng(a.seed)
    ws = (weightset.WeightSet.from_dict(_read_json(a.weights)) if a.weights
          else weightset.sample_gaussian_weightset(a.D or a.L, rng))
    g = measure.build_graph(a.n, a.m, a.L, ws, rng)
    b = measure.random_signal(a.n, a.sparsity, rng)
    c = measure.encode(g, b)
    if a.snr_db is not None and not math.isinf(a.snr_db):
        c = measure.add_awgn(c, measure.snr_to_sigma(g, b, a.snr_db), rng)
    out = a.out or "measurements.json"
    _write_json(c.to_dict(), out)
    _write_json(g.to_dict(), a.graph_out or _sibling(out, ".graph.json"))
    _write_json({"bits": b.bits.tolist()}, a.signal_out or _sibling(out, ".signal.json"))
    return 0


def cmd_decode_sv(a):
    g = measure.MeasurementGraph.from_dict(_read_json(a.graph))
    c = measure.MeasurementVector.from_dict(_read_json(a.measurements))
    try:
        res = sumverify.decode_sv(g, c, a.T, a.eps)
    except AmbiguousMatch as exc:
        print(f"afcs: {exc}", file=sys.stderr)
        return EXIT_DECODE
    _write_json(res.to_dict(), a.out)
    if a.strict and not res.complete:
        print(f"afcs: decoding stalled with {res.unresolved.size} unresolved", file=sys.stderr)
        return EXIT_DECODE
    return 0


def cmd_decode_bp(a):
    g = measure.MeasurementGraph.from_dict(_read_json(a.graph))
    y = measure.MeasurementVector.from_dict(_read_json(a.measurements))
    res = bp.decode_bp(g, y, bp.BpConfig(a.sigma, a.iters, a.prior))
    _write_json(res.to_dict(), a.out)
    return 0


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _emit_csv(header, rows, path):
    fh = _open_out(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([experiment.format_value(v) for v in r])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_analyze(a):
    if a.what == "de":
        q = "static" if a.static_q else a.q_update
        states = analysis.density_evolution(a.L, a.T, a.s, a.beta, a.iters, q_update=q)
        _emit_csv(["iter", "p", "f", "q1"], [(st.iteration, st.p, st.f, st.q1) for st in states], a.out)
    elif a.what == "lopt":
        L_exact, L_approx = analysis.optimal_degree(a.T, a.s, a.L_max)
        _emit_csv(["T", "s", "L_exact", "L_approx"], [(a.T, a.s, L_exact, L_approx)], a.out)
    else:
        mb = analysis.measurement_bounds(a.n, a.s, a.T)
        _emit_csv(["n", "s", "T", "L_opt", "m_lower", "m_upper", "closed_lower", "closed_upper"],
                  [(a.n, a.s, a.T, mb.L_opt, mb.m_lower, mb.m_upper, mb.closed_lower,
                    mb.closed_upper)], a.out)
    return 0


def cmd_wsn(a):
    grid = tuple(a.grid) if a.grid else None
    n = grid[0] * grid[1] if grid else a.events
    sc = wsn.deploy(a.field, n, a.sensors, a.radius, a.deploy, [a.seed, 0],
                    alpha=a.alpha, eta=a.eta, grid_dims=grid)
    snr = math.inf if a.snr_db is None else a.snr_db
    res = wsn.detection_trials(sc, a.active, snr, a.decoder, a.trials, [a.seed, 1], T=a.T,
                               max_iters=a.iters)
    _emit_csv(["trial", "pcd", "pfd", "unresolved"],
              [(i, r.pcd, r.pfd, r.unresolved) for i, r in enumerate(res)], a.out)
    if a.strict and any(r.pcd < 1 for r in res):
        return EXIT_DECODE
    return 0


def cmd_experiment(a):
    with open(a.config) as fh:
        text = fh.read()
    cfg = experiment.validate_config(text)
    if a.out:
        cfg = experiment.ExperimentConfig(**{**cfg.__dict__, "out": a.out})
    rows = experiment.run_experiment(cfg)
    if not cfg.out:
        sys.stdout.write(experiment.rows_to_csv(rows, experiment.COLUMNS[cfg.experiment]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afcs", description="Binary compressive sensing with analog fountain codes.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("weights", help="sample a Gaussian weight set")
    s.add_argument("--size", type=int, required=True, help="number of weights D")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--verify", action="store_true", help="check the uniqueness condition")
    s.add_argument("--epsilon", type=float, default=weightset.DEFAULT_EPSILON)
    s.add_argument("--out")
    s.set_defaults(func=cmd_weights)

    s = sub.add_parser("encode", help="draw a graph and signal and emit measurements")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--L", type=int, required=True)
    s.add_argument("--D", type=int, help="weight-set size (default L)")
    s.add_argument("--weights", help="weight-set JSON to use instead of sampling")
    s.add_argument("--sparsity", type=int, required=True, help="number of ones k")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--snr-db", type=float, help="omit for noiseless measurements")
    s.add_argument("--out", help="measurements JSON (default measurements.json)")
    s.add_argument("--graph-out", help="graph JSON (default <out>.graph.json)")
    s.add_argument("--signal-out", help="signal JSON (default <out>.signal.json)")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode-sv", help="sum-verification decoding")
    s.add_argument("--graph", required=True)
    s.add_argument("--measurements", required=True)
    s.add_argument("--T", type=int, default=2)
    s.add_argument("--eps", type=float, default=sumverify.DEFAULT_EPS)
    s.add_argument("--strict", action="store_true", help="exit 3 unless fully decoded")
    s.add_argument("--out")
    s.set_defaults(func=cmd_decode_sv)

    s = sub.add_parser("decode-bp", help="belief-propagation decoding")
    s.add_argument("--graph", required=True)
    s.add_argument("--measurements", required=True)
    s.add_argument("--sigma", type=float, required=True)
    s.add_argument("--iters", type=int, default=bp.DEFAULT_ITERS)
    s.add_argument("--prior", type=float, default=bp.DEFAULT_PRIOR)
    s.add_argument("--out")
    s.set_defaults(func=cmd_decode_bp)

    s = sub.add_parser("analyze", help="density evolution and degree analysis")
    asub = s.add_subparsers(dest="what", required=True)
    d = asub.add_parser("de", help="density-evolution trajectory as CSV")
    d.add_argument("--L", type=int, required=True)
    d.add_argument("--T", type=int, required=True)
    d.add_argument("--s", type=float, required=True)
    d.add_argument("--beta", type=float, required=True)
    d.add_argument("--iters", type=int, default=analysis.DEFAULT_ITERS)
    d.add_argument("--q-update", choices=analysis.Q_UPDATES, default="split")
    d.add_argument("--static-q", action="store_true", help="hold q1 at s (same as --q-update static)")
    d.add_argument("--out")
    d = asub.add_parser("lopt", help="optimal measurement degree")
    d.add_argument("--T", type=int, required=True)
    d.add_argument("--s", type=float, required=True)
    d.add_argument("--L-max", type=int, default=analysis.DEFAULT_L_MAX)
    d.add_argument("--out")
    d = asub.add_parser("bounds", help="measurement-count bracket")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--s", type=float, required=True)
    d.add_argument("--T", type=int, required=True)
    d.add_argument("--out")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("wsn", help="sparse event detection trials")
    s.add_argument("--field", type=float, default=500.0)
    s.add_argument("--events", type=int, default=256)
    s.add_argument("--grid", type=int, nargs=2, metavar=("NX", "NY"), help="grid model with NX*NY cells")
    s.add_argument("--sensors", type=int, required=True)
    s.add_argument("--radius", type=float, required=True)
    s.add_argument("--deploy", choices=wsn.DEPLOYMENTS, default="uniform")
    s.add_argument("--active", type=int, required=True)
    s.add_argument("--snr-db", type=float, help="omit for noiseless")
    s.add_argument("--decoder", choices=wsn.DECODERS, default="sumverify")
    s.add_argument("--T", type=int, default=2)
    s.add_argument("--iters", type=int, default=bp.DEFAULT_ITERS)
    s.add_argument("--alpha", type=float, default=wsn.DEFAULT_ALPHA)
    s.add_argument("--eta", type=float, default=wsn.DEFAULT_ETA)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--strict", action="store_true", help="exit 3 if any trial misses an active event")
    s.add_argument("--out")
    s.set_defaults(func=cmd_wsn)

    s = sub.add_parser("experiment", help="run a configured sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="override the config's output path")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except ConfigError as exc:
        for v in exc.violations:
            print(f"afcs: config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except (AfcsError, ValueError, OSError) as exc:
        print(f"afcs: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, (ValueError, OSError)) else 1


if __name__ == "__main__":
    sys.exit(main())
