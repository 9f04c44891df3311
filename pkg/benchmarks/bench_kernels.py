"""Compare the compiled and pure-Python kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from afcs import kernels
from afcs.bp import BpConfig, decode_bp
from afcs.measure import add_awgn, build_graph, encode, random_signal, snr_to_sigma
from afcs.sumverify import decode_sv
from afcs.weightset import sample_gaussian_weightset


def _instance(n, m, L, k, seed):
    rng = np.random.default_rng(seed)
    g = build_graph(n, m, L, sample_gaussian_weightset(L, rng), rng)
    b = random_signal(n, k, rng)
    return g, b, encode(g, b), rng


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if "cython" in kernels.available() else [])
    cases = []
    for T in (1, 2):
        g, b, c, _ = _instance(1000, 150, 25, 100, T)
        cases.append((f"peel n=1000 m=150 L=25 T={T}",
                      lambda be, g=g, c=c, T=T: decode_sv(g, c, T, backend=be)))
    for L, m in ((8, 240), (12, 160)):
        g, b, c, rng = _instance(1000, m, L, 100, L)
        sigma = snr_to_sigma(g, b, 30)
        y = add_awgn(c, sigma, rng)
        cfg = BpConfig(sigma, 30, 0.1)
        cases.append((f"bp n=1000 m={m} L={L} F=30",
                      lambda be, g=g, y=y, cfg=cfg: decode_bp(g, y, cfg, backend=be)))
    print(f"{'case':36s}" + "".join(f"{be:>12s}" for be in backends) + "     speedup")
    for name, fn in cases:
        t = {be: _best(lambda: fn(be), args.repeat if be == "cython" else 1) for be in backends}
        line = f"{name:36s}" + "".join(f"{t[be]:11.4f}s" for be in backends)
        if len(backends) == 2:
            line += f"  {t['python'] / t['cython']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
