"""Timing comparison of the numba kernels against their numpy fallbacks.

Run as `python -m reconxfer.benchmark` or `reconxfer bench`. The numba
variants are warmed up once before timing so compilation is excluded.
"""

import time

import numpy as np

from . import kernels
from .backend import HAVE_NUMBA
from .tasks.d2d import D2dConfig, generate_networks


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        tic = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - tic)
    return best


def run_benchmark(count=256, n_links=10, fp_iters=100, repeats=3):
    cfg = D2dConfig(n_links=n_links)
    batch = generate_networks(count, seed=0, cfg=cfg)
    gains = batch.gains
    powers = np.full((count, n_links), 0.5 * cfg.pmax_w)
    pmax = np.full(n_links, cfg.pmax_w)
    noise = cfg.noise_w

    cases = [
        ("link_rates",
         lambda: kernels._link_rates_np(gains, powers, noise),
         lambda: kernels._link_rates_nb(gains, powers, noise)),
        ("sum_rate_grad",
         lambda: kernels._sum_rate_grad_np(gains, powers, noise),
         lambda: kernels._sum_rate_grad_nb(gains, powers, noise)),
        ("fp_solve",
         lambda: kernels._fp_solve_np(gains, pmax, noise, fp_iters),
         lambda: kernels._fp_solve_nb(gains, pmax, noise, fp_iters)),
        ("maxmin_solve",
         lambda: kernels._maxmin_solve_np(gains, pmax, noise, 1e-4, 5000),
         lambda: kernels._maxmin_solve_nb(gains, pmax, noise, 1e-4, 5000)),
    ]

    rows = []
    for name, np_fn, nb_fn in cases:
        t_np = _time(np_fn, repeats)
        if HAVE_NUMBA:
            nb_fn()  # warm the JIT cache
            t_nb = _time(nb_fn, repeats)
            rows.append((name, t_np, t_nb, t_np / t_nb))
        else:
            rows.append((name, t_np, float("nan"), float("nan")))
    return rows


def main(argv=None):
    import argparse

    parser = argparse.ArgumentParser(
        description="compare numba kernels with the numpy fallback")
    parser.add_argument("--count", type=int, default=256,
                        help="number of networks per kernel call")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    rows = run_benchmark(count=args.count, repeats=args.repeats)
    print(f"{args.count} networks per call; best of {args.repeats} runs")
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, t_np, t_nb, speedup in rows:
        nb = f"{t_nb * 1e3:12.2f}" if np.isfinite(t_nb) else f"{'n/a':>12}"
        sp = f"{speedup:10.1f}" if np.isfinite(speedup) else f"{'n/a':>10}"
        print(f"{name:<16}{t_np * 1e3:12.2f}{nb}{sp}")
    if not HAVE_NUMBA:
        print("numba is not importable; only the numpy path was timed")


if __name__ == "__main__":
    main()
