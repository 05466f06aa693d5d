"""Time every hot kernel under the numba and the numpy backend.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each kernel is called once per backend before timing so that numba
compilation (or cache loading) is excluded; the best of ``--repeat`` runs is
reported together with the speed-up.
"""
import argparse
import time

import numpy as np

from pabandits import _accel
from pabandits.env import TABLE3
from pabandits.geometry import ConvexBody, cut, interior_point
from pabandits.ipa import noise_stream


def make_body(d=3, n_cuts=12, seed=0):
    rng = np.random.default_rng(seed)
    body = ConvexBody.ball(d)
    for _ in range(n_cuts):
        x = interior_point(body)
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
        body = cut(body, w, float(x @ w) + 0.05, "le")
    return body


def cases():
    body = make_body()
    rng = np.random.default_rng(1)
    W = rng.standard_normal((45, 3))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    U = np.array([[1.0], [0.0], [0.0]])
    X = rng.uniform(-1, 1, (2000, 3))
    X[:, 0] = 0.0
    x0 = interior_point(body)
    V = np.zeros((0, 3))
    T = 10_000
    z = noise_stream(0, T)
    offers = TABLE3.s.max() - TABLE3.s + 1e-4
    coin = rng.random(T)
    pick = rng.integers(TABLE3.K, size=T)
    return {
        "maximize (d=3, 18 halfspaces)": lambda: _accel.maximize(body.G, body.b, W[0]),
        "widths (45 directions)": lambda: _accel.widths(body.G, body.b, W),
        "fibres_feasible (2000 fibres)": lambda: _accel.fibres_feasible(body.G, body.b, X, U),
        "hit_and_run (4096 x thin 8)": lambda: _accel.hit_and_run(body.G, body.b, x0, V, np.random.default_rng(2), 4096, 200, 8),
        "ucb_play (T=1e4, K=5)": lambda: _accel.ucb_play(TABLE3.theta, TABLE3.s, offers, 1.0, z, T),
        "eps_principal_play (T=1e4)": lambda: _accel.eps_principal_play(TABLE3.theta, TABLE3.s, 1.0, z, coin, pick, 500.0, 1.0, T),
    }


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':34s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speed-up':>9s}")
    for name, fn in cases().items():
        with _accel.using_backend("numba"):
            fast = best_time(fn, args.repeat)
        with _accel.using_backend("numpy"):
            slow = best_time(fn, args.repeat)
        print(f"{name:34s} {fast * 1e3:11.3f} {slow * 1e3:11.3f} {slow / fast:8.1f}x")


if __name__ == "__main__":
    main()
