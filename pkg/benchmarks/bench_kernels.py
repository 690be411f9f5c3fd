"""Time the compiled and pure-Python kernel backends on typical problem sizes.

    python benchmarks/bench_kernels.py [--repeat 5] [--n 40] [--T 250]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from marketnet.kernels import available_backends, load_backend


def _problems(n: int, T: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((T, n))
    X = (X - X.mean(0)) / X.std(0)
    S = X.T @ X / T
    G = np.ascontiguousarray(S[1:, 1:])
    c = np.ascontiguousarray(S[1:, 0])
    lam = 0.1 * float(np.max(np.abs(c)))

    A = rng.standard_normal((n, n))
    A = 0.5 * (A + A.T)

    y = rng.standard_normal(2000) * 0.01
    theta = np.array([0.0, 0.1, -0.1, 1e-5, 0.08, 0.9])

    Z = rng.standard_normal((T, min(n, 20)))
    Qbar = np.corrcoef(Z, rowvar=False)
    return {
        "lasso_cd_gram": lambda k: k.lasso_cd_gram(G, c, lam, np.zeros(n - 1), 1e-7, 10_000),
        "jacobi_eigh": lambda k: k.jacobi_eigh(A.copy(), 1e-10, 100),
        "garch_loglik": lambda k: k.garch_loglik(y, theta, float(np.var(y)), True),
        "dcc_loglik": lambda k: k.dcc_loglik(Z, Qbar, 0.05, 0.9),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--T", type=int, default=250)
    args = ap.parse_args(argv)

    backends = {name: load_backend(name) for name in available_backends()}
    probs = _problems(args.n, args.T)
    print(f"backends: {', '.join(backends)}   n={args.n} T={args.T}")
    print(f"{'kernel':<16}" + "".join(f"{b + ' [ms]':>16}" for b in backends) + f"{'speedup':>10}")
    for name, fn in probs.items():
        times = {}
        for b, mod in backends.items():
            number = 3
            t = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
            times[b] = t
        line = f"{name:<16}" + "".join(f"{1e3 * times[b]:>16.3f}" for b in backends)
        if "cython" in times and "python" in times:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
