"""Compare the compiled and NumPy kernels on training-sized inputs.

    python benchmarks/bench_kernels.py [--points 65536] [--width 8] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from reluclosure import _kernels_py

try:
    from reluclosure import _kernels
except ImportError:  # extension not built
    _kernels = None


def make_inputs(n, d, d_in, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, d_in))
    wts = np.full(n, 2.0**d_in / n)
    fx = np.abs(X).sum(axis=1)
    W1 = rng.standard_normal((d, d_in))
    b1 = rng.standard_normal(d)
    W2 = rng.standard_normal(d)
    return X, wts, fx, W1, b1, W2, 0.1


def bench(mod, args, repeat):
    X, wts, fx, W1, b1, W2, b2 = args
    fwd = min(timeit.repeat(lambda: mod.hinge_forward(X, W1, b1, W2, b2), number=1, repeat=repeat))
    grad = min(timeit.repeat(lambda: mod.lp_loss_grad(X, wts, fx, W1, b1, W2, b2, 2.0), number=1, repeat=repeat))
    return fwd, grad


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=65536)
    ap.add_argument("--width", type=int, default=8)
    ap.add_argument("--d-in", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=20)
    a = ap.parse_args()
    inputs = make_inputs(a.points, a.width, a.d_in)
    backends = [("python", _kernels_py)] + ([("cython", _kernels)] if _kernels is not None else [])
    print(f"points={a.points} width={a.width} d_in={a.d_in} (best of {a.repeat})")
    print(f"{'backend':<8} {'forward ms':>11} {'loss+grad ms':>13}")
    res = {}
    for name, mod in backends:
        res[name] = bench(mod, inputs, a.repeat)
        print(f"{name:<8} {1e3 * res[name][0]:11.3f} {1e3 * res[name][1]:13.3f}")
    if len(res) == 2:
        py, cy = res["python"], res["cython"]
        print(f"speedup  {py[0] / cy[0]:11.2f} {py[1] / cy[1]:13.2f}")
        # agreement check
        X, wts, fx, W1, b1, W2, b2 = inputs
        diff = np.max(np.abs(_kernels_py.hinge_forward(X, W1, b1, W2, b2) - _kernels.hinge_forward(X, W1, b1, W2, b2)))
        print(f"max |forward diff| = {diff:.2e}")
    else:
        print("compiled extension not available; run `pip install --no-build-isolation -e .`")


if __name__ == "__main__":
    main()
