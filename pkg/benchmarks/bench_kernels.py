"""Time the compiled and pure-Python kernels on the same grown network.

Usage: python benchmarks/bench_kernels.py [--steps 400] [--repeat 5]
"""
import argparse
import time

import numpy as np

from ll0 import _pykernels
from ll0.datasets import StreamConfig, gen_spirals, stream
from ll0.graph import init_from_first_point
from ll0.harness import ll0_step
from ll0.learning import LearnConfig, output_delta
from ll0.rules import RuleConfig

try:
    from ll0 import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def grow(steps):
    s = stream(gen_spirals(), StreamConfig())
    X, Y, labels = s.train.X, s.train.Y, s.train.labels
    net = init_from_first_point(X[0], Y[0])
    rules = RuleConfig(act_threshold=0.99, sigma_init=0.1)
    learn = LearnConfig(1e-4)
    for i in range(steps):
        ll0_step(net, X[i], Y[i], labels[i], rules, learn)
    return net, s.test.X


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    net, Xt = grow(args.steps)
    plan = net.plan()
    ka = plan.kernel_args()
    x = np.ascontiguousarray(Xt[0])
    acts, _ = _pykernels.forward(*ka, x)
    dz = output_delta(acts[plan.out_pos], np.eye(net.n_outputs)[0])
    print(f"network: {len(net.nodes)} nodes, {len(net.edges)} edges; batch of {len(Xt)}")
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    results = {}
    for name, k in backends:
        results[name] = (
            timeit(lambda: [k.forward(*ka, x) for _ in range(100)], args.repeat) / 100,
            timeit(lambda: k.forward_batch(*ka, Xt), args.repeat),
            timeit(lambda: [k.backward(*ka, acts, dz) for _ in range(100)], args.repeat) / 100,
        )
    print(f"{'backend':8s} {'forward':>12s} {'batch':>12s} {'backward':>12s}")
    for name, (f, b, g) in results.items():
        print(f"{name:8s} {f * 1e6:10.1f}us {b * 1e3:10.2f}ms {g * 1e6:10.1f}us")
    if "cython" in results:
        sp = [p / c for p, c in zip(results["python"], results["cython"])]
        print("speedup  " + " ".join(f"{s:11.1f}x" for s in sp))
    else:
        print("compiled extension not available; only the fallback was timed")


if __name__ == "__main__":
    main()
