"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--frames 200000] [--m 10] [--repeat 3]

Both paths are called directly, so the FDCR_NUMBA flag does not matter here.
Outputs are compared before timing.
"""
import argparse
import time

import numpy as np

from fdcr import kernels
from fdcr._jit import HAS_NUMBA
from fdcr.predictor import init_mlp
from fdcr.traffic import TrafficModel, sample_timeline


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=200_000)
    ap.add_argument("--nn-frames", type=int, default=20_000)
    ap.add_argument("--m", type=int, default=10)
    ap.add_argument("--n", type=int, default=75)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    m, n = args.m, args.n

    n_slots = n + args.frames * m
    tl = sample_timeline(TrafficModel(0.1, 0.1), n_slots * 1e-3, 1e-3, 1)
    labels = tl.slots[:n_slots]
    rng = np.random.default_rng(0)
    u = rng.random(labels.size)
    preds = rng.choice(np.array([-1, 1], np.int8), size=args.frames)
    net = init_mlp(n, rng)
    probs = (0.01, 0.999, 0.01, 0.99)

    def nn_call(fn):
        obs = np.empty(n + args.nn_frames * m)
        obs[:n] = labels[:n]
        return fn(labels, u, obs, net.w1, net.b1, net.w2, net.b2, net.w3, net.b3, n, m, args.nn_frames, *probs)

    cases = {
        "label_slots": (lambda f: f(tl.transitions, tl.initial_state, n_slots, 1e-3),
                        kernels.label_slots_nb, kernels.label_slots_np, n_slots, "slots"),
        "run_frames": (lambda f: f(labels, u, preds, n, m, *probs),
                       kernels.run_frames_nb, kernels.run_frames_np, args.frames, "frames"),
        "run_nn_frames": (nn_call, kernels.run_nn_frames_nb, kernels.run_nn_frames_np, args.nn_frames, "frames"),
    }
    print(f"numba available: {HAS_NUMBA}")
    print(f"{'kernel':<15}{'size':>10}  {'numba s':>9}  {'numpy s':>9}  {'speedup':>8}")
    for name, (call, fnb, fnp, size, unit) in cases.items():
        a, b = call(fnb), call(fnp)   # warm-up and JIT compile
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            assert np.allclose(x, y, rtol=0, atol=1e-12), name
        t_nb = best_of(lambda: call(fnb), args.repeat)
        t_np = best_of(lambda: call(fnp), args.repeat)
        print(f"{name:<15}{size:>10}  {t_nb:9.4f}  {t_np:9.4f}  {t_np / t_nb:7.1f}x  ({unit})")


if __name__ == "__main__":
    main()
