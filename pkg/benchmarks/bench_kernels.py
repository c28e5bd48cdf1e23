"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 2048] [--repeat 5] [--end-to-end]

End-to-end mode profiles the default model on 2 documents of ``--n``
tokens once per backend by swapping the kernel table.
"""

import argparse
import time

import numpy as np

from ropelab import _backend, _fallback

try:
    from ropelab import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(n, d):
    rng = np.random.default_rng(0)
    scores = rng.standard_normal((n, n))
    scale = np.full(n, 1 / np.sqrt(d))
    ent = np.empty(n)
    x = rng.standard_normal((n, d))
    ang = rng.uniform(0, 100, (n, d // 2))
    cos_t, sin_t = np.cos(ang), np.sin(ang)
    out = np.empty_like(x)
    draws = np.empty(4_000_000)

    def softmax(impl):
        return lambda: impl.causal_softmax_entropy(scores.copy(), scale, ent)

    def rope(impl):
        return lambda: impl.rope_rotate(x, cos_t, sin_t, out)

    def splitmix(impl):
        return lambda: impl.splitmix64_fill(1, 0, draws, -0.02, 0.02)

    return {
        f"causal_softmax_entropy n={n}": softmax,
        f"rope_rotate n={n} d={d}": rope,
        "splitmix64_fill 4M draws": splitmix,
    }


def end_to_end(impl, n):
    from ropelab.model import ModelSpec, init_weights
    from ropelab.profiler import DocumentSet, ModelInputs, profile
    from ropelab.rope import RopeConfig
    from ropelab.scaling import ScalingPolicy

    for name in ("splitmix64_fill", "splitmix64_raw", "rope_rotate", "causal_softmax_entropy"):
        setattr(_backend, name, getattr(impl, name))
    spec = ModelSpec()
    weights = init_weights(spec)
    rng = np.random.default_rng(1)
    docs = DocumentSet([rng.integers(0, spec.vocab_size, n) for _ in range(2)])
    model = ModelInputs(spec, weights, RopeConfig(d=spec.d_head), ScalingPolicy())
    t0 = time.perf_counter()
    profile(model, docs, [n - 1])
    return time.perf_counter() - t0


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=2048)
    parser.add_argument("--d", type=int, default=32)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--end-to-end", action="store_true")
    args = parser.parse_args()

    impls = {"python": _fallback}
    if _kernels is not None:
        impls["cython"] = _kernels
    else:
        print("compiled kernels not built; timing the fallback only")

    print(f"{'kernel':<36}" + "".join(f"{name:>12}" for name in impls) + f"{'speedup':>10}")
    for label, make in kernel_cases(args.n, args.d).items():
        times = {name: best_of(make(impl), args.repeat) for name, impl in impls.items()}
        row = f"{label:<36}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times.values())
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)

    if args.end_to_end:
        times = {name: end_to_end(impl, args.n) for name, impl in impls.items()}
        row = f"{'profile 2 docs, default model':<36}" + "".join(f"{t:>11.2f}s" for t in times.values())
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
