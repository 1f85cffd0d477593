"""Compare the compiled LSTM kernel against the numpy fallback.

Times lstm_forward / lstm_backward on a few representative shapes and
prints per-call latency plus the speedup.  Run from the repo root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 500 --sizes 20x32x32
"""

import argparse
import statistics
import time

import numpy as np

from crosscap.nn.kernels import _ref

try:
    from crosscap.nn.kernels import _core
except ImportError:
    _core = None


def make_case(rng, T, E, H):
    return (rng.normal(size=(T, E)),
            rng.normal(size=(E, 4 * H), scale=0.3),
            rng.normal(size=(H, 4 * H), scale=0.3),
            rng.normal(size=4 * H, scale=0.1),
            rng.normal(size=H),
            rng.normal(size=H))


def time_call(fn, args, repeats):
    # warm up, then take the median of per-call wall times
    for _ in range(3):
        fn(*args)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def bench_shape(T, E, H, repeats):
    rng = np.random.default_rng(0)
    xs, wx, wh, b, c0, h0 = make_case(rng, T, E, H)
    gates, cs, hs = _ref.lstm_forward(xs, wx, wh, b, c0, h0)
    dhs = rng.normal(size=hs.shape)

    rows = []
    fwd_args = (xs, wx, wh, b, c0, h0)
    bwd_args = (xs, wx, wh, gates, cs, hs, c0, h0, dhs)
    for name, args in (("forward", fwd_args), ("backward", bwd_args)):
        ref_fn = getattr(_ref, f"lstm_{name}")
        ref_t = time_call(ref_fn, args, repeats)
        if _core is not None:
            core_fn = getattr(_core, f"lstm_{name}")
            core_t = time_call(core_fn, args, repeats)
            rows.append((name, ref_t, core_t, ref_t / core_t))
        else:
            rows.append((name, ref_t, None, None))
    return rows


def parse_size(text):
    try:
        T, E, H = (int(p) for p in text.lower().split("x"))
        return T, E, H
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected TxExH (e.g. 20x32x32), got {text!r}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200)
    ap.add_argument("--sizes", type=parse_size, nargs="+",
                    default=[(8, 16, 16), (20, 32, 32), (40, 64, 64)],
                    metavar="TxExH")
    args = ap.parse_args()

    if _core is None:
        print("compiled extension not importable; timing the fallback only\n")
    header = f"{'shape':>12}  {'kernel':>8}  {'numpy':>10}  {'cython':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for T, E, H in args.sizes:
        for name, ref_t, core_t, speedup in bench_shape(T, E, H, args.repeats):
            shape = f"{T}x{E}x{H}"
            core_s = f"{core_t * 1e6:8.1f}us" if core_t is not None else "         -"
            ratio = f"{speedup:7.1f}x" if speedup is not None else "       -"
            print(f"{shape:>12}  {name:>8}  {ref_t * 1e6:8.1f}us  {core_s}  {ratio}")


if __name__ == "__main__":
    main()
