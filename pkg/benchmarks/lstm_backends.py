"""Benchmark: compiled LSTM kernel vs numpy fallback vs primitive-composed.

Measures forward+backward tokens/second for the sequence encoder hot loop
and reports the max output deviation between backends.

    python benchmarks/lstm_backends.py [--tokens 400] [--dim 64] [--hidden 64]
"""

import argparse
import importlib
import time

import numpy as np

from magnet import diffcore as dc
from magnet.encoder import encode_sequence, init_encoder_params
from magnet.kernels import _lstm_np

try:
    from magnet.kernels import _lstm_cy
except ImportError:
    _lstm_cy = None


def time_kernel(impl, x, wx, wh, b, repeats):
    hs, cache = impl.lstm_forward(x, wx, wh, b, False)  # warm up
    dh = np.ones_like(hs)
    impl.lstm_backward(cache, dh)
    t0 = time.perf_counter()
    for _ in range(repeats):
        hs, cache = impl.lstm_forward(x, wx, wh, b, False)
        impl.lstm_backward(cache, dh)
    dt = time.perf_counter() - t0
    return hs, (repeats * x.shape[0]) / dt


def time_composed(x_arr, params, repeats):
    def run():
        x = dc.param(x_arr)
        with dc.Graph() as g:
            enc = encode_sequence(x, params, backend="composed")
            loss = dc.reduce_sum(enc.feature)
        dc.backward(g, loss)

    run()
    t0 = time.perf_counter()
    for _ in range(repeats):
        run()
    dt = time.perf_counter() - t0
    return (repeats * x_arr.shape[0]) / dt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tokens", type=int, default=400)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.standard_normal((args.tokens, args.dim))
    wx = rng.standard_normal((4 * args.hidden, args.dim)) * 0.2
    wh = rng.standard_normal((4 * args.hidden, args.hidden)) * 0.2
    b = rng.standard_normal(4 * args.hidden) * 0.1

    print(f"sequence: T={args.tokens} d={args.dim} h={args.hidden}, fwd+bwd x{args.repeats}")
    hs_np, np_rate = time_kernel(_lstm_np, x, wx, wh, b, args.repeats)
    print(f"  numpy fallback : {np_rate:12.0f} tokens/s")
    if _lstm_cy is not None:
        hs_cy, cy_rate = time_kernel(_lstm_cy, x, wx, wh, b, args.repeats)
        dev = float(np.max(np.abs(hs_cy - hs_np)))
        print(f"  compiled       : {cy_rate:12.0f} tokens/s  ({cy_rate / np_rate:.2f}x)")
        print(f"  max |compiled - numpy| on outputs: {dev:.3e}")
    else:
        print("  compiled       : extension not built")

    params = init_encoder_params(args.dim, args.hidden, rng)
    composed_rate = time_composed(x, params, max(1, args.repeats // 10))
    print(f"  composed graph : {composed_rate:12.0f} tokens/s (both directions, reference path)")


if __name__ == "__main__":
    main()
