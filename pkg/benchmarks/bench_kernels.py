"""Time the compiled kernels against the numpy fallback at model shapes.

    python3 benchmarks/bench_kernels.py [--repeat N] [--batch B]

Prints one line per kernel with the best-of-N wall time for each backend
and the speedup of the compiled one. The routing in ``clstm_bearing.kernels``
was chosen from this table.
"""
import argparse
import timeit

import numpy as np

from clstm_bearing.fft import smooth_radices
from clstm_bearing.kernels import available_backends


def cases(batch, frame_len, rng):
    radices = smooth_radices(frame_len)
    rows = rng.standard_normal((2 * batch, frame_len)) + 0j
    x1 = rng.standard_normal((batch, 2, frame_len, 1))
    w1, b1 = rng.standard_normal((8, 1, 16)), rng.standard_normal(16)
    x2 = rng.standard_normal((batch, 2, frame_len // 2, 16))
    w2, b2 = rng.standard_normal((8, 16, 24)), rng.standard_normal(24)
    dy2 = rng.standard_normal((batch, 2, frame_len // 2, 24))
    pool = rng.standard_normal((batch, 2, frame_len, 16))
    return [
        ("fft_rows", lambda k: k.fft_rows(rows, radices)),
        ("conv forward Cin=1", lambda k: k.conv1xk_forward(x1, w1, b1)),
        ("conv forward Cin=16", lambda k: k.conv1xk_forward(x2, w2, b2)),
        ("conv backward Cin=16", lambda k: k.conv1xk_backward(dy2, x2, w2)),
        ("maxpool forward", lambda k: k.maxpool1x2_forward(pool)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=16)
    ap.add_argument("--frame-len", type=int, default=4800)
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the numpy fallback only")
    rng = np.random.default_rng(0)
    names = list(backends)
    print(f"{'kernel':<24}" + "".join(f"{n + ' (ms)':>14}" for n in names) + f"{'speedup':>10}")
    for label, fn in cases(args.batch, args.frame_len, rng):
        times = {}
        for name, mod in backends.items():
            fn(mod)  # warm caches before timing
            times[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
        line = f"{label:<24}" + "".join(f"{times[n]:>14.2f}" for n in names)
        if "cython" in times:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
