"""Compiled vs numpy convolution kernels, per layer and for a full loss+gradient pass.

    python3 benchmarks/bench_kernels.py [--repeat N] [--csv out.csv]
"""
import argparse
import csv
import os
import subprocess
import sys
import timeit

import numpy as np

from asc import kernels
from asc.victim.tiny import DEFAULT_HIDDEN

LAYERS = [  # (batch, in_ch, size, out_ch, k, stride, pad)
    (1, 3, 64, 8, 3, 2, 1),
    (1, 8, 32, 16, 3, 2, 1),
    (1, 16, 16, 5, 1, 1, 0),
    (16, 3, 64, 8, 3, 2, 1),
    (16, 8, 32, 16, 3, 2, 1),
]

# one loss_and_grad call in a fresh interpreter so the backend is picked at import
END_TO_END = """
import timeit, numpy as np
from asc.victim.tiny import TinyDetector
from asc.victim.scenes import render_scene
m = TinyDetector.initialize(0)
s = render_scene(0, 0)
n = {n}
print(min(timeit.repeat(lambda: m.loss_and_grad(s.image, s.target), number=n, repeat=5)) / n)
"""


def layer_times(mod, repeat):
    rng = np.random.default_rng(0)
    out = []
    for n, c, size, o, k, stride, pad in LAYERS:
        x = rng.normal(size=(n, c, size, size))
        w = rng.normal(size=(o, c, k, k))
        b = rng.normal(size=o)
        y = mod.conv2d_forward(x, w, b, stride, pad)
        gy = rng.normal(size=y.shape)
        fwd = min(timeit.repeat(lambda: mod.conv2d_forward(x, w, b, stride, pad),
                                number=repeat, repeat=5)) / repeat
        bwd = min(timeit.repeat(lambda: mod.conv2d_backward(x, w, gy, stride, pad),
                                number=repeat, repeat=5)) / repeat
        out.append(((n, c, size, o, k, stride), fwd, bwd))
    return out


def end_to_end(backend, n):
    env = {"ASC_KERNELS": backend} if backend == "python" else {}
    proc = subprocess.run([sys.executable, "-c", END_TO_END.format(n=n)], capture_output=True,
                          text=True, check=True, env={**os.environ, **env})
    return float(proc.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--csv")
    args = ap.parse_args()
    try:
        compiled = kernels.backend("compiled")
    except ImportError:
        sys.exit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    python = kernels.backend("python")

    rows = []
    print(f"hidden layers: {DEFAULT_HIDDEN}")
    print(f"{'layer (n,c,hw,o,k,s)':<28}{'fwd py':>10}{'fwd cy':>10}{'x':>6}{'bwd py':>10}{'bwd cy':>10}{'x':>6}")
    for (shape, fp, bp), (_, fc, bc) in zip(layer_times(python, args.repeat),
                                            layer_times(compiled, args.repeat)):
        print(f"{str(shape):<28}{fp * 1e6:>9.0f}u{fc * 1e6:>9.0f}u{fp / fc:>6.1f}"
              f"{bp * 1e6:>9.0f}u{bc * 1e6:>9.0f}u{bp / bc:>6.1f}")
        rows.append({"case": str(shape), "python_fwd_s": fp, "compiled_fwd_s": fc,
                     "python_bwd_s": bp, "compiled_bwd_s": bc})

    tp, tc = end_to_end("python", args.repeat), end_to_end("compiled", args.repeat)
    print(f"loss_and_grad on one scene: python {tp * 1e3:.3f} ms, compiled {tc * 1e3:.3f} ms, "
          f"speed-up {tp / tc:.1f}x")
    rows.append({"case": "loss_and_grad", "python_fwd_s": tp, "compiled_fwd_s": tc,
                 "python_bwd_s": "", "compiled_bwd_s": ""})
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, rows[0].keys())
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
