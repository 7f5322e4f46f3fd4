"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both implementations are called directly, so the environment flag
NOMA_ROBUST_DISABLE_JIT does not matter here; the last section times one
full robust solve under whichever backend the flag selects.
"""

import argparse
import timeit

import numpy as np

from noma_robust import kernels
from noma_robust._backend import backend_name
from noma_robust.channel import Scenario, generate_channels
from noma_robust.formulation import build_robust_sdp
from noma_robust.sdp import solve


def cases(rng):
    rows, cols, wts = kernels.hermitian_basis(8)
    Q = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    schur = (Q, rows, cols, wts, rows, cols, wts)
    w = rng.standard_normal((3, 8)) + 1j * rng.standard_normal((3, 8))
    d = 0.06 * (rng.standard_normal((10_000, 8)) + 1j * rng.standard_normal((10_000, 8)))
    h = rng.standard_normal(8) + 1j * rng.standard_normal(8) + d
    sinr = (w, h, d, 0.01, 1)
    return {
        "congruence_schur (8x8 vars)": (kernels._congruence_schur_numba,
                                        kernels._congruence_schur_numpy, schur),
        "sinr_batch (10^4 samples)": (kernels._sinr_batch_numba,
                                      kernels._sinr_batch_numpy, sinr),
    }


def best(fn, args, repeat):
    fn(*args)  # compile / warm up
    n, _ = timeit.Timer(lambda: fn(*args)).autorange()
    return min(timeit.repeat(lambda: fn(*args), number=n, repeat=repeat)) / n


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numba':>12s} {'numpy':>12s} {'speedup':>8s}")
    for name, (fast, slow, a) in cases(rng).items():
        np.testing.assert_allclose(fast(*a), slow(*a), rtol=1e-10, atol=1e-12)
        t1, t2 = best(fast, a, args.repeat), best(slow, a, args.repeat)
        print(f"{name:32s} {t1 * 1e6:10.1f}us {t2 * 1e6:10.1f}us {t2 / t1:7.1f}x")

    s = Scenario(M=8, K=3, epsilon=0.02, gamma_min=2.0, pathloss_exp=0.0, shadow_std_db=0.0)
    cs = generate_channels(s, 0)
    p = build_robust_sdp(s, cs.h_hat, cs.order)
    t = best(lambda: solve(p), (), max(1, args.repeat // 2))
    print(f"robust solve M=8 K=3 with {backend_name()} kernels: {t * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
