"""Compare the compiled and pure-Python RK4 kernels.

Usage::

    python benchmarks/bench_kernels.py [--steps 10000] [--repeat 5]

Times a single profile integration and a full gain calibration with each
backend, and checks that both give the same numbers.
"""

import argparse
import timeit

import numpy as np

from clonerad import _purepy, lossy

try:
    from clonerad import _speedups
except ImportError:  # extension not built
    _speedups = None


def _calibrate(impl, profile, target, steps):
    # same bracketing and bisection as calibrate_chi_scale, with an explicit kernel
    from scipy import optimize

    def gain_at(s):
        _, chi, lam, h = lossy._sample_nodes(profile.with_chi_scale(s), steps)
        g, _, fail = impl.rk4_gain_loss_final(chi, lam, h)
        return g if fail < 0 else (np.inf if not g <= 0 else -np.inf)

    lo, hi = 0.0, 1.0
    while gain_at(hi) <= target:
        lo, hi = hi, 2.0 * hi
    return optimize.bisect(lambda s: gain_at(s) - target, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=200)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=10_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    profile = lossy.InversionProfile.family("chi1", 0.3, lambda0=lossy.default_loss_density())
    profile = profile.with_chi_scale(2.0)
    _, chi, lam, h = lossy._sample_nodes(profile, args.steps)

    backends = [("python", _purepy)] + ([("compiled", _speedups)] if _speedups is not None else [])
    results = {}
    print(f"{'backend':<10} {'integrate (ms)':>15} {'calibrate (ms)':>15}")
    for name, impl in backends:
        t_int = min(timeit.repeat(lambda: impl.rk4_gain_loss(chi, lam, h), number=1, repeat=args.repeat))
        t_cal = min(timeit.repeat(lambda: _calibrate(impl, profile, 50.0, 2000), number=1, repeat=max(1, args.repeat // 2)))
        results[name] = (impl.rk4_gain_loss_final(chi, lam, h), _calibrate(impl, profile, 50.0, 2000), t_int, t_cal)
        print(f"{name:<10} {1e3 * t_int:>15.3f} {1e3 * t_cal:>15.3f}")

    if "compiled" in results:
        (gp, ep, _), sp, tip, tcp = results["python"]
        (gc, ec, _), sc, tic, tcc = results["compiled"]
        print(f"speedup: integrate x{tip / tic:.0f}, calibrate x{tcp / tcc:.0f}")
        print(f"max relative difference: G {abs(gc / gp - 1):.1e}, eta {abs(ec / ep - 1):.1e}, scale {abs(sc / sp - 1):.1e}")
    else:
        print("compiled extension not available; only the pure-Python backend was timed")


if __name__ == "__main__":
    main()
