"""Compare the numba and numpy backends of the hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Times one joint evolution slice (``joint_step``) on product grids of growing
size and the path-pair interaction sum (``interaction_action``) on growing
path sets.  The numba timing excludes the first, compiling call.  Both
backends are checked to agree before timing.
"""

import argparse
import timeit

import numpy as np

from relpath import _kernels


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def joint_cases(rng):
    for ns, na in [(16, 4), (64, 8), (128, 16), (256, 32)]:
        c = lambda *s: rng.normal(size=s) + 1j * rng.normal(size=s)  # noqa: E731
        yield f"joint_step {ns}x{na}", (c(ns, ns), c(na, na), c(2 * ns - 1, 2 * na - 1), c(ns, na))


def action_cases(rng):
    for n_s, n_a, steps in [(81, 81, 4), (729, 243, 6), (4096, 1024, 6)]:
        hs = rng.integers(0, 15, size=(n_s, steps))
        ha = rng.integers(0, 7, size=(n_a, steps))
        yield f"interaction_action {n_s}x{n_a} paths", (hs, ha, rng.normal(size=(15, 7)), 0.1)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    pairs = [(joint_cases, _kernels.joint_step_numpy, _kernels.joint_step_numba),
             (action_cases, _kernels.interaction_action_numpy, _kernels.interaction_action_numba)]
    print(f"{'case':<38}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for cases, slow, fast in pairs:
        for label, case in cases(rng):
            ref, got = slow(*case), fast(*case)
            assert np.allclose(ref, got, atol=1e-9 * max(1.0, float(np.max(np.abs(ref))))), label
            t_np = best_of(lambda: slow(*case), args.repeat)
            t_nb = best_of(lambda: fast(*case), args.repeat)
            print(f"{label:<38}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
