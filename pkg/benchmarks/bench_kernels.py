"""Time the compiled and numpy kernel backends on complex-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Sizes mirror the workloads that call the kernels: a ligand against a cropped
pocket (cross edges, clash scans) and per-edge message aggregation.
"""

import argparse
import time
import timeit

import numpy as np

from pocketdiff import _kernels_py, kernels

try:
    from pocketdiff import _kernels as compiled
except ImportError:
    compiled = None


def cases(rng):
    lig = rng.uniform(-4, 4, (30, 3))
    pocket = rng.uniform(-10, 10, (400, 3))
    r_lig, r_pocket = rng.uniform(1.4, 1.9, 30), rng.uniform(1.4, 1.9, 400)
    msgs = rng.standard_normal((2000, 32))
    idx = rng.integers(0, 30, 2000)
    return {
        "pairs_within 30x400": lambda impl: kernels.pairs_within(lig, pocket, 5.0, impl=impl),
        "min_distances 30x400": lambda impl: kernels.min_distances(lig, pocket, impl=impl),
        "clash_pairs 30x400": lambda impl: kernels.clash_pairs(lig, pocket, r_lig, r_pocket, 0.75, impl=impl),
        "segment_sum 2000x32": lambda impl: kernels.segment_sum(msgs, idx, 30, impl=impl),
    }


def training_seconds(impl, steps: int) -> float:
    """Wall time of a short default-size training run with ``impl`` active."""
    from pocketdiff import denoiser as dn
    from pocketdiff.diffusion import make_schedule
    from pocketdiff.toyset import make_toyset

    lig, pocket = make_toyset(1, 5, 0)[0]
    item = dn.TrainItem.from_pair(lig, pocket)
    saved, kernels._impl = kernels._impl, impl
    try:
        start = time.perf_counter()
        dn.train([item], dn.DenoiserConfig(), make_schedule("linear", 100, 1e-4, 0.1), dn.TrainConfig(steps=steps, batch_size=4), rng=0)
        return time.perf_counter() - start
    finally:
        kernels._impl = saved


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--train-steps", type=int, default=50, help="end-to-end training steps, 0 skips")
    args = ap.parse_args()
    if compiled is None:
        print("compiled backend not built; only the numpy backend is timed")
    backends = [("numpy", _kernels_py)] + ([("cython", compiled)] if compiled is not None else [])
    print(f"{'kernel':<24}" + "".join(f"{name:>14}" for name, _ in backends) + ("    speedup" if compiled is not None else ""))
    for label, fn in cases(np.random.default_rng(0)).items():
        times = []
        for _, impl in backends:
            fn(impl)
            times.append(min(timeit.repeat(lambda: fn(impl), number=args.repeat, repeat=3)) / args.repeat)
        row = f"{label:<24}" + "".join(f"{t * 1e6:>11.1f} us" for t in times)
        if len(times) == 2:
            row += f"   {times[0] / times[1]:>7.2f}x"
        print(row)
    if args.train_steps:
        times = [training_seconds(impl, args.train_steps) for _, impl in backends]
        row = f"{f'train {args.train_steps} steps':<24}" + "".join(f"{t:>12.2f} s" for t in times)
        if len(times) == 2:
            row += f"   {times[0] / times[1]:>7.2f}x"
        print(row)


if __name__ == "__main__":
    main()
