"""Compare the compiled and pure-python kernel backends on one scene.

Runs the two hot paths (watershed flooding, supervoxel assignment)
through the public API with each available backend swapped in, and
prints best-of-N wall times plus the speedup. Usage:

    python3 benchmarks/bench_kernels.py [--dims 96 96 32] [--repeats 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np
from scipy import ndimage

from segtrack3d import _backend, slic as slic_mod, watershed as ws_mod
from segtrack3d.detection import SeedSet
from segtrack3d.slic import SlicConfig
from segtrack3d.synth import CellScript, SequenceScript, generate_sequence
from segtrack3d.volume import Volume
from segtrack3d.watershed import WatershedConfig

ISO = (1.0, 1.0, 1.0)


def build_scene(dims: tuple[int, int, int], seed: int = 0):
    rng = np.random.default_rng(seed)
    cells = []
    placed: list[tuple[np.ndarray, float]] = []
    attempts = 0
    target = max(8, dims[0] * dims[1] * dims[2] // 12000)
    while len(cells) < target and attempts < 6000:
        attempts += 1
        radii = rng.uniform(2.5, 4.5, size=3)
        rmax = float(radii.max())
        center = np.array([
            rng.uniform(rmax + 1.5, dims[0] - rmax - 1.5),
            rng.uniform(rmax + 1.5, dims[1] - rmax - 1.5),
            rng.uniform(rmax + 1.5, dims[2] - rmax - 1.5),
        ])
        if not all(np.linalg.norm(center - c) >= rmax + r + 1.0 for c, r in placed):
            continue
        placed.append((center, rmax))
        cells.append(CellScript(id=len(cells) + 1, center=tuple(center),
                                radii=tuple(radii), peak=float(rng.uniform(0.7, 0.95))))
    script = SequenceScript(dims=dims, frames=1, cells=tuple(cells), spacing=ISO,
                            seed=seed, noise=0.1, noise_kind="gaussian")
    seq = generate_sequence(script)
    truth = seq.truth[0]
    prob = ndimage.gaussian_filter((truth.data > 0).astype(np.float64),
                                   sigma=(1.0, 2.0, 2.0))
    coords = np.array([[round(c.center[0]), round(c.center[1]), round(c.center[2])]
                       for c in script.cells], dtype=np.int64)
    seeds = SeedSet(coords, np.ones(len(coords)))
    return seq.intensity[0], Volume(np.clip(prob, 0.0, 1.0), ISO), seeds


def best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dims", type=int, nargs=3, default=(96, 96, 32),
                        metavar=("NX", "NY", "NZ"))
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    intensity, prob, seeds = build_scene(tuple(args.dims))
    ws_cfg = WatershedConfig(mask_threshold=0.4)
    sv_cfg = SlicConfig(k=2000, compactness=0.2)
    backends = _backend.available_backends()
    print(f"dims={tuple(args.dims)} seeds={len(seeds)} backends={backends}")

    results: dict[str, dict[str, float]] = {}
    for name in backends:
        impl = _backend.get_backend(name)
        saved_ws, saved_sv = ws_mod._backend, slic_mod._backend
        ws_mod._backend = slic_mod._backend = impl
        try:
            results[name] = {
                "watershed": best_of(lambda: ws_mod.watershed(prob, seeds, ws_cfg),
                                     args.repeats),
                "slic": best_of(lambda: slic_mod.slic(intensity, sv_cfg),
                                args.repeats),
            }
        finally:
            ws_mod._backend, slic_mod._backend = saved_ws, saved_sv

    for kernel in ("watershed", "slic"):
        for name in backends:
            print(f"{kernel:10s} {name:9s} {results[name][kernel] * 1e3:9.1f} ms")
        if "compiled" in results and "pure" in results:
            ratio = results["pure"][kernel] / results["compiled"][kernel]
            print(f"{kernel:10s} speedup   {ratio:9.1f} x")


if __name__ == "__main__":
    main()
