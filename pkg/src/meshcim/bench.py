"""Benchmark the hot kernels across the available backends.

Compares the compiled extension against the numpy fallback on the three
inner-loop primitives and on a whole small-fixture inference, verifying
bit-identical results while timing.
"""

from __future__ import annotations

import os
import time

import numpy as np

from .kernels import available_backends


def _time(fn, *args, repeat: int = 5) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeat: int = 5) -> list[dict]:
    rng = np.random.default_rng(0)
    x = rng.integers(-128, 128, size=(224, 256), dtype=np.int8)
    w = rng.integers(-128, 128, size=(256, 256), dtype=np.int8)
    xs = rng.integers(-128, 128, size=(12, 8), dtype=np.int8)
    ws = rng.integers(-128, 128, size=(8, 8), dtype=np.int8)
    acc = rng.integers(-(2**20), 2**20, size=(224, 256), dtype=np.int32)
    a8 = rng.integers(-128, 128, size=(224, 512), dtype=np.int8)
    b8 = rng.integers(-128, 128, size=(224, 512), dtype=np.int8)

    def small_sweep(impl):
        for _ in range(200):
            impl.mvm_batch(xs, ws)

    rows = []
    reference: dict[str, np.ndarray] = {}
    for name, impl in available_backends().items():
        out_mvm = np.asarray(impl.mvm_batch(x, w))
        out_req = np.asarray(impl.relu_shift_sat8(acc, 7, True))
        out_add = np.asarray(impl.sat_add8(a8, b8))
        for key, val in (("mvm", out_mvm), ("requant", out_req), ("satadd", out_add)):
            if key in reference:
                assert np.array_equal(reference[key], val), f"{name} diverges on {key}"
            else:
                reference[key] = val
        rows.append({
            "backend": name,
            "mvm_224x256x256_s": _time(impl.mvm_batch, x, w, repeat=repeat),
            "mvm_small_x200_s": _time(small_sweep, impl, repeat=repeat),
            "relu_shift_sat8_s": _time(impl.relu_shift_sat8, acc, 7, True, repeat=repeat),
            "sat_add8_s": _time(impl.sat_add8, a8, b8, repeat=repeat),
        })
    return rows


def bench_fixture(fixture: str = "vgg11_cifar", repeat: int = 1) -> list[dict]:
    """End-to-end fixture run per backend (subprocess-free: re-import trick
    is unnecessary because both backends are importable side by side)."""
    from . import kernels as kmod
    from .fabric import Fabric
    from .fixtures import load_fixture
    from .mapper import ArchConfig, map_network

    net = load_fixture(fixture, seed=0)
    design = map_network(net, ArchConfig())
    img = np.random.default_rng(1).integers(-128, 128, size=net.input_shape, dtype=np.int8)

    rows = []
    selected = (kmod.mvm_batch, kmod.scatter_accumulate, kmod.relu_shift_sat8,
                kmod.lane_max, kmod.sat_add8)
    try:
        outputs = {}
        for name, impl in available_backends().items():
            kmod.mvm_batch = impl.mvm_batch
            kmod.scatter_accumulate = impl.scatter_accumulate
            kmod.relu_shift_sat8 = impl.relu_shift_sat8
            kmod.lane_max = impl.lane_max
            kmod.sat_add8 = impl.sat_add8
            best = float("inf")
            for _ in range(repeat):
                fab = Fabric(design, net)
                t0 = time.perf_counter()
                result = fab.run_inference(img)
                best = min(best, time.perf_counter() - t0)
            outputs[name] = result.output
            rows.append({"backend": name, "fixture": fixture, "run_s": best,
                         "cycles": result.cycles})
        first = next(iter(outputs.values()))
        for name, out in outputs.items():
            assert np.array_equal(first, out), f"backend {name} changed the output"
    finally:
        (kmod.mvm_batch, kmod.scatter_accumulate, kmod.relu_shift_sat8,
         kmod.lane_max, kmod.sat_add8) = selected
    return rows


def format_rows(rows: list[dict]) -> str:
    if not rows:
        return "(no rows)"
    keys = list(rows[0])
    widths = {k: max(len(k), *(len(_fmt(r[k])) for r in rows)) for k in keys}
    lines = ["  ".join(k.ljust(widths[k]) for k in keys)]
    for r in rows:
        lines.append("  ".join(_fmt(r[k]).ljust(widths[k]) for k in keys))
    return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)
