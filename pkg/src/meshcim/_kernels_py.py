"""Pure-numpy fallback kernels.

The batched matrix product runs in float64 BLAS and is exact: products of
two int8 values are at most 2^14 in magnitude and one tile reduces at most
256 of them, so every accumulator stays far below 2^53.
"""

import numpy as np

BACKEND = "numpy"


def mvm_batch(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(n, C) int8 x (C, M) int8 -> (n, M) int32, exact."""
    out = x.astype(np.float64) @ w.astype(np.float64)
    return out.astype(np.int32)


def scatter_accumulate(acc: np.ndarray, idx: np.ndarray, add: np.ndarray) -> None:
    """acc[idx] += add for int32 accumulators (idx unique)."""
    acc[idx] += add


def relu_shift_sat8(acc: np.ndarray, shift: int, relu: bool) -> np.ndarray:
    """int32 accumulators -> int8 activations (floor shift, saturate)."""
    v = acc
    if relu:
        v = np.maximum(v, 0)
    v = v >> shift
    return np.clip(v, -128, 127).astype(np.int8)


def lane_max(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.maximum(a, b)


def sat_add8(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.clip(a.astype(np.int16) + b.astype(np.int16), -128, 127).astype(np.int8)
