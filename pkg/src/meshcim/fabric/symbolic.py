"""Symbolic (timing-free) execution of a MappedDesign.

Re-derives each layer's arithmetic purely from the per-tile block
assignments and region geometry, so mis-sliced weights, wrong chain
ordering, or broken pooling modes produce a wrong answer here even before
the slot-level simulator runs. Used as the compiler's self-check.
"""

from __future__ import annotations

import numpy as np

from ..netspec import Activation, LayerKind, NetworkSpec
from ..scaling import avg_pool_scale
from ..mapper import MappedDesign


def _requant(acc: np.ndarray, shift: int, relu: bool) -> np.ndarray:
    if relu:
        acc = np.maximum(acc, 0)
    return np.clip(acc >> shift, -128, 127).astype(np.int8)


def run_symbolic(design: MappedDesign, net: NetworkSpec, image: np.ndarray) -> np.ndarray:
    cur = np.asarray(image, dtype=np.int8)
    outputs: list[np.ndarray] = []
    for region in design.regions:
        layer = net.layers[region.layer_idx]
        if region.kind == "conv":
            h, w, _ = cur.shape
            ho, wo, m = region.out_shape
            s, pad = region.stride, region.pad
            acc = np.zeros((ho, wo, m), dtype=np.int64)
            for t in region.tiles:
                if t.dup != 0:
                    continue
                block = layer.weights[t.kr, t.kc, t.row_lo:t.row_hi, t.col_lo:t.col_hi]
                for oy in range(ho):
                    y = oy * s - pad + t.kr
                    if not 0 <= y < h:
                        continue
                    ox = np.arange(wo)
                    x = ox * s - pad + t.kc
                    valid = (x >= 0) & (x < w)
                    if not valid.any():
                        continue
                    window = cur[y, x[valid], t.row_lo:t.row_hi].astype(np.int64)
                    acc[oy, ox[valid], t.col_lo:t.col_hi] += window @ block.astype(np.int64)
            cur = _requant(acc, layer.requant_shift, layer.activation is Activation.RELU)
        elif region.kind == "fc":
            x = cur.reshape(-1).astype(np.int64)
            m = region.out_shape[2]
            acc = np.zeros(m, dtype=np.int64)
            for t in region.tiles:
                block = layer.weights[t.row_lo:t.row_hi, t.col_lo:t.col_hi]
                acc[t.col_lo:t.col_hi] += x[t.row_lo:t.row_hi] @ block.astype(np.int64)
            cur = _requant(acc, layer.requant_shift,
                           layer.activation is Activation.RELU).reshape(1, 1, m)
        elif region.kind == "pool":
            h, w, c = cur.shape
            kp, sp = region.pool_k, region.pool_stride
            ho, wo = region.out_shape[:2]
            windows = np.empty((ho, wo, c, kp * kp), dtype=np.int32)
            for wr in range(kp):
                for wc in range(kp):
                    windows[:, :, :, wr * kp + wc] = cur[wr:wr + ho * sp:sp,
                                                         wc:wc + wo * sp:sp, :]
            if layer.kind is LayerKind.MAXPOOL:
                cur = windows.max(axis=3).astype(np.int8)
            else:
                mult, shift = avg_pool_scale(kp)
                summed = windows.sum(axis=3, dtype=np.int64)
                cur = np.clip((summed * mult) >> shift, -128, 127).astype(np.int8)
        else:  # residual
            src = image if layer.skip_source == -1 else outputs[layer.skip_source]
            merged = np.clip(cur.astype(np.int16) + src.astype(np.int16),
                             -128, 127).astype(np.int8)
            if layer.activation is Activation.RELU:
                merged = np.maximum(merged, 0).astype(np.int8)
            cur = merged
        outputs.append(cur)
    return cur
