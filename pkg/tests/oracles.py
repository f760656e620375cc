"""Independent naive-loop oracles for the reference ops.

Deliberately dumb: plain Python loops, no numpy vectorization, no shared
code with meshcim.netspec beyond the declared fixed-point constants. These
compute the same contract a different way so the two can check each other.
"""

import numpy as np

from meshcim.scaling import avg_pool_scale


def _sat8(v: int) -> int:
    return max(-128, min(127, v))


def _requant(acc: int, shift: int, relu: bool) -> int:
    if relu and acc < 0:
        acc = 0
    return _sat8(acc >> shift)


def naive_conv(ifm, weights, stride, pad, shift, relu):
    """Seven nested loops, explicit zero padding by bounds check."""
    h, w, c = ifm.shape
    k = weights.shape[0]
    m = weights.shape[3]
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    out = np.zeros((oh, ow, m), dtype=np.int8)
    for oy in range(oh):
        for ox in range(ow):
            for om in range(m):
                acc = 0
                for kr in range(k):
                    for kc in range(k):
                        iy = oy * stride + kr - pad
                        ix = ox * stride + kc - pad
                        if iy < 0 or iy >= h or ix < 0 or ix >= w:
                            continue
                        for ic in range(c):
                            acc += int(ifm[iy, ix, ic]) * int(weights[kr, kc, ic, om])
                out[oy, ox, om] = _requant(acc, shift, relu)
    return out


def naive_fc(x, weights, shift, relu):
    flat = [int(v) for v in np.asarray(x).reshape(-1)]
    c_in, c_out = weights.shape
    assert len(flat) == c_in
    out = np.zeros((1, 1, c_out), dtype=np.int8)
    for j in range(c_out):
        acc = 0
        for i in range(c_in):
            acc += flat[i] * int(weights[i, j])
        out[0, 0, j] = _requant(acc, shift, relu)
    return out


def naive_pool(ifm, pool_k, pool_stride, mode):
    h, w, c = ifm.shape
    oh = (h - pool_k) // pool_stride + 1
    ow = (w - pool_k) // pool_stride + 1
    mult, sh = avg_pool_scale(pool_k)
    out = np.zeros((oh, ow, c), dtype=np.int8)
    for oy in range(oh):
        for ox in range(ow):
            for ch in range(c):
                vals = [
                    int(ifm[oy * pool_stride + wr, ox * pool_stride + wc, ch])
                    for wr in range(pool_k)
                    for wc in range(pool_k)
                ]
                if mode == "max":
                    out[oy, ox, ch] = max(vals)
                else:
                    out[oy, ox, ch] = _sat8((sum(vals) * mult) >> sh)
    return out
