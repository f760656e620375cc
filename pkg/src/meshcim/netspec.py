"""Workload model: layer descriptions, validation, and the golden int8
inference oracle every fabric run is checked against.

Feature maps are numpy int8 arrays of shape (H, W, C). Convolution weights
are (K, K, C, M); fully-connected weights are (C_in, C_out). All reference
ops accumulate in int64, assert the declared accumulator width, and
requantize with an arithmetic right shift (floor) followed by saturation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import yaml

from .scaling import avg_pool_scale


class LayerKind(Enum):
    CONV = "conv"
    FC = "fc"
    MAXPOOL = "maxpool"
    AVGPOOL = "avgpool"
    RESIDUAL_ADD = "residual_add"


class Activation(Enum):
    NONE = "none"
    RELU = "relu"


class NetworkValidationError(ValueError):
    """Raised with the full list of schema / shape-chain violations."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class PrecisionSpec:
    weight_bits: int = 8
    act_bits: int = 8
    acc_bits: int = 32


@dataclass
class LayerSpec:
    kind: LayerKind
    k: int = 1                  # conv kernel size
    c_in: int = 0               # inferred from the chain during validation
    c_out: int = 0
    stride: int = 1             # conv stride
    pad: int = 0                # conv zero padding
    pool_k: int = 2             # pooling window
    pool_stride: int = 2
    activation: Activation = Activation.NONE
    skip_source: int | None = None   # residual source: layer index, -1 = input
    requant_shift: int = 0
    weights: np.ndarray | None = None


@dataclass
class NetworkSpec:
    layers: list[LayerSpec]
    input_shape: tuple[int, int, int]   # (H, W, C)
    precision: PrecisionSpec = field(default_factory=PrecisionSpec)

    def layer_shapes(self) -> list[tuple[int, int, int]]:
        """Output shape after each layer (validated chain)."""
        shapes = []
        cur = self.input_shape
        for layer in self.layers:
            cur = layer_output_shape(layer, cur)
            shapes.append(cur)
        return shapes

    @property
    def output_shape(self) -> tuple[int, int, int]:
        shapes = self.layer_shapes()
        return shapes[-1] if shapes else self.input_shape


def layer_output_shape(layer: LayerSpec, in_shape: tuple[int, int, int]) -> tuple[int, int, int]:
    h, w, c = in_shape
    if layer.kind is LayerKind.CONV:
        oh = (h + 2 * layer.pad - layer.k) // layer.stride + 1
        ow = (w + 2 * layer.pad - layer.k) // layer.stride + 1
        return (oh, ow, layer.c_out)
    if layer.kind is LayerKind.FC:
        return (1, 1, layer.c_out)
    if layer.kind in (LayerKind.MAXPOOL, LayerKind.AVGPOOL):
        oh = (h - layer.pool_k) // layer.pool_stride + 1
        ow = (w - layer.pool_k) // layer.pool_stride + 1
        return (oh, ow, c)
    if layer.kind is LayerKind.RESIDUAL_ADD:
        return in_shape
    raise ValueError(f"unknown layer kind {layer.kind}")


# ---------------------------------------------------------------------------
# validation

def validate_network(net: NetworkSpec) -> list[str]:
    """Collect every schema and shape-chain violation (empty list = clean)."""
    errs: list[str] = []
    h, w, c = net.input_shape
    if h < 1 or w < 1 or c < 1:
        errs.append(f"input shape {net.input_shape} must be positive")
    prec = net.precision
    for name, bits in (("weight_bits", prec.weight_bits), ("act_bits", prec.act_bits)):
        if not 1 <= bits <= 16:
            errs.append(f"precision.{name}={bits} outside 1..16")

    cur = net.input_shape
    shapes: list[tuple[int, int, int]] = []
    for i, layer in enumerate(net.layers):
        tag = f"layer {i} ({layer.kind.value})"
        if layer.kind is LayerKind.CONV:
            if layer.k < 1:
                errs.append(f"{tag}: kernel size {layer.k} must be >= 1")
            if layer.stride < 1:
                errs.append(f"{tag}: stride {layer.stride} must be >= 1")
            if layer.pad < 0:
                errs.append(f"{tag}: pad {layer.pad} must be >= 0")
            if layer.c_out < 1:
                errs.append(f"{tag}: out channels {layer.c_out} must be >= 1")
            if layer.c_in and layer.c_in != cur[2]:
                errs.append(
                    f"{tag}: declares {layer.c_in} input channels but layer "
                    f"{i - 1} produces {cur[2]}"
                )
            layer.c_in = cur[2]
            if layer.k >= 1 and layer.stride >= 1:
                oh = (cur[0] + 2 * layer.pad - layer.k) // layer.stride + 1
                if oh < 1:
                    errs.append(f"{tag}: kernel {layer.k} does not fit input rows {cur[0]}")
            if layer.weights is not None:
                want = (layer.k, layer.k, layer.c_in, layer.c_out)
                if not _weights_fit(layer.weights, want):
                    errs.append(f"{tag}: weight shape {layer.weights.shape} != {want}")
        elif layer.kind is LayerKind.FC:
            flat = cur[0] * cur[1] * cur[2]
            if layer.c_in and layer.c_in != flat:
                errs.append(f"{tag}: declares {layer.c_in} inputs but chain provides {flat}")
            layer.c_in = flat
            if layer.c_out < 1:
                errs.append(f"{tag}: out features {layer.c_out} must be >= 1")
            if layer.weights is not None and not _weights_fit(layer.weights, (flat, layer.c_out)):
                errs.append(f"{tag}: weight shape {layer.weights.shape} != {(flat, layer.c_out)}")
        elif layer.kind in (LayerKind.MAXPOOL, LayerKind.AVGPOOL):
            if layer.pool_k < 1 or layer.pool_stride < 1:
                errs.append(f"{tag}: pool_k/pool_stride must be >= 1")
            elif cur[0] < layer.pool_k or cur[1] < layer.pool_k:
                errs.append(f"{tag}: window {layer.pool_k} exceeds input {cur[:2]}")
            if layer.weights is not None:
                errs.append(f"{tag}: pooling layers carry no weights")
        elif layer.kind is LayerKind.RESIDUAL_ADD:
            src = layer.skip_source
            if src is None:
                errs.append(f"{tag}: requires skip_source")
            else:
                if src >= i or src < -1:
                    errs.append(f"{tag}: skip_source {src} must name an earlier layer")
                else:
                    src_shape = net.input_shape if src == -1 else shapes[src]
                    if src_shape != cur:
                        errs.append(
                            f"{tag}: skip source shape {src_shape} != main path {cur}"
                        )
        if layer.requant_shift < 0:
            errs.append(f"{tag}: requant_shift must be >= 0")
        try:
            cur = layer_output_shape(layer, cur)
        except (ValueError, ZeroDivisionError) as exc:
            errs.append(f"{tag}: {exc}")
        shapes.append(cur)

    errs.extend(_check_accumulator_width(net))
    return errs


def _weights_fit(weights: np.ndarray, want: tuple[int, ...]) -> bool:
    """Flat blobs (pre-reshape) match by size, shaped arrays by shape."""
    if weights.ndim == 1:
        return weights.size == int(np.prod(want))
    return tuple(weights.shape) == want


def _check_accumulator_width(net: NetworkSpec) -> list[str]:
    prec = net.precision
    worst = 1
    for layer in net.layers:
        if layer.kind is LayerKind.CONV:
            worst = max(worst, layer.k * layer.k * max(layer.c_in, 1))
        elif layer.kind is LayerKind.FC:
            worst = max(worst, max(layer.c_in, 1))
    need = prec.weight_bits + prec.act_bits + math.ceil(math.log2(worst)) if worst > 1 else 16
    if prec.acc_bits < need:
        return [f"accumulator width {prec.acc_bits} < required {need} bits for reduction length {worst}"]
    return []


# ---------------------------------------------------------------------------
# parsing

_LAYER_KEYS = {
    "kind", "k", "out_channels", "in_channels", "stride", "pad",
    "pool_k", "pool_stride", "activation", "skip_source", "requant_shift",
    "out_features", "in_features", "weights",
}


def parse_network(text: str, base_dir: Path | None = None) -> NetworkSpec:
    """Parse the hierarchical key-value network document.

    Raises NetworkValidationError listing every violation found; a clean
    document returns a validated NetworkSpec with c_in fields resolved.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise NetworkValidationError([f"malformed document: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise NetworkValidationError(["document must be a mapping with 'input' and 'layers'"])

    errs: list[str] = []
    inp = doc.get("input")
    if not isinstance(inp, dict) or not {"h", "w", "c"} <= set(inp):
        errs.append("missing or malformed 'input' (need h, w, c)")
        input_shape = (1, 1, 1)
    else:
        input_shape = (int(inp["h"]), int(inp["w"]), int(inp["c"]))

    prec = PrecisionSpec()
    pdoc = doc.get("precision", {})
    if isinstance(pdoc, dict):
        prec = PrecisionSpec(
            weight_bits=int(pdoc.get("weight_bits", 8)),
            act_bits=int(pdoc.get("act_bits", 8)),
            acc_bits=int(pdoc.get("acc_bits", 32)),
        )

    layers: list[LayerSpec] = []
    raw_layers = doc.get("layers")
    if raw_layers is None:
        raw_layers = []
    if not isinstance(raw_layers, list):
        errs.append("'layers' must be a list")
        raw_layers = []
    for i, entry in enumerate(raw_layers):
        if not isinstance(entry, dict) or "kind" not in entry:
            errs.append(f"layer {i}: must be a mapping with a 'kind'")
            continue
        unknown = set(entry) - _LAYER_KEYS
        if unknown:
            errs.append(f"layer {i}: unknown keys {sorted(unknown)}")
        try:
            kind = LayerKind(str(entry["kind"]))
        except ValueError:
            errs.append(f"layer {i}: unsupported layer kind {entry['kind']!r}")
            continue
        try:
            act = Activation(str(entry.get("activation", "none")))
        except ValueError:
            errs.append(f"layer {i}: unknown activation {entry['activation']!r}")
            act = Activation.NONE
        layer = LayerSpec(
            kind=kind,
            k=int(entry.get("k", 1)),
            c_in=int(entry.get("in_channels", entry.get("in_features", 0))),
            c_out=int(entry.get("out_channels", entry.get("out_features", 0))),
            stride=int(entry.get("stride", 1)),
            pad=int(entry.get("pad", 0)),
            pool_k=int(entry.get("pool_k", 2)),
            pool_stride=int(entry.get("pool_stride", 2)),
            activation=act,
            skip_source=(None if entry.get("skip_source") is None else int(entry["skip_source"])),
            requant_shift=int(entry.get("requant_shift", 0)),
        )
        wdoc = entry.get("weights")
        if wdoc is not None:
            try:
                layer.weights = _load_weights(wdoc, base_dir)
            except (OSError, ValueError) as exc:
                errs.append(f"layer {i}: weights: {exc}")
        layers.append(layer)

    net = NetworkSpec(layers=layers, input_shape=input_shape, precision=prec)
    errs.extend(validate_network(net))
    if errs:
        raise NetworkValidationError(errs)
    _reshape_weights(net)
    return net


def _load_weights(wdoc, base_dir: Path | None) -> np.ndarray:
    if isinstance(wdoc, dict) and "hex" in wdoc:
        return np.frombuffer(bytes.fromhex(wdoc["hex"]), dtype=np.int8).copy()
    if isinstance(wdoc, dict) and "file" in wdoc:
        path = Path(wdoc["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return np.fromfile(path, dtype=np.int8)
    raise ValueError("weights must be {hex: ...} or {file: ...}")


def _reshape_weights(net: NetworkSpec) -> None:
    """Flat int8 blobs become (K,K,C,M) / (C_in,C_out) once shapes are known."""
    for i, layer in enumerate(net.layers):
        if layer.weights is None:
            continue
        if layer.kind is LayerKind.CONV:
            shape = (layer.k, layer.k, layer.c_in, layer.c_out)
        elif layer.kind is LayerKind.FC:
            shape = (layer.c_in, layer.c_out)
        else:
            continue
        if layer.weights.size != int(np.prod(shape)):
            raise NetworkValidationError(
                [f"layer {i}: weight blob holds {layer.weights.size} values, expected {np.prod(shape)}"]
            )
        layer.weights = layer.weights.reshape(shape)


def load_network(path: str | Path) -> NetworkSpec:
    path = Path(path)
    return parse_network(path.read_text(), base_dir=path.parent)


def fill_random_weights(net: NetworkSpec, seed: int) -> None:
    """Give every weight-less conv/fc layer seeded int8 weights (in place)."""
    for i, layer in enumerate(net.layers):
        if layer.kind not in (LayerKind.CONV, LayerKind.FC) or layer.weights is not None:
            continue
        rng = np.random.default_rng([seed, i])
        if layer.kind is LayerKind.CONV:
            shape = (layer.k, layer.k, layer.c_in, layer.c_out)
        else:
            shape = (layer.c_in, layer.c_out)
        layer.weights = rng.integers(-128, 128, size=shape, dtype=np.int8)


def count_macs(net: NetworkSpec) -> int:
    """Multiply-accumulate count of one inference (conv + fc only)."""
    total = 0
    cur = net.input_shape
    for layer in net.layers:
        out = layer_output_shape(layer, cur)
        if layer.kind is LayerKind.CONV:
            total += layer.k * layer.k * layer.c_in * layer.c_out * out[0] * out[1]
        elif layer.kind is LayerKind.FC:
            total += layer.c_in * layer.c_out
        cur = out
    return total


# ---------------------------------------------------------------------------
# reference (oracle) ops

def _requantize(acc: np.ndarray, shift: int, activation: Activation, act_bits: int) -> np.ndarray:
    """ReLU (optional), arithmetic right shift (floor), saturate to act_bits."""
    if activation is Activation.RELU:
        acc = np.maximum(acc, 0)
    acc = acc >> shift
    lo, hi = -(1 << (act_bits - 1)), (1 << (act_bits - 1)) - 1
    return np.clip(acc, lo, hi).astype(np.int8)


def _assert_acc_width(acc: np.ndarray, acc_bits: int) -> None:
    limit = 1 << (acc_bits - 1)
    if acc.size and (acc.max(initial=0) >= limit or acc.min(initial=0) < -limit):
        raise AssertionError(f"accumulator escaped {acc_bits}-bit range")


def reference_conv(ifm: np.ndarray, layer: LayerSpec, precision: PrecisionSpec | None = None) -> np.ndarray:
    """Direct zero-padded strided convolution, then activation + requantize."""
    prec = precision or PrecisionSpec()
    if layer.kind is not LayerKind.CONV:
        raise ValueError("reference_conv requires a conv layer")
    h, w, c = ifm.shape
    if c != layer.c_in:
        raise ValueError(f"ifm has {c} channels, layer expects {layer.c_in}")
    k, s, p = layer.k, layer.stride, layer.pad
    weights = layer.weights.astype(np.int64)
    padded = np.zeros((h + 2 * p, w + 2 * p, c), dtype=np.int64)
    padded[p:p + h, p:p + w, :] = ifm
    oh = (h + 2 * p - k) // s + 1
    ow = (w + 2 * p - k) // s + 1
    acc = np.zeros((oh, ow, layer.c_out), dtype=np.int64)
    for kr in range(k):
        for kc in range(k):
            window = padded[kr:kr + oh * s:s, kc:kc + ow * s:s, :]
            acc += window @ weights[kr, kc]
    _assert_acc_width(acc, prec.acc_bits)
    return _requantize(acc, layer.requant_shift, layer.activation, prec.act_bits)


def reference_fc(x: np.ndarray, layer: LayerSpec, precision: PrecisionSpec | None = None) -> np.ndarray:
    """y = xW on the flattened input, then activation + requantize."""
    prec = precision or PrecisionSpec()
    if layer.kind is not LayerKind.FC:
        raise ValueError("reference_fc requires an fc layer")
    flat = x.reshape(-1).astype(np.int64)
    if flat.size != layer.c_in:
        raise ValueError(f"input length {flat.size} != {layer.c_in}")
    acc = flat @ layer.weights.astype(np.int64)
    _assert_acc_width(acc, prec.acc_bits)
    out = _requantize(acc, layer.requant_shift, layer.activation, prec.act_bits)
    return out.reshape(1, 1, layer.c_out)


def reference_pool(ifm: np.ndarray, layer: LayerSpec) -> np.ndarray:
    """Max or multiply-then-shift average pooling over square windows."""
    if layer.kind not in (LayerKind.MAXPOOL, LayerKind.AVGPOOL):
        raise ValueError("reference_pool requires a pooling layer")
    h, w, c = ifm.shape
    kp, sp = layer.pool_k, layer.pool_stride
    if h < kp or w < kp:
        raise ValueError(f"pool window {kp} exceeds input {ifm.shape[:2]}")
    oh = (h - kp) // sp + 1
    ow = (w - kp) // sp + 1
    windows = np.empty((oh, ow, c, kp * kp), dtype=np.int32)
    for wr in range(kp):
        for wc in range(kp):
            windows[:, :, :, wr * kp + wc] = ifm[wr:wr + oh * sp:sp, wc:wc + ow * sp:sp, :]
    if layer.kind is LayerKind.MAXPOOL:
        return windows.max(axis=3).astype(np.int8)
    mult, shift = avg_pool_scale(kp)
    scaled = (windows.sum(axis=3, dtype=np.int64) * mult) >> shift
    return np.clip(scaled, -128, 127).astype(np.int8)


def _saturating_add8(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.clip(a.astype(np.int16) + b.astype(np.int16), -128, 127).astype(np.int8)


def reference_residual(main: np.ndarray, skip: np.ndarray, layer: LayerSpec) -> np.ndarray:
    out = _saturating_add8(main, skip)
    if layer.activation is Activation.RELU:
        out = np.maximum(out, 0).astype(np.int8)
    return out


def reference_inference(net: NetworkSpec, image: np.ndarray) -> np.ndarray:
    """Fold every layer in order, honoring residual skips."""
    if tuple(image.shape) != tuple(net.input_shape):
        raise ValueError(f"input shape {image.shape} != {net.input_shape}")
    cur = image.astype(np.int8)
    produced: list[np.ndarray] = []
    for layer in net.layers:
        if layer.kind is LayerKind.CONV:
            cur = reference_conv(cur, layer, net.precision)
        elif layer.kind is LayerKind.FC:
            cur = reference_fc(cur, layer, net.precision)
        elif layer.kind in (LayerKind.MAXPOOL, LayerKind.AVGPOOL):
            cur = reference_pool(cur, layer)
        elif layer.kind is LayerKind.RESIDUAL_ADD:
            skip = image if layer.skip_source == -1 else produced[layer.skip_source]
            cur = reference_residual(cur, skip, layer)
        produced.append(cur)
    return cur
