"""Runtime state of the tile mesh: flits, events, per-tile state, and the
two spec-level primitives pe_compute / rofm_exec that every execution path
funnels through.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .. import kernels
from ..isa import FuncCode, Instruction, RX_PE, ScheduleTable, Variant
from ..mapper import TileAssignment


class FlitKind(Enum):
    ACTIVATION = "activation"
    PARTIAL_SUM = "partial_sum"
    GROUP_SUM = "group_sum"

# kind transitions allowed on a link (activation starts the next layer)
_NEXT_KIND = {
    FlitKind.ACTIVATION: (FlitKind.ACTIVATION, FlitKind.PARTIAL_SUM),
    FlitKind.PARTIAL_SUM: (FlitKind.PARTIAL_SUM, FlitKind.GROUP_SUM),
    FlitKind.GROUP_SUM: (FlitKind.GROUP_SUM, FlitKind.ACTIVATION),
}


@dataclass
class Flit:
    kind: FlitKind
    lanes: np.ndarray           # int8 activations or int32 sums
    oy: int = 0                 # stream position of the OFM element fed
    ox: int = 0
    mi: int = 0

    @property
    def bits(self) -> int:
        return int(self.lanes.size) * (32 if self.lanes.dtype == np.int32 else 8)

    def advance_kind(self, new: FlitKind) -> FlitKind:
        if new not in _NEXT_KIND[self.kind]:
            raise ValueError(f"illegal flit kind transition {self.kind} -> {new}")
        return new


class EventCategory(Enum):
    BUF_READ = "BufRead"
    BUF_WRITE = "BufWrite"
    SCHED_FETCH = "SchedFetch"
    REG_IO = "RegIO"
    ADD = "Add"
    CMP = "Cmp"
    MUL = "Mul"
    ACT = "Act"
    PE_MAC = "PeMac"
    HOP_TX = "HopTx"
    HOP_RX = "HopRx"
    INTER_CHIP_BIT = "InterChipBit"


TRACE_VERSION = "meshcim-trace v1"


class ContentionError(RuntimeError):
    """Two writers drove one link direction in one slot: a compile bug."""


class EventSink:
    """Aggregated event counts per (category, chip), with an optional trace.

    Trace rows are aggregated per tile per row-pass; the slot column holds
    the first sub-slot of the run. Control-circuit activity is tracked in
    slots per chip (metadata the energy model prices per active cycle).
    """

    def __init__(self, trace: bool = False):
        self.counts: dict[tuple[EventCategory, int], int] = {}
        self.rifm_active_slots: dict[int, int] = {}
        self.rofm_active_slots: dict[int, int] = {}
        self.trace_rows: list[tuple[int, int, int, int, str, int]] | None = (
            [] if trace else None
        )

    def add(self, cat: EventCategory, chip: int, count: int,
            slot: int = 0, x: int = -1, y: int = -1) -> None:
        if count <= 0:
            return
        key = (cat, chip)
        self.counts[key] = self.counts.get(key, 0) + int(count)
        if self.trace_rows is not None:
            self.trace_rows.append((int(slot), x, y, chip, cat.value, int(count)))

    def control_active(self, chip: int, rifm_slots: int, rofm_slots: int) -> None:
        if rifm_slots:
            self.rifm_active_slots[chip] = self.rifm_active_slots.get(chip, 0) + int(rifm_slots)
        if rofm_slots:
            self.rofm_active_slots[chip] = self.rofm_active_slots.get(chip, 0) + int(rofm_slots)

    def total(self, cat: EventCategory) -> int:
        return sum(v for (c, _), v in self.counts.items() if c is cat)

    def merged(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for (cat, _), v in self.counts.items():
            out[cat.value] = out.get(cat.value, 0) + v
        return out

    def trace_csv(self) -> str:
        if self.trace_rows is None:
            raise ValueError("run was executed without tracing")
        lines = [f"# {TRACE_VERSION}", "slot,x,y,chip,category,count"]
        for row in self.trace_rows:
            lines.append(",".join(str(v) for v in row))
        return "\n".join(lines) + "\n"


@dataclass
class TileState:
    """One tile: input-map router (buffer + config), output-map router
    (schedule, regs, data buffer, compute unit), and the CIM array block."""

    assign: TileAssignment
    weight_block: np.ndarray | None = None      # int8 (C_slice, M_slice)
    schedule: ScheduleTable | None = None
    pool_schedule: ScheduleTable | None = None
    acc_reg: np.ndarray | None = None           # running-sum register lanes
    buffer: dict = field(default_factory=dict)  # keyed group-sum queue
    buffer_bytes: int = 0
    buffer_peak: int = 0
    rifm_bytes: int = 0

    ROFM_BUFFER_CAPACITY = 16 * 1024
    RIFM_BUFFER_CAPACITY = 256

    def buffer_push(self, key, lanes: np.ndarray) -> None:
        old = self.buffer.get(key)
        if old is not None:
            self.buffer_bytes -= old.nbytes
        self.buffer[key] = lanes
        self.buffer_bytes += lanes.nbytes
        if self.buffer_bytes > self.buffer_peak:
            self.buffer_peak = self.buffer_bytes

    def buffer_pop(self, key):
        lanes = self.buffer.pop(key, None)
        if lanes is not None:
            self.buffer_bytes -= lanes.nbytes
        return lanes


def pe_compute(tile: TileState, input_slice: np.ndarray) -> np.ndarray:
    """Exact integer MVM of one input slice against the tile's block."""
    if tile.weight_block is None:
        raise ValueError("tile has no weight block loaded")
    x = np.ascontiguousarray(input_slice.reshape(1, -1), dtype=np.int8)
    return np.asarray(kernels.mvm_batch(x, tile.weight_block))[0]


def rofm_exec(
    tile: TileState,
    instr: Instruction,
    incoming: list[Flit],
    *,
    requant_shift: int = 0,
    relu: bool = False,
    avg_scale: tuple[int, int] | None = None,
) -> list[Flit]:
    """Apply one decoded instruction to the tile's output-router state.

    C-type: accumulate incoming sums into the register (or buffer operand),
    honoring the push/pop queue bits. M-type: Add folds lanes, Act fuses
    accumulate + requantize (param 1 selects the saturating 8-bit mode),
    Cmp keeps lane maxima, Mul applies the average-pool scaling, Bp passes
    unchanged. Returns the flits to transmit.
    """
    out: list[Flit] = []
    if instr.variant is Variant.CTYPE:
        acc = tile.acc_reg
        for flit in incoming:
            v = flit.lanes.astype(np.int32)
            if instr.sum_ctrl & 0x8:      # accumulate-enable
                acc = v if acc is None else acc + v
            else:
                acc = v
        tile.acc_reg = acc
        if instr.tx_ctrl and acc is not None:
            out.append(Flit(FlitKind.PARTIAL_SUM, acc))
        return out

    func = instr.func
    if func is FuncCode.BP:
        out.extend(incoming)
    elif func is FuncCode.ADD:
        total = None
        for flit in incoming:
            v = flit.lanes.astype(np.int32)
            total = v if total is None else total + v
        if total is not None:
            out.append(Flit(FlitKind.GROUP_SUM, total))
    elif func is FuncCode.ACT:
        if instr.func_param == 1:         # saturating 8-bit add (skip joins)
            total = None
            for flit in incoming:
                v = flit.lanes.reshape(1, -1).astype(np.int8)
                total = v if total is None else np.asarray(kernels.sat_add8(total, v))
            lanes = total.reshape(-1)
            if relu:
                lanes = np.maximum(lanes, 0).astype(np.int8)
        else:
            total = tile.acc_reg
            for flit in incoming:
                v = flit.lanes.astype(np.int32)
                total = v if total is None else total + v
            tile.acc_reg = None
            lanes = np.asarray(
                kernels.relu_shift_sat8(total.reshape(1, -1), requant_shift, relu)
            ).reshape(-1)
        out.append(Flit(FlitKind.ACTIVATION, lanes))
    elif func is FuncCode.CMP:
        best = None
        for flit in incoming:
            best = flit.lanes if best is None else np.asarray(
                kernels.lane_max(best, flit.lanes)
            )
        if best is not None:
            out.append(Flit(FlitKind.ACTIVATION, best.astype(np.int8)))
    elif func is FuncCode.MUL:
        if avg_scale is None:
            raise ValueError("Mul requires an average-pool scale")
        mult, shift = avg_scale
        total = None
        for flit in incoming:
            v = flit.lanes.astype(np.int64)
            total = v if total is None else total + v
        scaled = (total * mult) >> shift
        out.append(Flit(FlitKind.ACTIVATION, np.clip(scaled, -128, 127).astype(np.int8)))
    else:
        raise ValueError(f"invalid function encoding {instr.func_op}")
    return out
