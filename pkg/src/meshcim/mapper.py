"""The compiler: allocates tiles, assigns weight blocks, generates per-tile
router configurations and periodic schedule tables.

Layout model
------------
Each chip is a mesh_cols x mesh_rows mesh holding tiles_per_chip tiles.
Tiles are allocated in snake order (left-to-right, then right-to-left on
the next row), so a region is a contiguous run of snake indices and chips
fill with no fragmentation. Convolution regions never split across chips
when they fit on one; fully-connected regions flow freely and may wrap
mid-column (the resulting inter-chip partial-sum traffic is accounted).

Convolution regions are logically K kernel-rows of chains. A chain is the
ordered run (kc, ci) of kernel-column / channel-block tiles that a row's
running sums traverse; one chain exists per output-block column mi. Row
sums descend from each chain tail to the next kernel-row's tail, and the
last kernel row applies activation (and pooling, when a pooling layer is
hosted there) before emitting.

Timing model
------------
The schedule counter advances in slots, the fine grain of the peripheral
(link) clock domain; one instruction-step of the control clock retires
arch.slots_per_step slots. A conv region consumes one feature-map row per
period p = 2*(P+W) slots (two sub-slots per streamed pixel: accept, then
forward). Layers execute as sequential phases separated by a mesh-wide
barrier of phase_barrier_slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import isa
from .isa import (
    BUF_RW,
    FuncCode,
    RX_N,
    RX_PE,
    RX_W,
    SUM_ACC,
    SUM_POP,
    SUM_PUSH,
    ScheduleTable,
    TX_E,
    TX_S,
    ctype,
    mtype,
)
from .netspec import LayerKind, LayerSpec, NetworkSpec, layer_output_shape

POOL_BLOCK_REUSE = "block_reuse"
POOL_WEIGHT_DUP = "weight_dup"
WEIGHT_DUP_FACTOR = 4   # 2x2 copies for pool_k = pool_stride = 2


class MappingError(ValueError):
    pass


class ScheduleCapacityError(MappingError):
    """A generated schedule does not fit the 128-entry table even compressed."""


@dataclass
class ArchConfig:
    n_c: int = 256                 # CIM array rows
    n_m: int = 256                 # CIM array columns
    tiles_per_chip: int = 240
    mesh_cols: int = 16
    mesh_rows: int = 15
    step_hz: float = 1e7           # instruction-step clock
    link_bits: int = 64            # wire width per direction at the link clock
    fdm_factor: int = 16           # link-clock transfers per step per direction
    slots_per_step: int = 8        # schedule slots retired per step (fdm/2)
    inter_chip_lanes: int = 8
    inter_chip_lane_bps: float = 80e9
    phase_barrier_slots: int = 384  # inter-phase drain + reconfigure sync
    max_chips: int = 0             # 0 = unlimited

    def __post_init__(self):
        if self.mesh_cols * self.mesh_rows < self.tiles_per_chip:
            raise ValueError(
                f"mesh {self.mesh_cols}x{self.mesh_rows} cannot hold "
                f"{self.tiles_per_chip} tiles"
            )
        for name in ("n_c", "n_m", "tiles_per_chip", "slots_per_step"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def tile_coord(self, index: int) -> tuple[int, int, int]:
        """Snake-order linear index -> (chip, x, y)."""
        chip, local = divmod(index, self.tiles_per_chip)
        y, x = divmod(local, self.mesh_cols)
        if y % 2 == 1:
            x = self.mesh_cols - 1 - x
        return chip, x, y


# ---------------------------------------------------------------------------
# tile-count formulas

def tiles_for_conv(k: int, c: int, m: int, n_c: int, n_m: int) -> int:
    """K^2 * ceil(C/N_c) * ceil(M/N_m) tiles for one weight tensor."""
    if min(k, c, m, n_c, n_m) < 1:
        raise ValueError("all arguments must be >= 1")
    return k * k * math.ceil(c / n_c) * math.ceil(m / n_m)


def tiles_for_fc(c_in: int, c_out: int, n_c: int, n_m: int) -> tuple[int, int]:
    """(ceil(C_in/N_c) rows, ceil(C_out/N_m) columns) of tiles."""
    if min(c_in, c_out, n_c, n_m) < 1:
        raise ValueError("all arguments must be >= 1")
    return math.ceil(c_in / n_c), math.ceil(c_out / n_m)


def conv_period(pad: int, w_in: int) -> int:
    """Schedule period per feature-map row for unit-stride convolution."""
    return 2 * (pad + w_in)


def pool_period(pool_stride: int) -> int:
    return 2 * pool_stride


# ---------------------------------------------------------------------------
# design data model

@dataclass
class RifmConfig:
    accept: str = "west"           # west | north | inject | none
    forward: tuple[str, ...] = ()
    shift_step: int = 0            # in-buffer shift, 64 or multiple of 128
    pack_factor: int = 1           # kernel-pixel copies packed per array
    shortcut: bool = False         # direct RIFM->ROFM path (skip streams)
    counter_offset: int = 0        # schedule-counter skew within the region
    channel_lo: int = 0            # input-channel slice served to the PE
    channel_hi: int = 0


@dataclass
class TileAssignment:
    index: int                     # snake-order linear index (global)
    chip: int
    x: int
    y: int
    layer_idx: int
    role: str                      # conv | fc | residual | pool
    kr: int = 0                    # kernel row
    chain_pos: int = 0             # position along the (kc, ci) chain
    kc: int = 0
    ci: int = 0
    mi: int = 0
    dup: int = 0                   # weight-duplication copy id
    row_lo: int = 0                # weight tensor slices
    row_hi: int = 0
    col_lo: int = 0
    col_hi: int = 0
    rifm: RifmConfig = field(default_factory=RifmConfig)
    schedule: ScheduleTable | None = None
    pool_schedule: ScheduleTable | None = None


@dataclass
class Region:
    layer_idx: int
    kind: str                      # conv | fc | pool | residual
    tiles: list[TileAssignment] = field(default_factory=list)
    period: int = 1
    # conv geometry
    k: int = 0
    cc: int = 1                    # ceil(C / N_c)
    mc: int = 1                    # ceil(M / N_m)
    stride: int = 1
    pad: int = 0
    in_shape: tuple[int, int, int] = (0, 0, 0)
    out_shape: tuple[int, int, int] = (0, 0, 0)
    # pooling
    pool_mode: str | None = None
    host_layer: int | None = None  # region whose emission tiles run the pool
    pool_k: int = 0
    pool_stride: int = 0
    phase_slots: int = 0

    @property
    def chain_len(self) -> int:
        return self.k * self.cc

    def chips(self) -> set[int]:
        return {t.chip for t in self.tiles}


@dataclass
class TrafficEdge:
    src_chip: int
    dst_chip: int
    bits: int
    kind: str                      # activation | partial_sum | input | output
    layer_idx: int


@dataclass
class MappedDesign:
    arch: ArchConfig
    regions: list[Region]
    n_chips: int
    total_tiles: int
    net_input_shape: tuple[int, int, int]

    def region_for_layer(self, layer_idx: int) -> Region:
        return self.regions[layer_idx]


# ---------------------------------------------------------------------------
# schedule generation

def _conv_contributes(i: int, kc_eff: int, pad: int, stride: int, w_out: int) -> bool:
    """Does streamed pixel column i feed this kernel column's MAC?"""
    num = i + pad - kc_eff
    return num >= 0 and num % stride == 0 and num // stride < w_out


def gen_conv_schedule(
    layer: LayerSpec,
    tile_position: int,
    w_in: int,
    pad: int,
    *,
    cc: int = 1,
    mc: int = 1,
) -> ScheduleTable:
    """Periodic table for one conv tile; period is exactly 2*(pad + w_in).

    tile_position indexes the region's logical order (kr-major, then the
    (kc, ci) chain, then mi). Stride != 1 masks the accumulate/PE bits on
    the non-contributing pixel slots; last-kernel-row chain tails carry the
    M-type activation entries that emit the finished output stream.
    """
    if layer.kind is not LayerKind.CONV:
        raise MappingError("gen_conv_schedule requires a conv layer")
    k = layer.k
    per_row = k * cc * mc
    total = k * per_row
    if not 0 <= tile_position < total:
        raise MappingError(f"tile position {tile_position} outside region of {total}")
    kr, rest = divmod(tile_position, per_row)
    chain_pos, mi = divmod(rest, mc)
    kc = chain_pos // cc
    w_out = (w_in + 2 * pad - k) // layer.stride + 1
    period = conv_period(pad, w_in)

    head = chain_pos == 0
    tail = chain_pos == k * cc - 1
    last_row = kr == k - 1

    words = []
    for i in range(w_in):
        work = _conv_contributes(i, kc, pad, layer.stride, w_out)
        rx = (0 if head else RX_W) | (RX_PE if work else 0)
        if tail:
            rx |= 0 if kr == 0 else RX_N
            if last_row:
                words.append(mtype(rx=rx, func=FuncCode.ACT, param=0, tx=TX_E))
            else:
                words.append(
                    ctype(rx=rx, sum_ctrl=SUM_ACC | SUM_PUSH | SUM_POP,
                          buffer_ctrl=BUF_RW, tx=TX_S)
                )
        else:
            sum_ctrl = SUM_ACC if work else 0
            words.append(ctype(rx=rx, sum_ctrl=sum_ctrl, tx=TX_E))
    slots = []
    for word in words:
        slots.extend((word, word))      # accept sub-slot, forward sub-slot
    slots.extend([0x0000] * (period - len(slots)))
    if len(slots) != period:
        raise ScheduleCapacityError(
            f"row of {w_in} pixels does not fit period {period}"
        )
    try:
        return ScheduleTable.from_words(slots)
    except ValueError as exc:
        raise ScheduleCapacityError(
            f"conv schedule for stride {layer.stride}, width {w_in} needs more "
            f"than {isa.SCHEDULE_CAPACITY} entries"
        ) from exc


def gen_pool_schedule(pool_k: int, pool_stride: int, mode: str) -> ScheduleTable:
    """Pooling emission table; period is exactly 2 * pool_stride."""
    if pool_k < 1 or pool_stride < 1:
        raise MappingError("pool_k and pool_stride must be >= 1")
    if mode not in (POOL_BLOCK_REUSE, POOL_WEIGHT_DUP):
        raise MappingError(f"unknown pooling mode {mode!r}")
    if mode == POOL_WEIGHT_DUP and not (pool_k == 2 and pool_stride == 2):
        raise MappingError("weight-duplication pooling requires pool_k = pool_stride = 2")
    period = pool_period(pool_stride)
    func = FuncCode.CMP             # Mul for averages is selected per layer kind
    rx = RX_W if mode == POOL_WEIGHT_DUP else RX_PE
    words = [mtype(rx=rx, func=func, param=0) for _ in range(period - 1)]
    words.append(mtype(rx=rx, func=func, param=1, tx=TX_E))
    return ScheduleTable.from_words(words)


def _gen_pool_schedule_for(layer: LayerSpec, mode: str) -> ScheduleTable:
    table = gen_pool_schedule(layer.pool_k, layer.pool_stride, mode)
    if layer.kind is LayerKind.AVGPOOL:
        period = table.period
        rx = RX_W if mode == POOL_WEIGHT_DUP else RX_PE
        words = [mtype(rx=rx, func=FuncCode.MUL, param=0) for _ in range(period - 1)]
        words.append(mtype(rx=rx, func=FuncCode.MUL, param=1, tx=TX_E))
        table = ScheduleTable.from_words(words)
    return table


def _fc_schedule(tail: bool) -> ScheduleTable:
    if tail:
        active = mtype(rx=RX_N | RX_PE, func=FuncCode.ACT, param=0, tx=TX_E)
    else:
        active = ctype(rx=RX_N | RX_PE, sum_ctrl=SUM_ACC, tx=TX_S)
    return ScheduleTable.from_words([active, 0x0000])


def _residual_schedule() -> ScheduleTable:
    # param 1 selects the saturating 8-bit add mode of the compute unit
    active = mtype(rx=RX_W | RX_N, func=FuncCode.ACT, param=1, tx=TX_E)
    return ScheduleTable.from_words([active, 0x0000])


# ---------------------------------------------------------------------------
# phase length model (slots)

def conv_phase_slots(h_in: int, pad: int, period: int) -> int:
    # warmup period + one period per streamed row + pad/drain periods
    return (h_in + 2 * pad + 2) * period


def pool_phase_slots(h_out: int, pool_stride: int) -> int:
    return (h_out + 2) * pool_period(pool_stride)


def fc_phase_slots(cc: int) -> int:
    return 2 * cc + 16


def residual_phase_slots(h: int, w: int) -> int:
    return h * w + 16


# ---------------------------------------------------------------------------
# first-layer packing (energy optimization; no effect on timing or counts)

def pack_factor(c: int, m: int, n_c: int, n_m: int) -> tuple[int, int]:
    """(copies, shift_step): block-diagonal weight copies exploiting spare
    array rows when the channel count is small. Each packed copy is served
    by an in-buffer shift of 64 positions (or a multiple of 128)."""
    if c * (n_c // c) < 2 * c:
        return 1, 0
    copies = min(n_c // c, n_m // m) if m <= n_m else 1
    if copies < 2:
        return 1, 0
    step = 64 if c * 8 <= 64 else 128 * math.ceil(c * 8 / 128)
    return copies, step


# ---------------------------------------------------------------------------
# map_network

def map_network(
    net: NetworkSpec,
    arch: ArchConfig,
    pool_modes: dict[int, str] | None = None,
) -> MappedDesign:
    """Place every layer, assign weight blocks, and emit all schedules."""
    pool_modes = pool_modes or {}
    regions: list[Region] = []
    next_index = 0

    def alloc(count: int, no_split: bool) -> list[int]:
        nonlocal next_index
        if no_split:
            if count > arch.tiles_per_chip:
                raise MappingError(
                    f"region of {count} tiles exceeds a {arch.tiles_per_chip}-tile "
                    f"chip and may not split"
                )
            chip_now, used = divmod(next_index, arch.tiles_per_chip)
            if used + count > arch.tiles_per_chip:
                next_index = (chip_now + 1) * arch.tiles_per_chip
        start = next_index
        next_index += count
        return list(range(start, start + count))

    shapes = net.layer_shapes()
    cur = net.input_shape
    for idx, layer in enumerate(net.layers):
        out = shapes[idx]
        if layer.kind is LayerKind.CONV:
            region = _build_conv_region(net, arch, idx, layer, cur, out, pool_modes, alloc)
        elif layer.kind is LayerKind.FC:
            region = _build_fc_region(arch, idx, layer, cur, out, alloc)
        elif layer.kind in (LayerKind.MAXPOOL, LayerKind.AVGPOOL):
            region = _build_pool_region(net, arch, idx, layer, cur, out, pool_modes, regions)
        else:  # residual
            region = _build_residual_region(arch, idx, layer, cur, alloc)
        regions.append(region)
        cur = out

    total = next_index
    highest_chip = max((t.chip for r in regions for t in r.tiles), default=0)
    n_chips = max(highest_chip + 1, math.ceil(total / arch.tiles_per_chip)) if total else 1
    if arch.max_chips and n_chips > arch.max_chips:
        raise MappingError(
            f"design needs {n_chips} chips but the budget is {arch.max_chips}"
        )
    return MappedDesign(
        arch=arch,
        regions=regions,
        n_chips=n_chips,
        total_tiles=total,
        net_input_shape=net.input_shape,
    )


def _build_conv_region(net, arch, idx, layer, in_shape, out_shape, pool_modes, alloc):
    h, w, c = in_shape
    cc = math.ceil(layer.c_in / arch.n_c)
    mc = math.ceil(layer.c_out / arch.n_m)
    k = layer.k
    base_tiles = tiles_for_conv(k, layer.c_in, layer.c_out, arch.n_c, arch.n_m)

    dup = 1
    nxt = idx + 1
    if (
        nxt < len(net.layers)
        and net.layers[nxt].kind in (LayerKind.MAXPOOL, LayerKind.AVGPOOL)
        and pool_modes.get(nxt, POOL_BLOCK_REUSE) == POOL_WEIGHT_DUP
    ):
        dup = WEIGHT_DUP_FACTOR

    indices = alloc(base_tiles * dup, no_split=True)
    copies, shift_step = pack_factor(layer.c_in, layer.c_out, arch.n_c, arch.n_m)

    region = Region(
        layer_idx=idx, kind="conv", period=conv_period(layer.pad, w),
        k=k, cc=cc, mc=mc, stride=layer.stride, pad=layer.pad,
        in_shape=in_shape, out_shape=out_shape,
        phase_slots=conv_phase_slots(h, layer.pad, conv_period(layer.pad, w)),
    )
    pos = 0
    for d in range(dup):
        for kr in range(k):
            for chain_pos in range(k * cc):
                kc, ci = divmod(chain_pos, cc)
                for mi in range(mc):
                    index = indices[pos]
                    chip, x, y = arch.tile_coord(index)
                    row_lo = ci * arch.n_c
                    row_hi = min(layer.c_in, row_lo + arch.n_c)
                    col_lo = mi * arch.n_m
                    col_hi = min(layer.c_out, col_lo + arch.n_m)
                    tile = TileAssignment(
                        index=index, chip=chip, x=x, y=y, layer_idx=idx,
                        role="conv", kr=kr, chain_pos=chain_pos, kc=kc, ci=ci,
                        mi=mi, dup=d,
                        row_lo=row_lo, row_hi=row_hi, col_lo=col_lo, col_hi=col_hi,
                        rifm=RifmConfig(
                            accept="inject" if idx == 0 and chain_pos == 0 else "west",
                            forward=("east",) if chain_pos < k * cc - 1 else (),
                            shift_step=shift_step, pack_factor=copies,
                            counter_offset=2 * chain_pos,
                            channel_lo=row_lo, channel_hi=row_hi,
                        ),
                        schedule=gen_conv_schedule(layer, pos % base_tiles, w, layer.pad, cc=cc, mc=mc),
                    )
                    region.tiles.append(tile)
                    pos += 1
    _attach_hosted_pool(net, idx, region, pool_modes)
    return region


def _attach_hosted_pool(net, idx, region, pool_modes):
    """Last-kernel-row chain tails run the following pool layer in transit."""
    nxt = idx + 1
    if nxt >= len(net.layers):
        return
    pool = net.layers[nxt]
    if pool.kind not in (LayerKind.MAXPOOL, LayerKind.AVGPOOL):
        return
    mode = pool_modes.get(nxt, POOL_BLOCK_REUSE)
    table = _gen_pool_schedule_for(pool, mode)
    for tile in region.tiles:
        if tile.kr == region.k - 1 and tile.chain_pos == region.chain_len - 1:
            tile.pool_schedule = table


def _build_fc_region(arch, idx, layer, in_shape, out_shape, alloc):
    cc, mc = tiles_for_fc(layer.c_in, layer.c_out, arch.n_c, arch.n_m)
    indices = alloc(cc * mc, no_split=False)   # fc regions flow across chips
    region = Region(
        layer_idx=idx, kind="fc", period=2, cc=cc, mc=mc,
        in_shape=in_shape, out_shape=out_shape,
        phase_slots=fc_phase_slots(cc),
    )
    pos = 0
    for mi in range(mc):
        for ci in range(cc):
            index = indices[pos]
            chip, x, y = arch.tile_coord(index)
            row_lo = ci * arch.n_c
            row_hi = min(layer.c_in, row_lo + arch.n_c)
            col_lo = mi * arch.n_m
            col_hi = min(layer.c_out, col_lo + arch.n_m)
            region.tiles.append(
                TileAssignment(
                    index=index, chip=chip, x=x, y=y, layer_idx=idx, role="fc",
                    ci=ci, mi=mi, chain_pos=ci,
                    row_lo=row_lo, row_hi=row_hi, col_lo=col_lo, col_hi=col_hi,
                    rifm=RifmConfig(
                        accept="north" if ci else "inject",
                        counter_offset=2 * ci,
                        channel_lo=row_lo, channel_hi=row_hi,
                    ),
                    schedule=_fc_schedule(tail=ci == cc - 1),
                )
            )
            pos += 1
    return region


def _build_pool_region(net, arch, idx, layer, in_shape, out_shape, pool_modes, regions):
    mode = pool_modes.get(idx, POOL_BLOCK_REUSE)
    host = idx - 1 if idx > 0 and regions[idx - 1].tiles else None
    region = Region(
        layer_idx=idx, kind="pool", period=pool_period(layer.pool_stride),
        in_shape=in_shape, out_shape=out_shape,
        pool_mode=mode, host_layer=host,
        pool_k=layer.pool_k, pool_stride=layer.pool_stride,
        phase_slots=pool_phase_slots(out_shape[0], layer.pool_stride),
    )
    if mode == POOL_WEIGHT_DUP:
        if host is None or regions[host].kind != "conv":
            raise MappingError(
                f"layer {idx}: weight-duplication pooling needs a preceding conv layer"
            )
        gen_pool_schedule(layer.pool_k, layer.pool_stride, mode)  # validates k/stride
    return region


def _build_residual_region(arch, idx, layer, in_shape, alloc):
    indices = alloc(1, no_split=True)
    chip, x, y = arch.tile_coord(indices[0])
    region = Region(
        layer_idx=idx, kind="residual", period=2,
        in_shape=in_shape, out_shape=in_shape,
        phase_slots=residual_phase_slots(in_shape[0], in_shape[1]),
    )
    region.tiles.append(
        TileAssignment(
            index=indices[0], chip=chip, x=x, y=y, layer_idx=idx, role="residual",
            rifm=RifmConfig(accept="west", shortcut=True),
            schedule=_residual_schedule(),
        )
    )
    return region


# ---------------------------------------------------------------------------
# traffic partitioning

def partition_traffic(design: MappedDesign, act_bits: int = 8) -> list[TrafficEdge]:
    """Inter-chip edges with exact bit volumes per inference.

    Covers layer-boundary activations, image input / result output, and the
    partial-sum hops of region chains that wrap across chips.
    """
    edges: list[TrafficEdge] = []
    prev_chip = 0   # input arrives at chip 0's boundary
    h, w, c = design.net_input_shape
    edges.append(TrafficEdge(-1, 0, h * w * c * act_bits, "input", -1))
    prev_elems = h * w * c

    for region in design.regions:
        if region.tiles:
            entry_chip = region.tiles[0].chip
            exit_chip = region.tiles[-1].chip
        else:   # hosted pool: lives on its host's emission tiles
            host = design.regions[region.host_layer] if region.host_layer is not None else None
            entry_chip = exit_chip = (host.tiles[-1].chip if host and host.tiles else prev_chip)
        in_elems = int(np.prod(region.in_shape))
        if entry_chip != prev_chip:
            edges.append(
                TrafficEdge(prev_chip, entry_chip, in_elems * act_bits, "activation",
                            region.layer_idx)
            )
        # chain hops that wrap across chips carry 32-bit running sums
        for a, b in zip(region.tiles, region.tiles[1:]):
            if a.chip != b.chip and _chained(region, a, b):
                lanes = a.col_hi - a.col_lo
                if region.kind == "conv":
                    per_link = region.out_shape[0] * region.out_shape[1]
                else:
                    per_link = 1
                edges.append(
                    TrafficEdge(a.chip, b.chip, per_link * lanes * 32, "partial_sum",
                                region.layer_idx)
                )
        prev_chip = exit_chip
        prev_elems = int(np.prod(region.out_shape))
    edges.append(TrafficEdge(prev_chip, -1, prev_elems * act_bits, "output",
                             len(design.regions) - 1))
    return edges


def _chained(region: Region, a: TileAssignment, b: TileAssignment) -> bool:
    """Consecutive logical tiles that actually exchange running sums."""
    if region.kind == "fc":
        return a.mi == b.mi and b.ci == a.ci + 1
    if region.kind == "conv":
        return a.kr == b.kr and a.dup == b.dup
    return False


# ---------------------------------------------------------------------------
# manifest serialization (round-trips losslessly)

def design_to_manifest(design: MappedDesign) -> str:
    doc = {
        "version": 1,
        "arch": {
            "n_c": design.arch.n_c, "n_m": design.arch.n_m,
            "tiles_per_chip": design.arch.tiles_per_chip,
            "mesh_cols": design.arch.mesh_cols, "mesh_rows": design.arch.mesh_rows,
            "step_hz": design.arch.step_hz, "link_bits": design.arch.link_bits,
            "fdm_factor": design.arch.fdm_factor,
            "slots_per_step": design.arch.slots_per_step,
            "inter_chip_lanes": design.arch.inter_chip_lanes,
            "inter_chip_lane_bps": design.arch.inter_chip_lane_bps,
            "phase_barrier_slots": design.arch.phase_barrier_slots,
            "max_chips": design.arch.max_chips,
        },
        "n_chips": design.n_chips,
        "total_tiles": design.total_tiles,
        "net_input_shape": list(design.net_input_shape),
        "regions": [],
    }
    for region in design.regions:
        rdoc = {
            "layer": region.layer_idx, "kind": region.kind, "period": region.period,
            "k": region.k, "cc": region.cc, "mc": region.mc,
            "stride": region.stride, "pad": region.pad,
            "in_shape": list(region.in_shape), "out_shape": list(region.out_shape),
            "pool_mode": region.pool_mode, "host_layer": region.host_layer,
            "pool_k": region.pool_k, "pool_stride": region.pool_stride,
            "phase_slots": region.phase_slots,
            "tiles": [],
        }
        for t in region.tiles:
            rdoc["tiles"].append({
                "index": t.index, "chip": t.chip, "x": t.x, "y": t.y,
                "role": t.role, "kr": t.kr, "chain_pos": t.chain_pos,
                "kc": t.kc, "ci": t.ci, "mi": t.mi, "dup": t.dup,
                "rows": [t.row_lo, t.row_hi], "cols": [t.col_lo, t.col_hi],
                "rifm": {
                    "accept": t.rifm.accept, "forward": list(t.rifm.forward),
                    "shift_step": t.rifm.shift_step, "pack_factor": t.rifm.pack_factor,
                    "shortcut": t.rifm.shortcut,
                    "counter_offset": t.rifm.counter_offset,
                    "channels": [t.rifm.channel_lo, t.rifm.channel_hi],
                },
                "schedule": [list(e) for e in t.schedule.entries] if t.schedule else None,
                "pool_schedule": (
                    [list(e) for e in t.pool_schedule.entries] if t.pool_schedule else None
                ),
            })
        doc["regions"].append(rdoc)
    return yaml.safe_dump(doc, sort_keys=True)


def design_from_manifest(text: str) -> MappedDesign:
    doc = yaml.safe_load(text)
    if doc.get("version") != 1:
        raise MappingError(f"unsupported manifest version {doc.get('version')}")
    arch = ArchConfig(**doc["arch"])
    regions = []
    for rdoc in doc["regions"]:
        region = Region(
            layer_idx=rdoc["layer"], kind=rdoc["kind"], period=rdoc["period"],
            k=rdoc["k"], cc=rdoc["cc"], mc=rdoc["mc"],
            stride=rdoc["stride"], pad=rdoc["pad"],
            in_shape=tuple(rdoc["in_shape"]), out_shape=tuple(rdoc["out_shape"]),
            pool_mode=rdoc["pool_mode"], host_layer=rdoc["host_layer"],
            pool_k=rdoc["pool_k"], pool_stride=rdoc["pool_stride"],
            phase_slots=rdoc["phase_slots"],
        )
        for tdoc in rdoc["tiles"]:
            rifm = tdoc["rifm"]
            region.tiles.append(TileAssignment(
                index=tdoc["index"], chip=tdoc["chip"], x=tdoc["x"], y=tdoc["y"],
                layer_idx=rdoc["layer"], role=tdoc["role"], kr=tdoc["kr"],
                chain_pos=tdoc["chain_pos"], kc=tdoc["kc"], ci=tdoc["ci"],
                mi=tdoc["mi"], dup=tdoc["dup"],
                row_lo=tdoc["rows"][0], row_hi=tdoc["rows"][1],
                col_lo=tdoc["cols"][0], col_hi=tdoc["cols"][1],
                rifm=RifmConfig(
                    accept=rifm["accept"], forward=tuple(rifm["forward"]),
                    shift_step=rifm["shift_step"], pack_factor=rifm["pack_factor"],
                    shortcut=rifm["shortcut"], counter_offset=rifm["counter_offset"],
                    channel_lo=rifm["channels"][0], channel_hi=rifm["channels"][1],
                ),
                schedule=ScheduleTable(tdoc["schedule"]) if tdoc["schedule"] else None,
                pool_schedule=(
                    ScheduleTable(tdoc["pool_schedule"]) if tdoc["pool_schedule"] else None
                ),
            ))
        regions.append(region)
    return MappedDesign(
        arch=arch, regions=regions, n_chips=doc["n_chips"],
        total_tiles=doc["total_tiles"],
        net_input_shape=tuple(doc["net_input_shape"]),
    )


def dump_schedules(design: MappedDesign) -> str:
    """Per-tile schedule dump in the isa text format (audit artifact)."""
    parts = []
    for region in design.regions:
        for tile in region.tiles:
            if tile.schedule is not None:
                parts.append(isa.dump_schedule(tile.schedule, tile.chip, tile.x, tile.y))
    return "".join(parts)


# ---------------------------------------------------------------------------
# symbolic execution: the compiler self-check, independent of the simulator

def symbolic_execute(design: MappedDesign, net: NetworkSpec, image: np.ndarray) -> np.ndarray:
    """Evaluate the mapped dataflow from the assigned weight blocks alone.

    Walks regions in order, reconstructing each layer's arithmetic from the
    per-tile block assignments (not from layer.weights as a whole), so a
    mis-sliced or mis-ordered block assignment shows up as a wrong answer.
    """
    from .fabric.symbolic import run_symbolic   # local import: avoids a cycle
    return run_symbolic(design, net, image)
