"""Slot-stepped execution of a MappedDesign.

Layers run as sequential phases separated by a mesh-wide barrier. Within a
conv phase the region consumes one feature-map row per schedule period
p = 2*(P+W): each streamed pixel occupies a sub-slot pair on the chain
links (pixel forward + running-sum forward), kernel-row sums descend one
tile-row per period, and the last kernel row's chain tails apply
activation (M-type entries) and emit the output stream. The engine
executes rows as vectorized batches while stamping every emission and
event with the slot it occupies, so cycle counts, traces, and the
one-row-segment-per-period property are exact while the arithmetic runs
at numpy/kernel speed.

All arithmetic is integer-exact: the run output must equal the netspec
oracle bit for bit, or the run reports a verification failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..isa import RX_PE, Variant
from ..mapper import (
    MappedDesign,
    POOL_WEIGHT_DUP,
    Region,
    TileAssignment,
)
from ..netspec import Activation, LayerKind, NetworkSpec
from ..scaling import avg_pool_scale
from .state import (
    ContentionError,
    EventCategory as EC,
    EventSink,
    TileState,
)

ROFM_CAPACITY = TileState.ROFM_BUFFER_CAPACITY


class FabricTimeout(RuntimeError):
    def __init__(self, layer_idx: int, missing: list[tuple[int, int]], cycles: int):
        self.layer_idx = layer_idx
        self.missing = missing
        super().__init__(
            f"run exceeded max_cycles={cycles} during layer {layer_idx}; "
            f"{len(missing)} output coordinates incomplete (first: {missing[:4]})"
        )


@dataclass
class PhaseRecord:
    layer_idx: int
    kind: str
    start_slot: int
    end_slot: int
    period: int
    rows: int = 0
    emissions: list[tuple[int, int]] = field(default_factory=list)  # (row, first/last slot)


@dataclass
class RunResult:
    output: np.ndarray
    cycles: int                  # instruction steps, Table-scale
    slots: int                   # fine-grain schedule slots
    events: EventSink
    phases: list[PhaseRecord]
    capacity_warnings: list[str]
    layer_outputs: list[np.ndarray]

    @property
    def trace_csv(self) -> str:
        return self.events.trace_csv()


def _units(bits: int) -> int:
    """64-bit link units for a payload of the given width."""
    return max(1, math.ceil(bits / 64))


# Chain links clock a fixed flit budget per pixel sub-slot pair: the wire is
# 64 bits wide and a slot spans fdm_factor / slots_per_step link ticks, so
# in-region transfers (pixel forward, running-sum forward, descent) are
# charged by clocked flits, not by logical vector width. Inter-region
# activation streams are charged by their true 8-bit volume.
def _link_flits(arch) -> int:
    return max(1, arch.fdm_factor // arch.slots_per_step)


def _xy_hops(a: tuple[int, int], b: tuple[int, int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


class Fabric:
    """A mesh loaded with one MappedDesign; exclusively owned by its driver."""

    def __init__(
        self,
        design: MappedDesign,
        net: NetworkSpec,
        *,
        trace: bool = False,
        order_seed: int | None = None,
    ):
        self.design = design
        self.net = net
        self.arch = design.arch
        self.trace = trace
        self.order = np.random.default_rng(order_seed) if order_seed is not None else None
        self.tiles: dict[int, TileState] = {}
        self._blocks: dict[int, np.ndarray] = {}
        for region in design.regions:
            layer = net.layers[region.layer_idx]
            for t in region.tiles:
                state = TileState(assign=t, schedule=t.schedule,
                                  pool_schedule=t.pool_schedule)
                if region.kind in ("conv", "fc") and layer.weights is not None:
                    if region.kind == "conv":
                        block = layer.weights[t.kr, t.kc, t.row_lo:t.row_hi, t.col_lo:t.col_hi]
                    else:
                        block = layer.weights[t.row_lo:t.row_hi, t.col_lo:t.col_hi]
                    state.weight_block = np.ascontiguousarray(block, dtype=np.int8)
                self.tiles[t.index] = state
                self._validate_schedule(region, t)

    # -- schedule audit ----------------------------------------------------

    def _validate_schedule(self, region: Region, t: TileAssignment) -> None:
        """The engine's actions must match the tile's control words."""
        if t.schedule is None or region.kind != "conv":
            return
        layer = self.net.layers[region.layer_idx]
        w_in = region.in_shape[1]
        w_out = region.out_shape[1]
        for i in range(w_in):
            word = t.schedule.fetch(2 * i)
            num = i + region.pad - t.kc
            contributes = num >= 0 and num % layer.stride == 0 and num // layer.stride < w_out
            pe_bit = bool(word.rx_ctrl & RX_PE)
            if pe_bit != contributes:
                raise ContentionError(
                    f"tile {t.index} schedule disagrees with dataflow at pixel {i}: "
                    f"PE bit {pe_bit}, expected {contributes}"
                )
            last_row_tail = t.kr == region.k - 1 and t.chain_pos == region.chain_len - 1
            if last_row_tail and word.variant is not Variant.MTYPE:
                raise ContentionError(
                    f"emission tile {t.index} lacks M-type entry at pixel {i}"
                )

    # -- public API ---------------------------------------------------------

    def run_inference(self, image: np.ndarray, max_cycles: int | None = None) -> RunResult:
        gen = self._execute(image, max_cycles)
        result = None
        for item in gen:
            if item[0] == "result":
                result = item[1]
        assert result is not None
        return result

    def stepper(self, image: np.ndarray, max_cycles: int | None = None) -> "Stepper":
        if not self.trace:
            raise ValueError("stepper requires a tracing fabric (trace=True)")
        return Stepper(self, image, max_cycles)

    # -- execution ----------------------------------------------------------

    def _execute(self, image: np.ndarray, max_cycles: int | None):
        net, design, arch = self.net, self.design, self.arch
        if tuple(image.shape) != tuple(net.input_shape):
            raise ValueError(f"input shape {image.shape} != {net.input_shape}")
        sink = EventSink(trace=self.trace)
        phases: list[PhaseRecord] = []
        warnings: list[str] = []
        slot = 0
        sps = arch.slots_per_step

        if not design.regions:   # an empty design does nothing at all
            result = RunResult(
                output=np.ascontiguousarray(image, dtype=np.int8), cycles=0,
                slots=0, events=sink, phases=[], capacity_warnings=[],
                layer_outputs=[],
            )
            yield ("result", result)
            return

        # image arrives over the chip boundary
        h, w, c = net.input_shape
        sink.add(EC.INTER_CHIP_BIT, 0, h * w * c * 8)
        cur = np.ascontiguousarray(image, dtype=np.int8)
        outputs: list[np.ndarray] = []
        prev_exit: tuple[int, tuple[int, int]] = (0, (0, 0))   # (chip, (x, y))

        for region in design.regions:
            layer = net.layers[region.layer_idx]
            slot += arch.phase_barrier_slots
            start = slot
            budget_end = start + region.phase_slots
            if max_cycles is not None and math.ceil(budget_end / sps) > max_cycles:
                oh, ow = region.out_shape[:2]
                missing = [(oy, ox) for oy in range(oh) for ox in range(ow)]
                raise FabricTimeout(region.layer_idx, missing, max_cycles)

            record = PhaseRecord(region.layer_idx, region.kind, start, budget_end,
                                 region.period)
            entry = self._entry_anchor(region)
            self._charge_stream_entry(sink, region, cur, prev_exit, entry, start)

            if region.kind == "conv":
                cur = self._run_conv(sink, region, layer, cur, start, record)
            elif region.kind == "fc":
                cur = self._run_fc(sink, region, layer, cur, start, record)
            elif region.kind == "pool":
                cur = self._run_pool(sink, region, layer, cur, start, record)
            else:
                cur = self._run_residual(sink, region, layer, cur, outputs, image,
                                         start, record)
            outputs.append(cur)
            slot = budget_end
            prev_exit = (self._exit_chip(region), self._exit_coord(region))
            phases.append(record)
            yield ("phase", record)

        # result leaves over the boundary of the last chip
        sink.add(EC.INTER_CHIP_BIT, prev_exit[0], int(cur.size) * 8)
        sink.add(EC.HOP_TX, prev_exit[0], int(cur.size), slot)
        sink.add(EC.HOP_RX, prev_exit[0], int(cur.size), slot)

        for state in self.tiles.values():
            if state.buffer_peak > ROFM_CAPACITY:
                t = state.assign
                warnings.append(
                    f"tile {t.index} (chip {t.chip}, {t.x},{t.y}) data buffer peaked at "
                    f"{state.buffer_peak} B > {ROFM_CAPACITY} B"
                )

        cycles = math.ceil(slot / sps)
        if max_cycles is not None and cycles > max_cycles:
            raise FabricTimeout(len(design.regions) - 1, [], max_cycles)
        result = RunResult(
            output=cur, cycles=cycles, slots=slot, events=sink, phases=phases,
            capacity_warnings=warnings, layer_outputs=outputs,
        )
        yield ("result", result)

    # -- helpers ------------------------------------------------------------

    def _region_tiles(self, region: Region) -> list[TileAssignment]:
        return region.tiles

    def _entry_anchor(self, region: Region) -> tuple[int, tuple[int, int]]:
        if region.tiles:
            t = region.tiles[0]
            return t.chip, (t.x, t.y)
        if region.host_layer is not None:
            host = self.design.regions[region.host_layer]
            if host.tiles:
                t = host.tiles[-1]
                return t.chip, (t.x, t.y)
        return 0, (0, 0)

    def _exit_chip(self, region: Region) -> int:
        if region.tiles:
            return region.tiles[-1].chip
        if region.host_layer is not None:
            host = self.design.regions[region.host_layer]
            if host.tiles:
                return host.tiles[-1].chip
        return 0

    def _exit_coord(self, region: Region) -> tuple[int, int]:
        if region.tiles:
            t = region.tiles[-1]
            return (t.x, t.y)
        if region.host_layer is not None:
            host = self.design.regions[region.host_layer]
            if host.tiles:
                t = host.tiles[-1]
                return (t.x, t.y)
        return (0, 0)

    def _charge_stream_entry(self, sink, region, fmap, prev_exit, entry, slot) -> None:
        """Transit of the phase's input stream from the producer's exit."""
        elems = int(np.prod(fmap.shape[:2])) if fmap.ndim == 3 else 1
        cbits = (fmap.shape[2] if fmap.ndim == 3 else fmap.size) * 8
        units = _units(cbits)
        src_chip, src_xy = prev_exit
        dst_chip, dst_xy = entry
        hops = _xy_hops(src_xy, dst_xy) + 1
        sink.add(EC.HOP_TX, src_chip, elems * units * hops, slot, *src_xy)
        sink.add(EC.HOP_RX, dst_chip, elems * units * hops, slot, *dst_xy)
        if src_chip != dst_chip:
            bits = int(np.prod(fmap.shape)) * 8
            sink.add(EC.INTER_CHIP_BIT, src_chip, bits, slot)

    # -- conv ---------------------------------------------------------------

    def _run_conv(self, sink, region, layer, ifm, start, record):
        arch = self.arch
        h, w, c = ifm.shape
        ho, wo, m = region.out_shape
        k, cc, mc, s, pad = region.k, region.cc, region.mc, region.stride, region.pad
        p = region.period
        chain_len = region.chain_len
        dup = max(t.dup for t in region.tiles) + 1 if region.tiles else 1
        units_px = _units(c * 8)
        record.rows = h

        # chain tiles for the math (dup copy 0), grouped [kr][mi] -> ordered chain
        chains: dict[tuple[int, int], list[TileAssignment]] = {}
        for t in region.tiles:
            if t.dup == 0:
                chains.setdefault((t.kr, t.mi), []).append(t)
        for key in chains:
            chains[key].sort(key=lambda t: t.chain_pos)

        # per-kc pixel index tables: which streamed column feeds which output
        ox_tab: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for kc in range(k):
            ox = np.arange(wo)
            x = ox * s - pad + kc
            valid = (x >= 0) & (x < w)
            ox_tab[kc] = (ox[valid], x[valid])

        out = np.zeros((ho, wo, m), dtype=np.int8)
        pend: dict[tuple[int, int], np.ndarray] = {}   # (mi, oy) -> (wo, lanes) int32
        desc_routes = self._descent_routes(region, chains)

        for r in range(-pad, h + pad):
            row_base = start + (1 + r + pad) * p
            streaming = 0 <= r < h
            if streaming:
                row = ifm[r]
                self._charge_pixel_stream(sink, region, row_base, w, units_px, dup)
            for kr in range(k):
                num = r + pad - kr
                if num < 0 or num % s != 0:
                    continue
                oy = num // s
                if oy >= ho:
                    continue
                for mi in range(mc):
                    chain = chains[(kr, mi)]
                    lanes = chain[0].col_hi - chain[0].col_lo
                    group = np.zeros((wo, lanes), dtype=np.int32)
                    if streaming:
                        self._chain_math(sink, region, layer, chain, row, group,
                                         ox_tab, row_base, dup, wo)
                    tail = chain[-1]
                    key = (mi, oy)
                    v = pend.get(key)
                    v = group if v is None else v + group
                    if kr < k - 1:
                        pend[key] = v
                        self._charge_descent(sink, tail, desc_routes.get((kr, mi), 1),
                                             wo, lanes, row_base, dup)
                        self.tiles[tail.index].buffer_push((mi, oy), v)
                        self.tiles[tail.index].buffer_pop((mi, oy - 1))
                    else:
                        pend.pop(key, None)
                        acts = np.asarray(kernels.relu_shift_sat8(
                            v, layer.requant_shift,
                            layer.activation is Activation.RELU,
                        ))
                        out[oy, :, tail.col_lo:tail.col_hi] = acts
                        stamp = row_base + 2 * chain_len + 1
                        sink.add(EC.ACT, tail.chip, wo * lanes * dup, stamp, tail.x, tail.y)
                        sink.add(EC.REG_IO, tail.chip, wo * _units(lanes * 8) * dup,
                                 stamp, tail.x, tail.y)
                        record.emissions.append((oy, stamp))
        return out

    def _chain_math(self, sink, region, layer, chain, row, group, ox_tab,
                    row_base, dup, wo):
        order = list(chain)
        if self.order is not None:
            perm = self.order.permutation(len(order))
            order = [order[i] for i in perm]
        lanes = chain[0].col_hi - chain[0].col_lo
        units_acc = _link_flits(self.arch)
        for t in order:
            ox_idx, x_idx = ox_tab[t.kc]
            n = len(ox_idx)
            if n:
                x_slice = np.ascontiguousarray(row[x_idx, t.row_lo:t.row_hi])
                psums = np.asarray(kernels.mvm_batch(x_slice, self.tiles[t.index].weight_block))
                kernels.scatter_accumulate(group, ox_idx.astype(np.int64), psums)
                g = max(1, t.rifm.pack_factor)
                fires = math.ceil(n / g)
                sink.add(EC.PE_MAC, t.chip, fires * dup, row_base + 2 * t.chain_pos,
                         t.x, t.y)
                sink.add(EC.BUF_READ, t.chip, fires * dup, row_base + 2 * t.chain_pos,
                         t.x, t.y)
                sink.add(EC.ADD, t.chip, n * lanes * 4 * dup,
                         row_base + 2 * t.chain_pos, t.x, t.y)
        # running sums traverse each chain link once per live output column
        for a, b in zip(chain, chain[1:]):
            stamp = row_base + 2 * b.chain_pos + 1
            sink.add(EC.HOP_TX, a.chip, wo * units_acc * dup, stamp, a.x, a.y)
            sink.add(EC.HOP_RX, b.chip, wo * units_acc * dup, stamp, b.x, b.y)
            if a.chip != b.chip:
                sink.add(EC.INTER_CHIP_BIT, a.chip, wo * lanes * 32 * dup, stamp)

    def _charge_pixel_stream(self, sink, region, row_base, w, units_px, dup):
        tiles = region.tiles
        flits = _link_flits(self.arch)
        for t in tiles:
            sink.add(EC.BUF_WRITE, t.chip, w, row_base, t.x, t.y)
            sink.add(EC.SCHED_FETCH, t.chip, 2 * w, row_base, t.x, t.y)
            sink.control_active(t.chip, 2 * w, 2 * w)
            st = self.tiles[t.index]
            st.rifm_bytes = max(st.rifm_bytes, min(w, 256))
        for a, b in zip(tiles, tiles[1:]):
            sink.add(EC.HOP_TX, a.chip, w * flits, row_base, a.x, a.y)
            sink.add(EC.HOP_RX, b.chip, w * flits, row_base, b.x, b.y)

    def _descent_routes(self, region, chains) -> dict[tuple[int, int], int]:
        routes = {}
        for (kr, mi), chain in chains.items():
            nxt = chains.get((kr + 1, mi))
            if nxt:
                a, b = chain[-1], nxt[-1]
                routes[(kr, mi)] = max(1, _xy_hops((a.x, a.y), (b.x, b.y)))
        return routes

    def _charge_descent(self, sink, tail, route_len, wo, lanes, row_base, dup):
        units_acc = _link_flits(self.arch)
        bursts = math.ceil(wo * lanes * 4 / 64)
        stamp = row_base + 2 * tail.chain_pos + 1
        sink.add(EC.HOP_TX, tail.chip, wo * units_acc * route_len * dup, stamp,
                 tail.x, tail.y)
        sink.add(EC.HOP_RX, tail.chip, wo * units_acc * route_len * dup, stamp,
                 tail.x, tail.y)
        sink.add(EC.BUF_WRITE, tail.chip, bursts * dup, stamp, tail.x, tail.y)
        sink.add(EC.BUF_READ, tail.chip, bursts * dup, stamp, tail.x, tail.y)
        sink.add(EC.ADD, tail.chip, wo * lanes * 4 * dup, stamp, tail.x, tail.y)

    # -- fc -------------------------------------------------------------------

    def _run_fc(self, sink, region, layer, fmap, start, record):
        x = fmap.reshape(-1).astype(np.int8)
        cc, mc = region.cc, region.mc
        m = region.out_shape[2]
        out = np.zeros(m, dtype=np.int8)
        record.rows = 1
        cols: dict[int, list[TileAssignment]] = {}
        for t in region.tiles:
            cols.setdefault(t.mi, []).append(t)
        for mi, col in cols.items():
            col.sort(key=lambda t: t.ci)
            lanes = col[0].col_hi - col[0].col_lo
            units_acc = _link_flits(self.arch)
            v = np.zeros((1, lanes), dtype=np.int32)
            for t in col:
                x_slice = x[t.row_lo:t.row_hi].reshape(1, -1)
                psum = np.asarray(kernels.mvm_batch(
                    np.ascontiguousarray(x_slice), self.tiles[t.index].weight_block))
                v += psum
                stamp = start + 2 * t.ci
                units_x = _units((t.row_hi - t.row_lo) * 8)
                sink.add(EC.PE_MAC, t.chip, 1, stamp, t.x, t.y)
                sink.add(EC.BUF_WRITE, t.chip, 1, stamp, t.x, t.y)
                sink.add(EC.BUF_READ, t.chip, 1, stamp, t.x, t.y)
                sink.add(EC.SCHED_FETCH, t.chip, 2, stamp, t.x, t.y)
                sink.add(EC.ADD, t.chip, lanes * 4, stamp, t.x, t.y)
                sink.add(EC.HOP_RX, t.chip, units_x, stamp, t.x, t.y)
                sink.add(EC.HOP_TX, t.chip, units_x, stamp, t.x, t.y)
                sink.control_active(t.chip, 2, 2)
            for a, b in zip(col, col[1:]):
                stamp = start + 2 * b.ci + 1
                sink.add(EC.HOP_TX, a.chip, units_acc, stamp, a.x, a.y)
                sink.add(EC.HOP_RX, b.chip, units_acc, stamp, b.x, b.y)
                if a.chip != b.chip:
                    sink.add(EC.INTER_CHIP_BIT, a.chip, lanes * 32, stamp)
            tail = col[-1]
            acts = np.asarray(kernels.relu_shift_sat8(
                v, layer.requant_shift, layer.activation is Activation.RELU)).reshape(-1)
            out[tail.col_lo:tail.col_hi] = acts
            stamp = start + 2 * cc + 1
            sink.add(EC.ACT, tail.chip, lanes, stamp, tail.x, tail.y)
            record.emissions.append((mi, stamp))
        return out.reshape(1, 1, m)

    # -- pooling --------------------------------------------------------------

    def _run_pool(self, sink, region, layer, fmap, start, record):
        h, w, c = fmap.shape
        kp, sp = region.pool_k, region.pool_stride
        ho, wo = region.out_shape[:2]
        record.rows = ho
        host = (self.design.regions[region.host_layer]
                if region.host_layer is not None else None)
        anchors = self._pool_anchors(host)
        out = np.empty((ho, wo, c), dtype=np.int8)
        avg = layer.kind is LayerKind.AVGPOOL
        mult_shift = avg_pool_scale(kp) if avg else None
        wd = region.pool_mode == POOL_WEIGHT_DUP
        period = region.period

        for py in range(ho):
            row_base = start + (1 + py) * period
            acc = None
            for wr in range(kp):
                src = fmap[py * sp + wr]
                for wc in range(kp):
                    windowed = src[wc:wc + wo * sp:sp, :]
                    if acc is None:
                        acc = windowed.astype(np.int64) if avg else windowed
                    elif avg:
                        acc = acc + windowed
                    else:
                        acc = np.asarray(kernels.lane_max(acc, windowed))
            if avg:
                mult, shift = mult_shift
                pooled = np.clip((acc * mult) >> shift, -128, 127).astype(np.int8)
            else:
                pooled = acc.astype(np.int8)
            out[py] = pooled
            n8 = wo * c
            for chip, x, y in anchors:
                share = max(1, n8 // len(anchors))
                if avg:
                    sink.add(EC.ADD, chip, (kp * kp - 1) * share * 2, row_base, x, y)
                    sink.add(EC.MUL, chip, share, row_base, x, y)
                else:
                    sink.add(EC.CMP, chip, (kp * kp - 1) * share, row_base, x, y)
                # stored-activation bursts of up to 64 bytes per access
                sink.add(EC.BUF_READ, chip, math.ceil(kp * kp * share / 64), row_base, x, y)
                sink.add(EC.BUF_WRITE, chip, math.ceil(share / 64), row_base, x, y)
                sink.add(EC.SCHED_FETCH, chip, 2 * wo, row_base, x, y)
                sink.control_active(chip, 0, 2 * wo)
            if wd and len(anchors) >= 1:
                # four duplicated streams merge in transit: three extra links
                chip, x, y = anchors[0]
                units = _units(c * 8)
                sink.add(EC.HOP_TX, chip, 3 * wo * units, row_base, x, y)
                sink.add(EC.HOP_RX, chip, 3 * wo * units, row_base, x, y)
            record.emissions.append((py, row_base + 2 * sp - 1))
        # stored rows awaiting their window live in the host's data buffers
        if host is not None and host.tiles:
            for t in host.tiles:
                if t.kr == host.k - 1 and t.chain_pos == host.chain_len - 1:
                    st = self.tiles[t.index]
                    st.buffer_peak = max(st.buffer_peak,
                                         (kp - 1) * w * (t.col_hi - t.col_lo))
        return out

    def _pool_anchors(self, host: Region | None) -> list[tuple[int, int, int]]:
        anchors = []
        if host is not None and host.tiles and host.kind == "conv":
            for t in host.tiles:
                if t.kr == host.k - 1 and t.chain_pos == host.chain_len - 1:
                    anchors.append((t.chip, t.x, t.y))
        elif host is not None and host.tiles:
            t = host.tiles[-1]
            anchors.append((t.chip, t.x, t.y))
        if not anchors:
            anchors.append((0, 0, 0))
        return anchors

    # -- residual ---------------------------------------------------------------

    def _run_residual(self, sink, region, layer, fmap, outputs, image, start, record):
        src = image if layer.skip_source == -1 else outputs[layer.skip_source]
        tile = region.tiles[0]
        h, w, c = fmap.shape
        record.rows = h
        flat_main = fmap.reshape(h, w * c)
        flat_skip = src.reshape(h, w * c)
        merged = np.asarray(kernels.sat_add8(flat_main, flat_skip))
        if layer.activation is Activation.RELU:
            merged = np.maximum(merged, 0).astype(np.int8)
        out = merged.reshape(h, w, c)

        units_px = _units(c * 8)
        skip_region = (self.design.regions[layer.skip_source]
                       if layer.skip_source >= 0 else None)
        if skip_region is not None:
            s_chip = self._exit_chip(skip_region)
            s_xy = self._exit_coord(skip_region)
        else:
            s_chip, s_xy = 0, (0, 0)
        hops = _xy_hops(s_xy, (tile.x, tile.y)) + 1
        for r in range(h):
            stamp = start + r * w + 8
            sink.add(EC.HOP_TX, s_chip, w * units_px * hops, stamp, *s_xy)
            sink.add(EC.HOP_RX, tile.chip, w * units_px * hops, stamp, tile.x, tile.y)
            sink.add(EC.ADD, tile.chip, w * c, stamp, tile.x, tile.y)
            sink.add(EC.SCHED_FETCH, tile.chip, 2 * w, stamp, tile.x, tile.y)
            sink.add(EC.REG_IO, tile.chip, w * units_px, stamp, tile.x, tile.y)
            sink.control_active(tile.chip, 2 * w, 2 * w)
            record.emissions.append((r, stamp))
        if s_chip != tile.chip:
            sink.add(EC.INTER_CHIP_BIT, s_chip, h * w * c * 8, start)
        return out


class Stepper:
    """Slot-by-slot driver over a fabric run (small designs, tests)."""

    def __init__(self, fabric: Fabric, image: np.ndarray, max_cycles: int | None = None):
        self._gen = fabric._execute(image, max_cycles)
        self.result: RunResult | None = None
        self.slot = -1
        self._drain()

    def _drain(self):
        for item in self._gen:
            if item[0] == "result":
                self.result = item[1]

    def step(self) -> list[tuple[int, int, int, int, str, int]]:
        """Advance one slot; return the trace events stamped at it."""
        self.slot += 1
        rows = self.result.events.trace_rows or []
        return [r for r in rows if r[0] == self.slot]

    @property
    def done(self) -> bool:
        return self.result is not None and self.slot >= self.result.slots


def run_inference(
    fabric: Fabric, image: np.ndarray, max_cycles: int | None = None
) -> tuple[np.ndarray, int, EventSink]:
    """(output, cycles, events) for one image."""
    result = fabric.run_inference(image, max_cycles=max_cycles)
    return result.output, result.cycles, result.events
