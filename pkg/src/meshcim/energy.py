"""Event pricing and the performance report.

Per-event energies follow the tile component table: buffer accesses at
281.3 pJ, 8-bit adder ops at 0.02 pJ, pooling comparisons at 7.7 fJ/8b,
activations at 0.9 fJ/8b, schedule fetches at 2.2 pJ/entry, register I/O
at 42.1 pJ/64b (one hop = output-register write + input-register read =
84.2 pJ), inter-chip transfers at 0.55 pJ/bit, and control circuits at
10.4 / 28.5 pJ per active cycle. The CIM array is a substituted part, so
its per-MVM energy (and core area) are configuration constants; the
shipped default is a representative resistive-array figure. Technology /
supply-voltage normalization factors are deliberately plain multipliers
supplied by the user: the normalization equations are not something this
model can invent.

Events fold into the three reporting buckets: CIM power (PeMac), on-chip
data power (everything else on-mesh), and off-chip data power (inter-chip
bits).
"""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field

import yaml

from .fabric.state import EventCategory as EC
from .fabric.state import EventSink
from .mapper import MappedDesign

PJ = 1e-12


@dataclass
class EnergyConfig:
    rifm_buffer_access_pj: float = 281.3
    rifm_control_pj: float = 10.4          # per active cycle
    adder_pj_per_8b: float = 0.02
    pooling_cmp_pj_per_8b: float = 0.0077  # 7.7 fJ
    activation_pj_per_8b: float = 0.0009   # 0.9 fJ
    rofm_data_buffer_access_pj: float = 281.3
    schedule_fetch_pj: float = 2.2         # per 16-bit entry
    reg_io_pj_per_64b: float = 42.1
    rofm_control_pj: float = 28.5          # per active cycle
    inter_chip_pj_per_bit: float = 0.55
    pe_mac_energy_pj: float = 3400.0       # per full-array MVM, substituted part
    rifm_area_um2: float = 2227.1
    rofm_area_um2: float = 57972.7
    cim_core_area_um2: float = 19800.0     # substituted part
    tech_scale: float = 1.0                # user-supplied node normalization
    voltage_scale: float = 1.0             # user-supplied supply normalization

    def __post_init__(self):
        for name, value in asdict(self).items():
            if isinstance(value, (int, float)) and value < 0:
                raise ValueError(f"{name} must be >= 0")

    def price_pj(self, cat: EC) -> float:
        return {
            EC.BUF_READ: self.rofm_data_buffer_access_pj,
            EC.BUF_WRITE: self.rifm_buffer_access_pj,
            EC.SCHED_FETCH: self.schedule_fetch_pj,
            EC.REG_IO: self.reg_io_pj_per_64b,
            EC.ADD: self.adder_pj_per_8b,
            EC.CMP: self.pooling_cmp_pj_per_8b,
            EC.MUL: self.pooling_cmp_pj_per_8b,   # pooling unit covers avg scaling
            EC.ACT: self.activation_pj_per_8b,
            EC.PE_MAC: self.pe_mac_energy_pj,
            EC.HOP_TX: self.reg_io_pj_per_64b,
            EC.HOP_RX: self.reg_io_pj_per_64b,
            EC.INTER_CHIP_BIT: self.inter_chip_pj_per_bit,
        }[cat]


BUCKET_CIM = "cim"
BUCKET_ON_CHIP = "on_chip_data"
BUCKET_OFF_CHIP = "off_chip_data"


def bucket_of(cat: EC) -> str:
    if cat is EC.PE_MAC:
        return BUCKET_CIM
    if cat is EC.INTER_CHIP_BIT:
        return BUCKET_OFF_CHIP
    return BUCKET_ON_CHIP


@dataclass
class EnergyLedger:
    """Per-(category, chip) joules plus run metadata; conservation exact."""

    per_category: dict[str, float] = field(default_factory=dict)
    per_chip: dict[int, float] = field(default_factory=dict)
    buckets: dict[str, float] = field(default_factory=dict)
    cycles: int = 0
    step_hz: float = 1e7
    counts: dict[str, int] = field(default_factory=dict)
    ops: int = 0                 # report metadata: 2 x MACs of the workload
    area_mm2: float = 0.0        # report metadata: active tile area

    @property
    def total_j(self) -> float:
        return sum(self.per_category.values())

    @property
    def time_s(self) -> float:
        return self.cycles / self.step_hz if self.step_hz else 0.0

    @property
    def power_w(self) -> float:
        t = self.time_s
        return self.total_j / t if t else 0.0

    def to_yaml(self) -> str:
        doc = {
            "version": 1,
            "cycles": self.cycles,
            "step_hz": self.step_hz,
            "ops": self.ops,
            "area_mm2": self.area_mm2,
            "per_category_j": dict(sorted(self.per_category.items())),
            "per_chip_j": {str(k): v for k, v in sorted(self.per_chip.items())},
            "buckets_j": dict(sorted(self.buckets.items())),
            "counts": dict(sorted(self.counts.items())),
        }
        return yaml.safe_dump(doc, sort_keys=True)

    @classmethod
    def from_yaml(cls, text: str) -> "EnergyLedger":
        doc = yaml.safe_load(text)
        return cls(
            per_category=dict(doc.get("per_category_j", {})),
            per_chip={int(k): v for k, v in doc.get("per_chip_j", {}).items()},
            buckets=dict(doc.get("buckets_j", {})),
            cycles=int(doc.get("cycles", 0)),
            step_hz=float(doc.get("step_hz", 1e7)),
            counts=dict(doc.get("counts", {})),
            ops=int(doc.get("ops", 0)),
            area_mm2=float(doc.get("area_mm2", 0.0)),
        )


def account(
    events: EventSink,
    config: EnergyConfig,
    *,
    cycles: int = 0,
    step_hz: float = 1e7,
    slots_per_step: int = 8,
) -> EnergyLedger:
    """Price every event by its category row and fold control activity."""
    ledger = EnergyLedger(cycles=cycles, step_hz=step_hz)
    for (cat, chip), count in events.counts.items():
        joules = count * config.price_pj(cat) * PJ
        key = cat.value
        ledger.per_category[key] = ledger.per_category.get(key, 0.0) + joules
        ledger.per_chip[chip] = ledger.per_chip.get(chip, 0.0) + joules
        bucket = bucket_of(cat)
        ledger.buckets[bucket] = ledger.buckets.get(bucket, 0.0) + joules
        ledger.counts[key] = ledger.counts.get(key, 0) + count
    for chip, slots in events.rifm_active_slots.items():
        active_cycles = math.ceil(slots / slots_per_step)
        joules = active_cycles * config.rifm_control_pj * PJ
        ledger.per_category["RifmControl"] = ledger.per_category.get("RifmControl", 0.0) + joules
        ledger.per_chip[chip] = ledger.per_chip.get(chip, 0.0) + joules
        ledger.buckets[BUCKET_ON_CHIP] = ledger.buckets.get(BUCKET_ON_CHIP, 0.0) + joules
        ledger.counts["RifmControl"] = ledger.counts.get("RifmControl", 0) + active_cycles
    for chip, slots in events.rofm_active_slots.items():
        active_cycles = math.ceil(slots / slots_per_step)
        joules = active_cycles * config.rofm_control_pj * PJ
        ledger.per_category["RofmControl"] = ledger.per_category.get("RofmControl", 0.0) + joules
        ledger.per_chip[chip] = ledger.per_chip.get(chip, 0.0) + joules
        ledger.buckets[BUCKET_ON_CHIP] = ledger.buckets.get(BUCKET_ON_CHIP, 0.0) + joules
        ledger.counts["RofmControl"] = ledger.counts.get("RofmControl", 0) + active_cycles
    return ledger


def precision_scale(b_wt: int, b_at: int, b_wd: int, b_ad: int, kind: str) -> float:
    """Linear precision normalization between two architectures.

    kind 'mac' compares multiply-accumulate work (weight x activation
    bits); anything else scales with activation bits alone.
    """
    if min(b_wt, b_at, b_wd, b_ad) < 1:
        raise ValueError("bit widths must be >= 1")
    if kind.lower() == "mac":
        return (b_wd * b_ad) / (b_wt * b_at)
    return b_ad / b_at


def design_ops(design: MappedDesign) -> int:
    """2 ops per MAC over every conv / fc region of the design."""
    macs = 0
    for region in design.regions:
        if region.kind == "conv":
            oh, ow, m = region.out_shape
            macs += region.k * region.k * region.in_shape[2] * m * oh * ow
        elif region.kind == "fc":
            c_in = int(region.in_shape[0] * region.in_shape[1] * region.in_shape[2])
            macs += c_in * region.out_shape[2]
    return 2 * macs


def design_area_mm2(design: MappedDesign, config: EnergyConfig) -> float:
    tiles = sum(len(r.tiles) for r in design.regions)
    per_tile = config.rifm_area_um2 + config.rofm_area_um2 + config.cim_core_area_um2
    return tiles * per_tile / 1e6


@dataclass
class Report:
    ops: int
    total_energy_j: float
    time_s: float
    power_w: float
    ce_tops_per_w: float
    normalized_ce_tops_per_w: float
    throughput_tops_per_mm2: float
    area_mm2: float
    images_per_s: float
    images_per_s_per_core: float        # divided by every placed core
    images_per_s_per_chip_core: float   # divided by one chip's core budget
    bucket_j: dict[str, float]
    bucket_pct: dict[str, float]
    cycles: int
    config: EnergyConfig

    def to_yaml(self) -> str:
        doc = {
            "version": 1,
            "ops": self.ops,
            "cycles": self.cycles,
            "time_s": self.time_s,
            "total_energy_j": self.total_energy_j,
            "power_w": self.power_w,
            "ce_tops_per_w": self.ce_tops_per_w,
            "normalized_ce_tops_per_w": self.normalized_ce_tops_per_w,
            "throughput_tops_per_mm2": self.throughput_tops_per_mm2,
            "area_mm2": self.area_mm2,
            "images_per_s": self.images_per_s,
            "images_per_s_per_core": self.images_per_s_per_core,
            "images_per_s_per_chip_core": self.images_per_s_per_chip_core,
            "buckets_j": dict(sorted(self.bucket_j.items())),
            "buckets_pct": dict(sorted(self.bucket_pct.items())),
            "energy_config": asdict(self.config),
        }
        return yaml.safe_dump(doc, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("metric,value\n")
        buf.write(f"ops,{self.ops}\n")
        buf.write(f"cycles,{self.cycles}\n")
        buf.write(f"time_s,{self.time_s!r}\n")
        buf.write(f"total_energy_j,{self.total_energy_j!r}\n")
        buf.write(f"power_w,{self.power_w!r}\n")
        buf.write(f"ce_tops_per_w,{self.ce_tops_per_w!r}\n")
        buf.write(f"normalized_ce_tops_per_w,{self.normalized_ce_tops_per_w!r}\n")
        buf.write(f"throughput_tops_per_mm2,{self.throughput_tops_per_mm2!r}\n")
        buf.write(f"area_mm2,{self.area_mm2!r}\n")
        buf.write(f"images_per_s,{self.images_per_s!r}\n")
        buf.write(f"images_per_s_per_core,{self.images_per_s_per_core!r}\n")
        buf.write(f"images_per_s_per_chip_core,{self.images_per_s_per_chip_core!r}\n")
        for name, j in sorted(self.bucket_j.items()):
            buf.write(f"bucket_{name}_j,{j!r}\n")
        for name, pct in sorted(self.bucket_pct.items()):
            buf.write(f"bucket_{name}_pct,{pct!r}\n")
        return buf.getvalue()


def report(
    ledger: EnergyLedger,
    design: MappedDesign | None,
    config: EnergyConfig,
    *,
    ops: int | None = None,
    area_mm2: float | None = None,
) -> Report:
    """Computational efficiency, throughput, and the power breakdown."""
    if ops is None:
        ops = design_ops(design) if design is not None else ledger.ops
    if area_mm2 is None:
        area_mm2 = (design_area_mm2(design, config) if design is not None
                    else ledger.area_mm2)
    total = ledger.total_j
    t = ledger.time_s
    if total < 0 or t < 0 or area_mm2 < 0:
        raise ValueError("degenerate ledger: negative energy, time, or area")
    ce = ops / total / 1e12 if total else 0.0
    norm_ce = ce * config.tech_scale * config.voltage_scale
    tput = (ops / t) / 1e12 / area_mm2 if t and area_mm2 else 0.0
    ips = 1.0 / t if t else 0.0
    cores = sum(len(r.tiles) for r in design.regions) if design is not None else 0
    chip_cores = design.arch.tiles_per_chip if design is not None else 0
    bucket_j = {k: ledger.buckets.get(k, 0.0)
                for k in (BUCKET_CIM, BUCKET_ON_CHIP, BUCKET_OFF_CHIP)}
    bucket_pct = {k: (100.0 * v / total if total else 0.0) for k, v in bucket_j.items()}
    return Report(
        ops=ops,
        total_energy_j=total,
        time_s=t,
        power_w=ledger.power_w,
        ce_tops_per_w=ce,
        normalized_ce_tops_per_w=norm_ce,
        throughput_tops_per_mm2=tput,
        area_mm2=area_mm2,
        images_per_s=ips,
        images_per_s_per_core=ips / cores if cores else 0.0,
        images_per_s_per_chip_core=ips / chip_cores if chip_cores else 0.0,
        bucket_j=bucket_j,
        bucket_pct=bucket_pct,
        cycles=ledger.cycles,
        config=config,
    )


def load_energy_config(text: str) -> EnergyConfig:
    doc = yaml.safe_load(text) or {}
    return EnergyConfig(**doc)
