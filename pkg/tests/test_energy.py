import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from meshcim.energy import (
    BUCKET_CIM,
    BUCKET_OFF_CHIP,
    BUCKET_ON_CHIP,
    EnergyConfig,
    EnergyLedger,
    account,
    precision_scale,
    report,
)
from meshcim.fabric.state import EventCategory as EC
from meshcim.fabric.state import EventSink

PJ = 1e-12


def sink_with(*items):
    sink = EventSink()
    for cat, chip, count in items:
        sink.add(cat, chip, count)
    return sink


class TestAccount:
    def test_empty_ledger_is_zero(self):
        ledger = account(EventSink(), EnergyConfig())
        assert ledger.total_j == 0.0
        assert ledger.per_category == {}

    def test_hop_pair_is_84_2_pj(self):
        sink = sink_with((EC.HOP_TX, 0, 1), (EC.HOP_RX, 0, 1))
        ledger = account(sink, EnergyConfig())
        assert ledger.total_j == pytest.approx(84.2 * PJ, rel=1e-12)

    def test_inter_chip_64_bits(self):
        sink = sink_with((EC.INTER_CHIP_BIT, 0, 64))
        ledger = account(sink, EnergyConfig())
        assert ledger.total_j == pytest.approx(64 * 0.55 * PJ, rel=1e-12)

    def test_unknown_category_cannot_exist(self):
        # every EventCategory has a price row
        cfg = EnergyConfig()
        for cat in EC:
            assert cfg.price_pj(cat) >= 0

    def test_conservation_exact(self):
        sink = sink_with(
            (EC.HOP_TX, 0, 1000), (EC.HOP_RX, 1, 1000), (EC.PE_MAC, 0, 7),
            (EC.BUF_WRITE, 1, 13), (EC.ADD, 0, 12345), (EC.INTER_CHIP_BIT, 0, 999),
        )
        sink.control_active(0, 80, 80)
        ledger = account(sink, EnergyConfig())
        assert ledger.total_j == sum(ledger.per_category.values())
        assert ledger.total_j == sum(ledger.buckets.values())

    def test_buckets(self):
        sink = sink_with((EC.PE_MAC, 0, 1), (EC.HOP_TX, 0, 1), (EC.INTER_CHIP_BIT, 0, 1))
        ledger = account(sink, EnergyConfig())
        cfg = EnergyConfig()
        assert ledger.buckets[BUCKET_CIM] == pytest.approx(cfg.pe_mac_energy_pj * PJ)
        assert ledger.buckets[BUCKET_ON_CHIP] == pytest.approx(cfg.reg_io_pj_per_64b * PJ)
        assert ledger.buckets[BUCKET_OFF_CHIP] == pytest.approx(0.55 * PJ)

    def test_monotonic(self):
        base = sink_with((EC.HOP_TX, 0, 10), (EC.ADD, 0, 5))
        more = sink_with((EC.HOP_TX, 0, 10), (EC.ADD, 0, 5), (EC.CMP, 0, 3),
                         (EC.HOP_TX, 1, 2))
        a = account(base, EnergyConfig())
        b = account(more, EnergyConfig())
        for bucket, val in a.buckets.items():
            assert b.buckets.get(bucket, 0.0) >= val

    def test_linearity(self):
        items = [(EC.HOP_TX, 0, 10), (EC.ADD, 0, 5), (EC.PE_MAC, 0, 3)]
        single = account(sink_with(*items), EnergyConfig(), cycles=100)
        doubled = account(
            sink_with(*[(c, ch, 2 * n) for c, ch, n in items]),
            EnergyConfig(), cycles=200,
        )
        assert doubled.total_j == 2 * single.total_j
        assert doubled.power_w == pytest.approx(single.power_w, rel=1e-12)

    def test_negative_config_rejected(self):
        with pytest.raises(ValueError):
            EnergyConfig(adder_pj_per_8b=-1)


class TestPrecisionScale:
    def test_mac_examples(self):
        assert precision_scale(4, 4, 8, 8, "mac") == 4.0
        assert precision_scale(16, 16, 8, 8, "mac") == 0.25

    def test_other_example(self):
        assert precision_scale(4, 4, 8, 8, "other") == 2.0

    @given(a=st.integers(1, 16), b=st.integers(1, 16))
    def test_identity(self, a, b):
        assert precision_scale(a, b, a, b, "mac") == 1.0
        assert precision_scale(a, b, a, b, "other") == 1.0

    def test_rejects_zero_bits(self):
        with pytest.raises(ValueError):
            precision_scale(0, 8, 8, 8, "mac")


class TestReport:
    def test_definitional_ce(self):
        # 1 TOP of ops over 0.1 J in 1 s -> 10 TOPS/W at 0.1 W
        ledger = EnergyLedger(
            per_category={"PeMac": 0.1},
            buckets={BUCKET_CIM: 0.1},
            cycles=10_000_000, step_hz=1e7,
            ops=int(1e12), area_mm2=100.0,
        )
        rep = report(ledger, None, EnergyConfig())
        assert rep.ce_tops_per_w == pytest.approx(10.0)
        assert rep.power_w == pytest.approx(0.1)
        assert rep.time_s == pytest.approx(1.0)

    def test_zero_ledger_zero_table(self):
        rep = report(EnergyLedger(), None, EnergyConfig())
        assert rep.total_energy_j == 0.0
        assert rep.ce_tops_per_w == 0.0
        assert rep.throughput_tops_per_mm2 == 0.0

    def test_ledger_yaml_roundtrip(self):
        sink = sink_with((EC.HOP_TX, 0, 42), (EC.PE_MAC, 1, 3))
        ledger = account(sink, EnergyConfig(), cycles=55)
        ledger.ops = 1234
        ledger.area_mm2 = 5.5
        again = EnergyLedger.from_yaml(ledger.to_yaml())
        assert again.to_yaml() == ledger.to_yaml()
        assert again.ops == 1234
        assert math.isclose(again.total_j, ledger.total_j, rel_tol=1e-15)

    def test_report_includes_config_echo(self):
        rep = report(EnergyLedger(), None, EnergyConfig(pe_mac_energy_pj=777.0))
        assert "777.0" in rep.to_yaml()
