"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured values. Run with -s (or read captured output) for the lines.
"""

import random
import time

import numpy as np
import pytest

import meshcim.isa as isa
from meshcim.energy import EnergyConfig, account, report
from meshcim.fabric import Fabric
from meshcim.fabric.state import EventCategory as EC
from meshcim.fixtures import load_fixture
from meshcim.mapper import (
    ArchConfig,
    POOL_BLOCK_REUSE,
    POOL_WEIGHT_DUP,
    conv_period,
    gen_conv_schedule,
    gen_pool_schedule,
    map_network,
    tiles_for_conv,
    tiles_for_fc,
)
from meshcim.netspec import (
    LayerKind,
    LayerSpec,
    fill_random_weights,
    reference_inference,
)

from netgen import random_net
from test_mapper import brute_force_conv_tiles, brute_force_fc_tiles

TIMING_TARGETS = {
    "vgg11_cifar": 1373,
    "resnet18_cifar": 2063,
    "vgg16_imagenet": 34818,
    "vgg19_imagenet": 35829,
}


@pytest.fixture(scope="module")
def fixture_runs():
    """One seeded run per fixture network, shared across criteria."""
    runs = {}
    for name in TIMING_TARGETS:
        net = load_fixture(name, seed=0)
        design = map_network(net, ArchConfig())
        image = np.random.default_rng([0, 0x1F]).integers(
            -128, 128, size=net.input_shape, dtype=np.int8)
        start = time.time()
        result = Fabric(design, net).run_inference(image)
        wall = time.time() - start
        runs[name] = (net, design, image, result, wall)
    return runs


def test_criterion_1_functional_soundness():
    """>= 50 random small networks match the oracle bit-exactly, both modes."""
    start = time.time()
    checked = 0
    for seed in range(50):
        net = random_net(seed)
        fill_random_weights(net, seed)
        image = np.random.default_rng(seed).integers(
            -128, 128, size=net.input_shape, dtype=np.int8)
        want = reference_inference(net, image)
        for mode in (POOL_BLOCK_REUSE, POOL_WEIGHT_DUP):
            pool_modes = {}
            for i, layer in enumerate(net.layers):
                if layer.kind in (LayerKind.MAXPOOL, LayerKind.AVGPOOL):
                    conv_fed = i > 0 and net.layers[i - 1].kind is LayerKind.CONV
                    pool_modes[i] = mode if (mode == POOL_BLOCK_REUSE or conv_fed) \
                        else POOL_BLOCK_REUSE
            design = map_network(net, ArchConfig(), pool_modes=pool_modes)
            result = Fabric(design, net).run_inference(image)
            assert np.array_equal(result.output, want), (
                f"seed {seed} mode {mode}: fabric output != oracle"
            )
            checked += 1
    elapsed = time.time() - start
    assert elapsed < 300, f"soundness sweep took {elapsed:.0f}s (limit 300s)"
    print(f"\nACCEPTANCE 1 PASS: {checked} runs over 50 networks bit-exact "
          f"in {elapsed:.1f}s")


def test_criterion_2_formula_fidelity():
    """Closed-form tile counts match brute force; periods exact."""
    rng = random.Random(2024)
    for _ in range(1000):
        k = rng.randint(1, 7)
        c = rng.randint(1, 2048)
        m = rng.randint(1, 2048)
        n_c = rng.randint(16, 512)
        n_m = rng.randint(16, 512)
        assert tiles_for_conv(k, c, m, n_c, n_m) == brute_force_conv_tiles(k, c, m, n_c, n_m)
        assert tiles_for_fc(c, m, n_c, n_m) == brute_force_fc_tiles(c, m, n_c, n_m)
    for pad in (0, 1):
        for w in (4, 8, 32, 224):
            layer = LayerSpec(kind=LayerKind.CONV, k=3, c_in=4, c_out=4,
                              stride=1, pad=pad)
            table = gen_conv_schedule(layer, 0, w, pad)
            assert table.period == 2 * (pad + w) == conv_period(pad, w)
    for sp in (1, 2, 3, 4):
        assert gen_pool_schedule(max(2, sp), sp, POOL_BLOCK_REUSE).period == 2 * sp
    print("\nACCEPTANCE 2 PASS: 1000 shapes match brute force; "
          "conv period = 2(P+W), pool period = 2*S_p exactly")


def test_criterion_3_vgg19_chip_budget():
    net = load_fixture("vgg19_imagenet", seed=None)
    design = map_network(net, ArchConfig())
    placed = sum(len(r.tiles) for r in design.regions)
    assert 2160 < placed <= 2400, placed
    assert 2160 < design.total_tiles <= 2400, design.total_tiles
    assert design.n_chips == 10
    print(f"\nACCEPTANCE 3 PASS: VGG-19 places {placed} tiles "
          f"(span {design.total_tiles}) in (2160, 2400] -> exactly 10 chips")


def test_criterion_4_timing_reproduction(fixture_runs):
    lines = []
    for name, target in TIMING_TARGETS.items():
        net, design, image, result, wall = fixture_runs[name]
        lo, hi = 0.75 * target, 1.25 * target
        assert lo <= result.cycles <= hi, (
            f"{name}: {result.cycles} cycles outside [{lo:.0f}, {hi:.0f}]"
        )
        assert wall <= 600, f"{name} run took {wall:.0f}s (limit 600s)"
        want = reference_inference(net, image)
        assert np.array_equal(result.output, want), f"{name}: output != oracle"
        dev = 100.0 * (result.cycles - target) / target
        lines.append(f"{name}: {result.cycles} vs {target} ({dev:+.1f}%) "
                     f"wall {wall:.1f}s")
    print("\nACCEPTANCE 4 PASS: " + "; ".join(lines))


def test_criterion_5_energy_model(fixture_runs):
    config = EnergyConfig()
    # exact per-event prices
    assert config.price_pj(EC.HOP_TX) + config.price_pj(EC.HOP_RX) == pytest.approx(84.2)
    assert config.price_pj(EC.INTER_CHIP_BIT) == 0.55
    from meshcim.energy import precision_scale
    assert precision_scale(4, 4, 8, 8, "mac") == 4.0
    assert precision_scale(4, 4, 8, 8, "other") == 2.0

    net, design, image, result, _ = fixture_runs["vgg19_imagenet"]
    ledger = account(result.events, config, cycles=result.cycles,
                     step_hz=design.arch.step_hz,
                     slots_per_step=design.arch.slots_per_step)
    assert ledger.total_j == sum(ledger.per_category.values())   # conservation
    t = ledger.time_s
    on_w = ledger.buckets["on_chip_data"] / t
    off_w = ledger.buckets["off_chip_data"] / t
    assert 0.72 / 2 <= on_w <= 0.72 * 2, f"on-chip {on_w:.3f} W outside 2x of 0.72 W"
    share = off_w / (on_w + off_w)
    assert share <= 0.03, f"off-chip share {share:.4f} > 3%"
    print(f"\nACCEPTANCE 5 PASS: hop 84.2 pJ, inter-chip 0.55 pJ/b, scale "
          f"factors exact; VGG-19 on-chip {on_w:.3f} W in [0.36, 1.44], "
          f"off-chip share {100 * share:.3f}% <= 3%")


def test_criterion_6_isa_integrity():
    rng = random.Random(6)
    for _ in range(10_000):
        variant = isa.Variant(rng.getrandbits(1))
        if variant is isa.Variant.CTYPE:
            instr = isa.Instruction(variant, rng.getrandbits(5), rng.getrandbits(4),
                                    sum_ctrl=rng.getrandbits(4),
                                    buffer_ctrl=rng.getrandbits(2))
        else:
            instr = isa.Instruction(variant, rng.getrandbits(5), rng.getrandbits(4),
                                    func_op=rng.getrandbits(3),
                                    func_param=rng.getrandbits(3))
        assert isa.decode(isa.encode(instr)) == instr
    for word in range(0x10000):
        assert isa.encode(isa.decode(word)) == word
    print("\nACCEPTANCE 6 PASS: 10k random round-trips + 65536-word decode "
          "totality, zero failures")


def test_criterion_7_determinism():
    artifacts = []
    for _ in range(2):
        net = load_fixture("vgg11_cifar", seed=7)
        design = map_network(net, ArchConfig())
        image = np.random.default_rng([7, 0x1F]).integers(
            -128, 128, size=net.input_shape, dtype=np.int8)
        result = Fabric(design, net, trace=True).run_inference(image)
        config = EnergyConfig()
        ledger = account(result.events, config, cycles=result.cycles,
                         step_hz=design.arch.step_hz,
                         slots_per_step=design.arch.slots_per_step)
        rep = report(ledger, design, config)
        artifacts.append((
            result.events.trace_csv().encode(),
            ledger.to_yaml().encode(),
            rep.to_yaml().encode(),
            result.output.tobytes(),
        ))
    assert artifacts[0] == artifacts[1]
    print("\nACCEPTANCE 7 PASS: two seeded runs produced byte-identical "
          "trace, ledger, report, and output")
