"""Command-line front end: validate, map, run, report, bench.

Exit codes: 0 success, 2 validation error, 1 runtime error. Every command
is deterministic under a fixed seed; outputs carry no timestamps.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from . import energy as energy_mod
from .energy import EnergyConfig, EnergyLedger, account, load_energy_config, report
from .fabric import Fabric
from .fixtures import FIXTURES, fixture_path
from .mapper import (
    ArchConfig,
    MappingError,
    POOL_BLOCK_REUSE,
    POOL_WEIGHT_DUP,
    design_to_manifest,
    dump_schedules,
    map_network,
    partition_traffic,
    symbolic_execute,
)
from .netspec import (
    LayerKind,
    NetworkValidationError,
    fill_random_weights,
    layer_output_shape,
    parse_network,
    reference_inference,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


def _load_net(path: str):
    p = Path(path)
    if not p.exists() and path in FIXTURES:
        p = fixture_path(path)
    text = p.read_text()
    return parse_network(text, base_dir=p.parent)


def _load_arch(path: str | None) -> ArchConfig:
    if not path:
        return ArchConfig()
    doc = yaml.safe_load(Path(path).read_text()) or {}
    return ArchConfig(**doc)


def _parse_pool_modes(values, net) -> dict[int, str]:
    """--pool-mode MODE applies to every conv-fed pool; IDX=MODE pins one."""
    modes: dict[int, str] = {}
    for value in values or ():
        if "=" in value:
            idx, mode = value.split("=", 1)
            modes[int(idx)] = _check_mode(mode)
        else:
            mode = _check_mode(value)
            for i, layer in enumerate(net.layers):
                if layer.kind in (LayerKind.MAXPOOL, LayerKind.AVGPOOL):
                    conv_fed = i > 0 and net.layers[i - 1].kind is LayerKind.CONV
                    if mode == POOL_BLOCK_REUSE or conv_fed:
                        modes[i] = mode
    return modes


def _check_mode(mode: str) -> str:
    if mode not in (POOL_BLOCK_REUSE, POOL_WEIGHT_DUP):
        raise argparse.ArgumentTypeError(
            f"pool mode must be {POOL_BLOCK_REUSE} or {POOL_WEIGHT_DUP}"
        )
    return mode


def _seeded_image(net, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 0x1F])
    return rng.integers(-128, 128, size=net.input_shape, dtype=np.int8)


def cmd_validate(args) -> int:
    try:
        net = _load_net(args.network)
    except NetworkValidationError as exc:
        for line in exc.violations:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"{args.network}: valid ({len(net.layers)} layers)")
    print(f"{'#':>3} {'kind':<14} {'output shape':<18} params")
    cur = net.input_shape
    print(f"{'in':>3} {'input':<14} {str(cur):<18}")
    for i, layer in enumerate(net.layers):
        cur = layer_output_shape(layer, cur)
        extra = ""
        if layer.kind is LayerKind.CONV:
            extra = (f"k={layer.k} s={layer.stride} p={layer.pad} "
                     f"c={layer.c_in}->{layer.c_out} shift={layer.requant_shift}")
        elif layer.kind is LayerKind.FC:
            extra = f"{layer.c_in}->{layer.c_out} shift={layer.requant_shift}"
        elif layer.kind in (LayerKind.MAXPOOL, LayerKind.AVGPOOL):
            extra = f"k={layer.pool_k} s={layer.pool_stride}"
        else:
            extra = f"skip={layer.skip_source}"
        print(f"{i:>3} {layer.kind.value:<14} {str(cur):<18} {extra}")
    return EXIT_OK


def _map_design(args):
    net = _load_net(args.network)
    fill_random_weights(net, args.seed)
    arch = _load_arch(args.arch)
    if args.max_chips:
        arch.max_chips = args.max_chips
    modes = _parse_pool_modes(args.pool_mode, net)
    design = map_network(net, arch, pool_modes=modes)
    return net, design


def cmd_map(args) -> int:
    try:
        net, design = _map_design(args)
    except NetworkValidationError as exc:
        for line in exc.violations:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except MappingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    placed = sum(len(r.tiles) for r in design.regions)
    print(f"tiles: {placed} (allocated span {design.total_tiles})")
    print(f"chips: {design.n_chips} x {design.arch.tiles_per_chip} tiles")
    for region in design.regions:
        line = (f"layer {region.layer_idx:>3} {region.kind:<9} tiles={len(region.tiles):>5} "
                f"period={region.period}")
        if region.kind == "pool":
            line += f" mode={region.pool_mode}"
        print(line)
    edges = partition_traffic(design)
    chip_edges = [e for e in edges if e.src_chip >= 0 and e.dst_chip >= 0]
    print(f"inter-chip edges: {len(chip_edges)}, "
          f"bits/inference: {sum(e.bits for e in chip_edges)}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "design.yaml").write_text(design_to_manifest(design))
        (out / "schedules.txt").write_text(dump_schedules(design))
        print(f"wrote {out / 'design.yaml'} and {out / 'schedules.txt'}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        net, design = _map_design(args)
    except NetworkValidationError as exc:
        for line in exc.violations:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except MappingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    econf = (load_energy_config(Path(args.energy).read_text())
             if args.energy else EnergyConfig())
    image = _seeded_image(net, args.seed)

    if args.symbolic_verify:
        sym = symbolic_execute(design, net, image)
        ref = reference_inference(net, image)
        ok = np.array_equal(sym, ref)
        print(f"symbolic verification: {'yes' if ok else 'NO'}")
        if not ok:
            return EXIT_RUNTIME

    fab = Fabric(design, net, trace=args.trace)
    try:
        result = fab.run_inference(image, max_cycles=args.max_cycles)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    verified = True
    if not args.no_verify:
        want = reference_inference(net, image)
        verified = np.array_equal(result.output, want)
        print(f"output matches oracle: {'yes' if verified else 'NO'}")

    ledger = account(result.events, econf, cycles=result.cycles,
                     step_hz=design.arch.step_hz,
                     slots_per_step=design.arch.slots_per_step)
    ledger.ops = energy_mod.design_ops(design)
    ledger.area_mm2 = energy_mod.design_area_mm2(design, econf)
    rep = report(ledger, design, econf)

    print(f"cycles: {result.cycles} ({result.cycles / design.arch.step_hz * 1e6:.1f} us "
          f"at {design.arch.step_hz / 1e6:.0f} MHz)")
    print(f"energy: {rep.total_energy_j:.6e} J, power: {rep.power_w:.3f} W")
    print(f"CE: {rep.ce_tops_per_w:.3f} TOPS/W, "
          f"throughput: {rep.throughput_tops_per_mm2:.4f} TOPS/mm^2")
    for name, pct in sorted(rep.bucket_pct.items()):
        print(f"  {name}: {pct:.2f}%")
    for warning in result.capacity_warnings[:5]:
        print(f"capacity: {warning}")
    if len(result.capacity_warnings) > 5:
        print(f"capacity: ... and {len(result.capacity_warnings) - 5} more")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        np.save(out / "output.npy", result.output)
        (out / "ledger.yaml").write_text(ledger.to_yaml())
        (out / "report.yaml").write_text(rep.to_yaml())
        (out / "report.csv").write_text(rep.to_csv())
        if args.trace:
            (out / "trace.csv").write_text(result.events.trace_csv())
        print(f"wrote artifacts to {out}")

    return EXIT_OK if verified else EXIT_RUNTIME


def cmd_report(args) -> int:
    try:
        ledger = EnergyLedger.from_yaml(Path(args.ledger).read_text())
    except (OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    econf = (load_energy_config(Path(args.energy).read_text())
             if args.energy else EnergyConfig())
    rep = report(ledger, None, econf)
    if args.csv:
        print(rep.to_csv(), end="")
    else:
        print(rep.to_yaml(), end="")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import bench_fixture, bench_kernels, format_rows

    print("kernel benchmarks (best of 5):")
    print(format_rows(bench_kernels()))
    if args.fixture:
        print(f"\nfixture run ({args.fixture}):")
        print(format_rows(bench_fixture(args.fixture)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshcim",
        description="Mapping compiler and cycle-stepped simulator for a "
                    "mesh-of-CIM-tiles accelerator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network file")
    p.add_argument("--network", required=True,
                   help=f"network file path or fixture name {FIXTURES}")
    p.set_defaults(fn=cmd_validate)

    for name, fn in (("map", cmd_map), ("run", cmd_run)):
        p = sub.add_parser(name, help=f"{name} a network")
        p.add_argument("--network", required=True)
        p.add_argument("--arch", help="arch config yaml")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--pool-mode", action="append",
                       help="block_reuse | weight_dup | IDX=MODE (repeatable)")
        p.add_argument("--max-chips", type=int, default=0)
        p.add_argument("--out", help="output directory")
        if name == "run":
            p.add_argument("--energy", help="energy config yaml")
            p.add_argument("--trace", action="store_true")
            p.add_argument("--max-cycles", type=int)
            p.add_argument("--no-verify", action="store_true",
                           help="skip the oracle equivalence check")
            p.add_argument("--symbolic-verify", action="store_true",
                           help="also run the compiler self-check")
        p.set_defaults(fn=fn)

    p = sub.add_parser("report", help="render a saved ledger")
    p.add_argument("--ledger", required=True)
    p.add_argument("--energy", help="energy config yaml")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("bench", help="benchmark kernel backends")
    p.add_argument("--fixture", nargs="?", const="vgg11_cifar", default=None)
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
