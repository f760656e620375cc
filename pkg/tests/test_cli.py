from pathlib import Path

import pytest

from meshcim.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, main

TOY = """
input: {h: 8, w: 8, c: 3}
layers:
  - {kind: conv, k: 3, out_channels: 4, pad: 1, activation: relu, requant_shift: 6}
  - {kind: maxpool, pool_k: 2, pool_stride: 2}
  - {kind: fc, out_features: 10, requant_shift: 8}
"""


@pytest.fixture
def toy_net(tmp_path):
    path = tmp_path / "toy.yaml"
    path.write_text(TOY)
    return str(path)


class TestValidate:
    def test_fixture_clean(self, capsys):
        assert main(["validate", "--network", "vgg19_imagenet"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "valid (24 layers)" in out
        assert out.count(" conv ") == 16
        assert out.count(" maxpool ") == 5
        assert out.count(" fc ") == 3

    def test_stride_zero_names_field(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text(
            """
            input: {h: 8, w: 8, c: 3}
            layers:
              - {kind: conv, k: 3, out_channels: 4, stride: 0}
            """
        )
        assert main(["validate", "--network", str(bad)]) == EXIT_VALIDATION
        assert "stride" in capsys.readouterr().err

    def test_empty_file(self, tmp_path, capsys):
        empty = tmp_path / "empty.yaml"
        empty.write_text("")
        assert main(["validate", "--network", str(empty)]) == EXIT_VALIDATION


class TestMap:
    def test_toy_summary(self, toy_net, capsys):
        assert main(["map", "--network", toy_net]) == EXIT_OK
        out = capsys.readouterr().out
        assert "tiles=    9" in out
        assert "period=18" in out      # 2*(1+8)

    def test_vgg19_ten_chips(self, capsys):
        assert main(["map", "--network", "vgg19_imagenet"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "chips: 10 x 240 tiles" in out

    def test_chip_cap_error(self, capsys):
        code = main(["map", "--network", "vgg19_imagenet", "--max-chips", "1"])
        assert code == EXIT_VALIDATION
        assert "chips" in capsys.readouterr().err

    def test_writes_manifest(self, toy_net, tmp_path, capsys):
        out_dir = tmp_path / "design"
        assert main(["map", "--network", toy_net, "--out", str(out_dir)]) == EXIT_OK
        assert (out_dir / "design.yaml").exists()
        assert (out_dir / "schedules.txt").exists()


class TestRun:
    def test_oracle_line_and_artifacts(self, toy_net, tmp_path, capsys):
        out_dir = tmp_path / "run"
        code = main(["run", "--network", toy_net, "--seed", "3",
                     "--symbolic-verify", "--trace", "--out", str(out_dir)])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "output matches oracle: yes" in out
        assert "symbolic verification: yes" in out
        for name in ("output.npy", "ledger.yaml", "report.yaml", "report.csv",
                     "trace.csv"):
            assert (out_dir / name).exists(), name

    def test_seeded_runs_byte_identical(self, toy_net, tmp_path, capsys):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            assert main(["run", "--network", toy_net, "--seed", "11",
                         "--trace", "--out", str(d)]) == EXIT_OK
        capsys.readouterr()
        for name in ("output.npy", "ledger.yaml", "report.yaml", "report.csv",
                     "trace.csv"):
            a = (dirs[0] / name).read_bytes()
            b = (dirs[1] / name).read_bytes()
            assert a == b, name

    def test_max_cycles_timeout(self, toy_net, capsys):
        code = main(["run", "--network", toy_net, "--max-cycles", "3"])
        assert code == EXIT_RUNTIME
        assert "incomplete" in capsys.readouterr().err


class TestReport:
    def test_zero_ledger_zero_table(self, tmp_path, capsys):
        from meshcim.energy import EnergyLedger
        path = tmp_path / "ledger.yaml"
        path.write_text(EnergyLedger().to_yaml())
        assert main(["report", "--ledger", str(path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "ce_tops_per_w: 0.0" in out

    def test_synthetic_definitional(self, tmp_path, capsys):
        from meshcim.energy import BUCKET_CIM, EnergyLedger
        ledger = EnergyLedger(per_category={"PeMac": 0.1},
                              buckets={BUCKET_CIM: 0.1},
                              cycles=10_000_000, step_hz=1e7, ops=int(1e12))
        path = tmp_path / "ledger.yaml"
        path.write_text(ledger.to_yaml())
        assert main(["report", "--ledger", str(path), "--csv"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "ce_tops_per_w,10.0" in out

    def test_run_ledger_feeds_report(self, toy_net, tmp_path, capsys):
        out_dir = tmp_path / "run"
        main(["run", "--network", toy_net, "--out", str(out_dir)])
        capsys.readouterr()
        assert main(["report", "--ledger", str(out_dir / "ledger.yaml")]) == EXIT_OK
        out = capsys.readouterr().out
        assert "buckets_pct" in out
