import csv
import json

import numpy as np
import pytest

from activesgd import cli
from activesgd.cli import main, read_config_file, read_metrics_csv


def run_cli(*args):
    return main(list(args))


@pytest.fixture(scope="module")
def synth_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synth.libsvm"
    code = run_cli("gen", "--n", "300", "--dim", "6", "--easy", "0.9",
                   "--margin", "0.5", "--seed", "7", "--out", str(path))
    assert code == 0
    return path


class TestGen:
    def test_manifest_and_determinism(self, tmp_path):
        out1 = tmp_path / "a.libsvm"
        out2 = tmp_path / "b.libsvm"
        for out in (out1, out2):
            assert run_cli("gen", "--n", "50", "--dim", "4", "--easy", "0.8",
                           "--margin", "0.5", "--seed", "3", "--out", str(out)) == 0
        assert out1.read_bytes() == out2.read_bytes()
        manifest = json.loads((tmp_path / "a.libsvm.manifest.json").read_text())
        assert manifest["n"] == 50
        assert manifest["seed"] == 3
        assert manifest["easy_fraction"] == 0.8

    def test_easy_fraction_out_of_range(self, tmp_path, capsys):
        code = run_cli("gen", "--n", "10", "--dim", "2", "--easy", "1.5",
                       "--out", str(tmp_path / "x.libsvm"))
        assert code == 2
        assert "easy" in capsys.readouterr().err

    def test_line_count(self, tmp_path):
        out = tmp_path / "c.libsvm"
        run_cli("gen", "--n", "123", "--dim", "3", "--easy", "0.5", "--out", str(out))
        assert len(out.read_text().splitlines()) == 123


class TestConfigFile:
    def test_parse_and_types(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# comment\nalgorithm = assgd\neta = 0.5\nbatch_size = 8\n"
            "hidden = 16,8\nseeds = 1,2,3\ntrack_variance = true\n"
        )
        values = read_config_file(cfg)
        assert values["algorithm"] == "assgd"
        assert values["eta"] == 0.5
        assert values["batch_size"] == 8
        assert values["hidden"] == [16, 8]
        assert values["seeds"] == [1, 2, 3]
        assert values["track_variance"] is True

    def test_unknown_key_lists_valid_keys(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("momentum = 0.9\n")
        with pytest.raises(cli.UsageError, match="algorithm"):
            read_config_file(cfg)

    def test_config_dir_env(self, tmp_path, monkeypatch):
        cfg = tmp_path / "indir.cfg"
        cfg.write_text("eta = 0.25\n")
        monkeypatch.setenv(cli.CONFIG_DIR_ENV, str(tmp_path))
        assert read_config_file("indir.cfg")["eta"] == 0.25


class TestTrain:
    def test_writes_metrics_and_checkpoint(self, synth_file, tmp_path):
        out = tmp_path / "run"
        code = run_cli("train", "--data", str(synth_file), "--algorithm", "assgd",
                       "--eta", "0.5", "--iterations", "200", "--eval-every", "100",
                       "--batch-size", "8", "--seed", "1", "--test-fraction", "0.2",
                       "--out", str(out))
        assert code == 0
        records = read_metrics_csv(out / "metrics.csv")
        assert [r.iteration for r in records] == [100, 200]
        assert all(r.algorithm == "assgd" and r.seed == 1 for r in records)
        assert all(0.0 <= r.test_error <= 1.0 for r in records)
        from activesgd.models import load_params

        params = load_params(out / "model.npz")
        assert params.dimension == 6

    def test_header_contract(self, synth_file, tmp_path):
        out = tmp_path / "run"
        run_cli("train", "--data", str(synth_file), "--iterations", "100",
                "--eval-every", "100", "--out", str(out))
        header = (out / "metrics.csv").read_text().splitlines()[0]
        assert header == "iteration,wall_time_ms,train_loss,test_error,variance_estimate,algorithm,seed"

    def test_deterministic_except_wall_time(self, synth_file, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            run_cli("train", "--data", str(synth_file), "--iterations", "150",
                    "--eval-every", "50", "--seed", "9", "--out", str(out))
            outs.append(read_metrics_csv(out / "metrics.csv"))
        for r1, r2 in zip(*outs):
            assert (r1.iteration, r1.train_loss, r1.test_error, r1.algorithm, r1.seed) == (
                r2.iteration, r2.train_loss, r2.test_error, r2.algorithm, r2.seed
            )

    def test_unknown_flag_exits_2(self, synth_file):
        with pytest.raises(SystemExit) as exc:
            run_cli("train", "--data", str(synth_file), "--momentum", "0.9")
        assert exc.value.code == 2

    def test_missing_data_is_usage_error(self):
        assert run_cli("train", "--iterations", "10") == 2


class TestBench:
    def test_summary_accounting(self, synth_file, tmp_path):
        out = tmp_path / "bench"
        code = run_cli("bench", "--data", str(synth_file),
                       "--algorithms", "mbsgd,assgd", "--seeds", "0,1",
                       "--eta", "0.5", "--iterations", "300", "--eval-every", "100",
                       "--batch-size", "8", "--out", str(out))
        assert code == 0
        with open(out / "summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        # 2 algorithms x 2 seeds + 2 aggregate rows
        assert len(rows) == 6
        mb_rows = [r for r in rows if r["algorithm"] == "mbsgd" and r["seed"] != "median"]
        assert all(float(r["variance_ratio"]) == 1.0 for r in mb_rows)
        medians = [r for r in rows if r["seed"] == "median"]
        assert {r["algorithm"] for r in medians} == {"mbsgd", "assgd"}
        for algo in ("mbsgd", "assgd"):
            for seed in ("0", "1"):
                assert (out / f"run_{algo}_s{seed}.csv").exists()

    def test_single_algorithm_rejected(self, synth_file, tmp_path):
        code = run_cli("bench", "--data", str(synth_file), "--algorithms", "mbsgd",
                       "--seeds", "0", "--out", str(tmp_path / "b"))
        assert code == 2

    def test_baseline_required(self, synth_file, tmp_path):
        code = run_cli("bench", "--data", str(synth_file), "--algorithms",
                       "assgd,ashr", "--seeds", "0", "--out", str(tmp_path / "b"))
        assert code == 2


class TestCheck:
    def test_grad_suite_passes(self, capsys):
        assert run_cli("check", "grad") == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_sampler_suite_passes(self, capsys):
        assert run_cli("check", "sampler") == 0
        assert "FAIL" not in capsys.readouterr().out


class TestRoundTrip:
    def test_csv_reader_parses_all_rows(self, synth_file, tmp_path):
        out = tmp_path / "run"
        run_cli("train", "--data", str(synth_file), "--iterations", "100",
                "--eval-every", "25", "--out", str(out), "--track-variance")
        records = read_metrics_csv(out / "metrics.csv")
        assert len(records) == 4
        assert all(r.variance_estimate is not None for r in records)
        assert all(
            b.wall_time_ms >= a.wall_time_ms for a, b in zip(records, records[1:])
        )
