import csv
import io

import numpy as np
import pytest

from conftest import random_dataset
from tsaugbench.cli import main
from tsaugbench.core import LabeledDataset, Series
from tsaugbench.tsfile import header_for, parse_ts, write_ts_file


@pytest.fixture
def toy_pair(tmp_path):
    gen = np.random.default_rng(0)
    items = []
    for i in range(18):
        y = 0 if i % 3 else 1  # 2:1 imbalance
        base = np.full((2, 20), 2.0 if y else -2.0)
        items.append((Series(base + gen.normal(0, 0.5, (2, 20)), id=f"t-{i}"), y))
    train = LabeledDataset(tuple(items), ("neg", "pos"), name="CliToy")
    test = LabeledDataset(tuple(items[::-1]), ("neg", "pos"), name="CliToy")
    train_path = tmp_path / "CliToy_TRAIN.ts"
    test_path = tmp_path / "CliToy_TEST.ts"
    write_ts_file(train_path, header_for(train), train)
    write_ts_file(test_path, header_for(test), test)
    return train_path, test_path


def test_profile_command(toy_pair, capsys):
    train, test = toy_pair
    assert main(["profile", str(train), str(test)]) == 0
    out = capsys.readouterr().out
    assert "n_classes" in out and "im_ratio" in out


def test_profile_csv_output(toy_pair, tmp_path, capsys):
    train, test = toy_pair
    out_file = tmp_path / "profile.csv"
    assert main(["profile", str(train), str(test), "--format", "csv", "--out", str(out_file)]) == 0
    rows = list(csv.reader(io.StringIO(out_file.read_text())))
    assert rows[0][0] == "Dataset"
    assert rows[1][1] == "2"  # n_classes


def test_augment_command_balances(toy_pair, tmp_path, capsys):
    train, _ = toy_pair
    out_file = tmp_path / "balanced.ts"
    audit = tmp_path / "audit.csv"
    code = main([
        "augment", str(train), "--technique", "noise_3",
        "--out", str(out_file), "--audit", str(audit), "--seed", "4",
    ])
    assert code == 0
    _, balanced = parse_ts(out_file.read_text())
    counts = np.bincount([y for _, y in balanced.items])
    assert counts[0] == counts[1]
    assert len(audit.read_text().splitlines()) > 1


def test_bench_command_end_to_end(toy_pair, tmp_path, capsys):
    train, test = toy_pair
    out_dir = tmp_path / "results"
    code = main([
        "bench", "--train", str(train), "--test", str(test), "--name", "CliToy",
        "--runs", "1", "--kernels", "60", "--techniques", "none,noise_1",
        "--format", "csv", "--out-dir", str(out_dir), "--quiet",
    ])
    assert code == 0
    out = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][0] == "Dataset" and rows[1][0] == "CliToy"
    assert (out_dir / "report.csv").is_file()
    assert (out_dir / "raw_accuracies.csv").is_file()
    assert (out_dir / "synthesis_audit.csv").is_file()


def test_bench_with_config_file(toy_pair, tmp_path, capsys):
    train, test = toy_pair
    cfg = tmp_path / "bench.cfg"
    cfg.write_text(
        f"dataset = CliToy {train} {test}\n"
        "runs = 1\n"
        "kernels = 60\n"
        "techniques = none,smote\n",
        encoding="utf-8",
    )
    assert main(["bench", "--config", str(cfg), "--quiet"]) == 0
    assert "CliToy" in capsys.readouterr().out


def test_usage_errors_exit_1(capsys):
    assert main(["bench", "--train", "only-train.ts", "--quiet"]) == 1
    assert main(["augment", "in.ts", "--technique", "warp-speed", "--out", "x.ts"]) == 1
    assert main(["frobnicate"]) == 1


def test_parse_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ts"
    bad.write_text("@problemName x\n@classLabel true A\n@data\n1.0,zap:A\n", encoding="utf-8")
    ok = tmp_path / "ok.ts"
    ok.write_text("@problemName x\n@classLabel true A\n@data\n1.0,2.0:A\n", encoding="utf-8")
    assert main(["profile", str(bad), str(ok)]) == 2
    assert main(["profile", str(tmp_path / "missing.ts"), str(ok)]) == 2


def test_experiment_errors_exit_3(toy_pair, tmp_path):
    train, test = toy_pair
    # kernel count valid but series too short for any kernel -> experiment error
    short = tmp_path / "short.ts"
    short.write_text(
        "@problemName s\n@classLabel true A B\n@data\n1.0,2.0:A\n2.0,3.0:B\n", encoding="utf-8"
    )
    code = main([
        "bench", "--train", str(short), "--test", str(short),
        "--runs", "1", "--kernels", "10", "--quiet",
    ])
    assert code == 3


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "profile" in capsys.readouterr().out
