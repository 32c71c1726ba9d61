"""End-to-end command-line runs on tiny seeded configurations."""

import json

import pytest

from cscbench.cli import main

TINY_FIG4 = {
    "dataset": {
        "n_classes": 3,
        "dim": 12,
        "train_per_class": 5,
        "test_total": 6,
        "noise_sigma": 0.3,
        "seed": 0,
    },
    "learn": {
        "outer_iterations": 2,
        "probe_size": 4,
        "probe_iterations": 10,
        "objective_iterations": 10,
        "pursuit_iterations": 5,
        "batch_size": 8,
    },
    "model": {"width": 2, "depth": 2},
}


def test_verify_exits_zero_and_reports_all_pass(capsys):
    assert main(["verify", "--seed", "0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["all_pass"] is True
    assert len(doc["checks"]) == 6


def test_coherence_dilated_family_is_orthogonal(capsys):
    code = main(
        [
            "coherence",
            "--kernel-size",
            "2x2",
            "--dilation",
            "2",
            "--input-shape",
            "4x4",
        ]
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mu"] == pytest.approx(0.0, abs=1e-14)
    assert doc["uniqueness_threshold"] == "inf" or doc["uniqueness_threshold"] > 1e6


def test_coherence_undilated_family_is_positive(capsys):
    assert (
        main(
            [
                "coherence",
                "--kernel-size",
                "2x2",
                "--input-shape",
                "4x4",
                "--seed",
                "1",
            ]
        )
        == 0
    )
    doc = json.loads(capsys.readouterr().out)
    assert doc["mu"] > 0.0


def test_pursue_writes_trace(tmp_path, capsys):
    config = {
        "dictionary": {
            "random": {"input_shape": [10, 1], "kernel_size": 3, "width": 2,
                       "padding": "same", "seed": 0}
        },
        "signal": {"seed": 1},
        "beta": 0.1,
        "iterations": 50,
        "solver": "fista",
    }
    cfg_path = tmp_path / "pursue.json"
    cfg_path.write_text(json.dumps(config))
    out_path = tmp_path / "trace.csv"
    assert main(["pursue", "--config", str(cfg_path), "--out", str(out_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["iterations_run"] >= 1
    lines = out_path.read_text().strip().splitlines()
    assert lines[0] == "iter,objective,delta_inf"
    assert len(lines) == doc["iterations_run"] + 2


def test_fig4_tiny_config(tmp_path, capsys):
    cfg_path = tmp_path / "fig4.json"
    cfg_path.write_text(json.dumps(TINY_FIG4))
    out_dir = tmp_path / "out"
    assert main(["fig4", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["rows"] == 2
    lines = (out_dir / "fig4.csv").read_text().strip().splitlines()
    assert lines[0].startswith("iteration,unsuccess_count_ml,unsuccess_count_msd")
    assert len(lines) == 3


def test_unfold_sweep_deterministic_csv(tmp_path):
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    args = ["unfold-sweep", "--unfolding", "0,1", "--solver", "ista", "--seed", "0"]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    a, b = out_a.read_bytes(), out_b.read_bytes()
    assert a == b  # byte-identical across runs
    lines = a.decode().strip().splitlines()
    assert lines[0] == "unfolding,solver,mean_objective,accuracy"
    assert len(lines) == 3


def test_malformed_config_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["pursue", "--config", str(bad)]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_key_exits_two(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"signal": [1.0, 2.0]}))  # no dictionary
    assert main(["pursue", "--config", str(cfg)]) == 2


def test_unknown_flag_exits_two(capsys):
    assert main(["verify", "--bogus"]) == 2
    capsys.readouterr()


def test_unknown_subcommand_exits_two(capsys):
    assert main(["frobnicate"]) == 2
    capsys.readouterr()
