"""End-to-end checks of the command line layer on a small synthetic survey."""

import csv
import hashlib
import json

import pytest
from click.testing import CliRunner

from surveycast.analysis import accuracy_f1, auc
from surveycast.cli import main
from surveycast.data import ingest_responses
from surveycast.folds import PredictionSet

FAST = [
    "--epochs", "2",
    "--embed-dim", "4",
    "--cross-layers", "1",
    "--dense-layers", "1",
    "--dropout", "0.0",
    "--learning-rate", "0.005",
    "--batch-size", "256",
]


def invoke(args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cliwork")
    res = invoke(
        [
            "simulate", "--out", root / "synth",
            "--n", 30, "--questions", 6, "--years", 3,
            "--latent-dim", 4, "--embed-dim", 8,
            "--observed-fraction", 0.6, "--seed", 5,
        ]
    )
    assert res.exit_code == 0, res.output
    return {
        "root": root,
        "data": root / "synth" / "data.csv",
        "emb": root / "synth" / "embeddings.json",
    }


def test_version_flag():
    res = invoke(["--version"])
    assert res.exit_code == 0
    assert "version" in res.output


def test_simulate_writes_dataset_and_manifest(tmp_path):
    out = tmp_path / "synth"
    res = invoke(
        [
            "simulate", "--out", out, "--n", 10, "--questions", 3,
            "--years", 2, "--latent-dim", 2, "--embed-dim", 4,
            "--observed-fraction", 0.8, "--seed", 1,
        ]
    )
    assert res.exit_code == 0, res.output
    assert "synthetic survey:" in res.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 1
    assert isinstance(manifest["wall_seconds"], float)
    for name in ("data.csv", "embeddings.json", "embeddings.bin"):
        recorded = manifest["artifacts"][name]["sha256"]
        actual = hashlib.sha256((out / name).read_bytes()).hexdigest()
        assert recorded == actual
    assert not (out / ".surveycast.lock").exists()


def test_ingest_round_trips_canonical_bytes(workspace, tmp_path):
    out = tmp_path / "ingest"
    res = invoke(["ingest", "--data", workspace["data"], "--out", out])
    assert res.exit_code == 0, res.output
    assert "records:" in res.output
    # the synthetic file is already in canonical order, so re-serializing
    # it must reproduce it byte for byte
    assert (out / "canonical.csv").read_bytes() == workspace["data"].read_bytes()
    stats = json.loads((out / "stats.json").read_text())
    assert stats["n_records"] == 324
    assert stats["n_questions"] == 6
    assert not stats["year_prefixed_keys"]  # panel-style keys
    header = (out / "stats.csv").read_text().splitlines()[0]
    assert header == "variable,year,count,positive_share"


def test_embed_validate_checks_alignment(workspace, tmp_path):
    res = invoke(
        ["embed-validate", "--data", workspace["data"], "--embeddings", workspace["emb"]]
    )
    assert res.exit_code == 0, res.output
    assert "ok: 6 vectors of dim 8" in res.output

    partial = tmp_path / "partial.csv"
    partial.write_text("variable,v1\nq000,1.0\n")
    res = invoke(
        ["embed-validate", "--data", workspace["data"], "--embeddings", partial]
    )
    assert res.exit_code == 1
    assert "error (AlignmentError)" in res.stderr


def test_cv_writes_predictions_deterministically(workspace, tmp_path):
    args = [
        "cv", "--data", workspace["data"], "--embeddings", workspace["emb"],
        "--task", "imputation", "--folds", 3, *FAST,
    ]
    res_a = invoke(args + ["--out", tmp_path / "a"])
    assert res_a.exit_code == 0, res_a.output
    assert "imputation AUC over 324" in res_a.output
    res_b = invoke(args + ["--out", tmp_path / "b"])
    assert res_b.exit_code == 0
    bytes_a = (tmp_path / "a" / "predictions.csv").read_bytes()
    bytes_b = (tmp_path / "b" / "predictions.csv").read_bytes()
    assert bytes_a == bytes_b
    assert len(bytes_a.decode().splitlines()) == 325  # header + one per record
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config"]["task"] == "imputation"
    assert manifest["config"]["folds"] == 3


def test_locked_output_directory_is_refused(workspace, tmp_path):
    out = tmp_path / "locked"
    out.mkdir()
    (out / ".surveycast.lock").write_text("pid 1\n")
    res = invoke(
        [
            "cv", "--data", workspace["data"], "--embeddings", workspace["emb"],
            "--task", "imputation", "--folds", 3, "--out", out, *FAST,
        ]
    )
    assert res.exit_code == 1
    assert "error (LockError)" in res.stderr
    assert not (out / "predictions.csv").exists()


def test_config_file_layering(workspace, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"epochs": 1, "batch_size": 64}))
    out = tmp_path / "train"
    res = invoke(
        [
            "train", "--data", workspace["data"], "--embeddings", workspace["emb"],
            "--out", out, "--config", config, "--epochs", 2,
        ]
    )
    assert res.exit_code == 0, res.output
    assert "trained" in res.output
    manifest = json.loads((out / "manifest.json").read_text())
    # explicit flag beats the file; the file beats the built-in default
    assert manifest["config"]["epochs"] == 2
    assert manifest["config"]["batch_size"] == 64
    assert manifest["config"]["embed_dim"] == 50
    for name in ("checkpoint.json", "checkpoint.bin", "history.csv"):
        assert (out / name).exists()


def test_importance_from_trained_checkpoint(workspace, tmp_path):
    out = tmp_path / "train"
    res = invoke(
        [
            "train", "--data", workspace["data"], "--embeddings", workspace["emb"],
            "--out", out, *FAST,
        ]
    )
    assert res.exit_code == 0, res.output
    res = invoke(["importance", "--checkpoint", out / "checkpoint.json"])
    assert res.exit_code == 0, res.output
    shares = {}
    for line in res.output.strip().splitlines():
        name, value = line.split(": ")
        shares[name] = float(value)
    assert len(shares) == 6
    assert sum(shares.values()) == pytest.approx(1.0, abs=1e-9)


def test_mf_baseline_runs(workspace, tmp_path):
    out = tmp_path / "mf"
    res = invoke(
        [
            "mf", "--data", workspace["data"], "--task", "imputation",
            "--folds", 3, "--rank", 4, "--iterations", 3, "--out", out,
        ]
    )
    assert res.exit_code == 0, res.output
    assert "baseline AUC" in res.output
    lines = (out / "predictions.csv").read_text().splitlines()
    assert len(lines) == 325


def test_aggregate_emits_calibrated_cells(workspace, tmp_path):
    cv_out = tmp_path / "cv"
    res = invoke(
        [
            "cv", "--data", workspace["data"], "--embeddings", workspace["emb"],
            "--task", "imputation", "--folds", 3, "--out", cv_out, *FAST,
        ]
    )
    assert res.exit_code == 0, res.output
    agg_out = tmp_path / "agg"
    res = invoke(
        [
            "aggregate", "--predictions", cv_out / "predictions.csv",
            "--data", workspace["data"], "--out", agg_out,
        ]
    )
    assert res.exit_code == 0, res.output
    assert "cells; correlation" in res.output
    calibration = json.loads((agg_out / "calibration.json").read_text())
    for key in ("slope", "intercept", "r_squared", "n_cells",
                "correlation", "margin", "margin_correct_rate"):
        assert key in calibration
    assert 0.0 <= calibration["margin_correct_rate"] <= 1.0
    header = (agg_out / "cells.csv").read_text().splitlines()[0]
    assert header == "variable,year,predicted,observed,count,total_weight"
    assert (agg_out / "cells_rescaled.csv").exists()


def test_report_matches_direct_recomputation(workspace, tmp_path):
    cv_out = tmp_path / "cv"
    res = invoke(
        [
            "cv", "--data", workspace["data"], "--embeddings", workspace["emb"],
            "--task", "retrodiction", "--folds", 3, "--out", cv_out, *FAST,
        ]
    )
    assert res.exit_code == 0, res.output
    report_out = tmp_path / "report"
    res = invoke(
        [
            "report", "--predictions",
            f"retrodiction={cv_out / 'predictions.csv'}",
            "--data", workspace["data"], "--out", report_out,
        ]
    )
    assert res.exit_code == 0, res.output
    with open(report_out / "summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    preds = PredictionSet.from_csv(cv_out / "predictions.csv")
    scores = accuracy_f1(preds.observed, preds.predicted)
    assert float(rows[0]["auc"]) == pytest.approx(
        auc(preds.observed, preds.predicted), abs=1e-10
    )
    assert float(rows[0]["accuracy"]) == pytest.approx(scores.accuracy, abs=1e-10)
    assert int(rows[0]["n"]) == preds.n


def test_report_rejects_malformed_specs(workspace, tmp_path):
    res = invoke(
        [
            "report", "--predictions", "no-equals-sign",
            "--data", workspace["data"], "--out", tmp_path / "r1",
        ]
    )
    assert res.exit_code == 1
    assert "error (ConfigError)" in res.stderr
    assert "task=path" in res.stderr
    res = invoke(
        [
            "report", "--predictions", "t=/nonexistent/preds.csv",
            "--data", workspace["data"], "--out", tmp_path / "r2",
        ]
    )
    assert res.exit_code == 1
    assert "error (DependencyError)" in res.stderr


def test_retrodict_backfills_every_year(workspace, tmp_path):
    out = tmp_path / "retro"
    res = invoke(
        [
            "retrodict", "--data", workspace["data"],
            "--embeddings", workspace["emb"],
            "--variables", "q000,q001", "--out", out, *FAST,
        ]
    )
    assert res.exit_code == 0, res.output
    assert "backfilled 2 variables" in res.output
    with open(out / "trend.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 3  # two variables, three survey years
    assert {r["variable"] for r in rows} == {"q000", "q001"}
    assert sorted({int(r["year"]) for r in rows}) == [2000, 2001, 2002]
    for r in rows:
        assert 0.0 <= float(r["smoothed"]) <= 1.0
    assert (out / "cells.csv").exists()
    assert (out / "checkpoint.json").exists()


def test_simulate_mask_mode_splits_dataset(workspace, tmp_path):
    out = tmp_path / "mask"
    res = invoke(
        [
            "simulate", "--mechanism", "mcar", "--rate", 0.2,
            "--data", workspace["data"], "--out", out, "--seed", 3,
        ]
    )
    assert res.exit_code == 0, res.output
    assert "mcar masked" in res.output
    kept = ingest_responses(out / "kept.csv")
    masked = ingest_responses(out / "masked.csv")
    assert kept.n_records + masked.n_records == 324
    mask_rows = (out / "mask.csv").read_text().splitlines()
    assert len(mask_rows) - 1 == masked.n_records


def test_simulate_mnar_requires_demographics(workspace, tmp_path):
    res = invoke(
        [
            "simulate", "--mechanism", "mnar", "--data", workspace["data"],
            "--out", tmp_path / "x",
        ]
    )
    assert res.exit_code == 1
    assert "error (ConfigError)" in res.stderr


def test_out_defaults_to_environment_root(workspace, tmp_path):
    env_root = tmp_path / "envroot"
    res = invoke(
        ["ingest", "--data", workspace["data"]],
        env={"SURVEYCAST_OUT": str(env_root)},
    )
    assert res.exit_code == 0, res.output
    assert (env_root / "ingest" / "canonical.csv").exists()

    res = invoke(["ingest", "--data", workspace["data"]], env={"SURVEYCAST_OUT": None})
    assert res.exit_code == 1
    assert "error (ConfigError)" in res.stderr
