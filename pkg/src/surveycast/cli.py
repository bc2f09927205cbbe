"""Command line front end.

Every command that produces files writes into a run directory guarded by a
lock file, and finishes by writing ``manifest.json`` recording the resolved
configuration, seed, SHA-256 hashes of inputs and artifacts, and wall time.
Option values resolve in three layers: built-in defaults, then a JSON
``--config`` file, then explicit flags. The ``SURVEYCAST_OUT`` environment
variable supplies a default output root when ``--out`` is omitted.
"""

from __future__ import annotations

import functools
import hashlib
import json
import os
import sys
import time

import click
import numpy as np

from . import __version__
from .analysis import (
    accuracy_f1,
    apply_rescaling,
    auc,
    correlation,
    fit_rescaling,
    margin_correct_rate,
    smooth_trend,
    weighted_aggregate,
)
from .data import BinarizationMap, dataset_stats, ingest_responses, resolve_weights
from .dcn import DcnConfig, feature_importance, load_checkpoint, save_checkpoint
from .embeddings import export_vectors, load_embeddings
from .errors import ConfigError, DependencyError, LockError, SurveycastError
from .folds import (
    PredictionSet,
    missingness_sweep,
    retrodiction_rows,
    run_cross_validation,
    run_mf_cross_validation,
    train_full_dataset,
)
from .simulate import (
    MECHANISMS,
    build_response_matrix,
    generate_synthetic_survey,
    simulate_mar,
    simulate_mcar,
    simulate_mnar,
    split_by_mask,
)

OUT_ENV = "SURVEYCAST_OUT"
LOCK_NAME = ".surveycast.lock"


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunContext:
    """Locked output directory plus the run manifest bookkeeping."""

    def __init__(self, out_dir, command, config, seed, inputs):
        self.out_dir = out_dir
        self.command = command
        self.config = config
        self.seed = seed
        self.inputs = dict(inputs)
        self.artifacts = {}
        self._t0 = time.monotonic()
        os.makedirs(out_dir, exist_ok=True)
        self._lock_path = os.path.join(out_dir, LOCK_NAME)
        try:
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockError(
                f"{out_dir} is locked by another run (remove {LOCK_NAME} if stale)"
            ) from None
        with os.fdopen(fd, "w") as fh:
            fh.write(f"pid {os.getpid()}\n")

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def artifact(self, name, path=None):
        self.artifacts[name] = path or self.path(name)
        return self.artifacts[name]

    def finish(self):
        manifest = {
            "command": self.command,
            "package_version": __version__,
            "config": self.config,
            "seed": self.seed,
            "inputs": {
                name: {"path": str(p), "sha256": _sha256_file(p)}
                for name, p in self.inputs.items()
            },
            "artifacts": {
                name: {
                    "path": os.path.relpath(p, self.out_dir),
                    "sha256": _sha256_file(p),
                }
                for name, p in self.artifacts.items()
            },
            "wall_seconds": round(time.monotonic() - self._t0, 3),
        }
        with open(self.path("manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")

    def release(self):
        if os.path.exists(self._lock_path):
            os.unlink(self._lock_path)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                self.finish()
        finally:
            self.release()
        return False


def _resolve_out(out, command):
    if out:
        return out
    root = os.environ.get(OUT_ENV)
    if not root:
        raise ConfigError(
            f"--out is required (or set {OUT_ENV} for a default output root)"
        )
    return os.path.join(root, command)


def _load_config_file(path):
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            loaded = json.load(fh)
    except FileNotFoundError:
        raise DependencyError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return loaded


def _layered(ctx, file_values, names):
    """defaults < config file < explicit command line flags."""
    from click.core import ParameterSource

    resolved = {}
    for name in names:
        source = ctx.get_parameter_source(name)
        if source == ParameterSource.COMMANDLINE or name not in file_values:
            resolved[name] = ctx.params[name]
        else:
            resolved[name] = file_values[name]
    return resolved


TRAIN_OPTION_NAMES = (
    "seed",
    "epochs",
    "batch_size",
    "learning_rate",
    "dropout",
    "patience",
    "embed_dim",
    "cross_layers",
    "dense_layers",
    "decay_steps",
    "decay_rate",
)


def train_options(fn):
    decorators = [
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--epochs", type=int, default=10, show_default=True,
                     help="Maximum training epochs."),
        click.option("--batch-size", type=int, default=128, show_default=True),
        click.option("--learning-rate", type=float, default=2e-5, show_default=True),
        click.option("--dropout", type=float, default=0.2, show_default=True),
        click.option("--patience", type=int, default=2, show_default=True),
        click.option("--embed-dim", type=int, default=50, show_default=True),
        click.option("--cross-layers", type=int, default=3, show_default=True),
        click.option("--dense-layers", type=int, default=3, show_default=True),
        click.option("--decay-steps", type=int, default=80000, show_default=True),
        click.option("--decay-rate", type=float, default=0.96, show_default=True),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


def _dcn_config(values):
    return DcnConfig(
        embed_dim=values["embed_dim"],
        num_cross_layers=values["cross_layers"],
        num_dense_layers=values["dense_layers"],
        dropout_rate=values["dropout"],
        learning_rate=values["learning_rate"],
        decay_steps=values["decay_steps"],
        decay_rate=values["decay_rate"],
        batch_size=values["batch_size"],
        max_epochs=values["epochs"],
        patience=values["patience"],
        seed=values["seed"],
    ).validate()


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SurveycastError as exc:
            click.echo(f"error ({type(exc).__name__}): {exc}", err=True)
            sys.exit(1)
        except FileNotFoundError as exc:
            click.echo(f"error (DependencyError): {exc}", err=True)
            sys.exit(1)

    return wrapper


def _csv_list(value):
    if not value:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


@click.group()
@click.version_option(version=__version__)
def main():
    """Predict, backfill, and aggregate binary survey opinions."""


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--binarize-map", type=click.Path(exists=True, dir_okay=False))
@click.option("--include", default=None, help="Comma-separated variables to keep.")
@click.option("--exclude", default=None, help="Comma-separated variables to drop.")
@click.option("--no-weights", is_flag=True, help="Ignore any weight column.")
@handle_errors
def ingest(data, out, binarize_map, include, exclude, no_weights):
    """Validate a response file and emit canonical data plus coverage stats."""
    out = _resolve_out(out, "ingest")
    bmap = BinarizationMap.load(binarize_map) if binarize_map else None
    ds = ingest_responses(
        data,
        use_weights=not no_weights,
        include=_csv_list(include),
        exclude=_csv_list(exclude),
        bmap=bmap,
    )
    stats = dataset_stats(ds)
    inputs = {"data": data}
    if binarize_map:
        inputs["binarize_map"] = binarize_map
    config = {
        "include": _csv_list(include),
        "exclude": _csv_list(exclude),
        "use_weights": not no_weights,
    }
    with RunContext(out, "ingest", config, None, inputs) as run:
        ds.to_csv(run.artifact("canonical.csv"))
        with open(run.artifact("stats.csv"), "w", encoding="utf-8") as fh:
            fh.write("variable,year,count,positive_share\n")
            for variable, year, count, share in stats.rows():
                fh.write(f"{variable},{year},{count},{share:.12g}\n")
        with open(run.artifact("stats.json"), "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "n_individuals": stats.n_individuals,
                    "n_questions": stats.n_questions,
                    "n_years": stats.n_years,
                    "n_records": stats.n_records,
                    "sparsity": stats.sparsity,
                    "year_prefixed_keys": ds.keys_follow_year_prefix(),
                },
                fh,
                indent=1,
                sort_keys=True,
            )
            fh.write("\n")
    click.echo(
        f"{stats.n_records} records: {stats.n_individuals} respondents x "
        f"{stats.n_questions} questions x {stats.n_years} years "
        f"(sparsity {stats.sparsity:.4f})"
    )


@main.command("embed-validate")
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@handle_errors
def embed_validate(data, embeddings):
    """Check an embedding file against a dataset's question list."""
    ds = ingest_responses(data)
    matrix = load_embeddings(embeddings, ds)
    click.echo(
        f"ok: {matrix.count} vectors of dim {matrix.dim} cover all "
        f"{ds.n_questions} questions (model {matrix.model_tag or '?'}, "
        f"mode {matrix.extraction_mode})"
    )


def _write_history(path, history):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_score,learning_rate\n")
        for rec in history:
            val = "" if rec.val_score is None else format(rec.val_score, ".12g")
            fh.write(
                f"{rec.epoch},{rec.train_loss:.12g},{val},{rec.learning_rate:.12g}\n"
            )


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--config", "config_file", type=click.Path(dir_okay=False), default=None)
@train_options
@click.pass_context
@handle_errors
def train(ctx, data, embeddings, out, config_file, **_):
    """Train one model on all observed responses and write a checkpoint."""
    out = _resolve_out(out, "train")
    values = _layered(ctx, _load_config_file(config_file), TRAIN_OPTION_NAMES)
    cfg = _dcn_config(values)
    ds = ingest_responses(data)
    matrix = load_embeddings(embeddings, ds)
    with RunContext(
        out, "train", values, cfg.seed, {"data": data, "embeddings": embeddings}
    ) as run:
        params, history, best_epoch = train_full_dataset(ds, matrix, cfg)
        save_checkpoint(
            run.artifact("checkpoint.json"),
            params,
            cfg,
            {
                "individuals": ds.individuals,
                "variables": ds.variables,
                "years": ds.years,
            },
        )
        run.artifact("checkpoint.bin", run.path("checkpoint.bin"))
        _write_history(run.artifact("history.csv"), history)
    click.echo(f"trained {len(history)} epochs; kept epoch {best_epoch}")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--task", required=True, type=click.Choice(["imputation", "retrodiction", "unasked"]))
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--no-stratify", is_flag=True,
              help="Retrodiction only: skip per-year stratification.")
@click.option("--sweep-fractions", default=None,
              help="Comma-separated training-loss fractions; writes sweep.csv "
                   "for one fold round instead of full predictions.")
@click.option("--sweep-round", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--config", "config_file", type=click.Path(dir_okay=False), default=None)
@train_options
@click.pass_context
@handle_errors
def cv(ctx, data, embeddings, task, folds, no_stratify, sweep_fractions,
       sweep_round, out, config_file, **_):
    """Out-of-fold predictions under one of the three evaluation designs."""
    out = _resolve_out(out, "cv")
    values = _layered(ctx, _load_config_file(config_file), TRAIN_OPTION_NAMES)
    cfg = _dcn_config(values)
    ds = ingest_responses(data)
    matrix = load_embeddings(embeddings, ds)
    config = dict(values, task=task, folds=folds, stratify=not no_stratify)
    with RunContext(
        out, "cv", config, cfg.seed, {"data": data, "embeddings": embeddings}
    ) as run:
        if sweep_fractions:
            fractions = [float(f) for f in sweep_fractions.split(",")]
            points = missingness_sweep(
                ds, matrix, task, fractions, cfg, k=folds, round_index=sweep_round
            )
            with open(run.artifact("sweep.csv"), "w", encoding="utf-8") as fh:
                fh.write("fraction,auc,n_train_records\n")
                for pt in points:
                    fh.write(
                        f"{pt.fraction:.12g},{pt.auc:.12g},{pt.n_train_records}\n"
                    )
            for pt in points:
                click.echo(
                    f"fraction {pt.fraction:g}: AUC {pt.auc:.4f} "
                    f"({pt.n_train_records} training records)"
                )
        else:
            preds = run_cross_validation(
                ds,
                matrix,
                task,
                cfg,
                k=folds,
                stratify_retrodiction=not no_stratify,
                progress=lambda r, n, e: click.echo(
                    f"fold {r}: {n} held-out records (best epoch {e})"
                ),
            )
            preds.to_csv(run.artifact("predictions.csv"))
            click.echo(
                f"{task} AUC over {preds.n} out-of-fold predictions: "
                f"{auc(preds.observed, preds.predicted):.4f}"
            )


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--task", required=True, type=click.Choice(["imputation", "retrodiction"]))
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--rank", type=int, default=50, show_default=True)
@click.option("--ridge", type=float, default=10.0, show_default=True)
@click.option("--iterations", type=int, default=15, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--no-stratify", is_flag=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@handle_errors
def mf(data, task, folds, rank, ridge, iterations, seed, no_stratify, out):
    """Matrix-factorization baseline under the same fold plans."""
    out = _resolve_out(out, "mf")
    ds = ingest_responses(data)
    config = {
        "task": task, "folds": folds, "rank": rank, "ridge": ridge,
        "iterations": iterations, "stratify": not no_stratify,
    }
    with RunContext(out, "mf", config, seed, {"data": data}) as run:
        preds = run_mf_cross_validation(
            ds, task, k=folds, seed=seed, rank=rank, ridge=ridge,
            iterations=iterations, stratify_retrodiction=not no_stratify,
        )
        preds.to_csv(run.artifact("predictions.csv"))
        click.echo(
            f"{task} baseline AUC over {preds.n} predictions: "
            f"{auc(preds.observed, preds.predicted):.4f}"
        )


@main.command()
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--data", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Mask mode: dataset whose observed cells get masked.")
@click.option("--mechanism", type=click.Choice(MECHANISMS), default=None)
@click.option("--rate", type=float, default=0.1, show_default=True)
@click.option("--demographics", type=click.Path(exists=True, dir_okay=False),
              default=None, help="CSV yearid,year,<column>... for the mnar mechanism.")
@click.option("--n", type=int, default=500, show_default=True)
@click.option("--questions", "p", type=int, default=60, show_default=True)
@click.option("--years", type=int, default=10, show_default=True)
@click.option("--latent-dim", type=int, default=8, show_default=True)
@click.option("--observed-fraction", type=float, default=0.4, show_default=True)
@click.option("--alpha", type=float, default=0.0, show_default=True)
@click.option("--beta", type=float, default=1.5, show_default=True)
@click.option("--noise", type=float, default=0.0, show_default=True)
@click.option("--embed-dim", type=int, default=32, show_default=True)
@click.option("--start-year", type=int, default=2000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@handle_errors
def simulate(out, data, mechanism, rate, demographics, n, p, years, latent_dim,
             observed_fraction, alpha, beta, noise, embed_dim, start_year, seed):
    """Generate a planted synthetic survey, or mask an existing dataset.

    Without --mechanism, writes a synthetic dataset plus its embedding file.
    With --mechanism (and --data), writes the mask and the kept/masked
    record splits.
    """
    out = _resolve_out(out, "simulate")
    if mechanism is None:
        config = {
            "n": n, "p": p, "years": years, "latent_dim": latent_dim,
            "observed_fraction": observed_fraction, "alpha": alpha, "beta": beta,
            "noise": noise, "embed_dim": embed_dim, "start_year": start_year,
        }
        with RunContext(out, "simulate", config, seed, {}) as run:
            ds, matrix, _ = generate_synthetic_survey(
                n=n, p=p, years=years, latent_dim=latent_dim,
                observed_fraction=observed_fraction, alpha=alpha, beta=beta,
                noise=noise, embed_dim=embed_dim, seed=seed, start_year=start_year,
            )
            ds.to_csv(run.artifact("data.csv"))
            export_vectors(matrix, run.artifact("embeddings.json"))
            run.artifact("embeddings.bin", run.path("embeddings.bin"))
        click.echo(
            f"synthetic survey: {ds.n_records} records, {ds.n_individuals} "
            f"respondents, {ds.n_questions} questions, {ds.n_years} years"
        )
        return

    if data is None:
        raise ConfigError("mask mode needs --data")
    ds = ingest_responses(data)
    matrix, row_keys, col_names = build_response_matrix(ds)
    inputs = {"data": data}
    if mechanism == "mnar":
        if demographics is None:
            raise ConfigError("the mnar mechanism needs --demographics")
        demo = _read_demographics(demographics, row_keys)
        inputs["demographics"] = demographics
    config = {"mechanism": mechanism, "rate": rate}
    with RunContext(out, "simulate", config, seed, inputs) as run:
        if mechanism == "mcar":
            mask = simulate_mcar(matrix, rate, seed, row_keys, col_names)
        elif mechanism == "mar":
            mask = simulate_mar(matrix, rate, seed, row_keys=row_keys, col_names=col_names)
        else:
            mask = simulate_mnar(matrix, demo, rate, seed, row_keys, col_names)
        mask.to_csv(run.artifact("mask.csv"))
        kept, masked = split_by_mask(ds, mask)
        kept.to_csv(run.artifact("kept.csv"))
        masked.to_csv(run.artifact("masked.csv"))
    click.echo(
        f"{mechanism} masked {mask.size} of {ds.n_records} records "
        f"({mask.size / ds.n_records:.4f})"
    )


def _read_demographics(path, row_keys):
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames is None or not {"yearid", "year"}.issubset(reader.fieldnames):
            raise ConfigError("demographics file needs yearid and year columns")
        columns = [c for c in reader.fieldnames if c not in ("yearid", "year")]
        if not columns:
            raise ConfigError("demographics file has no demographic columns")
        by_pair = {}
        for row in reader:
            by_pair[(int(row["yearid"]), int(row["year"]))] = {
                c: row[c] for c in columns
            }
    missing = [pair for pair in row_keys if pair not in by_pair]
    if missing:
        from .errors import CoverageError

        raise CoverageError(
            f"demographics missing for {len(missing)} respondent rows, "
            f"e.g. {missing[:5]}"
        )
    return {c: [by_pair[pair][c] for pair in row_keys] for c in columns}


def _cells_to_csv(path, cells):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("variable,year,predicted,observed,count,total_weight\n")
        for c in cells:
            observed = "" if c.observed is None else format(c.observed, ".12g")
            fh.write(
                f"{c.variable},{c.year},{c.predicted:.12g},{observed},"
                f"{c.count},{c.total_weight:.12g}\n"
            )


def _aggregate_predictions(preds, ds, margin):
    weight_of = resolve_weights(ds)
    weights = np.asarray(
        [weight_of(k, y) for k, y in zip(preds.yearids, preds.years)]
    )
    cells = weighted_aggregate(
        preds.variables, preds.years, preds.predicted, weights,
        labels=preds.observed.astype(np.float64),
    )
    line = fit_rescaling(cells)
    rescaled = apply_rescaling(cells, line)
    return {
        "cells": cells,
        "rescaled": rescaled,
        "line": line,
        "correlation": correlation(
            [c.predicted for c in cells], [c.observed for c in cells]
        ),
        "margin_rate": margin_correct_rate(rescaled, margin),
    }


@main.command()
@click.option("--predictions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--margin", type=float, default=0.03, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@handle_errors
def aggregate(predictions, data, margin, out):
    """Collapse record-level predictions into weighted cell proportions."""
    out = _resolve_out(out, "aggregate")
    ds = ingest_responses(data)
    preds = PredictionSet.from_csv(predictions)
    with RunContext(
        out, "aggregate", {"margin": margin}, None,
        {"predictions": predictions, "data": data},
    ) as run:
        result = _aggregate_predictions(preds, ds, margin)
        _cells_to_csv(run.artifact("cells.csv"), result["cells"])
        _cells_to_csv(run.artifact("cells_rescaled.csv"), result["rescaled"])
        line = result["line"]
        with open(run.artifact("calibration.json"), "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "slope": line.slope,
                    "intercept": line.intercept,
                    "r_squared": line.r_squared,
                    "n_cells": line.n,
                    "correlation": result["correlation"],
                    "margin": margin,
                    "margin_correct_rate": result["margin_rate"],
                },
                fh,
                indent=1,
                sort_keys=True,
            )
            fh.write("\n")
    click.echo(
        f"{len(result['cells'])} cells; correlation {result['correlation']:.4f}; "
        f"within {margin:g}: {result['margin_rate']:.4f}"
    )


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--variables", default=None,
              help="Comma-separated variables to backfill (default: all).")
@click.option("--span", type=float, default=0.75, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--config", "config_file", type=click.Path(dir_okay=False), default=None)
@train_options
@click.pass_context
@handle_errors
def retrodict(ctx, data, embeddings, variables, span, out, config_file, **_):
    """Backfill every year's proportion for chosen variables.

    Trains on all observed responses, scores every respondent-year cell for
    the requested variables, aggregates with survey weights, rescales
    against the observed cells, and smooths each variable's yearly series.
    """
    out = _resolve_out(out, "retrodict")
    values = _layered(ctx, _load_config_file(config_file), TRAIN_OPTION_NAMES)
    cfg = _dcn_config(values)
    ds = ingest_responses(data)
    matrix = load_embeddings(embeddings, ds)
    wanted = _csv_list(variables)
    config = dict(values, variables=wanted, span=span)
    with RunContext(
        out, "retrodict", config, cfg.seed, {"data": data, "embeddings": embeddings}
    ) as run:
        params, history, _ = train_full_dataset(ds, matrix, cfg)
        save_checkpoint(
            run.artifact("checkpoint.json"), params, cfg,
            {"individuals": ds.individuals, "variables": ds.variables, "years": ds.years},
        )
        run.artifact("checkpoint.bin", run.path("checkpoint.bin"))
        _write_history(run.artifact("history.csv"), history)

        var_arr, years, keys, predicted, labels, weights = retrodiction_rows(
            ds, matrix, params, wanted
        )
        cells = weighted_aggregate(var_arr, years, predicted, weights, labels)
        try:
            line = fit_rescaling(cells)
        except SurveycastError:
            from .analysis import CalibrationLine

            line = CalibrationLine(1.0, 0.0, 0.0, 0)
        rescaled = apply_rescaling(cells, line)
        _cells_to_csv(run.artifact("cells.csv"), rescaled)

        by_variable = {}
        for cell in rescaled:
            by_variable.setdefault(cell.variable, []).append(cell)
        with open(run.artifact("trend.csv"), "w", encoding="utf-8") as fh:
            fh.write("variable,year,smoothed,lower,upper,observed\n")
            for variable in sorted(by_variable):
                cells_v = sorted(by_variable[variable], key=lambda c: c.year)
                series = [(c.year, c.predicted, c.count) for c in cells_v]
                observed_by_year = {
                    c.year: c.observed for c in cells_v if c.observed is not None
                }
                for pt in smooth_trend(series, span=span):
                    obs = observed_by_year.get(pt.year)
                    obs_txt = "" if obs is None else format(obs, ".12g")
                    fh.write(
                        f"{variable},{pt.year},{pt.fit:.12g},{pt.lower:.12g},"
                        f"{pt.upper:.12g},{obs_txt}\n"
                    )
    click.echo(
        f"backfilled {len(by_variable)} variables over {ds.n_years} years "
        f"(calibration slope {line.slope:.4f}, intercept {line.intercept:.4f})"
    )


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None)
@handle_errors
def importance(checkpoint, out):
    """Feature-group importance shares from a trained checkpoint."""
    params, _, _ = load_checkpoint(checkpoint)
    shares = feature_importance(params).as_dict()
    for name, value in shares.items():
        click.echo(f"{name}: {value:.6f}")
    if out:
        out = _resolve_out(out, "importance")
        with RunContext(out, "importance", {}, None, {"checkpoint": checkpoint}) as run:
            with open(run.artifact("importance.csv"), "w", encoding="utf-8") as fh:
                fh.write("component,share\n")
                for name, value in shares.items():
                    fh.write(f"{name},{value:.12g}\n")


@main.command()
@click.option("--predictions", "prediction_specs", multiple=True, required=True,
              help="task=path pairs; repeatable.")
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--margin", type=float, default=0.03, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@handle_errors
def report(prediction_specs, data, margin, out):
    """One summary row per prediction file: AUC, accuracy, F1, correlation."""
    out = _resolve_out(out, "report")
    ds = ingest_responses(data)
    inputs = {"data": data}
    rows = []
    for spec in prediction_specs:
        if "=" not in spec:
            raise ConfigError(f"--predictions expects task=path, got {spec!r}")
        task, path = spec.split("=", 1)
        if not os.path.exists(path):
            raise DependencyError(f"prediction file {path} not found")
        inputs[f"predictions[{task}]"] = path
        preds = PredictionSet.from_csv(path)
        scores = accuracy_f1(preds.observed, preds.predicted)
        agg = _aggregate_predictions(preds, ds, margin)
        rows.append(
            {
                "task": task,
                "n": preds.n,
                "auc": auc(preds.observed, preds.predicted),
                "accuracy": scores.accuracy,
                "precision": scores.precision,
                "recall": scores.recall,
                "f1": scores.f1,
                "correlation": agg["correlation"],
                "margin_correct_rate": agg["margin_rate"],
                "calibration_slope": agg["line"].slope,
                "calibration_intercept": agg["line"].intercept,
            }
        )
    with RunContext(out, "report", {"margin": margin}, None, inputs) as run:
        with open(run.artifact("summary.csv"), "w", encoding="utf-8") as fh:
            header = list(rows[0].keys())
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(
                    ",".join(
                        str(row[h]) if isinstance(row[h], (int, str))
                        else format(row[h], ".12g")
                        for h in header
                    )
                    + "\n"
                )
    for row in rows:
        click.echo(
            f"{row['task']}: AUC {row['auc']:.4f}, accuracy {row['accuracy']:.4f}, "
            f"F1 {row['f1']:.4f}, correlation {row['correlation']:.4f}, "
            f"within {margin:g}: {row['margin_correct_rate']:.4f}"
        )


if __name__ == "__main__":
    main()
