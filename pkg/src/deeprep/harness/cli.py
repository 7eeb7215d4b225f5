"""Command line entry point: ``deeprep prep|train-encoder|run|report``.

Exit codes: 0 success, 2 config error, 3 data error, 4 run failure,
5 leakage audit failure.
"""
from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from ..dataio import CsvParseError, SchemaError, save_model
from ..embed import DegenerateInputError
from ..encoders import DivergenceError, EncoderConfig, train_encoder
from ..preprocess import UnusableColumnError, make_folds
from .config import ConfigError, load_config
from .report import emit_loss_curves, format_report, read_report, write_report
from .runner import LeakageError, RunError, build_design, LeakageAudit, load_dataset, run_experiment

EXIT_CONFIG, EXIT_DATA, EXIT_RUN, EXIT_LEAKAGE = 2, 3, 4, 5


def _fail(category: str, code: int, exc: Exception):
    click.echo(f"error [{category}]: {exc}", err=True)
    sys.exit(code)


def _load(config, seed, out, paper_faithful=False, audit_leakage=False):
    try:
        cfg = load_config(config)
    except (ConfigError, OSError) as exc:
        _fail("config", EXIT_CONFIG, exc)
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.output = out
    cfg.paper_faithful = cfg.paper_faithful or paper_faithful
    cfg.audit_leakage = cfg.audit_leakage or audit_leakage
    return cfg


def _dataset(cfg):
    try:
        return load_dataset(cfg)
    except (SchemaError, CsvParseError, OSError) as exc:
        _fail("data", EXIT_DATA, exc)


config_opt = click.option("--config", "config", required=True, type=click.Path(exists=True, dir_okay=False),
                          help="YAML experiment config.")
seed_opt = click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None, help="Master seed override.")
out_opt = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory override.")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Deep representation learning benchmark for tabular records."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@config_opt
@seed_opt
@out_opt
def prep(config, seed, out):
    """Validate config and data; write the fold manifest and config echo."""
    cfg = _load(config, seed, out)
    ds = _dataset(cfg)
    plan = make_folds(ds.n, cfg.folds, cfg.seed, cfg.preprocess.val_fraction)
    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "folds.txt").write_text(plan.to_manifest())
    (out_dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True, default=list) + "\n")
    (out_dir / "schema.json").write_text(json.dumps(ds.schema.to_dict(), indent=2) + "\n")
    click.echo(f"{ds.n} records, {len(ds.schema.numeric)} numeric, {len(ds.schema.categorical)} categorical; "
               f"{cfg.folds} folds written to {out_dir / 'folds.txt'}")


@main.command("train-encoder")
@config_opt
@seed_opt
@out_opt
@click.option("--kind", type=click.Choice(["SSAE", "DBN", "VAE", "AAE"]), required=True)
@click.option("--fold", type=int, default=0, show_default=True, help="Fold whose training rows are used.")
def train_encoder_cmd(config, seed, out, kind, fold):
    """Train the first grid candidate of one encoder on one fold and save it."""
    cfg = _load(config, seed, out)
    if kind not in cfg.encoders:
        _fail("config", EXIT_CONFIG, ConfigError(f"encoder {kind} not configured"))
    ds = _dataset(cfg)
    plan = make_folds(ds.n, cfg.folds, cfg.seed, cfg.preprocess.val_fraction)
    if not 0 <= fold < cfg.folds:
        _fail("config", EXIT_CONFIG, ConfigError(f"fold must be in [0, {cfg.folds})"))
    try:
        design = build_design(ds, cfg, fold, plan, LeakageAudit(), cfg.seed)
    except (UnusableColumnError, DegenerateInputError) as exc:
        _fail("data", EXIT_DATA, exc)
    enc_cfg: EncoderConfig = cfg.encoder_candidates(kind)[0]
    enc_cfg = replace(enc_cfg, seed=cfg.seed)
    f = plan.folds[fold]
    try:
        model = train_encoder(design.X[f.train], enc_cfg, design.X[f.val])
    except DivergenceError as exc:
        _fail("run", EXIT_RUN, exc)
    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{kind}_fold{fold}.model"
    save_model(model, path)
    emit_loss_curves({(kind, fold): model.history}, out_dir / "loss_curves")
    click.echo(f"saved {path}")


@main.command()
@config_opt
@seed_opt
@out_opt
@click.option("--paper-faithful", is_flag=True, help="Fit the categorical embedding on all rows (leaks).")
@click.option("--audit-leakage", is_flag=True, help="Fail if any fitted statistic saw held-out rows.")
@click.option("--plot", is_flag=True, help="Also render loss curves as PNG (needs matplotlib).")
def run(config, seed, out, paper_faithful, audit_leakage, plot):
    """Run the full cross-validated grid and write the report."""
    cfg = _load(config, seed, out, paper_faithful, audit_leakage)
    ds = _dataset(cfg)
    try:
        report = run_experiment(cfg, ds)
    except LeakageError as exc:
        _fail("leakage", EXIT_LEAKAGE, exc)
    except (UnusableColumnError, DegenerateInputError) as exc:
        _fail("data", EXIT_DATA, exc)
    except RunError as exc:
        _fail("run", EXIT_RUN, exc)
    paths = write_report(report, cfg.output)
    if report.histories:
        emit_loss_curves(report.histories, Path(cfg.output) / "loss_curves", plot=plot)
    click.echo(format_report(report), nl=False)
    click.echo(f"report written to {paths['txt'].parent}")


@main.command()
@click.argument("path", type=click.Path(exists=True))
def report(path):
    """Render a saved report (``report.json`` or a run directory) as a table."""
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    try:
        click.echo(format_report(read_report(p)), nl=False)
    except (ValueError, KeyError) as exc:
        _fail("data", EXIT_DATA, exc)


if __name__ == "__main__":
    main()
