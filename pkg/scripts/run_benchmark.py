"""Latent-factor benchmark over several master seeds.

For each seed the data are regenerated with that seed and the full
cross-validated grid is run.  A seed counts as a win when some encoder
cell has a lower mean test RMSE than every Original cell.

    python scripts/run_benchmark.py --seeds 0 1 2 3 4 --out runs/bench
"""
import argparse
import time
import warnings
from pathlib import Path

from deeprep.dataio import from_arrays
from deeprep.harness import emit_loss_curves, format_report, load_config, run_experiment, write_report
from deeprep.harness.runner import ORIGINAL
from deeprep.supervised import ConvergenceWarning
from deeprep.synthetic import latent_factor_regression

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "latent_factor.yaml"


def best_encoder_cell(report):
    cells = [c for c in report.cells.values() if c.representation != ORIGINAL and not c.failed]
    return min(cells, key=lambda c: c.mean)


def run_seed(seed: int, config=CONFIG, out=None):
    cfg = load_config(config)
    cfg.seed = seed
    X, y, _ = latent_factor_regression(seed=seed)
    report = run_experiment(cfg, from_arrays(X, y))
    if out is not None:
        write_report(report, Path(out) / f"seed{seed}")
        emit_loss_curves(report.histories, Path(out) / f"seed{seed}" / "loss_curves")
    return report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--config", default=str(CONFIG))
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    warnings.simplefilter("ignore", ConvergenceWarning)
    wins = 0
    t0 = time.perf_counter()
    for seed in args.seeds:
        report = run_seed(seed, args.config, args.out)
        best = best_encoder_cell(report)
        win = best.mean < report.best_original()
        wins += win
        print(f"seed {seed}")
        print(format_report(report))
        print(f"best encoder cell {best.representation}+{best.learner} {best.mean:.3f} vs "
              f"best Original {report.best_original():.3f}: {'win' if win else 'loss'}\n", flush=True)
    print(f"{wins}/{len(args.seeds)} seeds won in {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
