"""Text/CSV/JSON rendering of experiment reports and loss-curve export."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .runner import ExperimentReport

BEST_MARK = "*"


def _cell_text(cell) -> str:
    if cell.failed:
        return f"—({cell.failure})"
    text = f"{cell.mean:.2f}"
    if not math.isnan(cell.sd):
        text += f" ({cell.sd:.2f})"
    return text


def format_report(report: ExperimentReport) -> str:
    """Plain-text table: one row per representation, one column per learner.

    Cells read ``mean (sd)``; the lowest mean RMSE is marked with ``*``.
    """
    live = [c for c in report.cells.values() if not c.failed]
    best = min(live, key=lambda c: c.mean) if live else None
    header = ["Approach"] + list(report.learners)
    rows = []
    for rep in report.representations:
        row = [rep]
        for learner in report.learners:
            cell = report.cells[(rep, learner)]
            text = _cell_text(cell)
            if cell is best:
                text = BEST_MARK + text
            row.append(text)
        rows.append(row)
    widths = [max(len(r[j]) for r in [header] + rows) for j in range(len(header))]
    lines = [" | ".join(h.ljust(w) for h, w in zip(header, widths)),
             "-+-".join("-" * w for w in widths)]
    lines += [" | ".join(v.ljust(w) for v, w in zip(r, widths)) for r in rows]
    if best is not None:
        lines.append(f"{BEST_MARK} lowest mean RMSE")
    return "\n".join(line.rstrip() for line in lines) + "\n"


def report_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["representation", "learner", "mean_rmse", "sd_rmse", "failure"]
               + [f"fold{i}" for i in range(report.k)])
    for rep in report.representations:
        for learner in report.learners:
            c = report.cells[(rep, learner)]
            folds = ["" if v is None else repr(v) for v in c.fold_rmse]
            w.writerow([rep, learner, repr(c.mean), repr(c.sd), c.failure or ""] + folds)
    return buf.getvalue()


def write_report(report: ExperimentReport, out_dir) -> dict[str, Path]:
    """Write ``report.txt``, ``report.csv``, ``report.json`` and ``timing.json``.

    Only ``timing.json`` depends on wall-clock time.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"txt": out / "report.txt", "csv": out / "report.csv",
             "json": out / "report.json", "timing": out / "timing.json"}
    paths["txt"].write_text(format_report(report))
    paths["csv"].write_text(report_csv(report))
    paths["json"].write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    paths["timing"].write_text(json.dumps(report.timing, indent=2, sort_keys=True) + "\n")
    return paths


def read_report(path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text()))


def history_rows(history: dict) -> tuple[list[str], list[list[float]]]:
    """Epoch-aligned history columns, ``train_loss`` and ``val_loss`` first."""
    if not history or not history.get("train_loss"):
        raise ValueError("empty training history")
    n = len(history["train_loss"])
    keys = [k for k in history if len(history[k]) == n and not k.startswith("pretrain")]
    lead = [k for k in ("train_loss", "val_loss") if k in keys]
    keys = lead + sorted(k for k in keys if k not in lead)
    return ["epoch"] + keys, [[e + 1] + [history[k][e] for k in keys] for e in range(n)]


def emit_loss_curves(histories: dict, out_dir, plot: bool = False) -> list[Path]:
    """One CSV per (encoder, fold): ``epoch,train_loss,val_loss,<components>``."""
    if not histories:
        raise ValueError("no histories to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for (kind, fold), history in sorted(histories.items()):
        header, rows = history_rows(history)
        path = out / f"{kind}_fold{fold}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
        written.append(path)
        if plot:
            written.append(_plot_history(kind, fold, header, rows, out))
    return written


def _plot_history(kind, fold, header, rows, out: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 3))
    epochs = [r[0] for r in rows]
    for j, name in enumerate(header[1:3], start=1):
        ax.plot(epochs, [r[j] for r in rows], label=name)
    ax.set_xlabel("epoch")
    ax.set_title(f"{kind} fold {fold}")
    ax.legend()
    fig.tight_layout()
    path = out / f"{kind}_fold{fold}.png"
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
