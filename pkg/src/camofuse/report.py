"""Aggregate metric CSVs from multiple runs into one comparison table and
a grouped bar plot."""

import csv
import os

from .errors import DataError
from .metrics import REPORT_COLUMNS

_METRIC_KEYS = ("s_alpha", "e_phi", "f_w_beta", "mae")


def collect_reports(runs_dir):
    """All metric-report CSV rows under runs_dir, keyed by relative path."""
    rows = []
    for dirpath, _, filenames in sorted(os.walk(runs_dir)):
        for name in sorted(filenames):
            if not name.endswith(".csv"):
                continue
            path = os.path.join(dirpath, name)
            with open(path, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None or set(REPORT_COLUMNS) - set(reader.fieldnames):
                    continue  # not a metric report
                run = os.path.relpath(path, runs_dir)
                for row in reader:
                    rows.append({"run": run, **{k: row[k] for k in REPORT_COLUMNS}})
    if not rows:
        raise DataError(f"no metric-report CSVs found under {runs_dir}")
    return rows


def write_comparison(rows, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "comparison.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        cols = ("run",) + REPORT_COLUMNS
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in cols) + "\n")
    png_path = os.path.join(out_dir, "comparison.png")
    _bar_plot(rows, png_path)
    return csv_path, png_path


def format_comparison(rows):
    header = ("run", "dataset", "n", "S_alpha", "E_phi", "F_w_beta", "MAE")
    cells = [header] + [
        (r["run"], r["dataset"], r["n"], r["s_alpha"], r["e_phi"],
         r["f_w_beta"], r["mae"]) for r in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row))
        for row in cells
    )


def _bar_plot(rows, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    labels = [f"{r['run']}:{r['dataset']}" for r in rows]
    x = np.arange(len(rows))
    width = 0.2
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(rows)), 4))
    for i, key in enumerate(_METRIC_KEYS):
        vals = [float(r[key]) for r in rows]
        ax.bar(x + (i - 1.5) * width, vals, width, label=key)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("score")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
