"""Delimited ablation tables and matplotlib figures rendered next to them."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRIC_COLUMNS = ("ap", "ap50", "ap25", "retained", "pseudo_prompts")


def write_ablation_table(rows: list[dict], out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation.json").write_text(json.dumps(rows, indent=2))
    with open(out_dir / "ablation.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["tag", *METRIC_COLUMNS, "error"])
        for row in rows:
            writer.writerow([row["tag"]]
                            + [row.get(c, "") for c in METRIC_COLUMNS]
                            + [row.get("error", "")])


def plot_ablation(rows: list[dict], out_path, title: str = "ablation sweep") -> None:
    ok = [r for r in rows if "error" not in r]
    fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(rows)), 4))
    x = range(len(ok))
    for metric, marker in (("ap", "o"), ("ap50", "s"), ("ap25", "^")):
        ax.plot(x, [r[metric] for r in ok], marker=marker, label=metric.upper())
    ax.set_xticks(list(x))
    ax.set_xticklabels([r["tag"] for r in ok], rotation=30, ha="right")
    ax.set_ylim(-0.05, 1.05)
    ax.set_ylabel("average precision")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_eval_report(report: dict, out_path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    names = ["ap", "ap50", "ap25"] + [f"ap50/{k}" for k in report.get("per_size", {})]
    values = [report["ap"], report["ap50"], report["ap25"]] + list(
        report.get("per_size", {}).values())
    ax.bar(names, values, color="steelblue")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("average precision")
    ax.set_title("instance segmentation evaluation")
    for i, v in enumerate(values):
        ax.text(i, v + 0.02, f"{v:.3f}", ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
