"""Convergence and retrieval figures, plus CSV dumps of the plotted series."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_diagnostics(path) -> list[dict]:
    """Records of a JSON-lines diagnostics file, one per outer iteration."""
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    return path


def convergence_report(records: list[dict], out_dir) -> list[Path]:
    """Code change and anchor objective per outer iteration."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    its = [r["iteration"] for r in records]
    obj = [r["anchor_objective"] for r in records]
    change = [r.get("code_change") for r in records]
    has_loss = any("loss" in r for r in records)
    header = ["iteration", "code_change", "anchor_objective"] + (["loss"] if has_loss else [])
    rows = []
    for r in records:
        row = [r["iteration"], "" if r.get("code_change") is None else r["code_change"],
               r["anchor_objective"]]
        if has_loss:
            row.append(r.get("loss", ""))
        rows.append(row)
    csv_path = _write_csv(out / "convergence.csv", header, rows)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    pts = [(i, c) for i, c in zip(its, change) if c is not None]
    if pts:
        ax1.plot(*zip(*pts), marker="o")
    ax1.set_xlabel("outer iteration")
    ax1.set_ylabel("code change (Frobenius)")
    ax2.plot(its, obj, marker="o", color="tab:orange")
    ax2.set_xlabel("outer iteration")
    ax2.set_ylabel("anchor objective")
    fig.tight_layout()
    png = out / "convergence.png"
    fig.savefig(png, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return [csv_path, png]


def retrieval_report(metrics: dict, out_dir) -> list[Path]:
    """Precision/recall against Hamming radius and precision at rank cutoffs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curves = metrics["curves"]
    radius = curves["radius"]
    prec = curves["precision_at_radius"]
    rec = curves["recall_at_radius"]
    paths = [
        _write_csv(out / "pr_radius.csv", ["radius", "precision", "recall"],
                   zip(radius, prec, rec)),
        _write_csv(out / "precision_at_k.csv", ["k", "precision"],
                   zip(curves["cutoffs"], curves["precision_at_k"])),
        _write_csv(out / "summary.csv", ["metric", "value"],
                   [(k, metrics[k]) for k in ("map", "ndcg", "acg", "precision", "recall", "R", "radius")]),
    ]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(radius, prec, marker="o", label="precision")
    ax1.plot(radius, rec, marker="s", label="recall")
    ax1.set_xlabel("Hamming radius")
    ax1.set_ylim(0, 1.05)
    ax1.legend()
    ax2.plot(curves["cutoffs"], curves["precision_at_k"], marker="o")
    ax2.set_xlabel("retrieved items")
    ax2.set_ylabel("precision")
    ax2.set_ylim(0, 1.05)
    fig.tight_layout()
    png = out / "retrieval.png"
    fig.savefig(png, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return paths + [png]
