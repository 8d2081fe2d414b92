"""Evaluation report output: JSONL, aligned text tables, and figures."""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport

_METHOD_LABELS = {
    "learned": "learned",
    "combined": "combined",
    "text_only": "text-only",
    "file_only": "file-only",
}


def report_to_jsonl_bytes(report: EvalReport) -> bytes:
    # compact separators and fixed cell order keep the output byte-stable
    lines = [
        json.dumps(cell.to_json_obj(), separators=(",", ":")) for cell in report.cells
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_report_jsonl(report: EvalReport, path: Path) -> None:
    path.write_bytes(report_to_jsonl_bytes(report))


def format_table(report: EvalReport) -> str:
    """One aligned block per window: methods as rows, MRR and Recall@K columns."""
    headers = ["method", "MRR"] + [f"R@{k}" for k in report.ks]
    blocks: list[str] = []
    for window_days in report.windows:
        rows = [headers]
        for method in report.methods:
            cell = report.cell(method, window_days)
            rows.append(
                [_METHOD_LABELS.get(method, method), f"{cell.mrr:.4f}"]
                + [f"{cell.recall_at[k]:.4f}" for k in report.ks]
            )
        widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
        lines = [f"window = {window_days}d"]
        for row_no, row in enumerate(rows):
            lines.append(
                "  ".join(
                    cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
                    for i, cell in enumerate(row)
                )
            )
            if row_no == 0:
                lines.append("  ".join("-" * w for w in widths))
        sample = report.cell(report.methods[0], window_days)
        lines.append(
            f"queries: {sample.n_queries}"
            f" (empty candidate sets: {sample.n_empty_candidate_queries})"
        )
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def render_report_figures(report: EvalReport, out_dir: Path) -> list[Path]:
    """Recall@K curves per window plus an MRR bar chart; returns written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    n_windows = len(report.windows)
    fig, axes = plt.subplots(
        1, n_windows, figsize=(4.0 * n_windows, 3.4), sharey=True, squeeze=False
    )
    for ax, window_days in zip(axes[0], report.windows):
        for method in report.methods:
            cell = report.cell(method, window_days)
            ax.plot(
                report.ks,
                [cell.recall_at[k] for k in report.ks],
                marker="o",
                label=_METHOD_LABELS.get(method, method),
            )
        ax.set_title(f"window = {window_days}d")
        ax.set_xlabel("K")
        ax.set_xticks(report.ks)
        ax.set_ylim(0.0, 1.05)
        ax.grid(True, alpha=0.3)
    axes[0][0].set_ylabel("Recall@K")
    axes[0][-1].legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    recall_path = out_dir / "recall_at_k.png"
    fig.savefig(recall_path, dpi=150)
    plt.close(fig)
    written.append(recall_path)

    fig, ax = plt.subplots(figsize=(1.2 + 1.6 * n_windows, 3.4))
    n_methods = len(report.methods)
    bar_width = 0.8 / n_methods
    for offset, method in enumerate(report.methods):
        xs = [
            i + (offset - (n_methods - 1) / 2.0) * bar_width
            for i in range(n_windows)
        ]
        ax.bar(
            xs,
            [report.cell(method, w).mrr for w in report.windows],
            width=bar_width,
            label=_METHOD_LABELS.get(method, method),
        )
    ax.set_xticks(range(n_windows))
    ax.set_xticklabels([f"{w}d" for w in report.windows])
    ax.set_xlabel("candidate window")
    ax.set_ylabel("MRR")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    mrr_path = out_dir / "mrr.png"
    fig.savefig(mrr_path, dpi=150)
    plt.close(fig)
    written.append(mrr_path)

    return written
