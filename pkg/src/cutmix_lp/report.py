"""Report rendering: delimited records, summary tables, and figures.

Every report path emits line-delimited records for machines, a columnar
table for eyes, and a rendered matplotlib figure next to them.
"""

import json
from pathlib import Path

from .audit import AuditReport


def write_records(path, rows) -> None:
    """Write dict rows as JSON lines (sorted keys, stable across runs)."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def format_table(headers, rows) -> str:
    """Plain columnar table; all cells stringified."""
    cells = [[str(c) for c in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def line(row):
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
    out = [line(headers), line(["-" * w for w in widths])]
    out.extend(line(row) for row in cells)
    return "\n".join(out)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def audit_table(report: AuditReport) -> str:
    rows = []
    for name, policy in (("keep_y1", report.keep_y1), ("union", report.union)):
        rows.append(
            [
                name,
                f"{policy.subtractive_rate:.4f}",
                f"{policy.additive_rate:.4f}",
                f"{policy.mean_subtractive_classes:.4f}",
                f"{policy.mean_additive_classes:.4f}",
            ]
        )
    return format_table(
        ["policy", "subtractive_rate", "additive_rate",
         "mean_subtractive_classes", "mean_additive_classes"],
        rows,
    )


def audit_figure(report: AuditReport, path) -> Path:
    """Grouped bars of the four noise rates."""
    plt = _pyplot()
    labels = ["subtractive", "additive"]
    keep = [report.keep_y1.subtractive_rate, report.keep_y1.additive_rate]
    union = [report.union.subtractive_rate, report.union.additive_rate]
    x = range(len(labels))
    fig, ax = plt.subplots(figsize=(5, 3.2))
    width = 0.38
    ax.bar([i - width / 2 for i in x], keep, width, label="keep y1")
    ax.bar([i + width / 2 for i in x], union, width, label="union")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels)
    ax.set_ylabel("rate over trials")
    ax.set_title(
        f"naive-label noise, box range "
        f"{report.box_range[0]:.2f}-{report.box_range[1]:.2f}, "
        f"n={report.n_trials}"
    )
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def iou_table(rows) -> str:
    """Table for rows of {kind, fraction, magnitude, mean_iou, corrupted}."""
    body = [
        [r["kind"], r["fraction"], r.get("magnitude", "-"),
         f"{r['mean_iou']:.4f}", r["corrupted"]]
        for r in rows
    ]
    return format_table(["kind", "fraction", "magnitude", "mean_iou", "corrupted"], body)


def iou_figure(rows, path) -> Path:
    """Mean IoU versus magnitude, one line per fraction."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    fractions = sorted({r["fraction"] for r in rows})
    for frac in fractions:
        series = sorted(
            (r for r in rows if r["fraction"] == frac),
            key=lambda r: (r.get("magnitude") or 0),
        )
        xs = [r.get("magnitude") or 0 for r in series]
        ys = [r["mean_iou"] for r in series]
        ax.plot(xs, ys, marker="o", label=f"f={frac}")
    kind = rows[0]["kind"] if rows else ""
    ax.set_xlabel("magnitude")
    ax.set_ylabel("mean IoU vs clean maps")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"{kind}: positional damage")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
