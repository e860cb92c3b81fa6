"""Before/after report rendering: delimited output, aligned text, and
matplotlib figures written alongside.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .cluster import BeforeAfterRow, MergeResult

TOP_MEAN_COUNT = 100


@dataclass
class ReportSummary:
    """Max and mean-of-top-100 of the before/after score columns.

    Absent (undefined) scores are excluded from the aggregates; their
    counts are carried so renderers can footnote them.
    """

    medoids: int
    max_before: Optional[float]
    max_after: Optional[float]
    mean_top_before: Optional[float]
    mean_top_after: Optional[float]
    absent_before: int
    absent_after: int


def _top_mean(values: list[float], count: int) -> Optional[float]:
    if not values:
        return None
    top = sorted(values, reverse=True)[:count]
    return sum(top) / len(top)


def summarize(rows: list[BeforeAfterRow], top: int = TOP_MEAN_COUNT) -> ReportSummary:
    before = [r.before for r in rows if r.before is not None]
    after = [r.after for r in rows if r.after is not None]
    return ReportSummary(
        medoids=len(rows),
        max_before=max(before) if before else None,
        max_after=max(after) if after else None,
        mean_top_before=_top_mean(before, top),
        mean_top_after=_top_mean(after, top),
        absent_before=len(rows) - len(before),
        absent_after=len(rows) - len(after),
    )


def sort_rows(rows: list[BeforeAfterRow]) -> list[BeforeAfterRow]:
    """Highest after-score first; absent scores last; medoid id breaks ties."""
    return sorted(
        rows,
        key=lambda r: (
            r.after is None,
            -(r.after if r.after is not None else 0.0),
            r.medoid,
        ),
    )


def _cell(value: Optional[float]) -> str:
    return repr(value) if value is not None else ""


def write_report_csv(rows: list[BeforeAfterRow], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("medoid,members,before,after\n")
        for r in sort_rows(rows):
            fh.write(f"{r.medoid.render()},{r.members},{_cell(r.before)},{_cell(r.after)}\n")


def read_report_csv(path: Path) -> list[BeforeAfterRow]:
    from .textnorm import FeatureId

    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines()[1:]:
        if not line.strip():
            continue
        medoid, members, before, after = line.rsplit(",", 3)
        rows.append(
            BeforeAfterRow(
                medoid=FeatureId.parse(medoid),
                members=int(members),
                before=float(before) if before else None,
                after=float(after) if after else None,
            )
        )
    return rows


def write_summary_csv(summary: ReportSummary, label: str, metric: str, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "form,metric,medoids,max_before,max_after,"
            "mean_top100_before,mean_top100_after,absent_before,absent_after\n"
        )
        fh.write(
            f"{label},{metric},{summary.medoids},"
            f"{_cell(summary.max_before)},{_cell(summary.max_after)},"
            f"{_cell(summary.mean_top_before)},{_cell(summary.mean_top_after)},"
            f"{summary.absent_before},{summary.absent_after}\n"
        )


def _fmt(value: Optional[float]) -> str:
    return f"{value:.6f}" if value is not None else "NA"


def write_report_text(
    rows: list[BeforeAfterRow],
    summary: ReportSummary,
    label: str,
    metric: str,
    path: Path,
    max_rows: int = 25,
) -> None:
    """Aligned-text rendition: summary block with before/after columns,
    then the leading per-medoid rows."""
    ordered = sort_rows(rows)
    width = max([len("medoid")] + [len(r.medoid.render()) for r in ordered[:max_rows]])
    lines = [
        f"{label}  metric={metric}  medoids={summary.medoids}",
        "",
        f"{'':24}{'before':>12}{'after':>12}",
        f"{'max':24}{_fmt(summary.max_before):>12}{_fmt(summary.max_after):>12}",
        f"{'mean(top-100)':24}{_fmt(summary.mean_top_before):>12}{_fmt(summary.mean_top_after):>12}",
    ]
    if summary.absent_before or summary.absent_after:
        lines.append(
            f"undefined scores excluded: before={summary.absent_before}"
            f" after={summary.absent_after}"
        )
    lines += [
        "",
        f"{'medoid':<{width}}{'members':>10}{'before':>12}{'after':>12}",
    ]
    for r in ordered[:max_rows]:
        lines.append(
            f"{r.medoid.render():<{width}}{r.members:>10}"
            f"{_fmt(r.before):>12}{_fmt(r.after):>12}"
        )
    if len(ordered) > max_rows:
        lines.append(f"... {len(ordered) - max_rows} more medoids in the CSV")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_report(
    rows: list[BeforeAfterRow],
    fmt: str,
    path: Path,
    label: str = "run",
    metric: str = "",
) -> Path:
    """Render the max / mean-of-top-100 before-and-after comparison in
    one named format ("csv" or "text"); the text format appends the
    leading per-medoid rows."""
    if not rows:
        raise ValueError("report table is empty")
    summary = summarize(rows)
    if fmt == "csv":
        write_summary_csv(summary, label, metric, path)
    elif fmt == "text":
        write_report_text(rows, summary, label, metric, path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return Path(path)


_SAVEFIG_KW = {"dpi": 120, "metadata": {"Software": None}}


def render_signal_figure(
    result: MergeResult,
    gsr: np.ndarray,
    rows: list[BeforeAfterRow],
    path: Path,
) -> Optional[Path]:
    """Daily counts of the top medoid before and after merging, with the
    event days marked."""
    candidates = [r for r in rows if r.after is not None]
    if not candidates:
        return None
    top = sort_rows(candidates)[0]
    days = np.arange(result.merged.days)
    fig, ax = plt.subplots(figsize=(9, 4))
    for day in np.flatnonzero(np.asarray(gsr) > 0):
        ax.axvline(day, color="0.8", linestyle="--", linewidth=0.8, zorder=0)
    ax.plot(days, result.members.row(top.medoid), label="medoid signal", color="tab:orange")
    ax.plot(days, result.merged.row(top.medoid), label="merged cluster signal", color="tab:blue")
    ax.set_xlabel("day")
    ax.set_ylabel("count")
    ax.set_title(f"{top.medoid.render()}  ({top.members} members)")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)
    return Path(path)


def render_score_figure(rows: list[BeforeAfterRow], path: Path) -> Optional[Path]:
    """Scatter of per-medoid before vs after scores with the identity line."""
    pairs = [(r.before, r.after) for r in rows if r.before is not None and r.after is not None]
    if not pairs:
        return None
    before = np.array([p[0] for p in pairs])
    after = np.array([p[1] for p in pairs])
    lo = min(0.0, before.min(), after.min())
    hi = max(before.max(), after.max()) * 1.05 + 1e-9
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([lo, hi], [lo, hi], color="0.7", linewidth=0.8)
    ax.scatter(before, after, s=18, color="tab:blue", alpha=0.8)
    ax.set_xlabel("score before merge")
    ax.set_ylabel("score after merge")
    ax.set_xlim(lo, hi)
    ax.set_ylim(lo, hi)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)
    return Path(path)
