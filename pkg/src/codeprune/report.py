"""Tab-separated reports and the matplotlib figures written next to them."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from codeprune.lexparse import CONTROL_FLOW_CATEGORIES, Category


def write_tsv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, Category):
        return x.value
    return x


def _save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    FigureCanvasAgg(fig).print_figure(str(path), dpi=120)
    return path


def _category_colors(cats: Sequence[Category]) -> list[str]:
    out = []
    for c in cats:
        if c in (Category.METHOD_SIGNATURE, Category.RETURN):
            out.append("#c0392b")
        elif c in CONTROL_FLOW_CATEGORIES:
            out.append("#7f8c8d")
        else:
            out.append("#2c7fb8")
    return out


def plot_category_histogram(counts: Mapping[Category, int], path: str | Path) -> Path:
    items = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0].value))
    fig = Figure(figsize=(7, 0.28 * len(items) + 1.2))
    ax = fig.add_subplot(111)
    cats = [c for c, _ in items]
    ax.barh(range(len(items)), [n for _, n in items], color=_category_colors(cats))
    ax.set_yticks(range(len(items)))
    ax.set_yticklabels([c.value for c in cats], fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("statements")
    ax.set_title("Statement categories")
    return _save(fig, path)


def plot_category_attention(rows: Sequence[tuple[Category, float, int]], path: str | Path) -> Path:
    fig = Figure(figsize=(7, 0.28 * len(rows) + 1.2))
    ax = fig.add_subplot(111)
    cats = [r[0] for r in rows]
    ax.barh(range(len(rows)), [r[1] for r in rows], color=_category_colors(cats))
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([c.value for c in cats], fontsize=8)
    ax.invert_yaxis()
    ax.ticklabel_format(axis="x", style="sci", scilimits=(-2, 2))
    ax.set_xlabel("mean statement attention")
    ax.set_title("Attention by statement category")
    return _save(fig, path)


def plot_token_ranking(rows: Sequence[tuple[str, float, int]], path: str | Path, top: int = 20) -> Path:
    """Side-by-side bars of the highest- and lowest-weighted tokens."""
    head, tail = rows[:top], rows[-top:][::-1]
    fig = Figure(figsize=(9, 0.25 * max(len(head), 1) + 1.4))
    for k, (sub, title, color) in enumerate(((head, "highest", "#c0392b"), (tail, "lowest", "#2c7fb8"))):
        ax = fig.add_subplot(1, 2, k + 1)
        ax.barh(range(len(sub)), [r[1] for r in sub], color=color)
        ax.set_yticks(range(len(sub)))
        ax.set_yticklabels([r[0] for r in sub], fontsize=7)
        ax.invert_yaxis()
        ax.ticklabel_format(axis="x", style="sci", scilimits=(-2, 2))
        ax.set_title(f"{title} attention tokens", fontsize=9)
    return _save(fig, path)


def plot_sweep(rows: Sequence[dict], path: str | Path) -> Path:
    """Achieved relative length against the requested one, one line per mode."""
    fig = Figure(figsize=(5.5, 4))
    ax = fig.add_subplot(111)
    for mode in sorted({r["mode"] for r in rows}):
        pts = sorted((r["ratio"], r["micro_rl"]) for r in rows if r["mode"] == mode)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=mode)
    ax.plot([0, 1], [0, 1], color="0.8", lw=0.8, zorder=0)
    ax.set_xlabel("requested relative length")
    ax.set_ylabel("achieved relative length (micro)")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_retention(retention: Mapping[Category, float], path: str | Path) -> Path:
    items = sorted(retention.items(), key=lambda kv: (-kv[1], kv[0].value))
    fig = Figure(figsize=(7, 0.28 * len(items) + 1.2))
    ax = fig.add_subplot(111)
    cats = [c for c, _ in items]
    ax.barh(range(len(items)), [v for _, v in items], color=_category_colors(cats))
    ax.set_yticks(range(len(items)))
    ax.set_yticklabels([c.value for c in cats], fontsize=8)
    ax.invert_yaxis()
    ax.set_xlim(0, 1)
    ax.set_xlabel("fraction of statements retained")
    return _save(fig, path)
