"""Relative length and run-level summaries of pruning output."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from codeprune.lexparse import Category, Snippet
from codeprune.pruning import PruneResult


class SummaryError(ValueError):
    pass


def relative_length(before: int, after: int) -> float:
    """Fraction of tokens left after simplification (multiply by 100 for a percentage)."""
    if before <= 0:
        raise ValueError("relative length of an empty snippet is undefined")
    if not 0 <= after <= before:
        raise ValueError(f"kept count {after} outside [0, {before}]")
    return after / before


@dataclass
class CategoryRetention:
    total: int = 0
    selected: int = 0
    full: int = 0
    partial: int = 0

    def merge(self, other: "CategoryRetention") -> "CategoryRetention":
        return CategoryRetention(
            self.total + other.total,
            self.selected + other.selected,
            self.full + other.full,
            self.partial + other.partial,
        )


@dataclass
class RunSummary:
    """Mergeable aggregate over pruned records.

    ``macro_rl`` averages per-record relative length; ``micro_rl`` is
    ``tokens_after / tokens_before``.  Category retention counts statements
    chosen by the knapsack (``selected``, attention strategy only), kept whole
    (``full``) or with at least one token left (``partial``).
    """

    strategy: str = ""
    records: int = 0
    rl_sum: float = 0.0
    tokens_before: int = 0
    tokens_after: int = 0
    has_selection: bool = False
    categories: dict[Category, CategoryRetention] = field(default_factory=dict)
    wall_time: float = 0.0

    def add(self, result: PruneResult, snippet: Snippet) -> None:
        if result.n_tokens != len(snippet):
            raise SummaryError(f"record {result.id}: result covers {result.n_tokens} tokens, snippet has {len(snippet)}")
        if result.kept and not (0 <= min(result.kept) and max(result.kept) < result.n_tokens):
            raise SummaryError(f"record {result.id}: kept index out of range")
        self.records += 1
        self.rl_sum += relative_length(result.n_tokens, len(result.kept)) if result.n_tokens else 1.0
        self.tokens_before += result.n_tokens
        self.tokens_after += len(result.kept)
        kept = set(result.kept)
        selected = set(result.selected_statements or ())
        if result.selected_statements is not None:
            self.has_selection = True
        for st in snippet.statements:
            r = self.categories.setdefault(st.category, CategoryRetention())
            r.total += 1
            n_kept = sum(1 for i in st.token_range if i in kept)
            r.full += n_kept == len(st)
            r.partial += n_kept > 0
            r.selected += st.ordinal in selected

    def merge(self, other: "RunSummary") -> "RunSummary":
        cats = dict(self.categories)
        for c, r in other.categories.items():
            cats[c] = cats[c].merge(r) if c in cats else r
        return RunSummary(
            self.strategy or other.strategy,
            self.records + other.records,
            self.rl_sum + other.rl_sum,
            self.tokens_before + other.tokens_before,
            self.tokens_after + other.tokens_after,
            self.has_selection or other.has_selection,
            cats,
            max(self.wall_time, other.wall_time),
        )

    @property
    def macro_rl(self) -> float | None:
        return self.rl_sum / self.records if self.records else None

    @property
    def micro_rl(self) -> float | None:
        return self.tokens_after / self.tokens_before if self.tokens_before else None

    def retention(self, category: Category) -> float | None:
        """Share of the category's statements retained (selected if known, else partially kept)."""
        r = self.categories.get(category)
        if not r or not r.total:
            return None
        return (r.selected if self.has_selection else r.partial) / r.total

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "records": self.records,
            "macro_rl": self.macro_rl,
            "micro_rl": self.micro_rl,
            "tokens_before": self.tokens_before,
            "tokens_after": self.tokens_after,
            "wall_time_s": round(self.wall_time, 3),
            "categories": {
                c.value: {
                    "statements": r.total,
                    "selected": r.selected if self.has_selection else None,
                    "fully_retained": r.full,
                    "partially_retained": r.partial,
                    "retention": self.retention(c),
                }
                for c, r in sorted(self.categories.items(), key=lambda kv: kv[0].value)
            },
        }

    def table(self) -> str:
        """Plain-text rendering for the terminal."""
        def pct(x):
            return "-" if x is None else f"{100 * x:6.2f}%"

        lines = [
            f"strategy        {self.strategy}",
            f"records         {self.records}",
            f"tokens          {self.tokens_before} -> {self.tokens_after}",
            f"RL (macro)      {pct(self.macro_rl)}",
            f"RL (micro)      {pct(self.micro_rl)}",
            "",
            f"{'category':<22}{'stmts':>8}{'retained':>10}{'full':>8}",
        ]
        for c, r in sorted(self.categories.items(), key=lambda kv: (-kv[1].total, kv[0].value)):
            lines.append(f"{c.value:<22}{r.total:>8}{pct(self.retention(c)):>10}{r.full:>8}")
        return "\n".join(lines)


def summarize_run(
    results: Iterable[PruneResult],
    snippets: Mapping[str, Snippet],
    strategy: str = "",
    strict: bool = False,
    wall_time: float = 0.0,
) -> RunSummary:
    """Aggregate results; every result id must name a snippet.

    An empty stream gives an empty summary, or ``SummaryError`` when ``strict``.
    """
    summary = RunSummary(strategy=strategy, wall_time=wall_time)
    for res in results:
        sn = snippets.get(res.id)
        if sn is None:
            raise SummaryError(f"result for unknown record {res.id!r}")
        summary.add(res, sn)
    if strict and summary.records == 0:
        raise SummaryError("no records to summarize")
    return summary
