"""Token and statement attention built from externally exported attention data.

No model is run here.  An exporter hands over, per record, either the full
layer x head x n x n attention stack or the per-token "received" vector that
stack reduces to; this module averages those into a corpus dictionary and
derives statement-level attention from it.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from codeprune.lexparse import Category, Language, Snippet

ROW_SUM_TOL = 1e-4
DEFAULT_MIN_COUNT = 50


class AttentionError(ValueError):
    """Malformed attention export, or tokens that do not line up with the lexer."""


# ---------------------------------------------------------------------------
# exports

@dataclass(frozen=True)
class AttentionExportRecord:
    id: str
    tokens: tuple[str, ...]
    received: tuple[float, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.received):
            raise AttentionError(
                f"record {self.id}: {len(self.tokens)} tokens but {len(self.received)} weights"
            )
        if any(not (w >= 0) for w in self.received):
            raise AttentionError(f"record {self.id}: negative or NaN attention weight")

    def to_dict(self) -> dict:
        return {"id": self.id, "tokens": list(self.tokens), "received": list(self.received)}


def reduce_attention_tensor(stack, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Average attention over layers, heads and query rows.

    ``stack`` has shape ``(layers, heads, n, n)`` (a single ``(n, n)`` matrix or
    a ``(heads, n, n)`` stack is promoted), each row a softmax distribution.
    Entry ``j`` of the result is the mean attention token ``j`` receives; the
    vector sums to 1.

    Raises:
        AttentionError: ragged shapes, non-square matrices, negative entries or
            rows that do not sum to 1 within ``tol``.
    """
    try:
        a = np.asarray(stack, dtype=np.float64)
    except ValueError as e:
        raise AttentionError(f"attention matrices differ in shape: {e}") from None
    while a.ndim < 4:
        a = a[np.newaxis]
    if a.ndim != 4 or a.shape[-1] != a.shape[-2]:
        raise AttentionError(f"expected layers x heads x n x n, got shape {a.shape}")
    if a.shape[-1] == 0:
        raise AttentionError("empty attention matrix")
    if (a < 0).any():
        raise AttentionError("negative attention weight")
    rows = a.sum(axis=-1)
    worst = float(np.abs(rows - 1.0).max())
    if worst > tol:
        raise AttentionError(f"attention row sums deviate from 1 by {worst:.3g}")
    return a.mean(axis=(0, 1, 2))


def export_from_dict(obj: dict) -> AttentionExportRecord:
    if "id" not in obj or "tokens" not in obj:
        raise AttentionError("export record needs 'id' and 'tokens'")
    rid = str(obj["id"])
    if "received" in obj:
        received = obj["received"]
    elif "tensor" in obj:
        try:
            received = reduce_attention_tensor(obj["tensor"]).tolist()
        except AttentionError as e:
            raise AttentionError(f"record {rid}: {e}") from None
    else:
        raise AttentionError(f"record {rid}: neither 'received' nor 'tensor' present")
    return AttentionExportRecord(rid, tuple(map(str, obj["tokens"])), tuple(float(x) for x in received))


def load_exports(path: str | Path) -> Iterator[AttentionExportRecord]:
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise AttentionError(f"{path}:{lineno}: invalid JSON ({e.msg})") from None
            yield export_from_dict(obj)


# ---------------------------------------------------------------------------
# token dictionary

@dataclass
class TokenAttentionDict:
    """Corpus-mean attention per token text.

    Sums are kept rather than means so that partial dictionaries built on
    shards merge exactly.
    """

    sums: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def add(self, token: str, weight: float) -> None:
        self.sums[token] = self.sums.get(token, 0.0) + weight
        self.counts[token] = self.counts.get(token, 0) + 1

    def update(self, record: AttentionExportRecord) -> None:
        for tok, w in zip(record.tokens, record.received):
            self.add(tok, w)

    def merge(self, other: "TokenAttentionDict") -> "TokenAttentionDict":
        out = TokenAttentionDict(dict(self.sums), dict(self.counts), dict(self.metadata))
        for tok, s in other.sums.items():
            out.sums[tok] = out.sums.get(tok, 0.0) + s
            out.counts[tok] = out.counts.get(tok, 0) + other.counts[tok]
        return out

    def __len__(self) -> int:
        return len(self.counts)

    def __contains__(self, token: str) -> bool:
        return token in self.counts

    def mean(self, token: str) -> float:
        return self.sums[token] / self.counts[token]

    def count(self, token: str) -> int:
        return self.counts.get(token, 0)

    @property
    def fallback_weight(self) -> float:
        """Weight for unseen tokens: the smallest mean in the dictionary."""
        if not self.counts:
            return 0.0
        return min(self.sums[t] / c for t, c in self.counts.items())

    def weight(self, token: str) -> float:
        c = self.counts.get(token)
        return self.sums[token] / c if c else self.fallback_weight

    def weights(self, tokens: Iterable[str]) -> list[float]:
        fb = None
        out = []
        for t in tokens:
            c = self.counts.get(t)
            if c:
                out.append(self.sums[t] / c)
            else:
                if fb is None:
                    fb = self.fallback_weight
                out.append(fb)
        return out

    def ranked(self, min_count: int = 1) -> list[tuple[str, float, int]]:
        """``(token, mean, count)`` by descending mean, ties by token text."""
        rows = [(t, self.sums[t] / c, c) for t, c in self.counts.items() if c >= min_count]
        rows.sort(key=lambda r: (-r[1], r[0]))
        return rows

    def frozen(self) -> "FrozenTokenDict":
        return FrozenTokenDict.from_dict(self)

    def to_json(self) -> dict:
        return {
            "metadata": {**self.metadata, "fallback": self.fallback_weight},
            "entries": {
                t: {"mean": self.sums[t] / c, "count": c} for t, c in sorted(self.counts.items())
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TokenAttentionDict":
        d = cls(metadata={k: v for k, v in obj.get("metadata", {}).items() if k != "fallback"})
        for tok, e in obj["entries"].items():
            c = int(e["count"])
            if c < 1 or e["mean"] < 0:
                raise AttentionError(f"bad dictionary entry for {tok!r}")
            d.counts[tok] = c
            d.sums[tok] = float(e["mean"]) * c
        return d

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TokenAttentionDict":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


class FrozenTokenDict:
    """Read-only lookup table with means precomputed; what the pruners consume."""

    __slots__ = ("_mean", "_count", "fallback_weight")

    def __init__(self, means: Mapping[str, float], counts: Mapping[str, int], fallback: float):
        self._mean = dict(means)
        self._count = dict(counts)
        self.fallback_weight = fallback

    @classmethod
    def from_dict(cls, d: TokenAttentionDict) -> "FrozenTokenDict":
        means = {t: d.sums[t] / c for t, c in d.counts.items()}
        return cls(means, d.counts, min(means.values(), default=0.0))

    def __len__(self) -> int:
        return len(self._mean)

    def __contains__(self, token: str) -> bool:
        return token in self._mean

    def weight(self, token: str) -> float:
        return self._mean.get(token, self.fallback_weight)

    def weights(self, tokens: Iterable[str]) -> list[float]:
        get, fb = self._mean.get, self.fallback_weight
        return [get(t, fb) for t in tokens]

    def count(self, token: str) -> int:
        return self._count.get(token, 0)

    def frozen(self) -> "FrozenTokenDict":
        return self


def build_token_dict(
    exports: Iterable[AttentionExportRecord],
    expected: Mapping[str, Sequence[str]] | None = None,
    metadata: dict | None = None,
) -> TokenAttentionDict:
    """Average received attention per token text over a stream of exports.

    When ``expected`` maps record ids to lexed (delexicalized) token texts,
    every export must match its entry exactly.

    Raises:
        AttentionError: naming the record id on a token mismatch or an id that
            is missing from ``expected``.
    """
    d = TokenAttentionDict(metadata=dict(metadata or {}))
    for rec in exports:
        if expected is not None:
            check_alignment(rec, expected)
        d.update(rec)
    return d


def check_alignment(rec: AttentionExportRecord, expected: Mapping[str, Sequence[str]]) -> None:
    want = expected.get(rec.id)
    if want is None:
        raise AttentionError(f"record {rec.id}: no parsed snippet with this id")
    if tuple(want) != rec.tokens:
        k = next((i for i, (a, b) in enumerate(zip(want, rec.tokens)) if a != b), min(len(want), len(rec.tokens)))
        raise AttentionError(
            f"record {rec.id}: export tokens diverge from lexer output at position {k} "
            f"({len(rec.tokens)} exported, {len(want)} lexed)"
        )


# ---------------------------------------------------------------------------
# statement attention

def softmax(values: Sequence[float]) -> list[float]:
    if not values:
        return []
    m = max(values)
    ex = [math.exp(v - m) for v in values]
    z = math.fsum(ex)
    return [e / z for e in ex]


def weighted_attention(weights: Sequence[float]) -> float:
    """Softmax-weighted mean of token weights: sum_t softmax(a)_t * a_t."""
    if not weights:
        raise ValueError("statement has no tokens")
    if len(weights) == 1:
        return float(weights[0])
    m = max(weights)
    ex = [math.exp(w - m) for w in weights]
    return math.fsum(e * w for e, w in zip(ex, weights)) / math.fsum(ex)


def statement_attention(tokens: Sequence[str], token_dict) -> float:
    """Attention of one statement from corpus token weights (unseen tokens get the fallback)."""
    return weighted_attention(token_dict.weights(tokens))


@dataclass
class CategoryAttentionTable:
    means: dict[Category, float] = field(default_factory=dict)
    counts: dict[Category, int] = field(default_factory=dict)
    min_count: int = DEFAULT_MIN_COUNT
    metadata: dict = field(default_factory=dict)

    def __contains__(self, cat: Category) -> bool:
        return cat in self.means

    def get(self, cat: Category, default: float | None = None) -> float | None:
        return self.means.get(cat, default)

    @property
    def fallback_weight(self) -> float:
        return min(self.means.values(), default=0.0)

    def ranked(self) -> list[tuple[Category, float, int]]:
        rows = [(c, m, self.counts[c]) for c, m in self.means.items()]
        rows.sort(key=lambda r: (-r[1], r[0].value))
        return rows

    def to_json(self) -> dict:
        return {
            "metadata": {**self.metadata, "min_count": self.min_count},
            "categories": {
                c.value: {"mean": m, "count": self.counts[c]}
                for c, m in sorted(self.means.items(), key=lambda kv: kv[0].value)
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CategoryAttentionTable":
        meta = dict(obj.get("metadata", {}))
        t = cls(min_count=int(meta.pop("min_count", DEFAULT_MIN_COUNT)), metadata=meta)
        for name, e in obj["categories"].items():
            t.means[Category(name)] = float(e["mean"])
            t.counts[Category(name)] = int(e["count"])
        return t

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CategoryAttentionTable":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def category_sums(snippets: Iterable[Snippet], token_dict) -> tuple[dict[Category, float], dict[Category, int]]:
    """Per-category sum and count of statement attention (mergeable partials)."""
    sums: dict[Category, float] = defaultdict(float)
    counts: dict[Category, int] = defaultdict(int)
    for sn in snippets:
        texts = sn.texts
        for st in sn.statements:
            sums[st.category] += statement_attention(texts[st.start:st.stop], token_dict)
            counts[st.category] += 1
    return dict(sums), dict(counts)


def build_category_table(
    snippets: Iterable[Snippet],
    token_dict,
    min_count: int = DEFAULT_MIN_COUNT,
    metadata: dict | None = None,
) -> CategoryAttentionTable:
    """Mean statement attention per category; categories seen fewer than ``min_count`` times are left out."""
    sums, counts = category_sums(snippets, token_dict.frozen())
    return table_from_sums(sums, counts, min_count, metadata)


def table_from_sums(sums, counts, min_count: int = DEFAULT_MIN_COUNT, metadata: dict | None = None) -> CategoryAttentionTable:
    table = CategoryAttentionTable(min_count=min_count, metadata=dict(metadata or {}))
    for cat, c in counts.items():
        if c >= min_count:
            table.means[cat] = sums[cat] / c
            table.counts[cat] = c
    return table


def language_of(snippets: Sequence[Snippet]) -> Language | None:
    langs = {s.language for s in snippets}
    return langs.pop() if len(langs) == 1 else None
