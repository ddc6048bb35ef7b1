"""Reduce a parsed snippet to at most ``L`` tokens.

Three strategies:

* ``dropout``: keep each token independently with probability ``L / |C|``;
* ``frequency``: keep the ``L`` occurrences with the highest corpus frequency;
* ``attention``: pick whole statements with a 0-1 knapsack over scaled
  statement attention, then greedily drop the weakest tokens from the weakest
  statements until ``L`` remain.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from codeprune.attention import CategoryAttentionTable, statement_attention, weighted_attention
from codeprune.lexparse import Snippet

PROTECTED_DELIMITERS = frozenset({";", "{", "}"})


class Strategy(str, enum.Enum):
    DROPOUT = "dropout"
    FREQUENCY = "frequency"
    ATTENTION = "attention"


class AttentionSource(str, enum.Enum):
    TOKEN = "token"
    CATEGORY = "category"


class Mode(str, enum.Enum):
    """Which phases of attention pruning run (``statement``/``token`` are ablations)."""

    FULL = "full"
    STATEMENT = "statement"
    TOKEN = "token"


@dataclass(frozen=True)
class PruneResult:
    id: str
    n_tokens: int
    kept: tuple[int, ...]
    selected_statements: tuple[int, ...] | None = None
    capacity: int | None = None
    selected_tokens: int | None = None

    @property
    def relative_length(self) -> float:
        return len(self.kept) / self.n_tokens if self.n_tokens else 1.0


def target_length(n_tokens: int, length: int | None = None, ratio: float | None = None) -> int:
    """Token budget for a snippet: an absolute ``length`` or ``max(1, floor(ratio * n))``."""
    if (length is None) == (ratio is None):
        raise ValueError("give exactly one of a target length or a relative length")
    if length is not None:
        if length < 1:
            raise ValueError(f"target length must be >= 1, got {length}")
        return int(length)
    if not 0 < ratio <= 1:
        raise ValueError(f"relative length must be in (0, 1], got {ratio}")
    # decimal arithmetic: 0.7 * 10 is 7, not 7.000000000000001 or 6.99...
    return max(1, math.floor(Fraction(str(ratio)) * n_tokens))


def _unchanged(snippet: Snippet) -> PruneResult:
    return PruneResult(snippet.id, len(snippet), tuple(range(len(snippet))))


# ---------------------------------------------------------------------------
# dropout

def record_rng(seed: int, record_id: str) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, record_id)``, independent of corpus order."""
    h = int.from_bytes(hashlib.blake2b(record_id.encode("utf-8"), digest_size=8).digest(), "little")
    key = ((int(seed) % (1 << 64)) << 64) | h
    return np.random.Generator(np.random.Philox(key=key))


def dropout_prune(snippet: Snippet, L: int, seed: int) -> PruneResult:
    n = len(snippet)
    if n <= L:
        return _unchanged(snippet)
    p = L / n
    mask = record_rng(seed, snippet.id).random(n) < p
    return PruneResult(snippet.id, n, tuple(int(i) for i in np.flatnonzero(mask)))


# ---------------------------------------------------------------------------
# frequency

def frequency_prune(snippet: Snippet, L: int, token_dict) -> PruneResult:
    """Keep the ``L`` occurrences with the highest corpus count; ties go to earlier positions."""
    n = len(snippet)
    if n <= L:
        return _unchanged(snippet)
    counts = [token_dict.count(t.text) for t in snippet.tokens]
    order = sorted(range(n), key=lambda i: (-counts[i], i))
    return PruneResult(snippet.id, n, tuple(sorted(order[:L])))


# ---------------------------------------------------------------------------
# attention

def scale_statement_values(attentions: Sequence[float], lengths: Sequence[int]) -> list[float]:
    """Min-max normalize statement attention and multiply by statement length.

    When every statement has the same attention the normalized factor is 1,
    so each value is just the statement length.
    """
    if not attentions:
        return []
    lo, hi = min(attentions), max(attentions)
    if hi == lo:
        return [float(n) for n in lengths]
    span = hi - lo
    return [(a - lo) / span * n for a, n in zip(attentions, lengths)]


def knapsack_select(values: Sequence[float], weights: Sequence[int], capacity: int) -> tuple[int, ...]:
    """Indices of a maximum-value subset with total weight at most ``capacity``.

    Dynamic programming over suffixes, O(N * capacity) time and space.  Of all
    optimal subsets (values equal within 1e-9 relative), the one whose sorted
    index tuple is lexicographically smallest is returned.
    """
    n = len(values)
    if len(weights) != n:
        raise ValueError("values and weights differ in length")
    if any(w < 1 for w in weights):
        raise ValueError("weights must be positive integers")
    capacity = int(capacity)
    if n == 0 or capacity <= 0:
        return ()
    # best[i, c]: max value from items i.. with capacity c
    best = np.zeros((n + 1, capacity + 1))
    for i in range(n - 1, -1, -1):
        w, v = int(weights[i]), float(values[i])
        row = best[i + 1].copy()
        if w <= capacity:
            np.maximum(row[w:], best[i + 1][: capacity + 1 - w] + v, out=row[w:])
        best[i] = row

    target = best[0, capacity]
    tol = 1e-9 * max(1.0, abs(target))
    chosen = []
    c, i, remaining = capacity, 0, target
    while remaining > tol:
        for j in range(i, n):
            w = int(weights[j])
            if w <= c and values[j] + best[j + 1, c - w] >= remaining - tol:
                chosen.append(j)
                remaining -= values[j]
                c -= w
                i = j + 1
                break
        else:  # pragma: no cover - best[] guarantees a witness
            raise AssertionError("knapsack reconstruction failed")
    return tuple(chosen)


def statement_attentions(
    snippet: Snippet,
    token_dict,
    source: AttentionSource = AttentionSource.TOKEN,
    category_table: CategoryAttentionTable | None = None,
) -> list[float]:
    if source is AttentionSource.CATEGORY:
        if category_table is None:
            raise ValueError("category attention source needs a category table")
        fb = category_table.fallback_weight
        return [category_table.get(s.category, fb) for s in snippet.statements]
    texts = snippet.texts
    return [statement_attention(texts[s.start:s.stop], token_dict) for s in snippet.statements]


def greedy_token_prune(
    snippet: Snippet,
    selected: Sequence[int],
    token_dict,
    L: int,
    statement_attn: Sequence[float] | None = None,
    freeze: bool = False,
    protect: frozenset[str] = frozenset(),
) -> tuple[int, ...]:
    """Drop tokens from the selected statements until at most ``L`` remain.

    Each step takes the selected statement with the lowest current attention
    (earliest on ties) and removes its lowest-weight token (earliest on ties).
    Token-derived statement attention is recomputed after every removal unless
    ``freeze`` is set; a fixed ``statement_attn`` (one value per statement of
    the snippet) is never recomputed.  Tokens whose text is in ``protect`` are
    removed only once nothing else is left to remove.
    """
    texts = snippet.texts
    w = token_dict.weights(texts)
    stmts = snippet.statements
    live: dict[int, list[int]] = {o: list(stmts[o].token_range) for o in selected}
    total = sum(len(v) for v in live.values())
    fixed = statement_attn is not None
    att = {
        o: (statement_attn[o] if fixed else weighted_attention([w[i] for i in idx]))
        for o, idx in live.items()
    }

    honour = bool(protect)
    for _ in range(max(0, total - L)):
        cands = live
        if honour:
            cands = {o: [i for i in idx if texts[i] not in protect] for o, idx in live.items()}
            cands = {o: idx for o, idx in cands.items() if idx}
            if not cands:
                honour = False
                cands = live
        o = min(cands, key=lambda k: (att[k], k))
        victim = min(cands[o], key=lambda i: (w[i], i))
        live[o].remove(victim)
        if not live[o]:
            del live[o], att[o]
        elif not fixed and not freeze:
            att[o] = weighted_attention([w[i] for i in live[o]])
    return tuple(sorted(i for idx in live.values() for i in idx))


def attention_prune(
    snippet: Snippet,
    L: int,
    token_dict,
    category_table: CategoryAttentionTable | None = None,
    source: AttentionSource | str = AttentionSource.TOKEN,
    freeze: bool = False,
    protect_delimiters: bool = False,
    mode: Mode | str = Mode.FULL,
) -> PruneResult:
    """Knapsack statement selection followed by greedy token pruning.

    ``mode="statement"`` runs only the selection, with capacity ``L`` so the
    budget still holds; ``mode="token"`` skips selection and drops the
    lowest-weight tokens of the whole snippet.
    """
    source, mode = AttentionSource(source), Mode(mode)
    n = len(snippet)
    if n <= L:
        return PruneResult(snippet.id, n, tuple(range(n)), tuple(range(len(snippet.statements))), None, n)
    token_dict = token_dict.frozen()
    protect = PROTECTED_DELIMITERS if protect_delimiters else frozenset()

    if mode is Mode.TOKEN:
        w = token_dict.weights(snippet.texts)
        drop = sorted(range(n), key=lambda i: (w[i], i))[: n - L]
        gone = set(drop)
        return PruneResult(snippet.id, n, tuple(i for i in range(n) if i not in gone))

    attn = statement_attentions(snippet, token_dict, source, category_table)
    lengths = [len(s) for s in snippet.statements]
    values = scale_statement_values(attn, lengths)
    capacity = L if mode is Mode.STATEMENT else L + max(lengths)
    selected = knapsack_select(values, lengths, capacity)
    selected_tokens = sum(lengths[o] for o in selected)

    if mode is Mode.STATEMENT:
        kept = tuple(i for o in selected for i in snippet.statements[o].token_range)
    else:
        kept = greedy_token_prune(
            snippet,
            selected,
            token_dict,
            L,
            statement_attn=attn if source is AttentionSource.CATEGORY else None,
            freeze=freeze,
            protect=protect,
        )
    return PruneResult(snippet.id, n, kept, selected, capacity, selected_tokens)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PruneConfig:
    strategy: Strategy
    target_length: int | None = None
    relative_length: float | None = None
    seed: int = 0
    source: AttentionSource = AttentionSource.TOKEN
    freeze: bool = False
    protect_delimiters: bool = False
    mode: Mode = Mode.FULL
    token_dict: object | None = field(default=None, compare=False, repr=False)
    category_table: CategoryAttentionTable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "source", AttentionSource(self.source))
        object.__setattr__(self, "mode", Mode(self.mode))
        target_length(1, self.target_length, self.relative_length)  # validates
        if self.strategy in (Strategy.FREQUENCY, Strategy.ATTENTION) and self.token_dict is None:
            raise ValueError(f"{self.strategy.value} strategy needs a token dictionary")
        if self.strategy is Strategy.ATTENTION and self.source is AttentionSource.CATEGORY and self.category_table is None:
            raise ValueError("category attention source needs a category table")
        if self.token_dict is not None:
            object.__setattr__(self, "token_dict", self.token_dict.frozen())

    def budget(self, n_tokens: int) -> int:
        return target_length(n_tokens, self.target_length, self.relative_length)

    def describe(self) -> dict:
        d = {"strategy": self.strategy.value}
        if self.target_length is not None:
            d["target_length"] = self.target_length
        else:
            d["relative_length"] = self.relative_length
        if self.strategy is Strategy.DROPOUT:
            d["seed"] = self.seed
        if self.strategy is Strategy.ATTENTION:
            d.update(source=self.source.value, freeze=self.freeze, protect_delimiters=self.protect_delimiters, mode=self.mode.value)
        return d

    def digest(self, extra: dict | None = None) -> str:
        """Short hash of the settings (plus e.g. dictionary checksums in ``extra``)."""
        blob = json.dumps({**self.describe(), **(extra or {})}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def prune(snippet: Snippet, config: PruneConfig) -> PruneResult:
    L = config.budget(len(snippet))
    if config.strategy is Strategy.DROPOUT:
        return dropout_prune(snippet, L, config.seed)
    if config.strategy is Strategy.FREQUENCY:
        return frequency_prune(snippet, L, config.token_dict)
    return attention_prune(
        snippet,
        L,
        config.token_dict,
        config.category_table,
        config.source,
        config.freeze,
        config.protect_delimiters,
        config.mode,
    )


def result_to_dict(result: PruneResult, snippet: Snippet, strategy: str, digest: str) -> dict:
    d = {
        "id": result.id,
        "strategy": strategy,
        "config": digest,
        "n_tokens": result.n_tokens,
        "kept": list(result.kept),
        "tokens": [snippet.tokens[i].text for i in result.kept],
        "rl": result.relative_length,
    }
    if result.selected_statements is not None:
        d["selected_statements"] = list(result.selected_statements)
        d["capacity"] = result.capacity
        d["selected_tokens"] = result.selected_tokens
    return d


def result_from_dict(obj: dict) -> PruneResult:
    sel = obj.get("selected_statements")
    return PruneResult(
        str(obj["id"]),
        int(obj["n_tokens"]),
        tuple(obj["kept"]),
        None if sel is None else tuple(sel),
        obj.get("capacity"),
        obj.get("selected_tokens"),
    )
