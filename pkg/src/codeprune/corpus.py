"""Corpus records, JSONL loading and literal delexicalization."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence, overload

from codeprune.lexparse import Language, Token, TokenKind

log = logging.getLogger(__name__)

STRING_PLACEHOLDER = "string"
NUMBER_PLACEHOLDER = "10"
PRESERVED_NUMBERS = frozenset({"0", "1", "-1"})


class CorpusError(ValueError):
    """A corpus line could not be turned into a record."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.message = message
        self.line = line


@dataclass(frozen=True, slots=True)
class CorpusRecord:
    id: str
    language: Language
    code: str
    comment: str | None = None

    def to_dict(self) -> dict:
        d = {"id": self.id, "language": self.language.value, "code": self.code}
        if self.comment is not None:
            d["comment"] = self.comment
        return d


def record_from_dict(obj: dict, line: int | None = None) -> CorpusRecord:
    if not isinstance(obj, dict):
        raise CorpusError("record is not an object", line)
    for key in ("id", "language", "code"):
        if key not in obj:
            raise CorpusError(f"missing required field {key!r}", line)
    try:
        lang = Language.parse(obj["language"])
    except ValueError:
        raise CorpusError(f"unknown language {obj['language']!r}", line) from None
    code = obj["code"]
    if not isinstance(code, str):
        # CodeSearchNet also ships pre-tokenized code
        if isinstance(code, list):
            code = " ".join(map(str, code))
        else:
            raise CorpusError("field 'code' must be a string", line)
    comment = obj.get("comment")
    return CorpusRecord(str(obj["id"]), lang, code, None if comment is None else str(comment))


def load_corpus(
    path: str | Path,
    language_filter: Language | str | None = None,
    strict: bool = False,
) -> Iterator[CorpusRecord]:
    """Stream records from a JSONL corpus in file order.

    Malformed lines are logged and skipped unless ``strict`` is set, in which
    case the first one raises ``CorpusError`` naming its line number.  Duplicate
    ids are treated as malformed.
    """
    path = Path(path)
    want = Language.parse(language_filter) if language_filter is not None else None
    seen: set[str] = set()
    try:
        fh = path.open(encoding="utf-8")
    except OSError as e:
        raise CorpusError(f"cannot read corpus: {e.strerror}", path=str(path)) from e
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise CorpusError(f"invalid JSON ({e.msg})", lineno) from None
                rec = record_from_dict(obj, lineno)
                if rec.id in seen:
                    raise CorpusError(f"duplicate id {rec.id!r}", lineno)
            except CorpusError as e:
                if strict:
                    raise CorpusError(e.message, lineno, str(path)) from None
                log.warning("%s: skipping line: %s", path, e)
                continue
            seen.add(rec.id)
            if want is None or rec.language is want:
                yield rec


def write_corpus(records: Iterable[CorpusRecord], path: str | Path) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


_STRING_TEXT = re.compile(r"""^(?:[rRbBuUfF]{0,2})(?:'.*'|".*")$""", re.S)
_NUMBER_TEXT = re.compile(
    r"^-?(?:0[xXoObB][0-9a-fA-F_.pP+-]+[lL]?|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[lLfFdDjJ]?)$"
)


def literal_kind(text: str) -> TokenKind | None:
    """Guess the literal kind of a bare token text (``None`` if not a literal)."""
    if _STRING_TEXT.match(text) and len(text) >= 2:
        return TokenKind.STRING
    if _NUMBER_TEXT.match(text):
        return TokenKind.NUMBER
    return None


def _replace(text: str, kind: TokenKind | None) -> str:
    if kind is TokenKind.STRING:
        return STRING_PLACEHOLDER
    if kind is TokenKind.NUMBER and text not in PRESERVED_NUMBERS:
        return NUMBER_PLACEHOLDER
    return text


@overload
def delexicalize(tokens: Sequence[Token]) -> list[Token]: ...
@overload
def delexicalize(tokens: Sequence[str]) -> list[str]: ...


def delexicalize(tokens):
    """Replace string literals with ``string`` and numbers with ``10``.

    ``0``, ``1`` and ``-1`` are kept verbatim.  Token objects are rewritten by
    their lexer kind; bare strings are recognized by their shape.  Length and
    every non-literal token are preserved.
    """
    out = []
    for tok in tokens:
        if isinstance(tok, Token):
            new = _replace(tok.text, tok.kind)
            out.append(tok if new == tok.text else Token(new, tok.kind, tok.index, tok.sep))
        else:
            out.append(_replace(tok, literal_kind(tok)))
    return out
