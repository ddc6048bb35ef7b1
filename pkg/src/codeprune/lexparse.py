"""Tokenizing, statement splitting and statement classification for Java and Python.

Everything here is rule-based text processing: there is no grammar and no AST.
The lexer works at language-token granularity, the splitter cuts a token
sequence into contiguous statements, and the classifier maps each statement to
one of 21 categories (plus ``Other``) with a fixed priority table.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence


class Language(str, enum.Enum):
    JAVA = "java"
    PYTHON = "python"

    @classmethod
    def parse(cls, value: "str | Language") -> "Language":
        if isinstance(value, Language):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unsupported language: {value!r}") from None


class TokenKind(str, enum.Enum):
    KEYWORD = "Keyword"
    IDENTIFIER = "Identifier"
    STRING = "StringLiteral"
    NUMBER = "NumericLiteral"
    OPERATOR = "Operator"
    DELIMITER = "Delimiter"
    ANNOTATION = "Annotation"
    COMMENT = "Comment"
    OTHER = "Other"


class Category(str, enum.Enum):
    """Statement categories, in descending order of their corpus frequency."""

    FUNCTION_INVOCATION = "FunctionInvocation"
    METHOD_SIGNATURE = "MethodSignature"
    VARIABLE_DECLARATION = "VariableDeclaration"
    IF_CONDITION = "IfCondition"
    ANNOTATION = "Annotation"
    RETURN = "Return"
    GETTER = "Getter"
    FOR = "For"
    TRY = "Try"
    LOGGING = "Logging"
    SETTER = "Setter"
    THROW = "Throw"
    CATCH = "Catch"
    ARITHMETIC = "Arithmetic"
    CASE = "Case"
    WHILE = "While"
    BREAK = "Break"
    FINALLY = "Finally"
    CONTINUE = "Continue"
    SWITCH = "Switch"
    SYNCHRONIZED = "Synchronized"
    OTHER = "Other"


CONTROL_FLOW_CATEGORIES = frozenset(
    {
        Category.IF_CONDITION,
        Category.FOR,
        Category.WHILE,
        Category.SWITCH,
        Category.CASE,
        Category.BREAK,
        Category.CONTINUE,
    }
)


class LexError(ValueError):
    """Raised when source text cannot be tokenized."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True, slots=True)
class Token:
    text: str
    kind: TokenKind
    index: int
    # collapsed whitespace that preceded the token: "", " " or "\n"
    sep: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text must be non-empty")


@dataclass(frozen=True, slots=True)
class Statement:
    start: int
    stop: int
    category: Category
    ordinal: int

    def __post_init__(self):
        if self.stop <= self.start:
            raise ValueError(f"empty statement range [{self.start}, {self.stop})")

    def __len__(self) -> int:
        return self.stop - self.start

    @property
    def token_range(self) -> range:
        return range(self.start, self.stop)


@dataclass(frozen=True)
class Snippet:
    id: str
    language: Language
    tokens: tuple[Token, ...]
    statements: tuple[Statement, ...]

    def __post_init__(self):
        check_partition(self.statements, len(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def statement_texts(self, stmt: Statement) -> list[str]:
        return [t.text for t in self.tokens[stmt.start:stmt.stop]]


def check_partition(statements: Sequence[Statement], n_tokens: int) -> None:
    """Raise ``ValueError`` unless ``statements`` tile ``range(n_tokens)`` in order."""
    pos = 0
    for k, s in enumerate(statements):
        if s.ordinal != k:
            raise ValueError(f"statement ordinal {s.ordinal} at position {k}")
        if s.start != pos:
            raise ValueError(f"statement {k} starts at {s.start}, expected {pos}")
        pos = s.stop
    if pos != n_tokens:
        raise ValueError(f"statements cover {pos} of {n_tokens} tokens")


# ---------------------------------------------------------------------------
# keyword tables

JAVA_KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized this
    throw throws transient try void volatile while var true false null
    """.split()
)

JAVA_MODIFIERS = frozenset(
    """
    public private protected static final abstract synchronized native
    strictfp transient volatile default
    """.split()
)

JAVA_PRIMITIVES = frozenset("boolean byte char short int long float double void var".split())

PYTHON_KEYWORDS = frozenset(
    """
    False None True and as assert async await break class continue def del elif
    else except finally for from global if import in is lambda nonlocal not or
    pass raise return try while with yield
    """.split()
)

_OPERATORS = {
    Language.JAVA: sorted(
        """
        >>>= <<= >>= >>> ... -> :: ++ -- && || == != <= >= += -= *= /= %= &= |= ^=
        << >> + - * / % = < > ! ~ ? & | ^
        """.split(),
        key=len,
        reverse=True,
    ),
    Language.PYTHON: sorted(
        """
        **= //= >>= <<= -> ** // == != <= >= += -= *= /= %= &= |= ^= @= := << >>
        + - * / % = < > ~ & | ^ @
        """.split(),
        key=len,
        reverse=True,
    ),
}

_DELIMITERS = {
    Language.JAVA: frozenset("( ) [ ] { } ; , . :".split()),
    Language.PYTHON: frozenset("( ) [ ] { } ; , . :".split()),
}

OPEN_BRACKETS = frozenset("([{")
CLOSE_BRACKETS = frozenset(")]}")

_WS = re.compile(r"[ \t\f\r\n]+|\\\r?\n")
_IDENT = re.compile(r"[^\W\d]\w*|\$[\w$]*", re.UNICODE)
_JAVA_IDENT = re.compile(r"[^\W\d][\w$]*|\$[\w$]*", re.UNICODE)

_NUM_JAVA = re.compile(
    r"""
    0[xX][0-9a-fA-F_]*\.?[0-9a-fA-F_]*(?:[pP][+-]?\d+)?[lLfFdD]?
  | 0[bB][01_]+[lL]?
  | (?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d[\d_]*)?[lLfFdD]?
    """,
    re.VERBOSE,
)
_NUM_PY = re.compile(
    r"""
    0[xX][0-9a-fA-F_]+
  | 0[oO][0-7_]+
  | 0[bB][01_]+
  | (?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d[\d_]*)?[jJ]?
    """,
    re.VERBOSE,
)
_PY_STR_PREFIX = re.compile(r"(?:[rRbBuUfF]{1,2})(?=['\"])")

# keywords that complete an operand, so a following "-" is binary minus
_OPERAND_KEYWORDS = frozenset({"this", "super", "true", "false", "null", "True", "False", "None"})


def _ends_operand(tok: Token | None) -> bool:
    if tok is None:
        return False
    if tok.kind in (TokenKind.IDENTIFIER, TokenKind.STRING, TokenKind.NUMBER):
        return True
    if tok.text in CLOSE_BRACKETS:
        return True
    return tok.kind is TokenKind.KEYWORD and tok.text in _OPERAND_KEYWORDS


def _scan_string(code: str, pos: int, quote: str) -> int:
    """Return the offset just past the string literal opened at ``pos``."""
    n = len(code)
    i = pos + len(quote)
    while i < n:
        c = code[i]
        if c == "\\":
            i += 2
            continue
        if code.startswith(quote, i):
            return i + len(quote)
        if len(quote) == 1 and c == "\n":
            break
        i += 1
    raise LexError("unterminated string literal", pos)


def lex(code: str, language: "Language | str") -> list[Token]:
    """Split source text into tokens; comments are dropped and whitespace collapsed.

    Raises:
        LexError: on an unterminated string literal (with its offset).
    """
    lang = Language.parse(language)
    keywords = JAVA_KEYWORDS if lang is Language.JAVA else PYTHON_KEYWORDS
    operators = _OPERATORS[lang]
    delimiters = _DELIMITERS[lang]
    number_re = _NUM_JAVA if lang is Language.JAVA else _NUM_PY
    ident_re = _JAVA_IDENT if lang is Language.JAVA else _IDENT

    tokens: list[Token] = []
    sep = ""
    pos = 0
    n = len(code)

    def emit(text: str, kind: TokenKind) -> None:
        nonlocal sep
        tokens.append(Token(text, kind, len(tokens), sep if tokens else ""))
        sep = ""

    while pos < n:
        m = _WS.match(code, pos)
        if m:
            ws = m.group()
            if "\n" in ws and not ws.startswith("\\"):
                sep = "\n"
            elif not sep:
                sep = " "
            pos = m.end()
            continue

        c = code[pos]
        prev = tokens[-1] if tokens else None

        # comments
        if lang is Language.JAVA and code.startswith("//", pos):
            end = code.find("\n", pos)
            pos = n if end < 0 else end
            continue
        if lang is Language.JAVA and code.startswith("/*", pos):
            end = code.find("*/", pos + 2)
            pos = n if end < 0 else end + 2
            sep = sep or " "
            continue
        if lang is Language.PYTHON and c == "#":
            end = code.find("\n", pos)
            pos = n if end < 0 else end
            continue

        # string literals
        if lang is Language.JAVA:
            if code.startswith('"""', pos):
                end = _scan_string(code, pos, '"""')
                emit(code[pos:end], TokenKind.STRING)
                pos = end
                continue
            if c in "\"'":
                end = _scan_string(code, pos, c)
                emit(code[pos:end], TokenKind.STRING)
                pos = end
                continue
        else:
            pm = _PY_STR_PREFIX.match(code, pos)
            qpos = pm.end() if pm else pos
            if qpos < n and code[qpos] in "\"'":
                q = code[qpos] * 3 if code.startswith(code[qpos] * 3, qpos) else code[qpos]
                # a backslash guards the quote even in raw strings
                end = _scan_string(code, qpos, q)
                emit(code[pos:end], TokenKind.STRING)
                pos = end
                continue

        # numbers, with an optional directly attached sign in unary position
        if c.isdigit() or (c == "." and pos + 1 < n and code[pos + 1].isdigit()):
            m = number_re.match(code, pos)
            emit(m.group(), TokenKind.NUMBER)
            pos = m.end()
            continue
        if (
            c == "-"
            and pos + 1 < n
            and code[pos + 1].isdigit()
            and not _ends_operand(prev)
        ):
            m = number_re.match(code, pos + 1)
            emit("-" + m.group(), TokenKind.NUMBER)
            pos = m.end()
            continue

        # annotations / decorators
        if c == "@" and not _ends_operand(prev):
            m = ident_re.match(code, pos + 1)
            if m:
                emit("@" + m.group(), TokenKind.ANNOTATION)
                pos = m.end()
                continue

        m = ident_re.match(code, pos)
        if m:
            word = m.group()
            emit(word, TokenKind.KEYWORD if word in keywords else TokenKind.IDENTIFIER)
            pos = m.end()
            continue

        for op in operators:
            if code.startswith(op, pos):
                emit(op, TokenKind.OPERATOR)
                pos += len(op)
                break
        else:
            if code.startswith("...", pos):
                emit("...", TokenKind.OPERATOR)
                pos += 3
            elif c in delimiters:
                emit(c, TokenKind.DELIMITER)
                pos += 1
            else:
                emit(c, TokenKind.OTHER)
                pos += 1
    return tokens


def detokenize(tokens: Iterable[Token]) -> str:
    """Rebuild the significant source text from tokens and their separators."""
    return "".join(t.sep + t.text for t in tokens)


def retokenize(texts: Sequence[str], kinds: Sequence["TokenKind | str"], seps: Sequence[str] | None = None) -> list[Token]:
    seps = seps or [""] + [" "] * (len(texts) - 1)
    return [Token(t, TokenKind(k), i, s) for i, (t, k, s) in enumerate(zip(texts, kinds, seps))]


# ---------------------------------------------------------------------------
# statement splitting

def split_statements(tokens: Sequence[Token], language: "Language | str") -> list[tuple[int, int]]:
    """Return half-open ``(start, stop)`` boundaries partitioning ``tokens``.

    Java cuts after ``;`` and ``{`` and around ``}`` outside parentheses.  A
    ``}`` followed by ``else``, ``catch``, ``finally``, ``while`` or ``;``
    opens the next statement; any other run of closing braces is appended to
    the statement before it.
    Python cuts after a header's ``:``, at depth-0 newlines when the source had
    them, and wherever two operands meet at depth 0 (the end of an assignment
    or call whose logical line has no explicit terminator).
    """
    lang = Language.parse(language)
    if not tokens:
        return []
    cuts = _java_cuts(tokens) if lang is Language.JAVA else _python_cuts(tokens)
    bounds: list[tuple[int, int]] = []
    start = 0
    for c in sorted(set(cuts)) + [len(tokens)]:
        if not start < c <= len(tokens):
            continue
        if bounds and all(tokens[k].text == "}" for k in range(start, c)):
            # closing braces join the statement they close
            bounds[-1] = (bounds[-1][0], c)
        else:
            bounds.append((start, c))
        start = c
    return bounds


_JAVA_BRACE_CONTINUATION = frozenset({"else", "catch", "finally", "while", ";", ")", ",", ".", "}"})


def _java_cuts(tokens: Sequence[Token]) -> list[int]:
    cuts: list[int] = []
    n = len(tokens)
    paren = 0
    init_depth = 0  # nesting of array initializer braces
    start = 0
    i = 0
    while i < n:
        tok = tokens[i]
        t = tok.text

        if i == start and tok.kind is TokenKind.ANNOTATION and paren == 0:
            j = i + 1
            if j < n and tokens[j].text == "(":
                j = _match_close(tokens, j)
            if j < n:
                cuts.append(j)
                start = j
            i = j
            continue

        if t in "([" and tok.kind is TokenKind.DELIMITER:
            paren += 1
        elif t in ")]" and tok.kind is TokenKind.DELIMITER:
            paren = max(0, paren - 1)
        elif paren == 0 and t == "{":
            prev = tokens[i - 1].text if i > 0 else ""
            if init_depth or prev in ("=", "]", ","):
                init_depth += 1
            else:
                cuts.append(i + 1)
                start = i + 1
        elif paren == 0 and t == "}":
            if init_depth:
                init_depth -= 1
            else:
                only_braces = all(tokens[k].text == "}" for k in range(start, i))
                if i > start and not only_braces:
                    cuts.append(i)
                    start = i
                nxt = tokens[i + 1].text if i + 1 < n else ""
                if nxt not in _JAVA_BRACE_CONTINUATION:
                    cuts.append(i + 1)
                    start = i + 1
        elif paren == 0 and init_depth == 0 and t == ";":
            cuts.append(i + 1)
            start = i + 1
        elif paren == 0 and t == ":" and _head_text(tokens, start, i) in ("case", "default"):
            cuts.append(i + 1)
            start = i + 1
        i += 1
    return cuts


def _match_close(tokens: Sequence[Token], open_pos: int) -> int:
    """Index just past the bracket matching ``tokens[open_pos]`` (or the end)."""
    depth = 0
    for k in range(open_pos, len(tokens)):
        t = tokens[k].text
        if t in OPEN_BRACKETS:
            depth += 1
        elif t in CLOSE_BRACKETS:
            depth -= 1
            if depth == 0:
                return k + 1
    return len(tokens)


def _head_text(tokens: Sequence[Token], start: int, stop: int) -> str:
    for k in range(start, stop):
        if tokens[k].text != "}":
            return tokens[k].text
    return ""


_PY_HEADERS = frozenset({"def", "class", "if", "elif", "else", "for", "while", "try", "except", "finally", "with", "async"})
# keywords that may follow a complete operand without starting a new statement
_PY_CONTINUE = frozenset({"else", "in", "and", "or", "not", "is", "as", "from", "import", "if"})
_PY_ENDER_KEYWORDS = frozenset({"True", "False", "None", "pass", "break", "continue", "return", "yield"})


def _py_ends_operand(tok: Token) -> bool:
    if tok.kind in (TokenKind.IDENTIFIER, TokenKind.STRING, TokenKind.NUMBER):
        return True
    if tok.kind is TokenKind.DELIMITER and tok.text in CLOSE_BRACKETS:
        return True
    return tok.kind is TokenKind.KEYWORD and tok.text in _PY_ENDER_KEYWORDS


def _py_starts_statement(tokens: Sequence[Token], i: int, start: int) -> bool:
    """Whether ``tokens[i]`` opens a new logical line after ``tokens[i-1]``."""
    prev, cur = tokens[i - 1], tokens[i]
    if cur.sep == "\n":
        return True
    if not _py_ends_operand(prev):
        return False
    if prev.kind is TokenKind.KEYWORD and prev.text in ("return", "yield"):
        # bare ``return`` only ends when followed by a statement keyword
        return cur.kind is TokenKind.KEYWORD and cur.text not in _PY_CONTINUE and cur.text not in _PY_ENDER_KEYWORDS
    if cur.kind in (TokenKind.IDENTIFIER, TokenKind.NUMBER, TokenKind.ANNOTATION):
        return True
    if cur.kind is TokenKind.STRING:
        return prev.kind is not TokenKind.STRING
    if cur.kind is TokenKind.KEYWORD:
        if cur.text == "else":
            return i + 1 < len(tokens) and tokens[i + 1].text == ":"
        if cur.text == "if":
            return not _py_ternary_ahead(tokens, i)
        if cur.text == "import":
            return tokens[start].text != "from"
        return cur.text not in _PY_CONTINUE
    return False


def _py_ternary_ahead(tokens: Sequence[Token], i: int) -> bool:
    depth = 0
    for k in range(i + 1, len(tokens)):
        t = tokens[k]
        if k > i + 1 and t.sep == "\n" and depth == 0:
            return False
        if t.text in OPEN_BRACKETS:
            depth += 1
        elif t.text in CLOSE_BRACKETS:
            depth -= 1
            if depth < 0:
                return False
        elif depth == 0 and t.text == "else":
            return True
        elif depth == 0 and t.text == ":":
            return False
    return False


def _python_cuts(tokens: Sequence[Token]) -> list[int]:
    cuts: list[int] = []
    depth = 0
    start = 0
    for i, tok in enumerate(tokens):
        t = tok.text
        if depth == 0 and i > start and _py_starts_statement(tokens, i, start):
            cuts.append(i)
            start = i
        if tok.kind is TokenKind.DELIMITER and t in OPEN_BRACKETS:
            depth += 1
        elif tok.kind is TokenKind.DELIMITER and t in CLOSE_BRACKETS:
            depth = max(0, depth - 1)
        elif depth == 0 and t == ":" and tokens[start].text in _PY_HEADERS:
            cuts.append(i + 1)
            start = i + 1
    return cuts


# ---------------------------------------------------------------------------
# classification

_GETTER = re.compile(r"^(?:get|is)[A-Z_]|^get_")
_SETTER = re.compile(r"^set[A-Z_]")
_LOG_NAMES = frozenset({"log4j", "Logger", "println", "logging", "printStackTrace"})
_LOG_RECEIVERS = frozenset({"log", "logger", "LOG", "LOGGER", "Log", "_log", "_logger", "Logger"})
_LOG_LEVELS = frozenset({"trace", "debug", "info", "warn", "warning", "error", "fatal", "exception", "critical", "log"})
_ARITH_OPS = frozenset(
    "+ - * / % ++ -- += -= *= /= %= << >> >>> <<= >>= >>>= & | ^ &= |= ^= ~ ** // **= //=".split()
)


def _calls(texts: Sequence[str], kinds: Sequence[TokenKind]) -> list[str]:
    """Callee names: identifiers directly followed by ``(``."""
    out = []
    for k in range(len(texts) - 1):
        if texts[k + 1] == "(" and kinds[k] is TokenKind.IDENTIFIER:
            out.append(texts[k])
    return out


def _is_logging(texts: Sequence[str], language: Language) -> bool:
    for k, t in enumerate(texts):
        if t in _LOG_NAMES:
            return True
        if t in _LOG_RECEIVERS and k + 2 < len(texts) and texts[k + 1] == "." and texts[k + 2] in _LOG_LEVELS:
            return True
        if language is Language.PYTHON and t == "print" and k + 1 < len(texts) and texts[k + 1] == "(":
            return True
    return False


def _java_signature(texts: Sequence[str], kinds: Sequence[TokenKind]) -> bool:
    if not texts or texts[-1] not in ("{", ";"):
        return False
    try:
        lp = texts.index("(")
    except ValueError:
        return False
    if lp == 0 or kinds[lp - 1] is not TokenKind.IDENTIFIER:
        return False
    head = texts[:lp - 1]
    if "=" in head or "." in head or "new" in head or "return" in head:
        return False
    if not head:
        return False
    first = texts[0]
    if kinds[0] is TokenKind.KEYWORD and first not in JAVA_MODIFIERS and first not in JAVA_PRIMITIVES:
        return False
    # the name must be preceded by a modifier or something type-shaped
    before = texts[lp - 2]
    return (
        before in JAVA_MODIFIERS
        or before in JAVA_PRIMITIVES
        or before in (">", ">>", ">>>", "]")
        or kinds[lp - 2] is TokenKind.IDENTIFIER
    )


def _java_declaration(texts: Sequence[str], kinds: Sequence[TokenKind]) -> bool:
    k = 0
    while k < len(texts) and (texts[k] == "final" or kinds[k] is TokenKind.ANNOTATION):
        k += 1
    if k >= len(texts):
        return False
    if not (texts[k] in JAVA_PRIMITIVES or kinds[k] is TokenKind.IDENTIFIER):
        return False
    # skip a (possibly qualified / generic / array) type
    k += 1
    angle = 0
    while k < len(texts):
        t = texts[k]
        if t == "<":
            angle += 1
        elif t in (">", ">>", ">>>"):
            angle -= len(t)
        elif angle > 0 or t in ("[", "]", ".") or (t == "?" and angle > 0):
            pass
        elif kinds[k] is TokenKind.IDENTIFIER and texts[k - 1] == ".":
            pass
        else:
            break
        k += 1
    return (
        k + 1 < len(texts)
        and kinds[k] is TokenKind.IDENTIFIER
        and texts[k + 1] in ("=", ";", ",", ":")
    )


def _arithmetic_only(texts: Sequence[str], kinds: Sequence[TokenKind]) -> bool:
    has_op = False
    for k, (t, kind) in enumerate(zip(texts, kinds)):
        if t in _ARITH_OPS:
            has_op = True
        elif kind is TokenKind.KEYWORD and t not in ("this", "self", "true", "false", "True", "False", "None", "null"):
            return False
        elif t == "(" and k > 0 and kinds[k - 1] is TokenKind.IDENTIFIER:
            return False  # a call
        elif kind is TokenKind.OPERATOR and t not in ("=",) and t not in _ARITH_OPS:
            return False  # comparisons, logic, lambdas
    return has_op


def _assignment(texts: Sequence[str], kinds: Sequence[TokenKind]) -> bool:
    depth = 0
    for k, t in enumerate(texts):
        if t in OPEN_BRACKETS:
            depth += 1
        elif t in CLOSE_BRACKETS:
            depth -= 1
        elif depth == 0 and t == "=":
            return k > 0
        elif depth == 0 and kinds[k] is TokenKind.KEYWORD and t not in ("this", "self"):
            return False
    return False


def classify(tokens: "Sequence[Token] | Sequence[str]", language: "Language | str") -> Category:
    """Map one statement's tokens to a category; first matching rule wins.

    Priority: MethodSignature, Annotation, control-flow headers, exception
    handling, Return, Logging, Getter/Setter, VariableDeclaration, Arithmetic,
    FunctionInvocation, then Other.  Plain strings are accepted and re-lexed
    token by token to recover their kinds.
    """
    lang = Language.parse(language)
    if tokens and isinstance(tokens[0], str):
        toks = [_kind_of(t, lang) for t in tokens]
    else:
        toks = [(t.text, t.kind) for t in tokens]
    # leading closing braces belong to the previous block
    while toks and toks[0][0] == "}":
        toks = toks[1:]
    if not toks:
        return Category.OTHER
    texts = [t for t, _ in toks]
    kinds = [k for _, k in toks]
    head = texts[0]

    if lang is Language.JAVA:
        if _java_signature(texts, kinds):
            return Category.METHOD_SIGNATURE
    else:
        if head == "def" or (head == "async" and len(texts) > 1 and texts[1] == "def"):
            return Category.METHOD_SIGNATURE
    if kinds[0] is TokenKind.ANNOTATION:
        return Category.ANNOTATION

    control = {
        "if": Category.IF_CONDITION,
        "elif": Category.IF_CONDITION,
        "else": Category.IF_CONDITION,
        "for": Category.FOR,
        "while": Category.WHILE,
        "do": Category.WHILE,
        "switch": Category.SWITCH,
        "match": Category.SWITCH if lang is Language.PYTHON and texts[-1] == ":" else None,
        "case": Category.CASE,
        "break": Category.BREAK,
        "continue": Category.CONTINUE,
        "synchronized": Category.SYNCHRONIZED,
        "throw": Category.THROW,
        "raise": Category.THROW,
        "catch": Category.CATCH,
        "except": Category.CATCH,
        "finally": Category.FINALLY,
        "try": Category.TRY,
        "return": Category.RETURN,
    }
    if lang is Language.JAVA and head == "default" and len(texts) > 1 and texts[1] == ":":
        return Category.CASE
    cat = control.get(head)
    if cat is not None:
        return cat

    if _is_logging(texts, lang):
        return Category.LOGGING
    callees = _calls(texts, kinds)
    if any(_GETTER.match(c) for c in callees):
        return Category.GETTER
    if any(_SETTER.match(c) for c in callees):
        return Category.SETTER

    if lang is Language.JAVA and _java_declaration(texts, kinds):
        return Category.VARIABLE_DECLARATION
    if _arithmetic_only(texts, kinds):
        return Category.ARITHMETIC
    if callees or "new" in texts:
        return Category.FUNCTION_INVOCATION
    # untyped assignment of a plain value
    if _assignment(texts, kinds):
        return Category.VARIABLE_DECLARATION
    return Category.OTHER


def _kind_of(text: str, lang: Language) -> tuple[str, TokenKind]:
    try:
        toks = lex(text, lang)
    except LexError:
        return text, TokenKind.OTHER
    if len(toks) == 1:
        return text, toks[0].kind
    return text, TokenKind.OTHER


# ---------------------------------------------------------------------------

def parse_snippet(snippet_id: str, code: str, language: "Language | str", delex: bool = True) -> Snippet:
    """Lex, optionally delexicalize, split and classify one function."""
    from codeprune.corpus import delexicalize

    lang = Language.parse(language)
    tokens = lex(code, lang)
    if delex:
        tokens = delexicalize(tokens)
    return build_snippet(snippet_id, lang, tokens)


def build_snippet(snippet_id: str, language: "Language | str", tokens: Sequence[Token]) -> Snippet:
    lang = Language.parse(language)
    tokens = tuple(tokens)
    statements = tuple(
        Statement(a, b, classify(tokens[a:b], lang), k)
        for k, (a, b) in enumerate(split_statements(tokens, lang))
    )
    return Snippet(snippet_id, lang, tokens, statements)


def snippet_to_dict(snippet: Snippet) -> dict:
    """Cache-file form of a parsed snippet."""
    return {
        "id": snippet.id,
        "language": snippet.language.value,
        "tokens": [[t.text, t.kind.value] for t in snippet.tokens],
        "seps": "".join({"": "0", " ": "1", "\n": "2"}[t.sep] for t in snippet.tokens),
        "statements": [[s.start, s.stop, s.category.value] for s in snippet.statements],
    }


def snippet_from_dict(obj: dict) -> Snippet:
    seps_code = obj.get("seps")
    toks = obj["tokens"]
    if seps_code:
        seps = [{"0": "", "1": " ", "2": "\n"}[c] for c in seps_code]
    else:
        seps = None
    tokens = retokenize([t for t, _ in toks], [k for _, k in toks], seps)
    statements = tuple(
        Statement(a, b, Category(c), k) for k, (a, b, c) in enumerate(obj["statements"])
    )
    return Snippet(str(obj["id"]), Language.parse(obj["language"]), tuple(tokens), statements)


def write_cache(snippets: Iterable[Snippet], path) -> int:
    """Write parsed snippets as JSONL, one per line; returns the count."""
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for sn in snippets:
            fh.write(json.dumps(snippet_to_dict(sn), ensure_ascii=False, separators=(",", ":")) + "\n")
            n += 1
    return n


def read_cache(path) -> Iterator[Snippet]:
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    yield snippet_from_dict(json.loads(line))
                except (ValueError, KeyError, TypeError) as e:
                    raise ValueError(f"{path}:{lineno}: bad cache entry: {e}") from None
