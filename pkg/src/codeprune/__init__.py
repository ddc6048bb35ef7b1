"""Token-budget simplification of Java and Python functions for code models."""

from codeprune.corpus import CorpusRecord, delexicalize, load_corpus
from codeprune.lexparse import Category, Language, Snippet, Statement, Token, TokenKind, classify, lex, parse_snippet, split_statements

__version__ = "0.1.0"

__all__ = [
    "Category",
    "CorpusRecord",
    "Language",
    "Snippet",
    "Statement",
    "Token",
    "TokenKind",
    "classify",
    "delexicalize",
    "lex",
    "load_corpus",
    "parse_snippet",
    "split_statements",
]
