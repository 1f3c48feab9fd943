"""Content stream tokenization shared by text extraction and rasterization."""

from __future__ import annotations

from typing import Any, Iterator

from .lexer import Lexer, ObjectParser, ParseError, DELIMITERS, WHITESPACE

Matrix = tuple[float, float, float, float, float, float]
IDENTITY: Matrix = (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)


def multiply(m1: Matrix, m2: Matrix) -> Matrix:
    a1, b1, c1, d1, e1, f1 = m1
    a2, b2, c2, d2, e2, f2 = m2
    return (
        a1 * a2 + b1 * c2,
        a1 * b2 + b1 * d2,
        c1 * a2 + d1 * c2,
        c1 * b2 + d1 * d2,
        e1 * a2 + f1 * c2 + e2,
        e1 * b2 + f1 * d2 + f2,
    )


def apply(m: Matrix, x: float, y: float) -> tuple[float, float]:
    a, b, c, d, e, f = m
    return (a * x + c * y + e, b * x + d * y + f)


def iter_operations(data: bytes) -> Iterator[tuple[list[Any], bytes]]:
    """Yield (operands, operator) pairs from a decoded content stream.

    Inline images (BI..EI) are skipped wholesale. Malformed trailing tokens
    are dropped silently; content streams are best-effort territory.
    """
    parser = ObjectParser(data, 0)
    lex = parser.lexer
    operands: list[Any] = []
    n = len(data)
    while True:
        lex.skip_whitespace()
        if lex.pos >= n:
            break
        b = data[lex.pos]
        if b in b"/([<+-.0123456789":
            try:
                operands.append(parser.parse_object(allow_stream=False))
            except ParseError:
                lex.pos += 1
                operands = []
            continue
        if b in DELIMITERS:
            lex.pos += 1
            continue
        op = lex.read_keyword()
        if not op:
            lex.pos += 1
            continue
        if op == b"true":
            operands.append(True)
            continue
        if op == b"false":
            operands.append(False)
            continue
        if op == b"null":
            operands.append(None)
            continue
        if op == b"BI":
            idx = data.find(b"EI", lex.pos)
            while idx > 0 and idx + 2 < n and data[idx + 2] not in WHITESPACE:
                idx = data.find(b"EI", idx + 2)
            lex.pos = n if idx < 0 else idx + 2
            operands = []
            continue
        yield operands, op
        operands = []


def _num(value: Any, default: float = 0.0) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        return default
