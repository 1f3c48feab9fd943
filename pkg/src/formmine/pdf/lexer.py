"""Tolerant tokenizer and object parser for PDF syntax."""

from __future__ import annotations

import re
from typing import Any, Callable

from .objects import Name, Ref, Stream

WHITESPACE = b"\x00\t\n\x0c\r "
DELIMITERS = b"()<>[]{}/%"
_NUMBER_RE = re.compile(rb"[+-]?(\d+\.?\d*|\.\d+)")


class ParseError(Exception):
    pass


class Lexer:
    """Byte cursor with PDF token primitives."""

    __slots__ = ("data", "pos")

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def skip_whitespace(self) -> None:
        data, pos, n = self.data, self.pos, len(self.data)
        while pos < n:
            b = data[pos]
            if b in WHITESPACE:
                pos += 1
            elif b == 0x25:  # '%' comment runs to end of line
                eol = pos
                while eol < n and data[eol] not in b"\r\n":
                    eol += 1
                pos = eol
            else:
                break
        self.pos = pos

    def peek(self, length: int = 1) -> bytes:
        return self.data[self.pos : self.pos + length]

    def at_end(self) -> bool:
        self.skip_whitespace()
        return self.pos >= len(self.data)

    def read_keyword(self) -> bytes:
        """Read a run of regular (non-delimiter) characters."""
        self.skip_whitespace()
        data, pos, n = self.data, self.pos, len(self.data)
        start = pos
        while pos < n and data[pos] not in WHITESPACE and data[pos] not in DELIMITERS:
            pos += 1
        self.pos = pos
        return data[start:pos]

    def expect_keyword(self, word: bytes) -> None:
        got = self.read_keyword()
        if got != word:
            raise ParseError(f"expected {word!r}, got {got!r} at offset {self.pos}")


class ObjectParser:
    """Parses PDF objects from a byte buffer.

    `resolve_length` is used to dereference an indirect /Length when slicing
    stream data; without it the parser falls back to scanning for
    ``endstream``.
    """

    def __init__(
        self,
        data: bytes,
        pos: int = 0,
        resolve_length: Callable[[Ref], Any] | None = None,
    ):
        self.lexer = Lexer(data, pos)
        self.resolve_length = resolve_length

    @property
    def pos(self) -> int:
        return self.lexer.pos

    @pos.setter
    def pos(self, value: int) -> None:
        self.lexer.pos = value

    def parse_object(self, allow_stream: bool = True) -> Any:
        lex = self.lexer
        lex.skip_whitespace()
        data, pos = lex.data, lex.pos
        if pos >= len(data):
            raise ParseError("unexpected end of data")
        b = data[pos]
        if b == 0x2F:  # '/'
            return self._parse_name()
        if b == 0x28:  # '('
            return self._parse_literal_string()
        if b == 0x3C:  # '<'
            if data[pos : pos + 2] == b"<<":
                d = self._parse_dict()
                if allow_stream:
                    return self._maybe_stream(d)
                return d
            return self._parse_hex_string()
        if b == 0x5B:  # '['
            return self._parse_array()
        if b == 0x5D or b == 0x3E:
            raise ParseError(f"unexpected delimiter {chr(b)!r} at {pos}")
        if b in b"+-.0123456789":
            return self._parse_number_or_ref()
        word = lex.read_keyword()
        if word == b"true":
            return True
        if word == b"false":
            return False
        if word == b"null":
            return None
        raise ParseError(f"unexpected token {word!r} at offset {pos}")

    def _parse_name(self) -> Name:
        lex = self.lexer
        data, pos, n = lex.data, lex.pos + 1, len(lex.data)
        out = bytearray()
        while pos < n:
            b = data[pos]
            if b in WHITESPACE or b in DELIMITERS:
                break
            if b == 0x23 and pos + 2 < n:  # '#' hex escape
                try:
                    out.append(int(data[pos + 1 : pos + 3], 16))
                    pos += 3
                    continue
                except ValueError:
                    pass
            out.append(b)
            pos += 1
        lex.pos = pos
        return Name(out.decode("latin-1"))

    def _parse_literal_string(self) -> bytes:
        lex = self.lexer
        data, pos, n = lex.data, lex.pos + 1, len(lex.data)
        out = bytearray()
        depth = 1
        while pos < n:
            b = data[pos]
            if b == 0x5C:  # backslash
                pos += 1
                if pos >= n:
                    break
                e = data[pos]
                if e in b"nrtbf":
                    out.append({0x6E: 10, 0x72: 13, 0x74: 9, 0x62: 8, 0x66: 12}[e])
                    pos += 1
                elif e in b"()\\":
                    out.append(e)
                    pos += 1
                elif e in b"01234567":
                    octal = bytearray([e])
                    pos += 1
                    while pos < n and len(octal) < 3 and data[pos] in b"01234567":
                        octal.append(data[pos])
                        pos += 1
                    out.append(int(octal, 8) & 0xFF)
                elif e in b"\r\n":  # line continuation
                    pos += 1
                    if e == 0x0D and pos < n and data[pos] == 0x0A:
                        pos += 1
                else:
                    out.append(e)
                    pos += 1
            elif b == 0x28:
                depth += 1
                out.append(b)
                pos += 1
            elif b == 0x29:
                depth -= 1
                if depth == 0:
                    pos += 1
                    break
                out.append(b)
                pos += 1
            else:
                out.append(b)
                pos += 1
        lex.pos = pos
        return bytes(out)

    def _parse_hex_string(self) -> bytes:
        lex = self.lexer
        data, pos, n = lex.data, lex.pos + 1, len(lex.data)
        digits = bytearray()
        while pos < n:
            b = data[pos]
            pos += 1
            if b == 0x3E:
                break
            if chr(b) in "0123456789abcdefABCDEF":
                digits.append(b)
        lex.pos = pos
        if len(digits) % 2:
            digits.append(0x30)
        return bytes.fromhex(digits.decode("ascii"))

    def _parse_array(self) -> list:
        lex = self.lexer
        lex.pos += 1
        out = []
        while True:
            lex.skip_whitespace()
            if lex.pos >= len(lex.data):
                raise ParseError("unterminated array")
            if lex.data[lex.pos] == 0x5D:
                lex.pos += 1
                return out
            out.append(self.parse_object(allow_stream=False))

    def _parse_dict(self) -> dict[str, Any]:
        lex = self.lexer
        lex.pos += 2
        out: dict[str, Any] = {}
        while True:
            lex.skip_whitespace()
            if lex.data[lex.pos : lex.pos + 2] == b">>":
                lex.pos += 2
                return out
            if lex.pos >= len(lex.data):
                raise ParseError("unterminated dictionary")
            if lex.data[lex.pos] != 0x2F:
                # Tolerate junk between entries by skipping one byte.
                lex.pos += 1
                continue
            key = self._parse_name()
            value = self.parse_object(allow_stream=False)
            out[str(key)] = value

    def _parse_number_or_ref(self) -> Any:
        lex = self.lexer
        m = _NUMBER_RE.match(lex.data, lex.pos)
        if m is None:
            lex.pos += 1
            raise ParseError(f"bad number at offset {lex.pos}")
        text = m.group(0)
        lex.pos = m.end()
        if b"." in text:
            return float(text)
        value = int(text)
        # Lookahead for "gen R" to form an indirect reference.
        save = lex.pos
        lex.skip_whitespace()
        m2 = _NUMBER_RE.match(lex.data, lex.pos)
        if m2 is not None and b"." not in m2.group(0):
            after = Lexer(lex.data, m2.end())
            after.skip_whitespace()
            if after.peek(1) == b"R" and (
                after.pos + 1 >= len(lex.data)
                or lex.data[after.pos + 1] in WHITESPACE
                or lex.data[after.pos + 1] in DELIMITERS
            ):
                lex.pos = after.pos + 1
                return Ref(value, int(m2.group(0)))
        lex.pos = save
        return value

    def _maybe_stream(self, d: dict[str, Any]) -> Any:
        lex = self.lexer
        save = lex.pos
        lex.skip_whitespace()
        if lex.data[lex.pos : lex.pos + 6] != b"stream":
            lex.pos = save
            return d
        pos = lex.pos + 6
        data = lex.data
        if data[pos : pos + 2] == b"\r\n":
            pos += 2
        elif data[pos : pos + 1] in (b"\n", b"\r"):
            pos += 1
        length = d.get("Length")
        if isinstance(length, Ref) and self.resolve_length is not None:
            length = self.resolve_length(length)
        raw: bytes | None = None
        if isinstance(length, int) and 0 <= length <= len(data) - pos:
            candidate_end = pos + length
            tail = data[candidate_end : candidate_end + 20]
            if b"endstream" in tail or tail.strip() == b"":
                raw = data[pos:candidate_end]
                lex.pos = candidate_end
        if raw is None:
            # Untrustworthy /Length: scan for the closing keyword.
            idx = data.find(b"endstream", pos)
            if idx < 0:
                raise ParseError("unterminated stream")
            end = idx
            while end > pos and data[end - 1] in b"\r\n":
                end -= 1
            raw = data[pos:end]
            lex.pos = idx
        lex.skip_whitespace()
        if lex.data[lex.pos : lex.pos + 9] == b"endstream":
            lex.pos += 9
        return Stream(dict=d, raw=raw)


def parse_at(data: bytes, pos: int, resolve_length=None) -> Any:
    return ObjectParser(data, pos, resolve_length).parse_object()
