"""Best-effort page text extraction.

Decodes simple-font strings through /Encoding (+ /Differences) and composite
fonts through their /ToUnicode CMap when present. Runs are ordered into
reading order by line (y descending, then x ascending).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

from .content import IDENTITY, Matrix, apply, iter_operations, multiply, _num
from .document import PageNode, PdfDocument
from .objects import Name, Ref, Stream

_HEX_PAIR_RE = re.compile(rb"<([0-9a-fA-F]+)>")
_BFRANGE_ARRAY_RE = re.compile(rb"\[((?:\s*<[0-9a-fA-F]+>\s*)+)\]")

# Small glyph-name table covering what simple /Differences arrays use.
_GLYPH_NAMES = {
    "space": " ", "exclam": "!", "quotedbl": '"', "numbersign": "#", "dollar": "$",
    "percent": "%", "ampersand": "&", "quotesingle": "'", "parenleft": "(",
    "parenright": ")", "asterisk": "*", "plus": "+", "comma": ",", "hyphen": "-",
    "period": ".", "slash": "/", "zero": "0", "one": "1", "two": "2", "three": "3",
    "four": "4", "five": "5", "six": "6", "seven": "7", "eight": "8", "nine": "9",
    "colon": ":", "semicolon": ";", "less": "<", "equal": "=", "greater": ">",
    "question": "?", "at": "@", "bracketleft": "[", "backslash": "\\",
    "bracketright": "]", "asciicircum": "^", "underscore": "_", "grave": "`",
    "braceleft": "{", "bar": "|", "braceright": "}", "asciitilde": "~",
    "quoteleft": "‘", "quoteright": "’", "quotedblleft": "“",
    "quotedblright": "”", "endash": "–", "emdash": "—",
    "bullet": "•", "degree": "°", "euro": "€",
}


def _glyph_to_char(name: str) -> str | None:
    if len(name) == 1:
        return name
    if name in _GLYPH_NAMES:
        return _GLYPH_NAMES[name]
    if name.startswith("uni") and len(name) >= 7:
        try:
            return chr(int(name[3:7], 16))
        except ValueError:
            return None
    return None


@dataclass(slots=True)
class FontDecoder:
    code_bytes: int = 1
    to_unicode: dict[int, str] | None = None
    simple: dict[int, str] | None = None
    base_codec: str = "latin-1"

    def decode(self, raw: bytes) -> str:
        out: list[str] = []
        if self.code_bytes == 2:
            for i in range(0, len(raw) - 1, 2):
                code = (raw[i] << 8) | raw[i + 1]
                if self.to_unicode is not None and code in self.to_unicode:
                    out.append(self.to_unicode[code])
                else:
                    ch = chr(code)
                    out.append(ch if ch.isprintable() else "")
            return "".join(out)
        for code in raw:
            if self.to_unicode is not None and code in self.to_unicode:
                out.append(self.to_unicode[code])
            elif self.simple is not None and code in self.simple:
                out.append(self.simple[code])
            else:
                try:
                    out.append(bytes([code]).decode(self.base_codec))
                except (UnicodeDecodeError, LookupError):
                    pass
        return "".join(out)


def parse_tounicode(data: bytes) -> dict[int, str]:
    """Extract code -> text mappings from a ToUnicode CMap stream."""
    table: dict[int, str] = {}

    def hex_to_text(h: bytes) -> str:
        raw = bytes.fromhex(h.decode("ascii"))
        if len(raw) % 2 == 0:
            try:
                return raw.decode("utf-16-be")
            except UnicodeDecodeError:
                pass
        return raw.decode("latin-1")

    pos = 0
    while True:
        start = data.find(b"beginbfchar", pos)
        if start < 0:
            break
        end = data.find(b"endbfchar", start)
        if end < 0:
            break
        pairs = _HEX_PAIR_RE.findall(data[start:end])
        for i in range(0, len(pairs) - 1, 2):
            try:
                table[int(pairs[i], 16)] = hex_to_text(pairs[i + 1])
            except ValueError:
                pass
        pos = end + 1
    pos = 0
    while True:
        start = data.find(b"beginbfrange", pos)
        if start < 0:
            break
        end = data.find(b"endbfrange", start)
        if end < 0:
            break
        body = data[start + len(b"beginbfrange") : end]
        cursor = 0
        while cursor < len(body):
            m_lo = _HEX_PAIR_RE.search(body, cursor)
            if m_lo is None:
                break
            m_hi = _HEX_PAIR_RE.search(body, m_lo.end())
            if m_hi is None:
                break
            cursor = m_hi.end()
            m_arr = _BFRANGE_ARRAY_RE.match(body, _skip_ws(body, cursor))
            try:
                lo, hi = int(m_lo.group(1), 16), int(m_hi.group(1), 16)
            except ValueError:
                continue
            if hi - lo > 65535:
                continue
            if m_arr is not None:
                dests = _HEX_PAIR_RE.findall(m_arr.group(1))
                for offset, dest in enumerate(dests):
                    if lo + offset > hi:
                        break
                    try:
                        table[lo + offset] = hex_to_text(dest)
                    except ValueError:
                        pass
                cursor = m_arr.end()
            else:
                m_dst = _HEX_PAIR_RE.search(body, cursor)
                if m_dst is None:
                    break
                cursor = m_dst.end()
                try:
                    base = int(m_dst.group(1), 16)
                except ValueError:
                    continue
                for offset in range(hi - lo + 1):
                    table[lo + offset] = chr(base + offset)
        pos = end + 1
    return table


def _skip_ws(data: bytes, pos: int) -> int:
    while pos < len(data) and data[pos] in b" \t\r\n":
        pos += 1
    return pos


def build_font_decoder(doc: PdfDocument, font: Any) -> FontDecoder:
    font = doc.resolve(font)
    if not isinstance(font, dict):
        return FontDecoder()
    decoder = FontDecoder()
    subtype = str(font.get("Subtype", ""))
    if subtype == "Type0":
        decoder.code_bytes = 2
        enc = doc.resolve(font.get("Encoding"))
        if isinstance(enc, Name) and "Identity" not in str(enc) and "UCS2" not in str(enc):
            decoder.code_bytes = 2  # other CMaps still mostly 2-byte; best effort
    tounicode = doc.resolve(font.get("ToUnicode"))
    if isinstance(tounicode, Stream):
        table = parse_tounicode(doc.stream_data(tounicode))
        if table:
            decoder.to_unicode = table
    enc = doc.resolve(font.get("Encoding"))
    if isinstance(enc, Name):
        decoder.base_codec = _codec_for(str(enc))
    elif isinstance(enc, dict):
        base = enc.get("BaseEncoding")
        if isinstance(base, Name):
            decoder.base_codec = _codec_for(str(base))
        diffs = doc.resolve(enc.get("Differences"))
        if isinstance(diffs, list):
            simple: dict[int, str] = {}
            code = 0
            for item in diffs:
                item = doc.resolve(item)
                if isinstance(item, (int, float)):
                    code = int(item)
                elif isinstance(item, Name):
                    ch = _glyph_to_char(str(item))
                    if ch is not None:
                        simple[code] = ch
                    code += 1
            if simple:
                decoder.simple = simple
    return decoder


def _codec_for(encoding_name: str) -> str:
    if encoding_name == "WinAnsiEncoding":
        return "cp1252"
    if encoding_name == "MacRomanEncoding":
        return "mac_roman"
    return "latin-1"


@dataclass(slots=True)
class TextRun:
    text: str
    x: float
    y: float
    size: float


def extract_text_runs(page: PageNode) -> list[TextRun]:
    doc = page.doc
    data = page.content_bytes()
    if not data:
        return []
    resources = page.get("Resources")
    fonts = {}
    if isinstance(resources, dict):
        fdict = doc.resolve(resources.get("Font"))
        if isinstance(fdict, dict):
            fonts = fdict

    decoders: dict[str, FontDecoder] = {}

    def decoder_for(name: str) -> FontDecoder:
        if name not in decoders:
            decoders[name] = build_font_decoder(doc, fonts.get(name))
        return decoders[name]

    runs: list[TextRun] = []
    ctm_stack: list[Matrix] = [IDENTITY]
    tm: Matrix = IDENTITY
    tlm: Matrix = IDENTITY
    font_name = ""
    font_size = 12.0
    leading = 0.0
    char_spacing = 0.0
    word_spacing = 0.0
    in_text = False

    def show(raw: Any) -> None:
        nonlocal tm
        if not isinstance(raw, bytes):
            return
        text = decoder_for(font_name).decode(raw) if raw else ""
        if text.strip():
            x, y = apply(multiply(tm, ctm_stack[-1]), 0.0, 0.0)
            size = abs(font_size) * _matrix_scale(multiply(tm, ctm_stack[-1]))
            runs.append(TextRun(text=text, x=x, y=y, size=size or 1.0))
        # Advance the text matrix by an estimated width so that successive
        # shows on one line keep increasing x (rough but order-preserving).
        advance = (len(text) * 0.5 + text.count(" ") * 0.2) * abs(font_size)
        advance += len(text) * char_spacing
        tm = multiply((1, 0, 0, 1, advance, 0), tm)

    for operands, op in iter_operations(data):
        if op == b"BT":
            tm = tlm = IDENTITY
            in_text = True
        elif op == b"ET":
            in_text = False
        elif op == b"q":
            ctm_stack.append(ctm_stack[-1])
        elif op == b"Q":
            if len(ctm_stack) > 1:
                ctm_stack.pop()
        elif op == b"cm" and len(operands) >= 6:
            mat = tuple(_num(v) for v in operands[:6])
            ctm_stack[-1] = multiply(mat, ctm_stack[-1])
        elif op == b"Tf" and len(operands) >= 2:
            font_name = str(operands[0]) if isinstance(operands[0], Name) else ""
            font_size = _num(operands[1], 12.0)
        elif op == b"TL" and operands:
            leading = _num(operands[0])
        elif op == b"Tc" and operands:
            char_spacing = _num(operands[0])
        elif op == b"Tw" and operands:
            word_spacing = _num(operands[0])
        elif op == b"Tm" and len(operands) >= 6:
            tm = tlm = tuple(_num(v) for v in operands[:6])
        elif op in (b"Td", b"TD") and len(operands) >= 2:
            if op == b"TD":
                leading = -_num(operands[1])
            tlm = multiply((1, 0, 0, 1, _num(operands[0]), _num(operands[1])), tlm)
            tm = tlm
        elif op == b"T*":
            tlm = multiply((1, 0, 0, 1, 0.0, -(leading or 1.2 * font_size)), tlm)
            tm = tlm
        elif op == b"Tj" and operands and in_text:
            show(operands[0])
        elif op == b"'" and operands:
            tlm = multiply((1, 0, 0, 1, 0.0, -(leading or 1.2 * font_size)), tlm)
            tm = tlm
            show(operands[0])
        elif op == b'"' and len(operands) >= 3:
            word_spacing = _num(operands[0])
            char_spacing = _num(operands[1])
            tlm = multiply((1, 0, 0, 1, 0.0, -(leading or 1.2 * font_size)), tlm)
            tm = tlm
            show(operands[2])
        elif op == b"TJ" and operands and in_text:
            arr = operands[0]
            if isinstance(arr, list):
                for item in arr:
                    if isinstance(item, bytes):
                        show(item)
                    elif isinstance(item, (int, float)) and item < -180:
                        show(b" ")
    return runs


def _matrix_scale(m: Matrix) -> float:
    a, b, c, d = m[0], m[1], m[2], m[3]
    sx = (a * a + b * b) ** 0.5
    sy = (c * c + d * d) ** 0.5
    return sy or sx


def page_text(page: PageNode) -> str:
    """Reading-order text for one page; empty string when there is none."""
    runs = extract_text_runs(page)
    if not runs:
        return ""
    # Group into lines by y (tolerance scaled to run size), then sort by x.
    runs.sort(key=lambda r: (-r.y, r.x))
    lines: list[list[TextRun]] = []
    for run in runs:
        if lines and abs(lines[-1][0].y - run.y) <= max(2.0, 0.4 * lines[-1][0].size):
            lines[-1].append(run)
        else:
            lines.append([run])
    parts: list[str] = []
    for line in lines:
        line.sort(key=lambda r: r.x)
        text = ""
        prev: TextRun | None = None
        for run in line:
            if prev is not None and run.x - prev.x > 0.75 * prev.size * max(1, len(prev.text)):
                text += " "
            elif prev is not None and not text.endswith(" ") and not run.text.startswith(" "):
                gap = run.x - (prev.x + 0.5 * prev.size * len(prev.text))
                if gap > 0.3 * prev.size:
                    text += " "
            text += run.text
            prev = run
        parts.append(text.strip())
    return "\n".join(p for p in parts if p)
