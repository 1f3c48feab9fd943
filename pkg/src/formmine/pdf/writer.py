"""Object serialization and incremental-update writing.

Prepared documents are written as incremental updates: the original bytes
are preserved untouched and new/updated objects are appended with a classic
xref section whose /Prev points at the original's last xref.
"""

from __future__ import annotations

from typing import Any

from .document import PdfDocument
from .objects import Name, Ref, Stream

_STRING_ESCAPES = {0x28: b"\\(", 0x29: b"\\)", 0x5C: b"\\\\", 0x0A: b"\\n", 0x0D: b"\\r", 0x09: b"\\t"}


def _serialize_name(name: Name) -> bytes:
    out = bytearray(b"/")
    for byte in str(name).encode("latin-1", "replace"):
        if byte in b"()<>[]{}/%# \t\r\n" or byte < 0x21 or byte > 0x7E:
            out += f"#{byte:02X}".encode("ascii")
        else:
            out.append(byte)
    return bytes(out)


def _serialize_string(raw: bytes) -> bytes:
    printable = sum(1 for b in raw if 0x20 <= b <= 0x7E)
    if raw and printable / len(raw) < 0.75:
        return b"<" + raw.hex().encode("ascii") + b">"
    out = bytearray(b"(")
    for byte in raw:
        if byte in _STRING_ESCAPES:
            out += _STRING_ESCAPES[byte]
        elif byte < 0x20:
            out += f"\\{byte:03o}".encode("ascii")
        else:
            out.append(byte)
    out += b")"
    return bytes(out)


def _serialize_number(value: float) -> bytes:
    if isinstance(value, bool):
        return b"true" if value else b"false"
    if isinstance(value, int) or value == int(value):
        return str(int(value)).encode("ascii")
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return text.encode("ascii")


def serialize(obj: Any) -> bytes:
    if obj is None:
        return b"null"
    if isinstance(obj, bool):
        return b"true" if obj else b"false"
    if isinstance(obj, Ref):
        return f"{obj.num} {obj.gen} R".encode("ascii")
    if isinstance(obj, Name):
        return _serialize_name(obj)
    if isinstance(obj, (int, float)):
        return _serialize_number(obj)
    if isinstance(obj, bytes):
        return _serialize_string(obj)
    if isinstance(obj, str):
        return _serialize_string(obj.encode("latin-1", "replace"))
    if isinstance(obj, list):
        return b"[ " + b" ".join(serialize(v) for v in obj) + b" ]"
    if isinstance(obj, Stream):
        d = dict(obj.dict)
        d["Length"] = len(obj.raw)
        return serialize_dict(d) + b"\nstream\n" + obj.raw + b"\nendstream"
    if isinstance(obj, dict):
        return serialize_dict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def serialize_dict(d: dict[str, Any]) -> bytes:
    parts = [b"<<"]
    for key, value in d.items():
        parts.append(_serialize_name(Name(key)) + b" " + serialize(value))
    parts.append(b">>")
    return b" ".join(parts)


class IncrementalWriter:
    def __init__(self, doc: PdfDocument):
        self.doc = doc
        size = doc.trailer.get("Size")
        known = max(doc._xref) if doc._xref else 0
        self._next = max(int(size) if isinstance(size, int) else 0, known + 1)
        self._objects: dict[int, tuple[int, Any]] = {}  # num -> (gen, obj)

    def add(self, obj: Any) -> Ref:
        num = self._next
        self._next += 1
        self._objects[num] = (0, obj)
        return Ref(num, 0)

    def update(self, ref: Ref, obj: Any) -> None:
        self._objects[ref.num] = (ref.gen, obj)

    def build(self) -> bytes:
        out = bytearray(self.doc.data)
        if not out.endswith(b"\n") and not out.endswith(b"\r"):
            out += b"\n"
        offsets: dict[int, tuple[int, int]] = {}
        for num in sorted(self._objects):
            gen, obj = self._objects[num]
            offsets[num] = (len(out), gen)
            out += f"{num} {gen} obj\n".encode("ascii")
            out += serialize(obj)
            out += b"\nendobj\n"

        entries = dict(offsets)
        prev = self.doc.last_startxref
        if prev is None:
            # Original xref was unusable; fold every scanned object in so the
            # appended table stands alone.
            for num, entry in self.doc._xref.items():
                if num not in entries and entry[0] == "n" and isinstance(entry[1], int):
                    entries[num] = (entry[1], entry[2] if len(entry) > 2 else 0)

        xref_at = len(out)
        out += b"xref\n"
        numbers = sorted(entries)
        i = 0
        while i < len(numbers):
            j = i
            while j + 1 < len(numbers) and numbers[j + 1] == numbers[j] + 1:
                j += 1
            out += f"{numbers[i]} {j - i + 1}\n".encode("ascii")
            for num in numbers[i : j + 1]:
                offset, gen = entries[num]
                out += f"{offset:010d} {gen:05d} n \n".encode("ascii")
            i = j + 1

        trailer: dict[str, Any] = {"Size": self._next, "Root": self.doc.trailer.get("Root")}
        if prev is not None:
            trailer["Prev"] = prev
        for key in ("Info", "ID"):
            if key in self.doc.trailer:
                trailer[key] = self.doc.trailer[key]
        out += b"trailer\n" + serialize_dict(trailer)
        out += f"\nstartxref\n{xref_at}\n%%EOF\n".encode("ascii")
        return bytes(out)
