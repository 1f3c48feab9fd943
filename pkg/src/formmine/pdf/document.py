"""Low-level PDF document: cross-reference loading and the object graph.

Handles classic xref tables, cross-reference streams, object streams, and
incremental updates. When the xref machinery is broken the loader falls back
to a brute-force scan of ``N G obj`` markers, keeping the newest offset per
object number.
"""

from __future__ import annotations

import re
from typing import Any, Iterator

from .filters import FilterError, decode_stream
from .lexer import Lexer, ObjectParser, ParseError
from .objects import Name, Ref, Stream

_OBJ_RE = re.compile(rb"(\d{1,10})\s+(\d{1,5})\s+obj\b")
_STARTXREF_RE = re.compile(rb"startxref\s+(\d+)")


class PdfError(Exception):
    """Document-level structural failure."""


class PdfEncryptedError(PdfError):
    """The document carries an /Encrypt dictionary."""


class PdfDocument:
    """Parsed object graph over an immutable byte buffer."""

    def __init__(self, data: bytes):
        if not data:
            raise PdfError("empty byte sequence")
        self.data = data
        self.trailer: dict[str, Any] = {}
        self.last_startxref: int | None = None
        self._xref: dict[int, tuple] = {}
        self._cache: dict[int, Any] = {}
        self._objstm_cache: dict[int, dict[int, Any]] = {}
        self._scan_table: dict[int, tuple[int, int]] | None = None
        self._pages: list[PageNode] | None = None
        self._load()
        if "Encrypt" in self.trailer:
            raise PdfEncryptedError("document is encrypted")

    # ------------------------------------------------------------------ load

    def _load(self) -> None:
        if not self.data.lstrip(b"\x00\t\r\n\x0c ").startswith(b"%PDF"):
            # Some generators put junk before the header; look for it nearby.
            if b"%PDF" not in self.data[:1024]:
                raise PdfError("missing %PDF header")
        try:
            self._load_xref_chain()
        except (ParseError, PdfError, FilterError, ValueError, KeyError):
            self._xref.clear()
        if not self._xref or "Root" not in self.trailer:
            self._fallback_scan()
        if "Root" not in self.trailer:
            raise PdfError("no document catalog")

    def _load_xref_chain(self) -> None:
        tail = self.data[-2048:]
        matches = list(_STARTXREF_RE.finditer(tail))
        if not matches:
            raise PdfError("missing startxref")
        offset = int(matches[-1].group(1))
        self.last_startxref = offset
        seen: set[int] = set()
        first = True
        while offset and offset not in seen and 0 <= offset < len(self.data):
            seen.add(offset)
            trailer = self._load_xref_section(offset)
            for key, value in trailer.items():
                self.trailer.setdefault(key, value)
            if first and "XRefStm" in trailer:
                hybrid = trailer["XRefStm"]
                if isinstance(hybrid, int) and hybrid not in seen:
                    seen.add(hybrid)
                    self._load_xref_section(hybrid)
            first = False
            prev = trailer.get("Prev")
            offset = prev if isinstance(prev, int) else 0

    def _load_xref_section(self, offset: int) -> dict[str, Any]:
        lex = Lexer(self.data, offset)
        lex.skip_whitespace()
        if lex.peek(4) == b"xref":
            return self._load_xref_table(lex)
        return self._load_xref_stream(offset)

    def _load_xref_table(self, lex: Lexer) -> dict[str, Any]:
        lex.pos += 4
        while True:
            lex.skip_whitespace()
            if lex.peek(7) == b"trailer":
                lex.pos += 7
                parser = ObjectParser(self.data, lex.pos)
                trailer = parser.parse_object(allow_stream=False)
                if not isinstance(trailer, dict):
                    raise PdfError("bad trailer")
                return trailer
            header = ObjectParser(self.data, lex.pos)
            start = header.parse_object(allow_stream=False)
            count = header.parse_object(allow_stream=False)
            if not isinstance(start, int) or not isinstance(count, int):
                raise PdfError("bad xref subsection header")
            lex.pos = header.pos
            lex.skip_whitespace()
            for i in range(count):
                entry = self.data[lex.pos : lex.pos + 20]
                if len(entry) < 18:
                    raise PdfError("truncated xref entry")
                try:
                    where = int(entry[0:10])
                    gen = int(entry[11:16])
                except ValueError as exc:
                    raise PdfError("bad xref entry") from exc
                kind = entry[17:18]
                num = start + i
                if kind == b"n" and num not in self._xref:
                    self._xref[num] = ("n", where, gen)
                # 20-byte entries, but tolerate 19-byte (single EOL) writers.
                advance = 20
                if entry[18:19] not in b"\r\n \x00" and entry[18:19] != b"":
                    advance = 19
                lex.pos += advance

    def _load_xref_stream(self, offset: int) -> dict[str, Any]:
        parser = ObjectParser(self.data, offset, resolve_length=self._resolve_for_length)
        header = _OBJ_RE.match(self.data, parser.pos) or _OBJ_RE.match(
            self.data, Lexer(self.data, parser.pos).pos
        )
        # Parse "num gen obj" prefix leniently.
        lex = Lexer(self.data, offset)
        lex.read_keyword()  # num
        lex.read_keyword()  # gen
        lex.expect_keyword(b"obj")
        parser.pos = lex.pos
        obj = parser.parse_object()
        if not isinstance(obj, Stream):
            raise PdfError("startxref does not point at an xref stream")
        data = decode_stream(obj, self.resolve)
        widths = [int(w) for w in obj.dict.get("W", [])]
        if len(widths) < 3:
            raise PdfError("bad /W in xref stream")
        size = obj.dict.get("Size", 0)
        index = obj.dict.get("Index", [0, size])
        entry_len = sum(widths)
        pos = 0
        for pair_start in range(0, len(index) - 1, 2):
            start, count = index[pair_start], index[pair_start + 1]
            for i in range(count):
                if pos + entry_len > len(data):
                    break
                fields = []
                for w in widths:
                    fields.append(int.from_bytes(data[pos : pos + w], "big") if w else None)
                    pos += w
                ftype = fields[0] if fields[0] is not None else 1
                num = start + i
                if num in self._xref:
                    continue
                if ftype == 1:
                    self._xref[num] = ("n", fields[1], fields[2] or 0)
                elif ftype == 2:
                    self._xref[num] = ("objstm", fields[1], fields[2])
        return obj.dict

    def _fallback_scan(self) -> None:
        table: dict[int, tuple[int, int]] = {}
        for m in _OBJ_RE.finditer(self.data):
            table[int(m.group(1))] = (m.start(), int(m.group(2)))
        if not table:
            raise PdfError("no indirect objects found")
        self._scan_table = table
        self._xref = {num: ("n", where, gen) for num, (where, gen) in table.items()}
        self._cache.clear()
        if "Root" not in self.trailer:
            trailer = self._scan_for_trailer()
            if trailer:
                for key, value in trailer.items():
                    self.trailer.setdefault(key, value)
        if "Root" not in self.trailer:
            root = self._scan_for_catalog()
            if root is not None:
                self.trailer["Root"] = root

    def _scan_for_trailer(self) -> dict[str, Any] | None:
        pos = len(self.data)
        merged: dict[str, Any] = {}
        while True:
            idx = self.data.rfind(b"trailer", 0, pos)
            if idx < 0:
                break
            try:
                obj = ObjectParser(self.data, idx + 7).parse_object(allow_stream=False)
                if isinstance(obj, dict):
                    for key, value in obj.items():
                        merged.setdefault(key, value)
            except ParseError:
                pass
            pos = idx
        return merged or None

    def _scan_for_catalog(self) -> Ref | None:
        for num in sorted(self._xref):
            try:
                obj = self.get_object(num)
            except (ParseError, PdfError):
                continue
            d = obj.dict if isinstance(obj, Stream) else obj
            if isinstance(d, dict) and str(d.get("Type", "")) == "Catalog":
                return Ref(num, 0)
        return None

    # --------------------------------------------------------------- objects

    def _resolve_for_length(self, ref: Ref) -> Any:
        try:
            return self.get_object(ref.num)
        except (PdfError, ParseError):
            return None

    def get_object(self, num: int, _depth: int = 0) -> Any:
        if num in self._cache:
            return self._cache[num]
        if _depth > 32:
            raise PdfError("reference cycle")
        entry = self._xref.get(num)
        obj: Any = None
        if entry is None:
            obj = self._get_from_scan(num)
        elif entry[0] == "n":
            obj = self._parse_indirect(num, entry[1])
            if obj is _MISSING:
                obj = self._get_from_scan(num)
        else:
            obj = self._get_from_objstm(entry[1], entry[2], num)
        self._cache[num] = obj
        return obj

    def _parse_indirect(self, num: int, offset: int) -> Any:
        if offset is None or not (0 <= offset < len(self.data)):
            return _MISSING
        lex = Lexer(self.data, offset)
        try:
            lex.skip_whitespace()
            m = _OBJ_RE.match(self.data, lex.pos)
            if m is None or int(m.group(1)) != num:
                return _MISSING
            parser = ObjectParser(self.data, m.end(), resolve_length=self._resolve_for_length)
            return parser.parse_object()
        except ParseError:
            return _MISSING

    def _get_from_scan(self, num: int) -> Any:
        if self._scan_table is None:
            table: dict[int, tuple[int, int]] = {}
            for m in _OBJ_RE.finditer(self.data):
                table[int(m.group(1))] = (m.start(), int(m.group(2)))
            self._scan_table = table
        where = self._scan_table.get(num)
        if where is None:
            return None
        obj = self._parse_indirect(num, where[0])
        return None if obj is _MISSING else obj

    def _get_from_objstm(self, stm_num: int, idx: int, want: int) -> Any:
        objects = self._objstm_cache.get(stm_num)
        if objects is None:
            stm = self.get_object(stm_num)
            objects = {}
            if isinstance(stm, Stream):
                try:
                    data = decode_stream(stm, self.resolve)
                    n = int(self.resolve(stm.dict.get("N", 0)) or 0)
                    first = int(self.resolve(stm.dict.get("First", 0)) or 0)
                    head = ObjectParser(data, 0)
                    pairs = []
                    for _ in range(n):
                        onum = head.parse_object(allow_stream=False)
                        ooff = head.parse_object(allow_stream=False)
                        pairs.append((onum, ooff))
                    for onum, ooff in pairs:
                        try:
                            objects[onum] = ObjectParser(data, first + ooff).parse_object(
                                allow_stream=False
                            )
                        except ParseError:
                            objects[onum] = None
                except (FilterError, ParseError, ValueError):
                    pass
            self._objstm_cache[stm_num] = objects
        return objects.get(want)

    def resolve(self, obj: Any, _depth: int = 0) -> Any:
        while isinstance(obj, Ref):
            if _depth > 32:
                raise PdfError("reference cycle")
            obj = self.get_object(obj.num, _depth)
            _depth += 1
        return obj

    def stream_data(self, obj: Any) -> bytes:
        obj = self.resolve(obj)
        if not isinstance(obj, Stream):
            return b""
        try:
            return decode_stream(obj, self.resolve)
        except FilterError:
            return b""

    # ----------------------------------------------------------------- pages

    @property
    def catalog(self) -> dict[str, Any]:
        root = self.resolve(self.trailer.get("Root"))
        if not isinstance(root, dict):
            raise PdfError("catalog is not a dictionary")
        return root

    def pages(self) -> list[PageNode]:
        if self._pages is not None:
            return self._pages
        pages: list[PageNode] = []
        root = self.catalog
        tree = self.resolve(root.get("Pages"))
        if not isinstance(tree, dict):
            raise PdfError("missing page tree")
        inheritable = ("MediaBox", "Rotate", "Resources", "CropBox")
        visited: set[int] = set()

        def walk(node_ref: Any, node: dict, inherited: dict[str, Any]) -> None:
            if len(pages) > 100_000:
                raise PdfError("page tree too large")
            current = dict(inherited)
            for key in inheritable:
                if key in node:
                    current[key] = node[key]
            kids = self.resolve(node.get("Kids"))
            node_type = str(node.get("Type", ""))
            if node_type == "Page" or (not isinstance(kids, list) and node_type != "Pages"):
                pages.append(PageNode(self, node_ref, node, current))
                return
            if not isinstance(kids, list):
                return
            for kid_ref in kids:
                marker = kid_ref.num if isinstance(kid_ref, Ref) else id(kid_ref)
                if marker in visited:
                    continue
                visited.add(marker)
                kid = self.resolve(kid_ref)
                if isinstance(kid, dict):
                    walk(kid_ref, kid, current)

        tree_ref = root.get("Pages")
        if isinstance(tree_ref, Ref):
            visited.add(tree_ref.num)
        walk(tree_ref, tree, {})
        self._pages = pages
        return pages

    @property
    def acroform(self) -> dict[str, Any] | None:
        form = self.resolve(self.catalog.get("AcroForm"))
        if isinstance(form, Stream):
            form = form.dict
        return form if isinstance(form, dict) else None


class PageNode:
    """A leaf of the page tree with inherited attributes applied."""

    __slots__ = ("doc", "ref", "raw", "inherited")

    def __init__(self, doc: PdfDocument, ref: Any, raw: dict, inherited: dict[str, Any]):
        self.doc = doc
        self.ref = ref if isinstance(ref, Ref) else None
        self.raw = raw
        self.inherited = inherited

    def get(self, key: str, default: Any = None) -> Any:
        value = self.raw.get(key, self.inherited.get(key, default))
        return self.doc.resolve(value)

    def media_box(self) -> tuple[float, float, float, float] | None:
        box = self.get("MediaBox")
        if not isinstance(box, list) or len(box) < 4:
            return None
        try:
            vals = [float(self.doc.resolve(v)) for v in box[:4]]
        except (TypeError, ValueError):
            return None
        x0, y0, x1, y1 = vals
        return (min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))

    def rotation_raw(self) -> Any:
        return self.get("Rotate", 0)

    def annotations(self) -> Iterator[tuple[Any, dict]]:
        annots = self.get("Annots")
        if not isinstance(annots, list):
            return
        for entry in annots:
            annot = self.doc.resolve(entry)
            if isinstance(annot, dict):
                yield entry, annot

    def content_bytes(self) -> bytes:
        contents = self.get("Contents")
        if isinstance(contents, list):
            parts = [self.doc.stream_data(c) for c in contents]
            return b"\n".join(parts)
        if isinstance(contents, Stream):
            return self.doc.stream_data(contents)
        return b""


class _Missing:
    __slots__ = ()


_MISSING = _Missing()
