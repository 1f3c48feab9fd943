"""Document handles, form-standard detection, widget enumeration, page
geometry, and page text: the parsing boundary the rest of the pipeline
builds on.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from .pdf.document import PageNode, PdfDocument, PdfEncryptedError, PdfError
from .pdf.objects import Name, Ref
from .pdf.text import page_text


class MalformedPdf(Exception):
    """The byte sequence is not a parseable PDF."""


class EncryptedPdf(Exception):
    """Password-protected document; callers skip these."""


class PageOutOfRange(IndexError):
    pass


class FormStandard(Enum):
    NONE = "none"
    ACROFORM = "acroform"
    XFA = "xfa"
    HYBRID = "hybrid"


class WidgetType(Enum):
    PUSH_BUTTON = "push_button"
    CHECK_BOX = "check_box"
    RADIO_BUTTON = "radio_button"
    TEXT = "text"
    CHOICE = "choice"
    SIGNATURE = "signature"


# Field flag bits (PDF 32000-1, table 226) and annotation flag bits (table 165).
_FF_RADIO = 1 << 15
_FF_PUSHBUTTON = 1 << 16
_AF_HIDDEN = 1 << 1
_AF_NOVIEW = 1 << 5

Rect = tuple[float, float, float, float]


@dataclass(frozen=True, slots=True)
class RawWidget:
    """One widget annotation, geometry in PDF user space (y-up)."""

    page_index: int
    field_type: WidgetType
    rect: Rect
    hidden: bool = False
    field_name: str | None = None


@dataclass(frozen=True, slots=True)
class PageGeometry:
    media_box: Rect
    rotation: int = 0

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.media_box
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"media box has non-positive extent: {self.media_box}")
        if self.rotation not in (0, 90, 180, 270):
            raise ValueError(f"rotation must be a multiple of 90, got {self.rotation}")

    @property
    def width(self) -> float:
        return self.media_box[2] - self.media_box[0]

    @property
    def height(self) -> float:
        return self.media_box[3] - self.media_box[1]


@dataclass(slots=True)
class DocumentHandle:
    """An opened document. Confine each handle to one worker at a time."""

    doc_id: str
    page_count: int
    source_uri: str | None = None
    data: bytes = field(default=b"", repr=False)
    warnings: Counter = field(default_factory=Counter, repr=False)
    _doc: PdfDocument | None = field(default=None, repr=False)

    @property
    def pdf(self) -> PdfDocument:
        assert self._doc is not None
        return self._doc


def compute_doc_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:32]


def open_document(data: bytes, source_uri: str | None = None) -> DocumentHandle:
    if not data:
        raise MalformedPdf("empty byte sequence")
    try:
        doc = PdfDocument(data)
        pages = doc.pages()
    except PdfEncryptedError as exc:
        raise EncryptedPdf(str(exc)) from exc
    except PdfError as exc:
        raise MalformedPdf(str(exc)) from exc
    except (RecursionError, MemoryError) as exc:
        raise MalformedPdf(f"pathological structure: {exc}") from exc
    if not pages:
        raise MalformedPdf("document has no pages")
    return DocumentHandle(
        doc_id=compute_doc_id(data),
        page_count=len(pages),
        source_uri=source_uri,
        data=data,
        _doc=doc,
    )


def open_path(path: str | Path) -> DocumentHandle:
    p = Path(path)
    return open_document(p.read_bytes(), source_uri=str(p))


def detect_form_standard(doc: DocumentHandle) -> FormStandard:
    try:
        form = doc.pdf.acroform
    except PdfError:
        return FormStandard.NONE
    if form is None:
        return FormStandard.NONE
    fields = doc.pdf.resolve(form.get("Fields"))
    has_tree = isinstance(fields, list) and len(fields) > 0
    has_xfa = form.get("XFA") is not None
    if has_tree and has_xfa:
        return FormStandard.HYBRID
    if has_xfa:
        return FormStandard.XFA
    if has_tree:
        return FormStandard.ACROFORM
    return FormStandard.NONE


def _inherited_field_attr(doc: PdfDocument, annot: dict, key: str, depth: int = 0) -> Any:
    node: Any = annot
    while isinstance(node, dict) and depth < 32:
        if key in node:
            return doc.resolve(node[key])
        node = doc.resolve(node.get("Parent"))
        depth += 1
    return None


def _field_name(doc: PdfDocument, annot: dict) -> str | None:
    parts: list[str] = []
    node: Any = annot
    depth = 0
    while isinstance(node, dict) and depth < 32:
        t = doc.resolve(node.get("T"))
        if isinstance(t, bytes):
            parts.append(_decode_pdf_string(t))
        node = doc.resolve(node.get("Parent"))
        depth += 1
    if not parts:
        return None
    return ".".join(reversed(parts))


def _decode_pdf_string(raw: bytes) -> str:
    if raw.startswith(b"\xfe\xff"):
        try:
            return raw[2:].decode("utf-16-be")
        except UnicodeDecodeError:
            pass
    return raw.decode("latin-1", "replace")


def _widget_type(doc: PdfDocument, annot: dict) -> WidgetType | None:
    ft = _inherited_field_attr(doc, annot, "FT")
    if not isinstance(ft, Name):
        return None
    ft_name = str(ft)
    if ft_name == "Tx":
        return WidgetType.TEXT
    if ft_name == "Ch":
        return WidgetType.CHOICE
    if ft_name == "Sig":
        return WidgetType.SIGNATURE
    if ft_name == "Btn":
        ff = _inherited_field_attr(doc, annot, "Ff")
        flags = int(ff) if isinstance(ff, (int, float)) else 0
        if flags & _FF_PUSHBUTTON:
            return WidgetType.PUSH_BUTTON
        if flags & _FF_RADIO:
            return WidgetType.RADIO_BUTTON
        return WidgetType.CHECK_BOX
    return None


def enumerate_widgets(doc: DocumentHandle) -> list[RawWidget]:
    """All widget annotations in (page_index, page annotation order).

    Unresolvable widgets (no field type anywhere in the parent chain, or a
    missing/garbled rectangle) are skipped and counted under
    ``doc.warnings["skipped_widgets"]``.
    """
    pdf = doc.pdf
    widgets: list[RawWidget] = []
    try:
        pages = pdf.pages()
    except PdfError as exc:
        raise MalformedPdf(str(exc)) from exc
    for page_index, page in enumerate(pages):
        for _, annot in page.annotations():
            subtype = annot.get("Subtype")
            if not isinstance(subtype, Name) or str(subtype) != "Widget":
                continue
            try:
                ftype = _widget_type(pdf, annot)
                rect = _annot_rect(pdf, annot)
            except PdfError:
                ftype, rect = None, None
            if ftype is None or rect is None:
                doc.warnings["skipped_widgets"] += 1
                continue
            f = pdf.resolve(annot.get("F"))
            flags = int(f) if isinstance(f, (int, float)) else 0
            widgets.append(
                RawWidget(
                    page_index=page_index,
                    field_type=ftype,
                    rect=rect,
                    hidden=bool(flags & (_AF_HIDDEN | _AF_NOVIEW)),
                    field_name=_field_name(pdf, annot),
                )
            )
    return widgets


def _annot_rect(pdf: PdfDocument, annot: dict) -> Rect | None:
    rect = pdf.resolve(annot.get("Rect"))
    if not isinstance(rect, list) or len(rect) < 4:
        return None
    try:
        x0, y0, x1, y1 = (float(pdf.resolve(v)) for v in rect[:4])
    except (TypeError, ValueError):
        return None
    return (min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))


def page_geometry(doc: DocumentHandle, page: int) -> PageGeometry:
    node = _page_node(doc, page)
    box = node.media_box()
    if box is None:
        box = (0.0, 0.0, 612.0, 792.0)
        doc.warnings["default_media_box"] += 1
    x0, y0, x1, y1 = box
    if not (x1 > x0 and y1 > y0):
        raise MalformedPdf(f"page {page} has a degenerate media box {box}")
    rotation = _normalize_rotation(node.rotation_raw(), page)
    return PageGeometry(media_box=(x0, y0, x1, y1), rotation=rotation)


def _normalize_rotation(raw: Any, page: int) -> int:
    if raw is None:
        return 0
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise MalformedPdf(f"page {page} has non-numeric /Rotate {raw!r}")
    if value != int(value):
        raise MalformedPdf(f"page {page} rotation {raw!r} is not a multiple of 90")
    rotation = int(value) % 360
    if rotation % 90 != 0:
        raise MalformedPdf(f"page {page} rotation {raw!r} is not a multiple of 90")
    return rotation


def extract_page_text(doc: DocumentHandle, page: int) -> str:
    node = _page_node(doc, page)
    try:
        return page_text(node)
    except (PdfError, ValueError):
        return ""


def _page_node(doc: DocumentHandle, page: int) -> PageNode:
    if not (0 <= page < doc.page_count):
        raise PageOutOfRange(f"page {page} out of range [0, {doc.page_count})")
    return doc.pdf.pages()[page]
