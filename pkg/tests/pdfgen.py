"""Hand-rolled PDF fixture generator.

Builds small classic-xref PDFs with precise control over form structure
(AcroForm/XFA entries, field types and flags, radio groups, rotations,
inherited media boxes) that no off-the-shelf writer exposes. Field rects are
optionally drawn into the page content so pages look like real flat forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field


def _fmt(value) -> str:
    if isinstance(value, float):
        text = f"{value:.4f}".rstrip("0").rstrip(".")
        return text if text else "0"
    return str(value)


def _escape(text: str) -> str:
    return text.replace("\\", r"\\").replace("(", r"\(").replace(")", r"\)")


@dataclass
class FieldSpec:
    kind: str  # text | checkbox | radio_group | pushbutton | choice | signature
    rect: tuple[float, float, float, float] | None = None
    kid_rects: list[tuple[float, float, float, float]] = field(default_factory=list)
    name: str | None = None
    hidden: bool = False
    page: int = 0


@dataclass
class PageSpec:
    width: float = 612.0
    height: float = 792.0
    rotate: int | None = None
    text: list[tuple[float, float, float, str]] = field(default_factory=list)
    boxes: list[tuple[float, float, float, float]] = field(default_factory=list)
    filled_boxes: list[tuple[float, float, float, float]] = field(default_factory=list)
    lines: list[tuple[float, float, float, float]] = field(default_factory=list)
    own_media_box: bool = True  # False: inherit MediaBox from the page tree node


class RawPdfBuilder:
    """Sequential object writer with a classic xref table."""

    def __init__(self) -> None:
        self._bodies: list[bytes] = []

    def add(self, body: str | bytes) -> int:
        if isinstance(body, str):
            body = body.encode("latin-1")
        self._bodies.append(body)
        return len(self._bodies)

    def reserve(self) -> int:
        self._bodies.append(b"")
        return len(self._bodies)

    def set(self, num: int, body: str | bytes) -> None:
        if isinstance(body, str):
            body = body.encode("latin-1")
        self._bodies[num - 1] = body

    def add_stream(self, extra: str, data: bytes) -> int:
        head = f"<< /Length {len(data)} {extra} >>\nstream\n".encode("latin-1")
        return self.add(head + data + b"\nendstream")

    def build(self, root: int, header_version: str = "1.4") -> bytes:
        out = bytearray(f"%PDF-{header_version}\n%\xb5\xb5\xb5\xb5\n".encode("latin-1"))
        offsets = [0]
        for num, body in enumerate(self._bodies, start=1):
            offsets.append(len(out))
            out += f"{num} 0 obj\n".encode("latin-1")
            out += body
            out += b"\nendobj\n"
        xref_at = len(out)
        count = len(self._bodies) + 1
        out += f"xref\n0 {count}\n".encode("latin-1")
        out += b"0000000000 65535 f \n"
        for off in offsets[1:]:
            out += f"{off:010d} 00000 n \n".encode("latin-1")
        out += (
            f"trailer\n<< /Size {count} /Root {root} 0 R >>\n"
            f"startxref\n{xref_at}\n%%EOF\n"
        ).encode("latin-1")
        return bytes(out)


def _content_stream(page: PageSpec) -> bytes:
    ops: list[str] = []
    for x, y, w, h in page.filled_boxes:
        ops.append(f"0.85 g {_fmt(x)} {_fmt(y)} {_fmt(w)} {_fmt(h)} re f 0 g")
    for x, y, w, h in page.boxes:
        ops.append(f"0.5 w 0 G {_fmt(x)} {_fmt(y)} {_fmt(w)} {_fmt(h)} re S")
    for x0, y0, x1, y1 in page.lines:
        ops.append(f"0.75 w 0 G {_fmt(x0)} {_fmt(y0)} m {_fmt(x1)} {_fmt(y1)} l S")
    for x, y, size, text in page.text:
        ops.append(f"BT /F1 {_fmt(size)} Tf {_fmt(x)} {_fmt(y)} Td ({_escape(text)}) Tj ET")
    return " ".join(ops).encode("latin-1")


def make_pdf(
    pages: list[PageSpec],
    fields: list[FieldSpec] | None = None,
    include_acroform: bool | None = None,
    xfa: bool = False,
    need_appearances: bool = False,
    draw_field_boxes: bool = False,
) -> bytes:
    """Assemble a PDF. AcroForm is emitted when fields exist, when `xfa`,
    or when forced via `include_acroform`."""
    fields = list(fields or [])
    builder = RawPdfBuilder()
    catalog_num = builder.reserve()
    tree_num = builder.reserve()
    font_num = builder.add(
        "<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica /Encoding /WinAnsiEncoding >>"
    )

    page_nums: list[int] = []
    page_annots: dict[int, list[int]] = {}
    field_roots: list[int] = []

    for page_index, page in enumerate(pages):
        if draw_field_boxes:
            for spec in fields:
                if spec.page != page_index:
                    continue
                rects = [spec.rect] if spec.rect else spec.kid_rects
                for rect in rects:
                    if rect is None:
                        continue
                    x0, y0, x1, y1 = rect
                    page.boxes.append((min(x0, x1), min(y0, y1), abs(x1 - x0), abs(y1 - y0)))
        content_num = builder.add_stream("", _content_stream(page))
        page_num = builder.reserve()
        page_nums.append(page_num)
        page_annots[page_index] = []
        _ = content_num  # body written once annots are known

    for spec in fields:
        nums = _emit_field(builder, spec, page_nums)
        field_roots.append(nums[0])
        for widget_num in nums[1]:
            page_annots[spec.page].append(widget_num)

    acro_num = None
    want_acroform = include_acroform if include_acroform is not None else bool(fields) or xfa
    if want_acroform:
        parts = [f"/Fields [{' '.join(f'{n} 0 R' for n in field_roots)}]"]
        parts.append(f"/DA (/Helv 0 Tf 0 g) /DR << /Font << /Helv {font_num} 0 R >> >>")
        if need_appearances:
            parts.append("/NeedAppearances true")
        if xfa:
            xml = b"<xdp:xdp xmlns:xdp='http://ns.adobe.com/xdp/'><template/></xdp:xdp>"
            xfa_num = builder.add_stream("", xml)
            parts.append(f"/XFA {xfa_num} 0 R")
        acro_num = builder.add(f"<< {' '.join(parts)} >>")

    tree_media = ""
    if any(not p.own_media_box for p in pages):
        first = pages[0]
        tree_media = f" /MediaBox [0 0 {_fmt(first.width)} {_fmt(first.height)}]"

    for page_index, page in enumerate(pages):
        page_num = page_nums[page_index]
        content_ref = page_num - 1
        entries = [
            "/Type /Page",
            f"/Parent {tree_num} 0 R",
            f"/Contents {content_ref} 0 R",
            f"/Resources << /Font << /F1 {font_num} 0 R >> >>",
        ]
        if page.own_media_box:
            entries.append(f"/MediaBox [0 0 {_fmt(page.width)} {_fmt(page.height)}]")
        if page.rotate is not None:
            entries.append(f"/Rotate {page.rotate}")
        annots = page_annots.get(page_index, [])
        if annots:
            entries.append(f"/Annots [{' '.join(f'{n} 0 R' for n in annots)}]")
        builder.set(page_num, f"<< {' '.join(entries)} >>")

    kids = " ".join(f"{n} 0 R" for n in page_nums)
    builder.set(
        tree_num,
        f"<< /Type /Pages /Kids [{kids}] /Count {len(page_nums)}{tree_media} >>",
    )
    catalog_entries = [f"/Type /Catalog /Pages {tree_num} 0 R"]
    if acro_num is not None:
        catalog_entries.append(f"/AcroForm {acro_num} 0 R")
    builder.set(catalog_num, f"<< {' '.join(catalog_entries)} >>")
    return builder.build(catalog_num)


_FT = {
    "text": "Tx",
    "checkbox": "Btn",
    "pushbutton": "Btn",
    "radio_group": "Btn",
    "choice": "Ch",
    "signature": "Sig",
}


def _emit_field(
    builder: RawPdfBuilder, spec: FieldSpec, page_nums: list[int]
) -> tuple[int, list[int]]:
    ft = _FT[spec.kind]
    flags = 0
    if spec.kind == "pushbutton":
        flags = 1 << 16
    elif spec.kind == "radio_group":
        flags = 1 << 15
    annot_f = 2 if spec.hidden else 4  # Hidden vs Print
    name = spec.name or f"{spec.kind}_{id(spec) % 9999}"
    page_ref = page_nums[spec.page]

    if spec.kind == "radio_group" or (spec.kid_rects and spec.rect is None):
        parent_num = builder.reserve()
        kid_nums = []
        for i, rect in enumerate(spec.kid_rects):
            x0, y0, x1, y1 = rect
            kid = builder.add(
                f"<< /Type /Annot /Subtype /Widget /Parent {parent_num} 0 R "
                f"/Rect [{_fmt(x0)} {_fmt(y0)} {_fmt(x1)} {_fmt(y1)}] "
                f"/F {annot_f} /P {page_ref} 0 R /AS /Off >>"
            )
            kid_nums.append(kid)
            _ = i
        kids = " ".join(f"{n} 0 R" for n in kid_nums)
        builder.set(
            parent_num,
            f"<< /FT /{ft} /T ({_escape(name)}) /Ff {flags} /V /Off /Kids [{kids}] >>",
        )
        return parent_num, kid_nums

    assert spec.rect is not None
    x0, y0, x1, y1 = spec.rect
    extra = ""
    if spec.kind == "text":
        extra = " /DA (/Helv 0 Tf 0 g)"
    elif spec.kind == "checkbox":
        extra = " /V /Off /AS /Off"
    num = builder.add(
        f"<< /Type /Annot /Subtype /Widget /FT /{ft} /T ({_escape(name)}) "
        f"/Ff {flags} /Rect [{_fmt(x0)} {_fmt(y0)} {_fmt(x1)} {_fmt(y1)}] "
        f"/F {annot_f} /P {page_ref} 0 R{extra} >>"
    )
    return num, [num]


# ---------------------------------------------------------------- fixtures


def flat_pdf(n_pages: int = 1, texts: list[str] | None = None) -> bytes:
    pages = []
    for i in range(n_pages):
        label = texts[i] if texts and i < len(texts) else f"Page {i} body text"
        pages.append(PageSpec(text=[(72.0, 720.0, 12.0, label)]))
    return make_pdf(pages)


def simple_form_pdf() -> bytes:
    """One page: a text field and a checkbox, boxes drawn in content."""
    fields = [
        FieldSpec("text", rect=(72, 640, 272, 660), name="name"),
        FieldSpec("checkbox", rect=(72, 600, 86, 614), name="agree"),
    ]
    page = PageSpec(
        text=[(72, 700, 12, "Name:"), (92, 602, 10, "I agree")],
    )
    return make_pdf([page], fields, draw_field_boxes=True)


def radio_form_pdf(n_kids: int = 3) -> bytes:
    kid_rects = [(72 + 30 * i, 500, 86 + 30 * i, 514) for i in range(n_kids)]
    fields = [FieldSpec("radio_group", kid_rects=kid_rects, name="color")]
    return make_pdf([PageSpec()], fields, draw_field_boxes=True)


def button_only_pdf() -> bytes:
    fields = [FieldSpec("pushbutton", rect=(200, 100, 280, 130), name="submit")]
    return make_pdf([PageSpec(text=[(72, 720, 12, "Press submit")])], fields)


def xfa_only_pdf() -> bytes:
    return make_pdf([PageSpec(text=[(72, 720, 12, "Dynamic form shell")])], xfa=True)


def hybrid_pdf() -> bytes:
    fields = [FieldSpec("text", rect=(72, 640, 272, 660), name="hybrid_field")]
    return make_pdf([PageSpec()], fields, xfa=True)


def image_only_page_pdf() -> bytes:
    return make_pdf([PageSpec(filled_boxes=[(0, 0, 612, 792)])])


def encrypted_pdf() -> bytes:
    import io

    from reportlab.lib.pdfencrypt import StandardEncryption
    from reportlab.pdfgen import canvas

    buf = io.BytesIO()
    enc = StandardEncryption("userpass", ownerPassword="ownerpass")
    c = canvas.Canvas(buf, pagesize=(612, 792), encrypt=enc)
    c.drawString(72, 720, "secret")
    c.save()
    return buf.getvalue()


def reportlab_form_pdf() -> bytes:
    """An AcroForm authored by an independent writer (cross-validation)."""
    import io

    from reportlab.pdfgen import canvas

    buf = io.BytesIO()
    c = canvas.Canvas(buf, pagesize=(612, 792))
    c.drawString(72, 700, "Full name:")
    c.acroForm.textfield(name="fullname", x=150, y=688, width=220, height=18)
    c.drawString(72, 650, "Subscribe:")
    c.acroForm.checkbox(name="subscribe", x=150, y=646, size=14)
    c.drawString(72, 600, "Color:")
    c.acroForm.radio(name="color", value="red", x=150, y=596, size=14)
    c.acroForm.radio(name="color", value="blue", x=180, y=596, size=14)
    c.save()
    return buf.getvalue()
