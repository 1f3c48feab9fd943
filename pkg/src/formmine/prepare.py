"""Write interactive AcroForm widgets into a flat PDF from detections, and
verify the result by mining it back.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .geometry import pixels_to_pdf_rect, rendered_size
from .metrics import Detection
from .mining import CleaningConfig, FieldClass, mine_document, rect_iou
from .pdf.objects import Name, Ref, Stream
from .pdf.writer import IncrementalWriter
from .pdfmodel import (
    DocumentHandle,
    FormStandard,
    MalformedPdf,
    Rect,
    detect_form_standard,
    open_document,
    page_geometry,
)


class ExistingForm(Exception):
    """Input already carries form objects and the policy is Refuse."""


class GeometryMismatch(ValueError):
    """Manifest geometry disagrees with the PDF being prepared."""


class OverlapPolicy(Enum):
    KEEP_HIGHER_SCORE = "keep_higher_score"
    KEEP_ALL = "keep_all"


class ExistingFormPolicy(Enum):
    REFUSE = "refuse"
    APPEND = "append"


@dataclass(frozen=True, slots=True)
class PrepareConfig:
    score_threshold: float = 0.5
    overlap_policy: OverlapPolicy = OverlapPolicy.KEEP_HIGHER_SCORE
    overlap_iou: float = 0.5
    existing_form_policy: ExistingFormPolicy = ExistingFormPolicy.REFUSE

    def __post_init__(self) -> None:
        if not (0.0 <= self.score_threshold <= 1.0):
            raise ValueError("score_threshold must be in [0, 1]")


@dataclass(frozen=True, slots=True)
class PreparedField:
    cls: FieldClass
    rect: Rect
    name: str
    page_index: int


def name_fields(drafts: Sequence[PreparedField]) -> list[PreparedField]:
    """Assign unique names `{class_word}_{page}_{k}` with k counted in
    reading order (top-to-bottom, then left-to-right) per page."""
    ordered = sorted(drafts, key=lambda f: (f.page_index, -f.rect[3], f.rect[0]))
    counters: dict[int, int] = {}
    named = []
    for draft in ordered:
        k = counters.get(draft.page_index, 0)
        counters[draft.page_index] = k + 1
        named.append(
            PreparedField(
                cls=draft.cls,
                rect=draft.rect,
                name=f"{draft.cls.word}_{draft.page_index}_{k}",
                page_index=draft.page_index,
            )
        )
    return named


def _select_detections(
    dets: Iterable[Detection], doc_id: str, cfg: PrepareConfig
) -> dict[int, list[Detection]]:
    by_page: dict[int, list[Detection]] = {}
    for det in dets:
        if det.image_id[0] != doc_id or det.score < cfg.score_threshold:
            continue
        by_page.setdefault(det.image_id[1], []).append(det)
    if cfg.overlap_policy is OverlapPolicy.KEEP_ALL:
        return by_page
    filtered: dict[int, list[Detection]] = {}
    for page, page_dets in by_page.items():
        ranked = sorted(range(len(page_dets)), key=lambda i: -page_dets[i].score)
        kept_idx: list[int] = []
        for i in ranked:
            det = page_dets[i]
            a = (det.box.x, det.box.y, det.box.x + det.box.w, det.box.y + det.box.h)
            clash = False
            for j in kept_idx:
                other = page_dets[j]
                if other.cls != det.cls:
                    continue
                b = (
                    other.box.x,
                    other.box.y,
                    other.box.x + other.box.w,
                    other.box.y + other.box.h,
                )
                if rect_iou(a, b) >= cfg.overlap_iou:
                    clash = True
                    break
            if not clash:
                kept_idx.append(i)
        filtered[page] = [page_dets[i] for i in sorted(kept_idx)]
    return filtered


def prepare_form(
    flat_pdf: bytes,
    detections: Iterable[Detection],
    manifest_rows: Sequence,
    cfg: PrepareConfig | None = None,
) -> bytes:
    """Insert one widget per surviving detection into the PDF.

    Geometry and render scale come from the manifest rows recorded when the
    pages were rasterized; the document-level NeedAppearances flag is set so
    viewers regenerate field appearances. Original bytes are preserved via
    an incremental update.
    """
    cfg = cfg or PrepareConfig()
    doc = open_document(flat_pdf)
    rows = {row.page_index: row for row in manifest_rows if row.doc_id == doc.doc_id}
    by_page = _select_detections(detections, doc.doc_id, cfg)
    by_page = {p: d for p, d in by_page.items() if d}
    if not by_page:
        return flat_pdf

    drafts: list[PreparedField] = []
    for page_index, page_dets in sorted(by_page.items()):
        row = rows.get(page_index)
        if row is None:
            raise GeometryMismatch(f"no manifest row for page {page_index}")
        geom = page_geometry(doc, page_index)
        expected = rendered_size(geom, row.scale)
        if expected != (row.width_px, row.height_px):
            raise GeometryMismatch(
                f"page {page_index}: manifest says {row.width_px}x{row.height_px}px, "
                f"PDF geometry renders {expected[0]}x{expected[1]}px at scale {row.scale}"
            )
        media = geom.media_box
        for det in page_dets:
            rect = pixels_to_pdf_rect(det.box, geom, row.scale)
            rect = (
                max(rect[0], media[0]),
                max(rect[1], media[1]),
                min(rect[2], media[2]),
                min(rect[3], media[3]),
            )
            drafts.append(PreparedField(cls=det.cls, rect=rect, name="", page_index=page_index))

    standard = detect_form_standard(doc)
    if standard is not FormStandard.NONE and cfg.existing_form_policy is ExistingFormPolicy.REFUSE:
        raise ExistingForm(f"input already carries a {standard.value} form")

    return _write_fields(doc, name_fields(drafts), append_to_existing=standard is not FormStandard.NONE)


def _appearance(writer: IncrementalWriter, w: float, h: float, drawing: bytes) -> Ref:
    stream = Stream(
        dict={
            "Type": Name("XObject"),
            "Subtype": Name("Form"),
            "BBox": [0, 0, round(w, 2), round(h, 2)],
            "Resources": {},
        },
        raw=drawing,
    )
    return writer.add(stream)


def _box_drawing(w: float, h: float) -> bytes:
    return f"q 1 w 0 G 0.5 0.5 {max(w - 1, 0.5):.2f} {max(h - 1, 0.5):.2f} re S Q".encode("ascii")


def _check_drawing(w: float, h: float) -> bytes:
    return (
        f"q 1 w 0 G 0.5 0.5 {max(w - 1, 0.5):.2f} {max(h - 1, 0.5):.2f} re S "
        f"1.5 w {0.2 * w:.2f} {0.5 * h:.2f} m {0.45 * w:.2f} {0.22 * h:.2f} l "
        f"{0.8 * w:.2f} {0.78 * h:.2f} l S Q"
    ).encode("ascii")


def _write_fields(
    doc: DocumentHandle, fields: list[PreparedField], append_to_existing: bool
) -> bytes:
    pdf = doc.pdf
    writer = IncrementalWriter(pdf)
    pages = pdf.pages()
    font_ref = writer.add(
        {
            "Type": Name("Font"),
            "Subtype": Name("Type1"),
            "BaseFont": Name("Helvetica"),
            "Encoding": Name("WinAnsiEncoding"),
        }
    )

    field_refs: list[Ref] = []
    refs_by_page: dict[int, list[Ref]] = {}
    for prepared in fields:
        page = pages[prepared.page_index]
        if page.ref is None:
            raise MalformedPdf("page object is not indirect; cannot attach widgets")
        x0, y0, x1, y1 = prepared.rect
        w, h = x1 - x0, y1 - y0
        widget: dict = {
            "Type": Name("Annot"),
            "Subtype": Name("Widget"),
            "T": prepared.name.encode("latin-1"),
            "Rect": [round(v, 2) for v in prepared.rect],
            "F": 4,
            "P": page.ref,
            "MK": {"BC": [0, 0, 0]},
            "BS": {"W": 1, "S": Name("S")},
        }
        if prepared.cls is FieldClass.TEXT_INPUT:
            widget["FT"] = Name("Tx")
            widget["DA"] = b"/Helv 0 Tf 0 g"
            widget["AP"] = {"N": _appearance(writer, w, h, _box_drawing(w, h))}
        elif prepared.cls is FieldClass.CHOICE_BUTTON:
            widget["FT"] = Name("Btn")
            widget["V"] = Name("Off")
            widget["AS"] = Name("Off")
            widget["AP"] = {
                "N": {
                    "Off": _appearance(writer, w, h, _box_drawing(w, h)),
                    "Yes": _appearance(writer, w, h, _check_drawing(w, h)),
                }
            }
        else:
            widget["FT"] = Name("Sig")
            widget["AP"] = {"N": _appearance(writer, w, h, _box_drawing(w, h))}
        ref = writer.add(widget)
        field_refs.append(ref)
        refs_by_page.setdefault(prepared.page_index, []).append(ref)

    for page_index, new_refs in sorted(refs_by_page.items()):
        page = pages[page_index]
        updated = dict(page.raw)
        existing = page.raw.get("Annots")
        annots: list = []
        if existing is not None:
            resolved = pdf.resolve(existing)
            if isinstance(resolved, list):
                annots = list(resolved)
        annots.extend(new_refs)
        updated["Annots"] = annots
        writer.update(page.ref, updated)

    acroform: dict = {
        "Fields": list(field_refs),
        "NeedAppearances": True,
        "DA": b"/Helv 0 Tf 0 g",
        "DR": {"Font": {"Helv": font_ref}},
    }
    if append_to_existing:
        existing_form = pdf.acroform
        if existing_form is not None:
            merged = dict(existing_form)
            old_fields = pdf.resolve(existing_form.get("Fields"))
            base = list(old_fields) if isinstance(old_fields, list) else []
            merged["Fields"] = base + list(field_refs)
            merged["NeedAppearances"] = True
            merged.setdefault("DA", b"/Helv 0 Tf 0 g")
            merged.setdefault("DR", {"Font": {"Helv": font_ref}})
            acroform = merged

    acroform_ref = writer.add(acroform)
    root_ref = pdf.trailer.get("Root")
    if not isinstance(root_ref, Ref):
        raise MalformedPdf("catalog is not an indirect object; cannot attach form")
    catalog = dict(pdf.catalog)
    catalog["AcroForm"] = acroform_ref
    writer.update(root_ref, catalog)
    return writer.build()


# -------------------------------------------------------------- round trip


@dataclass(slots=True)
class FieldCheck:
    expected: PreparedField
    recovered: bool
    class_match: bool
    deviation: float | None


@dataclass(slots=True)
class RoundtripReport:
    passed: bool
    checks: list[FieldCheck] = field(default_factory=list)
    missing: int = 0
    class_mismatches: int = 0
    extra: int = 0
    max_deviation: float = 0.0

    def summary(self) -> str:
        status = "pass" if self.passed else "fail"
        return (
            f"{status}: {len(self.checks) - self.missing - self.class_mismatches}"
            f"/{len(self.checks)} recovered, {self.missing} missing, "
            f"{self.class_mismatches} class mismatches, {self.extra} extra, "
            f"max deviation {self.max_deviation:.3f}pt"
        )


def _corner_deviation(a: Rect, b: Rect) -> float:
    return max(abs(x - y) for x, y in zip(a, b))


def verify_roundtrip(
    prepared: bytes,
    expected: Sequence[PreparedField],
    tolerance_pt: float = 0.5,
    cleaning: CleaningConfig | None = None,
) -> RoundtripReport:
    """Mine the prepared document and check every expected field is
    recovered with matching class and corners within tolerance."""
    doc = open_document(prepared)
    record = mine_document(doc, cleaning or CleaningConfig())
    mined: dict[int, list] = {}
    for page in record.pages:
        mined[page.page_index] = list(page.annotations)
    used: set[tuple[int, int]] = set()
    report = RoundtripReport(passed=True)
    for exp in expected:
        candidates = mined.get(exp.page_index, [])
        best_idx: int | None = None
        best_dev = float("inf")
        for idx, ann in enumerate(candidates):
            if (exp.page_index, idx) in used or ann.cls != exp.cls:
                continue
            dev = _corner_deviation(exp.rect, ann.rect)
            if dev < best_dev:
                best_dev = dev
                best_idx = idx
        if best_idx is not None and best_dev <= tolerance_pt:
            used.add((exp.page_index, best_idx))
            report.checks.append(
                FieldCheck(expected=exp, recovered=True, class_match=True, deviation=best_dev)
            )
            report.max_deviation = max(report.max_deviation, best_dev)
            continue
        # geometric match with the wrong class?
        mismatch = False
        for idx, ann in enumerate(candidates):
            if (exp.page_index, idx) in used:
                continue
            if _corner_deviation(exp.rect, ann.rect) <= tolerance_pt:
                mismatch = True
                used.add((exp.page_index, idx))
                break
        report.checks.append(
            FieldCheck(expected=exp, recovered=False, class_match=not mismatch, deviation=None)
        )
        if mismatch:
            report.class_mismatches += 1
        else:
            report.missing += 1
        report.passed = False
    total_mined = sum(len(v) for v in mined.values())
    report.extra = total_mined - len(used)
    return report
