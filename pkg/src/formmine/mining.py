"""Document-level form filters, widget classification, and per-page
geometric cleaning that turn raw widgets into clean annotations.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Any, Iterable, Sequence

from .pdfmodel import (
    DocumentHandle,
    EncryptedPdf,
    FormStandard,
    MalformedPdf,
    PageGeometry,
    RawWidget,
    Rect,
    WidgetType,
    detect_form_standard,
    enumerate_widgets,
    page_geometry,
)


class FieldClass(IntEnum):
    """Detection classes; the integer codes appear in label files."""

    CHOICE_BUTTON = 0
    TEXT_INPUT = 1
    SIGNATURE = 2

    @property
    def word(self) -> str:
        return _CLASS_WORDS[self]


_CLASS_WORDS = {
    FieldClass.CHOICE_BUTTON: "choice",
    FieldClass.TEXT_INPUT: "text",
    FieldClass.SIGNATURE: "signature",
}


class RejectionReason(Enum):
    NO_FORM_OBJECTS = "no_form_objects"
    NO_FIELDS = "no_fields"
    BUTTON_ONLY = "button_only"
    XFA_DYNAMIC_ONLY = "xfa_dynamic_only"
    ALL_FIELDS_CLEANED = "all_fields_cleaned"


@dataclass(frozen=True, slots=True)
class FieldAnnotation:
    """A cleaned, classed rectangle in PDF user space (y-up)."""

    doc_id: str
    page_index: int
    cls: FieldClass
    rect: Rect
    source_type: WidgetType | None = None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "page_index": self.page_index,
            "class": int(self.cls),
            "rect": [round(v, 4) for v in self.rect],
            "source_type": self.source_type.value if self.source_type else None,
        }


@dataclass(frozen=True, slots=True)
class CleaningConfig:
    """Thresholds for the on-page / size / near-duplicate field cleaning."""

    min_field_size_pt: float = 4.0
    dedup_iou_threshold: float = 0.85
    min_onpage_fraction: float = 0.5
    drop_hidden: bool = True
    treat_choice_as_text: bool = True

    def __post_init__(self) -> None:
        if self.min_field_size_pt <= 0:
            raise ValueError("min_field_size_pt must be positive")
        for name in ("dedup_iou_threshold", "min_onpage_fraction"):
            value = getattr(self, name)
            if not (0.0 < value <= 1.0):
                raise ValueError(f"{name} must be in (0, 1]")

    def cache_key(self) -> str:
        return (
            f"{self.min_field_size_pt}:{self.dedup_iou_threshold}:"
            f"{self.min_onpage_fraction}:{int(self.drop_hidden)}:"
            f"{int(self.treat_choice_as_text)}"
        )


@dataclass(slots=True)
class PageRecord:
    page_index: int
    geometry: PageGeometry
    annotations: list[FieldAnnotation] = field(default_factory=list)


@dataclass(slots=True)
class DocumentRecord:
    doc_id: str
    form_standard: FormStandard
    pages: list[PageRecord] = field(default_factory=list)
    rejection_reason: RejectionReason | None = None
    source_uri: str | None = None

    @property
    def accepted(self) -> bool:
        return self.rejection_reason is None

    def annotation_count(self) -> int:
        return sum(len(p.annotations) for p in self.pages)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "form_standard": self.form_standard.value,
            "rejection_reason": self.rejection_reason.value if self.rejection_reason else None,
            "source_uri": self.source_uri,
            "pages": [
                {
                    "page_index": p.page_index,
                    "media_box": list(p.geometry.media_box),
                    "rotation": p.geometry.rotation,
                    "annotations": [a.to_json_dict() for a in p.annotations],
                }
                for p in self.pages
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "DocumentRecord":
        doc_id = data["doc_id"]
        pages = []
        for p in data.get("pages", []):
            geom = PageGeometry(
                media_box=tuple(p["media_box"]), rotation=int(p.get("rotation", 0))
            )
            anns = [
                FieldAnnotation(
                    doc_id=doc_id,
                    page_index=p["page_index"],
                    cls=FieldClass(a["class"]),
                    rect=tuple(a["rect"]),
                    source_type=WidgetType(a["source_type"]) if a.get("source_type") else None,
                )
                for a in p.get("annotations", [])
            ]
            pages.append(PageRecord(page_index=p["page_index"], geometry=geom, annotations=anns))
        reason = data.get("rejection_reason")
        return cls(
            doc_id=doc_id,
            form_standard=FormStandard(data.get("form_standard", "none")),
            pages=pages,
            rejection_reason=RejectionReason(reason) if reason else None,
            source_uri=data.get("source_uri"),
        )


def stage1_has_form(doc: DocumentHandle) -> bool:
    """First filter: does the document carry form objects at all?"""
    return detect_form_standard(doc) is not FormStandard.NONE


_CLASS_BY_TYPE = {
    WidgetType.CHECK_BOX: FieldClass.CHOICE_BUTTON,
    WidgetType.RADIO_BUTTON: FieldClass.CHOICE_BUTTON,
    WidgetType.TEXT: FieldClass.TEXT_INPUT,
    WidgetType.SIGNATURE: FieldClass.SIGNATURE,
}


def classify_widget(widget: RawWidget, treat_choice_as_text: bool = True) -> FieldClass | None:
    """Map a widget to its detection class; push buttons have none.

    Dropdown/listbox widgets are typed-value slots that render like text
    boxes, so they default to the text class; disable to drop them.
    """
    if widget.field_type is WidgetType.CHOICE:
        return FieldClass.TEXT_INPUT if treat_choice_as_text else None
    return _CLASS_BY_TYPE.get(widget.field_type)


def stage2_has_fillable(
    widgets: Sequence[RawWidget], treat_choice_as_text: bool = True
) -> bool:
    """Second filter: at least one widget maps to a detection class."""
    return any(classify_widget(w, treat_choice_as_text) is not None for w in widgets)


def _rect_area(rect: Rect) -> float:
    return max(0.0, rect[2] - rect[0]) * max(0.0, rect[3] - rect[1])


def _rect_intersection(a: Rect, b: Rect) -> Rect:
    return (max(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), min(a[3], b[3]))


def rect_iou(a: Rect, b: Rect) -> float:
    ix0, iy0, ix1, iy1 = _rect_intersection(a, b)
    if ix1 <= ix0 or iy1 <= iy0:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    union = _rect_area(a) + _rect_area(b) - inter
    return inter / union if union > 0 else 0.0


def clean_page_fields(
    fields: Iterable[tuple[FieldClass, Rect]],
    geom: PageGeometry,
    cfg: CleaningConfig,
    *,
    doc_id: str = "",
    page_index: int = 0,
    source_types: Sequence[WidgetType | None] | None = None,
) -> list[FieldAnnotation]:
    """Drop off-page and unresolvably small fields, clip to the media box,
    and suppress same-class near duplicates (first kept wins). Output keeps
    input order and never invents fields.
    """
    media = geom.media_box
    kept: list[FieldAnnotation] = []
    for idx, (cls, rect) in enumerate(fields):
        area = _rect_area(rect)
        inter = _rect_area(_rect_intersection(rect, media))
        if inter < cfg.min_onpage_fraction * area or area <= 0.0:
            continue
        clipped = _rect_intersection(rect, media)
        w, h = clipped[2] - clipped[0], clipped[3] - clipped[1]
        if min(w, h) < cfg.min_field_size_pt:
            continue
        if any(
            prior.cls == cls and rect_iou(prior.rect, clipped) >= cfg.dedup_iou_threshold
            for prior in kept
        ):
            continue
        source = source_types[idx] if source_types is not None else None
        kept.append(
            FieldAnnotation(
                doc_id=doc_id,
                page_index=page_index,
                cls=cls,
                rect=clipped,
                source_type=source,
            )
        )
    return kept


def mine_document(doc: DocumentHandle, cfg: CleaningConfig | None = None) -> DocumentRecord:
    """Run the full per-document pipeline: form filters, classification,
    and per-page cleaning. Deterministic for fixed input and config.
    """
    cfg = cfg or CleaningConfig()
    standard = detect_form_standard(doc)
    record = DocumentRecord(
        doc_id=doc.doc_id, form_standard=standard, source_uri=doc.source_uri
    )
    if standard is FormStandard.NONE:
        record.rejection_reason = RejectionReason.NO_FORM_OBJECTS
        return record
    widgets = enumerate_widgets(doc)
    if not widgets:
        if standard in (FormStandard.XFA, FormStandard.HYBRID):
            record.rejection_reason = RejectionReason.XFA_DYNAMIC_ONLY
        else:
            record.rejection_reason = RejectionReason.NO_FIELDS
        return record
    if not stage2_has_fillable(widgets, cfg.treat_choice_as_text):
        record.rejection_reason = RejectionReason.BUTTON_ONLY
        return record

    by_page: dict[int, list[RawWidget]] = {}
    for widget in widgets:
        by_page.setdefault(widget.page_index, []).append(widget)

    for page_index in range(doc.page_count):
        try:
            geom = page_geometry(doc, page_index)
        except MalformedPdf:
            doc.warnings["bad_page_geometry"] += 1
            continue
        page_record = PageRecord(page_index=page_index, geometry=geom)
        candidates: list[tuple[FieldClass, Rect]] = []
        sources: list[WidgetType | None] = []
        for widget in by_page.get(page_index, []):
            if cfg.drop_hidden and widget.hidden:
                continue
            cls = classify_widget(widget, cfg.treat_choice_as_text)
            if cls is None:
                continue
            candidates.append((cls, widget.rect))
            sources.append(widget.field_type)
        page_record.annotations = clean_page_fields(
            candidates,
            geom,
            cfg,
            doc_id=doc.doc_id,
            page_index=page_index,
            source_types=sources,
        )
        record.pages.append(page_record)

    if record.annotation_count() == 0:
        record.rejection_reason = RejectionReason.ALL_FIELDS_CLEANED
        record.pages = []
    return record


def mine_document_raw(doc: DocumentHandle, cfg: CleaningConfig | None = None) -> DocumentRecord:
    """Stage-1-only variant: keep every classifiable widget uncleaned.

    Backs the filtered-vs-unfiltered data-efficiency comparison; documents
    only need to carry form objects, and field rects are passed through
    (clipped to the media box solely to keep label coordinates finite).
    """
    cfg = cfg or CleaningConfig()
    standard = detect_form_standard(doc)
    record = DocumentRecord(
        doc_id=doc.doc_id, form_standard=standard, source_uri=doc.source_uri
    )
    if standard is FormStandard.NONE:
        record.rejection_reason = RejectionReason.NO_FORM_OBJECTS
        return record
    widgets = enumerate_widgets(doc)
    by_page: dict[int, list[RawWidget]] = {}
    for widget in widgets:
        by_page.setdefault(widget.page_index, []).append(widget)
    for page_index in range(doc.page_count):
        try:
            geom = page_geometry(doc, page_index)
        except MalformedPdf:
            doc.warnings["bad_page_geometry"] += 1
            continue
        page_record = PageRecord(page_index=page_index, geometry=geom)
        for widget in by_page.get(page_index, []):
            cls = classify_widget(widget, cfg.treat_choice_as_text)
            if cls is None:
                continue
            clipped = _rect_intersection(widget.rect, geom.media_box)
            if clipped[2] <= clipped[0] or clipped[3] <= clipped[1]:
                continue
            page_record.annotations.append(
                FieldAnnotation(
                    doc_id=doc.doc_id,
                    page_index=page_index,
                    cls=cls,
                    rect=clipped,
                    source_type=widget.field_type,
                )
            )
        record.pages.append(page_record)
    if record.annotation_count() == 0:
        record.rejection_reason = RejectionReason.ALL_FIELDS_CLEANED
        record.pages = []
    return record


@dataclass(slots=True)
class MiningStats:
    """Per-stage rejection funnel; merges associatively across workers."""

    counts: Counter = field(default_factory=Counter)

    def record(self, record: DocumentRecord) -> None:
        if record.rejection_reason is None:
            self.counts["accepted"] += 1
            self.counts["annotations"] += record.annotation_count()
            self.counts["form_pages"] += sum(1 for p in record.pages if p.annotations)
        else:
            self.counts[record.rejection_reason.value] += 1
        self.counts["documents"] += 1

    def record_error(self, error: Exception) -> None:
        self.counts["documents"] += 1
        if isinstance(error, EncryptedPdf):
            self.counts["encrypted"] += 1
        else:
            self.counts["parse_error"] += 1

    def merge(self, other: "MiningStats") -> "MiningStats":
        merged = MiningStats()
        merged.counts = self.counts + other.counts
        return merged

    def to_json_dict(self) -> dict[str, int]:
        keys = [
            "documents",
            "accepted",
            RejectionReason.NO_FORM_OBJECTS.value,
            RejectionReason.NO_FIELDS.value,
            RejectionReason.BUTTON_ONLY.value,
            RejectionReason.XFA_DYNAMIC_ONLY.value,
            RejectionReason.ALL_FIELDS_CLEANED.value,
            "parse_error",
            "encrypted",
            "form_pages",
            "annotations",
        ]
        out = {key: int(self.counts.get(key, 0)) for key in keys}
        for key in sorted(self.counts):
            out.setdefault(key, int(self.counts[key]))
        return out
