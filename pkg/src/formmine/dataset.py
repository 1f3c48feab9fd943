"""Dataset emission: rendering, label transforms, document-level splits,
tag ingestion, and the newline-delimited manifest.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .geometry import (
    DegenerateRect,
    PixelBox,
    compute_render_scale,
    pdf_rect_to_pixels,
    rendered_size,
)
from .mining import DocumentRecord, FieldClass
from .render import PageRenderer, RenderFailure


class InsufficientPages(ValueError):
    pass


class MalformedTagFile(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class RenderConfig:
    target_long_side_px: int = 1216
    background: str = "white"
    output_format: str = "png"  # lossless only

    def __post_init__(self) -> None:
        if self.target_long_side_px < 64:
            raise ValueError("target_long_side_px must be >= 64")
        if self.output_format.lower() not in ("png", "ppm", "bmp"):
            raise ValueError("output_format must be lossless (png/ppm/bmp)")


@dataclass(slots=True)
class SplitAssignment:
    by_doc: dict[str, str]
    seed: int

    def split_of(self, doc_id: str) -> str | None:
        return self.by_doc.get(doc_id)

    def to_json_dict(self) -> dict[str, Any]:
        return {"seed": self.seed, "by_doc": dict(sorted(self.by_doc.items()))}


def split_documents(
    docs: Sequence[tuple[str, int]],
    seed: int,
    val_pages_target: int,
    test_pages_target: int,
) -> SplitAssignment:
    """Assign whole documents to splits: shuffle with a seeded PRNG, fill
    val until its page total first reaches the target, then test, then the
    remainder goes to train.

    Documents are sorted by doc_id before shuffling so the assignment
    depends only on the document set and the seed.
    """
    total_pages = sum(pages for _, pages in docs)
    if val_pages_target + test_pages_target > total_pages:
        raise InsufficientPages(
            f"targets {val_pages_target}+{test_pages_target} exceed {total_pages} pages"
        )
    ordered = sorted(docs, key=lambda d: d[0])
    rng = random.Random(seed)
    rng.shuffle(ordered)
    by_doc: dict[str, str] = {}
    val_pages = 0
    test_pages = 0
    for doc_id, pages in ordered:
        if val_pages < val_pages_target:
            by_doc[doc_id] = "val"
            val_pages += pages
        elif test_pages < test_pages_target:
            by_doc[doc_id] = "test"
            test_pages += pages
        else:
            by_doc[doc_id] = "train"
    return SplitAssignment(by_doc=by_doc, seed=seed)


def to_normalized_label(
    box: PixelBox, width_px: int, height_px: int
) -> tuple[int, float, float, float, float]:
    """(class, cx, cy, w, h) normalized to [0,1], rounded to 6 decimals to
    match the serialized form exactly."""
    if box.cls is None:
        raise ValueError("pixel box has no class")
    return (
        int(box.cls),
        round((box.x + box.w / 2) / width_px, 6),
        round((box.y + box.h / 2) / height_px, 6),
        round(box.w / width_px, 6),
        round(box.h / height_px, 6),
    )


def format_label_line(label: tuple[int, float, float, float, float]) -> str:
    cls, cx, cy, w, h = label
    return f"{cls} {cx:.6f} {cy:.6f} {w:.6f} {h:.6f}"


def parse_label_line(line: str) -> tuple[int, float, float, float, float]:
    parts = line.split()
    return (int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]), float(parts[4]))


@dataclass(slots=True)
class ManifestRow:
    doc_id: str
    page_index: int
    split: str
    image_path: str
    width_px: int
    height_px: int
    scale: float
    language: str | None = None
    domain: str | None = None
    labels: list[tuple[int, float, float, float, float]] = field(default_factory=list)

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "doc_id": self.doc_id,
            "page_index": self.page_index,
            "split": self.split,
            "image_path": self.image_path,
            "width_px": self.width_px,
            "height_px": self.height_px,
            "scale": self.scale,
        }
        if self.language is not None:
            out["language"] = self.language
        if self.domain is not None:
            out["domain"] = self.domain
        out["labels"] = [list(label) for label in self.labels]
        return out

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "ManifestRow":
        return cls(
            doc_id=data["doc_id"],
            page_index=int(data["page_index"]),
            split=data["split"],
            image_path=data["image_path"],
            width_px=int(data["width_px"]),
            height_px=int(data["height_px"]),
            scale=float(data["scale"]),
            language=data.get("language"),
            domain=data.get("domain"),
            labels=[
                (int(l[0]), float(l[1]), float(l[2]), float(l[3]), float(l[4]))
                for l in data.get("labels", [])
            ],
        )


@dataclass(slots=True)
class DatasetManifest:
    rows: list[ManifestRow] = field(default_factory=list)
    render_failures: list[dict[str, Any]] = field(default_factory=list)
    tag_warnings: list[dict[str, Any]] = field(default_factory=list)

    def index(self) -> dict[tuple[str, int], ManifestRow]:
        return {(row.doc_id, row.page_index): row for row in self.rows}

    def doc_ids_by_split(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for row in self.rows:
            out.setdefault(row.split, set()).add(row.doc_id)
        return out

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for row in self.rows:
                handle.write(json.dumps(row.to_json_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        manifest = cls()
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    manifest.rows.append(ManifestRow.from_json_dict(json.loads(line)))
        return manifest


def page_file_stem(doc_id: str, page_index: int) -> str:
    return f"{doc_id}_p{page_index:04d}"


def emit_dataset(
    records: Iterable[DocumentRecord],
    split: SplitAssignment,
    render: RenderConfig,
    renderer: PageRenderer,
    out_dir: str | Path,
    include_empty: bool = False,
) -> DatasetManifest:
    """Render pages and write one image + one label file per page, plus the
    manifest. Only pages with at least one surviving annotation are emitted
    unless `include_empty`. Per-page failures are recorded, not fatal.
    """
    out = Path(out_dir)
    images_dir = out / "images"
    labels_dir = out / "labels"
    images_dir.mkdir(parents=True, exist_ok=True)
    labels_dir.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest()
    ext = render.output_format.lower()

    for record in sorted(records, key=lambda r: r.doc_id):
        if not record.accepted:
            continue
        doc_split = split.split_of(record.doc_id)
        if doc_split is None:
            manifest.render_failures.append(
                {"doc_id": record.doc_id, "error": "document missing from split assignment"}
            )
            continue
        for page in sorted(record.pages, key=lambda p: p.page_index):
            if not page.annotations and not include_empty:
                continue
            geom = page.geometry
            scale = compute_render_scale(geom, render.target_long_side_px)
            width_px, height_px = rendered_size(geom, scale)
            labels: list[tuple[int, float, float, float, float]] = []
            for ann in page.annotations:
                try:
                    box = pdf_rect_to_pixels(ann.rect, geom, scale, cls=ann.cls)
                except DegenerateRect:
                    manifest.render_failures.append(
                        {
                            "doc_id": record.doc_id,
                            "page_index": page.page_index,
                            "error": "degenerate rect",
                            "rect": list(ann.rect),
                        }
                    )
                    continue
                labels.append(to_normalized_label(box, width_px, height_px))
            if not labels and not include_empty:
                continue
            stem = page_file_stem(record.doc_id, page.page_index)
            try:
                image = renderer.render(
                    record.doc_id, page.page_index, geom, scale, width_px, height_px
                )
            except RenderFailure as exc:
                manifest.render_failures.append(
                    {
                        "doc_id": record.doc_id,
                        "page_index": page.page_index,
                        "error": str(exc),
                    }
                )
                continue
            image_rel = f"images/{stem}.{ext}"
            image.save(out / image_rel, format=render.output_format.upper())
            with open(labels_dir / f"{stem}.txt", "w", encoding="utf-8") as handle:
                for label in labels:
                    handle.write(format_label_line(label) + "\n")
            manifest.rows.append(
                ManifestRow(
                    doc_id=record.doc_id,
                    page_index=page.page_index,
                    split=doc_split,
                    image_path=image_rel,
                    width_px=width_px,
                    height_px=height_px,
                    scale=scale,
                    labels=labels,
                )
            )
    manifest.rows.sort(key=lambda r: (r.doc_id, r.page_index))
    return manifest


def load_tag_records(path: str | Path) -> list[dict[str, Any]]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedTagFile(f"line {line_no}: {exc}") from exc
            if not isinstance(data, dict) or "doc_id" not in data or "page_index" not in data:
                raise MalformedTagFile(f"line {line_no}: needs doc_id and page_index")
            records.append(data)
    return records


def attach_tags(
    manifest: DatasetManifest, tags: Iterable[Mapping[str, Any]] | str | Path
) -> DatasetManifest:
    """Populate language/domain tags keyed by (doc_id, page_index).

    Unknown keys are reported on the returned manifest's `tag_warnings`;
    untagged pages keep absent tags.
    """
    if isinstance(tags, (str, Path)):
        tags = load_tag_records(tags)
    out = DatasetManifest(
        rows=[
            ManifestRow(
                doc_id=row.doc_id,
                page_index=row.page_index,
                split=row.split,
                image_path=row.image_path,
                width_px=row.width_px,
                height_px=row.height_px,
                scale=row.scale,
                language=row.language,
                domain=row.domain,
                labels=list(row.labels),
            )
            for row in manifest.rows
        ],
        render_failures=list(manifest.render_failures),
    )
    new_index = out.index()
    for tag in tags:
        try:
            key = (str(tag["doc_id"]), int(tag["page_index"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedTagFile(f"bad tag record {tag!r}") from exc
        row = new_index.get(key)
        if row is None:
            out.tag_warnings.append({"doc_id": key[0], "page_index": key[1], "error": "unknown page"})
            continue
        if tag.get("language") is not None:
            row.language = str(tag["language"])
        if tag.get("domain") is not None:
            row.domain = str(tag["domain"])
    return out
