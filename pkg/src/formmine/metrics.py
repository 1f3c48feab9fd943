"""Detection evaluation: IoU, greedy matching, per-class average precision,
mAP over IoU thresholds 0.50-0.95, and tag-sliced reports.

Conventions: greedy matching by descending score (ties keep input order),
101-point interpolated precision with the running-max envelope, AP on a
0-100 scale, mean over classes that have at least one ground truth.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .geometry import PixelBox
from .mining import FieldClass

ImageId = tuple[str, int]

IOU_THRESHOLDS: tuple[float, ...] = tuple((50 + 5 * i) / 100 for i in range(10))

_CLASS_LABELS = {
    FieldClass.TEXT_INPUT: "Text",
    FieldClass.CHOICE_BUTTON: "Choice",
    FieldClass.SIGNATURE: "Sig.",
}


class UnknownSliceKey(KeyError):
    pass


class MalformedDetections(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Detection:
    image_id: ImageId
    cls: FieldClass
    box: PixelBox
    score: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True, slots=True)
class GroundTruth:
    image_id: ImageId
    cls: FieldClass
    box: PixelBox


def iou(a: PixelBox, b: PixelBox) -> float:
    """Intersection over union of two pixel boxes; 0 when disjoint."""
    ix0 = max(a.x, b.x)
    iy0 = max(a.y, b.y)
    ix1 = min(a.x + a.w, b.x + b.w)
    iy1 = min(a.y + a.h, b.y + b.h)
    if ix1 <= ix0 or iy1 <= iy0:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


def _match_flags(
    dets: Sequence[Detection], gts: Sequence[PixelBox], iou_threshold: float
) -> list[int | None]:
    """Greedy matching for one image+class; result aligned to input order."""
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    taken: set[int] = set()
    matched: list[int | None] = [None] * len(dets)
    for i in order:
        det = dets[i]
        best_j: int | None = None
        best_iou = 0.0
        for j, gt in enumerate(gts):
            if j in taken:
                continue
            overlap = iou(det.box, gt)
            if overlap >= iou_threshold and overlap > best_iou:
                best_iou = overlap
                best_j = j
        if best_j is not None:
            taken.add(best_j)
            matched[i] = best_j
    return matched


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[PixelBox],
    cls: FieldClass | None = None,
    iou_threshold: float = 0.5,
) -> list[tuple[Detection, int | None]]:
    """Greedy per-image matching for one class.

    Detections are taken in descending score order (stable on ties); each
    claims the unmatched ground truth with the highest IoU at or above the
    threshold (lowest index on an exact tie). Returns (detection, gt index
    or None) pairs in that ranked order.
    """
    if cls is not None:
        dets = [d for d in dets if d.cls == cls]
    matched = _match_flags(dets, gts, iou_threshold)
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    return [(dets[i], matched[i]) for i in order]


def average_precision(
    scored_matches: Sequence[tuple[float, bool]], total_gt: int
) -> float | None:
    """AP (0-100) from (score, is_true_positive) pairs across all images of
    one class at one IoU threshold.

    Returns 0.0 when there is no ground truth but detections exist, and
    None when the class has neither (skip it entirely).
    """
    if total_gt < 0:
        raise ValueError("total_gt must be non-negative")
    if total_gt == 0:
        return None if not scored_matches else 0.0
    ranked = sorted(range(len(scored_matches)), key=lambda i: -scored_matches[i][0])
    tp = 0
    fp = 0
    recalls: list[float] = []
    precisions: list[float] = []
    for i in ranked:
        if scored_matches[i][1]:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / total_gt)
        precisions.append(tp / (tp + fp))
    # Precision envelope: max precision at recall >= r.
    envelope = list(precisions)
    for i in range(len(envelope) - 2, -1, -1):
        envelope[i] = max(envelope[i], envelope[i + 1])
    total = 0.0
    for step in range(101):
        r = step / 100
        idx = bisect_left(recalls, r)
        if idx < len(envelope):
            total += envelope[idx]
    return total / 101 * 100.0


@dataclass(slots=True)
class ClassResult:
    ap_by_threshold: dict[float, float]
    ap50_95: float
    n_gt: int
    n_det: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "ap_by_threshold": {f"{t:.2f}": round(v, 4) for t, v in self.ap_by_threshold.items()},
            "ap50_95": round(self.ap50_95, 4),
            "n_gt": self.n_gt,
            "n_det": self.n_det,
        }


@dataclass(slots=True)
class EvalReport:
    per_class: dict[FieldClass, ClassResult] = field(default_factory=dict)
    map50_95: float | None = None
    n_gt: int = 0
    n_det: int = 0
    n_images: int = 0
    slice_key: str | None = None
    slice_value: str | None = None

    @property
    def no_evaluable_classes(self) -> bool:
        return self.map50_95 is None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "slice_key": self.slice_key,
            "slice_value": self.slice_value,
            "map50_95": None if self.map50_95 is None else round(self.map50_95, 4),
            "no_evaluable_classes": self.no_evaluable_classes,
            "n_gt": self.n_gt,
            "n_det": self.n_det,
            "n_images": self.n_images,
            "per_class": {
                cls.name.lower(): result.to_json_dict() for cls, result in self.per_class.items()
            },
        }


def map_50_95(
    dets: Iterable[Detection],
    gts: Iterable[GroundTruth],
    thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> EvalReport:
    """Full evaluation: AP at each threshold per class, AP50-95 per class,
    and the mean over classes with at least one ground truth.
    """
    dets = list(dets)
    gts = list(gts)
    report = EvalReport(n_gt=len(gts), n_det=len(dets))
    det_groups: dict[tuple[ImageId, FieldClass], list[Detection]] = {}
    for det in dets:
        det_groups.setdefault((det.image_id, det.cls), []).append(det)
    gt_groups: dict[tuple[ImageId, FieldClass], list[PixelBox]] = {}
    for gt in gts:
        gt_groups.setdefault((gt.image_id, gt.cls), []).append(gt.box)
    report.n_images = len({key[0] for key in det_groups} | {key[0] for key in gt_groups})

    evaluable: list[float] = []
    for cls in FieldClass:
        cls_gt_total = sum(len(v) for (img, c), v in gt_groups.items() if c == cls)
        cls_dets = [d for d in dets if d.cls == cls]
        if cls_gt_total == 0 and not cls_dets:
            continue
        ap_by_threshold: dict[float, float] = {}
        for threshold in thresholds:
            # Flags are assembled in the detections' input order so that
            # equal scores rank deterministically in average_precision.
            scored: list[tuple[float, bool]] = []
            cursor: dict[ImageId, int] = {}
            flags_by_image: dict[ImageId, list[int | None]] = {
                image: _match_flags(group, gt_groups.get((image, cls), []), threshold)
                for (image, c), group in det_groups.items()
                if c == cls
            }
            for det in cls_dets:
                pos = cursor.get(det.image_id, 0)
                cursor[det.image_id] = pos + 1
                matched = flags_by_image[det.image_id][pos]
                scored.append((det.score, matched is not None))
            ap = average_precision(scored, cls_gt_total)
            ap_by_threshold[threshold] = 0.0 if ap is None else ap
        ap50_95 = sum(ap_by_threshold.values()) / len(ap_by_threshold)
        report.per_class[cls] = ClassResult(
            ap_by_threshold=ap_by_threshold,
            ap50_95=ap50_95,
            n_gt=cls_gt_total,
            n_det=len(cls_dets),
        )
        if cls_gt_total > 0:
            evaluable.append(ap50_95)
    report.map50_95 = sum(evaluable) / len(evaluable) if evaluable else None
    return report


# ----------------------------------------------------------------- slicing


def _manifest_ground_truths(rows: Iterable[Any]) -> list[GroundTruth]:
    gts: list[GroundTruth] = []
    for row in rows:
        image_id = (row.doc_id, row.page_index)
        for cls_code, cx, cy, w, h in row.labels:
            bw = w * row.width_px
            bh = h * row.height_px
            gts.append(
                GroundTruth(
                    image_id=image_id,
                    cls=FieldClass(int(cls_code)),
                    box=PixelBox(
                        x=cx * row.width_px - bw / 2,
                        y=cy * row.height_px - bh / 2,
                        w=bw,
                        h=bh,
                    ),
                )
            )
    return gts


def sliced_report(
    dets: Iterable[Detection],
    manifest: Any,
    slice_key: str,
    include_empty_pages: bool = False,
) -> list[EvalReport]:
    """One report per tag value plus the "All" row over every page.

    Ground truth comes from manifest labels. Pages without any labels are
    excluded unless `include_empty_pages`; untagged pages contribute to
    "All" only.
    """
    if slice_key not in ("language", "domain"):
        raise UnknownSliceKey(slice_key)
    rows = [r for r in manifest.rows if include_empty_pages or r.labels]
    dets = list(dets)
    page_ids = {(r.doc_id, r.page_index) for r in rows}
    all_report = map_50_95(
        [d for d in dets if d.image_id in page_ids], _manifest_ground_truths(rows)
    )
    all_report.slice_key = slice_key
    all_report.slice_value = "All"
    reports = [all_report]
    values = sorted({getattr(r, slice_key) for r in rows if getattr(r, slice_key)})
    for value in values:
        slice_rows = [r for r in rows if getattr(r, slice_key) == value]
        slice_ids = {(r.doc_id, r.page_index) for r in slice_rows}
        rep = map_50_95(
            [d for d in dets if d.image_id in slice_ids],
            _manifest_ground_truths(slice_rows),
        )
        rep.slice_key = slice_key
        rep.slice_value = value
        reports.append(rep)
    return reports


# ------------------------------------------------------------- file formats


def detection_to_json_dict(det: Detection) -> dict[str, Any]:
    return {
        "doc_id": det.image_id[0],
        "page_index": det.image_id[1],
        "class": int(det.cls),
        "box": [round(v, 4) for v in (det.box.x, det.box.y, det.box.w, det.box.h)],
        "score": round(det.score, 6),
    }


def detection_from_json_dict(data: Mapping[str, Any]) -> Detection:
    try:
        box = data["box"]
        return Detection(
            image_id=(str(data["doc_id"]), int(data["page_index"])),
            cls=FieldClass(int(data["class"])),
            box=PixelBox(x=float(box[0]), y=float(box[1]), w=float(box[2]), h=float(box[3])),
            score=float(data["score"]),
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise MalformedDetections(f"bad detection record {data!r}: {exc}") from exc


def load_detections(path) -> list[Detection]:
    dets: list[Detection] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedDetections(f"line {line_no}: {exc}") from exc
            dets.append(detection_from_json_dict(data))
    return dets


def save_detections(dets: Iterable[Detection], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for det in dets:
            handle.write(json.dumps(detection_to_json_dict(det)) + "\n")


def format_report_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table: one row per slice, AP columns per class + All."""
    classes = [FieldClass.TEXT_INPUT, FieldClass.CHOICE_BUTTON, FieldClass.SIGNATURE]
    header = ["Slice", "Pages"] + [_CLASS_LABELS[c] for c in classes] + ["All"]
    rows = [header]
    for report in reports:
        label = report.slice_value or "All"
        cells = [label, str(report.n_images)]
        for cls in classes:
            result = report.per_class.get(cls)
            cells.append("-" if result is None or result.n_gt == 0 else f"{result.ap50_95:.1f}")
        cells.append("-" if report.map50_95 is None else f"{report.map50_95:.1f}")
        rows.append(cells)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(widths))))
    return "\n".join(lines)
