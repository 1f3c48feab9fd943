import random

import pytest

import pdfgen
from formmine.dataset import ManifestRow
from formmine.geometry import compute_render_scale, pdf_rect_to_pixels, rendered_size
from formmine.metrics import Detection
from formmine.mining import FieldClass, mine_document
from formmine.pdfmodel import open_document, page_geometry
from formmine.prepare import (
    ExistingForm,
    ExistingFormPolicy,
    GeometryMismatch,
    OverlapPolicy,
    PrepareConfig,
    PreparedField,
    name_fields,
    prepare_form,
    verify_roundtrip,
)


def make_context(n_pages=1, target=1216):
    flat = pdfgen.flat_pdf(n_pages)
    doc = open_document(flat)
    rows = []
    geoms = []
    for page in range(n_pages):
        geom = page_geometry(doc, page)
        scale = compute_render_scale(geom, target)
        w_px, h_px = rendered_size(geom, scale)
        rows.append(
            ManifestRow(
                doc_id=doc.doc_id,
                page_index=page,
                split="test",
                image_path=f"images/p{page}.png",
                width_px=w_px,
                height_px=h_px,
                scale=scale,
            )
        )
        geoms.append((geom, scale))
    return flat, doc, rows, geoms


def det_for(doc, geoms, page, rect, cls, score=0.9):
    geom, scale = geoms[page]
    box = pdf_rect_to_pixels(rect, geom, scale, cls=cls)
    return Detection(image_id=(doc.doc_id, page), cls=cls, box=box, score=score)


# ------------------------------------------------------------ name_fields


def test_name_fields_reading_order():
    drafts = [
        PreparedField(FieldClass.TEXT_INPUT, (72, 600, 272, 620), "", 0),
        PreparedField(FieldClass.TEXT_INPUT, (72, 700, 272, 720), "", 0),
    ]
    named = name_fields(drafts)
    assert [f.name for f in named] == ["text_0_0", "text_0_1"]
    assert named[0].rect[1] == 700  # higher on the page comes first


def test_name_fields_per_page_counters():
    drafts = [
        PreparedField(FieldClass.TEXT_INPUT, (72, 700, 272, 720), "", 1),
        PreparedField(FieldClass.TEXT_INPUT, (72, 700, 272, 720), "", 0),
    ]
    named = name_fields(drafts)
    assert sorted(f.name for f in named) == ["text_0_0", "text_1_0"]


def test_name_fields_identical_rects_distinct_names():
    drafts = [
        PreparedField(FieldClass.CHOICE_BUTTON, (72, 700, 86, 714), "", 0),
        PreparedField(FieldClass.CHOICE_BUTTON, (72, 700, 86, 714), "", 0),
    ]
    named = name_fields(drafts)
    assert len({f.name for f in named}) == 2


# ----------------------------------------------------------- prepare_form


def test_prepare_single_text_round_trip():
    flat, doc, rows, geoms = make_context()
    det = det_for(doc, geoms, 0, (72, 640, 272, 660), FieldClass.TEXT_INPUT)
    prepared = prepare_form(flat, [det], rows)
    record = mine_document(open_document(prepared))
    assert record.accepted
    anns = [a for p in record.pages for a in p.annotations]
    assert len(anns) == 1
    assert anns[0].cls == FieldClass.TEXT_INPUT
    assert max(abs(a - b) for a, b in zip(anns[0].rect, (72, 640, 272, 660))) <= 0.5


def test_prepare_below_threshold_is_noop():
    flat, doc, rows, geoms = make_context()
    det = det_for(doc, geoms, 0, (72, 640, 272, 660), FieldClass.TEXT_INPUT, score=0.2)
    assert prepare_form(flat, [det], rows) == flat


def test_prepare_existing_form_refused():
    form = pdfgen.simple_form_pdf()
    doc = open_document(form)
    geom = page_geometry(doc, 0)
    scale = compute_render_scale(geom, 1216)
    w_px, h_px = rendered_size(geom, scale)
    row = ManifestRow(doc.doc_id, 0, "test", "x", w_px, h_px, scale)
    det = Detection(
        image_id=(doc.doc_id, 0),
        cls=FieldClass.TEXT_INPUT,
        box=pdf_rect_to_pixels((100, 300, 200, 330), geom, scale, cls=FieldClass.TEXT_INPUT),
        score=0.9,
    )
    with pytest.raises(ExistingForm):
        prepare_form(form, [det], [row])
    appended = prepare_form(
        form, [det], [row], PrepareConfig(existing_form_policy=ExistingFormPolicy.APPEND)
    )
    record = mine_document(open_document(appended))
    assert record.annotation_count() == 3  # 2 original + 1 appended


def test_prepare_geometry_mismatch():
    flat, doc, rows, geoms = make_context()
    bad_row = ManifestRow(
        doc_id=rows[0].doc_id,
        page_index=0,
        split="test",
        image_path="x",
        width_px=rows[0].width_px + 10,
        height_px=rows[0].height_px,
        scale=rows[0].scale,
    )
    det = det_for(doc, geoms, 0, (72, 640, 272, 660), FieldClass.TEXT_INPUT)
    with pytest.raises(GeometryMismatch):
        prepare_form(flat, [det], [bad_row])


def test_prepare_overlap_policy_keeps_higher_score():
    flat, doc, rows, geoms = make_context()
    d1 = det_for(doc, geoms, 0, (72, 640, 272, 660), FieldClass.TEXT_INPUT, score=0.95)
    d2 = det_for(doc, geoms, 0, (75, 641, 270, 659), FieldClass.TEXT_INPUT, score=0.7)
    prepared = prepare_form(flat, [d2, d1], rows)
    record = mine_document(open_document(prepared))
    assert record.annotation_count() == 1
    ann = record.pages[0].annotations[0]
    assert max(abs(a - b) for a, b in zip(ann.rect, (72, 640, 272, 660))) <= 0.5


def test_prepare_keep_all_policy():
    flat, doc, rows, geoms = make_context()
    d1 = det_for(doc, geoms, 0, (72, 600, 272, 640), FieldClass.TEXT_INPUT, score=0.95)
    d2 = det_for(doc, geoms, 0, (80, 604, 260, 636), FieldClass.TEXT_INPUT, score=0.7)
    prepared = prepare_form(
        flat, [d1, d2], rows, PrepareConfig(overlap_policy=OverlapPolicy.KEEP_ALL)
    )
    record = mine_document(open_document(prepared))
    # dedup in the miner does not fire (IoU < 0.85), so both survive
    assert record.annotation_count() == 2


def test_prepare_preserves_original_bytes_prefix():
    flat, doc, rows, geoms = make_context()
    det = det_for(doc, geoms, 0, (72, 640, 272, 660), FieldClass.TEXT_INPUT)
    prepared = prepare_form(flat, [det], rows)
    assert prepared[: len(flat)] == flat


def test_prepare_does_not_alter_geometry():
    flat, doc, rows, geoms = make_context()
    det = det_for(doc, geoms, 0, (72, 640, 272, 660), FieldClass.TEXT_INPUT)
    prepared = prepare_form(flat, [det], rows)
    before = page_geometry(doc, 0)
    after = page_geometry(open_document(prepared), 0)
    assert before == after


def test_prepare_rotated_page_round_trip():
    flat = pdfgen.make_pdf([pdfgen.PageSpec(rotate=90)])
    doc = open_document(flat)
    geom = page_geometry(doc, 0)
    scale = compute_render_scale(geom, 1216)
    w_px, h_px = rendered_size(geom, scale)
    row = ManifestRow(doc.doc_id, 0, "test", "x", w_px, h_px, scale)
    rect = (100.0, 200.0, 220.0, 240.0)
    det = Detection(
        image_id=(doc.doc_id, 0),
        cls=FieldClass.SIGNATURE,
        box=pdf_rect_to_pixels(rect, geom, scale, cls=FieldClass.SIGNATURE),
        score=0.9,
    )
    prepared = prepare_form(flat, [det], [row])
    expected = name_fields([PreparedField(FieldClass.SIGNATURE, rect, "", 0)])
    report = verify_roundtrip(prepared, expected)
    assert report.passed, report.summary()


# -------------------------------------------------------- verify_roundtrip


def _prepare_random_page(rng, n_dets, target=1216):
    flat, doc, rows, geoms = make_context(target=target)
    geom, scale = geoms[0]
    drafts = []
    dets = []
    tries = 0
    while len(drafts) < n_dets and tries < 500:
        tries += 1
        cls = rng.choice(list(FieldClass))
        w = rng.uniform(14, 180)
        h = rng.uniform(10, 48)
        x0 = rng.uniform(0, 612 - w)
        y0 = rng.uniform(0, 792 - h)
        rect = (x0, y0, x0 + w, y0 + h)
        from formmine.mining import rect_iou

        if any(rect_iou(rect, d.rect) >= 0.4 for d in drafts):
            continue
        drafts.append(PreparedField(cls, rect, "", 0))
        dets.append(det_for(doc, geoms, 0, rect, cls, score=round(rng.uniform(0.6, 1.0), 3)))
    prepared = prepare_form(flat, dets, rows)
    return prepared, name_fields(drafts)


def test_verify_roundtrip_random_pages():
    rng = random.Random(4242)
    for _ in range(5):
        prepared, expected = _prepare_random_page(rng, rng.randint(1, 15))
        report = verify_roundtrip(prepared, expected)
        assert report.passed, report.summary()


def test_verify_roundtrip_phantom_field_fails():
    rng = random.Random(7)
    prepared, expected = _prepare_random_page(rng, 3)
    phantom = PreparedField(FieldClass.TEXT_INPUT, (500, 700, 590, 730), "phantom", 0)
    report = verify_roundtrip(prepared, expected + [phantom])
    assert not report.passed
    assert report.missing == 1


def test_verify_roundtrip_class_mismatch_detected():
    rng = random.Random(8)
    prepared, expected = _prepare_random_page(rng, 2)
    flipped = [
        PreparedField(
            cls=(
                FieldClass.CHOICE_BUTTON
                if expected[0].cls is not FieldClass.CHOICE_BUTTON
                else FieldClass.SIGNATURE
            ),
            rect=expected[0].rect,
            name=expected[0].name,
            page_index=0,
        )
    ] + list(expected[1:])
    report = verify_roundtrip(prepared, flipped)
    assert not report.passed
    assert report.class_mismatches == 1
