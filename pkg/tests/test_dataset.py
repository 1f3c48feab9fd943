import json

import pytest

import pdfgen
from formmine.dataset import (
    DatasetManifest,
    InsufficientPages,
    MalformedTagFile,
    RenderConfig,
    attach_tags,
    emit_dataset,
    format_label_line,
    parse_label_line,
    split_documents,
    to_normalized_label,
)
from formmine.geometry import PixelBox
from formmine.mining import FieldClass, mine_document
from formmine.pdfmodel import open_document
from formmine.render import BlankRenderer


def test_normalized_label_worked_example():
    box = PixelBox(100, 50, 300, 150, cls=FieldClass.TEXT_INPUT)
    assert to_normalized_label(box, 1000, 800) == (1, 0.25, 0.15625, 0.3, 0.1875)


def test_normalized_label_full_image():
    box = PixelBox(0, 0, 640, 480, cls=FieldClass.CHOICE_BUTTON)
    assert to_normalized_label(box, 640, 480) == (0, 0.5, 0.5, 1.0, 1.0)


def test_normalized_label_one_pixel():
    box = PixelBox(0, 0, 1, 1, cls=FieldClass.SIGNATURE)
    assert to_normalized_label(box, 100, 100) == (2, 0.005, 0.005, 0.01, 0.01)


def test_label_line_six_decimals():
    line = format_label_line((1, 0.25, 0.15625, 0.3, 0.1875))
    assert line == "1 0.250000 0.156250 0.300000 0.187500"
    assert parse_label_line(line) == (1, 0.25, 0.15625, 0.3, 0.1875)


# ------------------------------------------------------------------ splits


def test_split_three_docs_one_each():
    docs = [("a", 10), ("b", 10), ("c", 10)]
    split = split_documents(docs, seed=0, val_pages_target=10, test_pages_target=10)
    values = sorted(split.by_doc.values())
    assert values == ["test", "train", "val"]


def test_split_zero_targets_all_train():
    docs = [("a", 5), ("b", 7)]
    split = split_documents(docs, seed=3, val_pages_target=0, test_pages_target=0)
    assert set(split.by_doc.values()) == {"train"}


def test_split_deterministic():
    docs = [(f"doc{i:02d}", (i % 5) + 1) for i in range(30)]
    s1 = split_documents(docs, seed=42, val_pages_target=10, test_pages_target=15)
    s2 = split_documents(list(reversed(docs)), seed=42, val_pages_target=10, test_pages_target=15)
    assert s1.by_doc == s2.by_doc


def test_split_insufficient_pages():
    with pytest.raises(InsufficientPages):
        split_documents([("a", 3)], seed=0, val_pages_target=2, test_pages_target=2)


def test_split_targets_reached_within_one_document():
    import random

    rng = random.Random(11)
    docs = [(f"doc{i:03d}", rng.randint(1, 9)) for i in range(50)]
    pages = dict(docs)
    val_target, test_target = 30, 45
    split = split_documents(docs, seed=7, val_pages_target=val_target, test_pages_target=test_target)
    val_pages = sum(pages[d] for d, s in split.by_doc.items() if s == "val")
    test_pages = sum(pages[d] for d, s in split.by_doc.items() if s == "test")
    max_doc = max(pages.values())
    assert val_target <= val_pages < val_target + max_doc
    assert test_target <= test_pages < test_target + max_doc
    splits_by_doc = split.by_doc
    assert set(splits_by_doc) == {d for d, _ in docs}


# ------------------------------------------------------------------- emit


def _two_page_record():
    fields = [
        pdfgen.FieldSpec("text", rect=(72, 640, 272, 660), name="t1", page=0),
        pdfgen.FieldSpec("text", rect=(72, 540, 272, 560), name="t2", page=0),
        pdfgen.FieldSpec("checkbox", rect=(72, 480, 86, 494), name="c1", page=0),
    ]
    data = pdfgen.make_pdf([pdfgen.PageSpec(), pdfgen.PageSpec()], fields)
    return mine_document(open_document(data))


def test_emit_dataset_skips_empty_pages(tmp_path):
    record = _two_page_record()
    split = split_documents([(record.doc_id, 2)], 0, 0, 0)
    manifest = emit_dataset([record], split, RenderConfig(target_long_side_px=256),
                            BlankRenderer(), tmp_path)
    assert len(manifest.rows) == 1
    images = sorted((tmp_path / "images").iterdir())
    labels = sorted((tmp_path / "labels").iterdir())
    assert len(images) == 1 and len(labels) == 1
    assert manifest.rows[0].labels and len(manifest.rows[0].labels) == 3


def test_emit_dataset_include_empty(tmp_path):
    record = _two_page_record()
    split = split_documents([(record.doc_id, 2)], 0, 0, 0)
    manifest = emit_dataset([record], split, RenderConfig(target_long_side_px=256),
                            BlankRenderer(), tmp_path, include_empty=True)
    assert len(manifest.rows) == 2
    empty_row = [r for r in manifest.rows if not r.labels][0]
    label_file = tmp_path / "labels" / (empty_row.image_path.split("/")[-1][:-4] + ".txt")
    assert label_file.read_text() == ""


def test_emit_dataset_empty_records(tmp_path):
    from formmine.dataset import SplitAssignment

    manifest = emit_dataset([], SplitAssignment(by_doc={}, seed=0),
                            RenderConfig(), BlankRenderer(), tmp_path)
    assert manifest.rows == []


def test_emit_dataset_rerun_byte_identical(tmp_path):
    record = _two_page_record()
    split = split_documents([(record.doc_id, 2)], 0, 0, 0)
    cfg = RenderConfig(target_long_side_px=256)
    m1 = emit_dataset([record], split, cfg, BlankRenderer(), tmp_path / "run1")
    m2 = emit_dataset([record], split, cfg, BlankRenderer(), tmp_path / "run2")
    m1.save(tmp_path / "run1" / "manifest.ndjson")
    m2.save(tmp_path / "run2" / "manifest.ndjson")
    for rel in ["manifest.ndjson"] + [r.image_path for r in m1.rows]:
        assert (tmp_path / "run1" / rel).read_bytes() == (tmp_path / "run2" / rel).read_bytes()
    for row in m1.rows:
        stem = row.image_path.split("/")[-1][:-4]
        a = (tmp_path / "run1" / "labels" / f"{stem}.txt").read_bytes()
        b = (tmp_path / "run2" / "labels" / f"{stem}.txt").read_bytes()
        assert a == b


def test_emit_labels_contained_in_unit_box(tmp_path):
    record = _two_page_record()
    split = split_documents([(record.doc_id, 2)], 0, 0, 0)
    manifest = emit_dataset([record], split, RenderConfig(target_long_side_px=256),
                            BlankRenderer(), tmp_path)
    for row in manifest.rows:
        for _, cx, cy, w, h in row.labels:
            assert -1e-6 <= cx - w / 2 and cx + w / 2 <= 1 + 1e-6
            assert -1e-6 <= cy - h / 2 and cy + h / 2 <= 1 + 1e-6


def test_emit_manifest_row_field_order(tmp_path):
    record = _two_page_record()
    split = split_documents([(record.doc_id, 2)], 0, 0, 0)
    manifest = emit_dataset([record], split, RenderConfig(target_long_side_px=256),
                            BlankRenderer(), tmp_path)
    manifest.save(tmp_path / "manifest.ndjson")
    row = json.loads((tmp_path / "manifest.ndjson").read_text().splitlines()[0])
    assert list(row) == [
        "doc_id", "page_index", "split", "image_path",
        "width_px", "height_px", "scale", "labels",
    ]
    loaded = DatasetManifest.load(tmp_path / "manifest.ndjson")
    assert [r.to_json_dict() for r in loaded.rows] == [r.to_json_dict() for r in manifest.rows]


# -------------------------------------------------------------------- tags


def _tagged_manifest(tmp_path):
    record = _two_page_record()
    split = split_documents([(record.doc_id, 2)], 0, 0, 0)
    return emit_dataset([record], split, RenderConfig(target_long_side_px=256),
                        BlankRenderer(), tmp_path)


def test_attach_tags_populates_language(tmp_path):
    manifest = _tagged_manifest(tmp_path)
    doc_id = manifest.rows[0].doc_id
    tagged = attach_tags(manifest, [{"doc_id": doc_id, "page_index": 0, "language": "en"}])
    assert tagged.rows[0].language == "en"
    assert tagged.rows[0].domain is None
    # original untouched
    assert manifest.rows[0].language is None


def test_attach_tags_empty_is_noop(tmp_path):
    manifest = _tagged_manifest(tmp_path)
    tagged = attach_tags(manifest, [])
    assert [r.to_json_dict() for r in tagged.rows] == [r.to_json_dict() for r in manifest.rows]


def test_attach_tags_unknown_page_reported(tmp_path):
    manifest = _tagged_manifest(tmp_path)
    tagged = attach_tags(manifest, [{"doc_id": "nope", "page_index": 9, "language": "fr"}])
    assert tagged.tag_warnings == [{"doc_id": "nope", "page_index": 9, "error": "unknown page"}]
    assert [r.to_json_dict() for r in tagged.rows] == [r.to_json_dict() for r in manifest.rows]


def test_attach_tags_malformed_file(tmp_path):
    bad = tmp_path / "tags.ndjson"
    bad.write_text('{"doc_id": "x"}\n')
    manifest = _tagged_manifest(tmp_path)
    with pytest.raises(MalformedTagFile):
        attach_tags(manifest, bad)


def test_render_config_validation():
    with pytest.raises(ValueError):
        RenderConfig(target_long_side_px=32)
    with pytest.raises(ValueError):
        RenderConfig(output_format="jpeg")
