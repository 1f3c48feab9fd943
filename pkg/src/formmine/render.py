"""Page rasterization behind a small interface.

Rendering fidelity is not this toolkit's research content, so the renderer
is pluggable: a blank-page stub for tests, a best-effort built-in vector
rasterizer (paths and text; no shading, images, or transparency), and an
external-command adapter for production rasterizers.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import Callable, Protocol

from PIL import Image, ImageDraw, ImageFont

from .geometry import user_point_to_pixels
from .pdf.content import IDENTITY, apply, iter_operations, multiply, _num
from .pdf.text import extract_text_runs
from .pdfmodel import DocumentHandle, PageGeometry, open_path


class RenderFailure(Exception):
    pass


class PageRenderer(Protocol):
    def render(
        self,
        doc_id: str,
        page_index: int,
        geom: PageGeometry,
        scale: float,
        width_px: int,
        height_px: int,
    ) -> Image.Image: ...


class DocumentStore:
    """doc_id -> opened handle, with a bounded cache."""

    def __init__(self, paths: dict[str, str], max_open: int = 8):
        self._paths = dict(paths)
        self._open: dict[str, DocumentHandle] = {}
        self._max_open = max_open

    def path(self, doc_id: str) -> str:
        return self._paths[doc_id]

    def __call__(self, doc_id: str) -> DocumentHandle:
        if doc_id in self._open:
            return self._open[doc_id]
        handle = open_path(self._paths[doc_id])
        if handle.doc_id != doc_id:
            raise RenderFailure(
                f"content of {self._paths[doc_id]} no longer matches doc_id {doc_id}"
            )
        if len(self._open) >= self._max_open:
            self._open.pop(next(iter(self._open)))
        self._open[doc_id] = handle
        return handle


class BlankRenderer:
    """White pages; keeps the pipeline testable without a rasterizer."""

    def render(self, doc_id, page_index, geom, scale, width_px, height_px) -> Image.Image:
        return Image.new("RGB", (width_px, height_px), "white")


_ROTATE_TRANSPOSE = {
    90: Image.Transpose.ROTATE_270,  # /Rotate 90 displays 90 degrees clockwise
    180: Image.Transpose.ROTATE_180,
    270: Image.Transpose.ROTATE_90,
}


def _load_font(px: int):
    try:
        return ImageFont.load_default(size=max(6, px))
    except TypeError:  # older Pillow: bitmap font only
        return ImageFont.load_default()


def _to_rgb(color: tuple[float, float, float]) -> tuple[int, int, int]:
    return tuple(max(0, min(255, int(round(c * 255)))) for c in color)


class VectorRenderer:
    """Best-effort rasterizer for vector content: fills, strokes, and text.

    Renders in unrotated page space then rotates the bitmap, so geometry
    matches the coordinate transforms exactly.
    """

    def __init__(self, source: Callable[[str], DocumentHandle]):
        self._source = source

    def render(self, doc_id, page_index, geom, scale, width_px, height_px) -> Image.Image:
        try:
            doc = self._source(doc_id)
            page = doc.pdf.pages()[page_index]
        except Exception as exc:
            raise RenderFailure(f"{doc_id} p{page_index}: {exc}") from exc
        flat = PageGeometry(media_box=geom.media_box, rotation=0)
        w0 = round(geom.width * scale)
        h0 = round(geom.height * scale)
        img = Image.new("RGB", (max(1, w0), max(1, h0)), "white")
        draw = ImageDraw.Draw(img)

        def device(x: float, y: float) -> tuple[float, float]:
            return user_point_to_pixels(x, y, flat, scale)

        try:
            self._draw_paths(draw, page, device, scale)
            self._draw_text(draw, page, device, scale)
        except Exception as exc:
            raise RenderFailure(f"{doc_id} p{page_index}: {exc}") from exc
        if geom.rotation in _ROTATE_TRANSPOSE:
            img = img.transpose(_ROTATE_TRANSPOSE[geom.rotation])
        if img.size != (width_px, height_px):
            img = img.resize((width_px, height_px))
        return img

    def _draw_paths(self, draw, page, device, scale) -> None:
        data = page.content_bytes()
        ctm_stack = [IDENTITY]
        fill = (0.0, 0.0, 0.0)
        stroke = (0.0, 0.0, 0.0)
        line_width = 1.0
        subpaths: list[list[tuple[float, float]]] = []
        current: list[tuple[float, float]] = []

        def flush_point(x, y):
            return apply(ctm_stack[-1], x, y)

        def finish(do_stroke: bool, do_fill: bool) -> None:
            nonlocal subpaths, current
            if current:
                subpaths.append(current)
            for sub in subpaths:
                if len(sub) < 2:
                    continue
                pts = [device(*p) for p in sub]
                if do_fill and len(pts) >= 3:
                    draw.polygon(pts, fill=_to_rgb(fill))
                if do_stroke:
                    width = max(1, round(line_width * scale))
                    draw.line(pts, fill=_to_rgb(stroke), width=width)
            subpaths = []
            current = []

        for operands, op in iter_operations(data):
            if op == b"q":
                ctm_stack.append(ctm_stack[-1])
            elif op == b"Q":
                if len(ctm_stack) > 1:
                    ctm_stack.pop()
            elif op == b"cm" and len(operands) >= 6:
                ctm_stack[-1] = multiply(tuple(_num(v) for v in operands[:6]), ctm_stack[-1])
            elif op == b"w" and operands:
                line_width = _num(operands[0], 1.0)
            elif op == b"g" and operands:
                v = _num(operands[0])
                fill = (v, v, v)
            elif op == b"G" and operands:
                v = _num(operands[0])
                stroke = (v, v, v)
            elif op == b"rg" and len(operands) >= 3:
                fill = tuple(_num(v) for v in operands[:3])
            elif op == b"RG" and len(operands) >= 3:
                stroke = tuple(_num(v) for v in operands[:3])
            elif op == b"k" and len(operands) >= 4:
                fill = _cmyk(operands)
            elif op == b"K" and len(operands) >= 4:
                stroke = _cmyk(operands)
            elif op == b"m" and len(operands) >= 2:
                if current:
                    subpaths.append(current)
                current = [flush_point(_num(operands[0]), _num(operands[1]))]
            elif op == b"l" and len(operands) >= 2:
                current.append(flush_point(_num(operands[0]), _num(operands[1])))
            elif op == b"c" and len(operands) >= 6:
                current.extend(
                    _flatten_cubic(
                        current[-1] if current else flush_point(0, 0),
                        flush_point(_num(operands[0]), _num(operands[1])),
                        flush_point(_num(operands[2]), _num(operands[3])),
                        flush_point(_num(operands[4]), _num(operands[5])),
                    )
                )
            elif op in (b"v", b"y") and len(operands) >= 4:
                current.append(flush_point(_num(operands[2]), _num(operands[3])))
            elif op == b"h":
                if current and current[0] != current[-1]:
                    current.append(current[0])
            elif op == b"re" and len(operands) >= 4:
                x, y, w, h = (_num(v) for v in operands[:4])
                if current:
                    subpaths.append(current)
                    current = []
                subpaths.append(
                    [
                        flush_point(x, y),
                        flush_point(x + w, y),
                        flush_point(x + w, y + h),
                        flush_point(x, y + h),
                        flush_point(x, y),
                    ]
                )
            elif op in (b"S", b"s"):
                finish(do_stroke=True, do_fill=False)
            elif op in (b"f", b"F", b"f*"):
                finish(do_stroke=False, do_fill=True)
            elif op in (b"B", b"B*", b"b", b"b*"):
                finish(do_stroke=True, do_fill=True)
            elif op == b"n":
                subpaths = []
                current = []

    def _draw_text(self, draw, page, device, scale) -> None:
        for run in extract_text_runs(page):
            px, py = device(run.x, run.y)
            size = max(4, round(run.size * scale))
            font = _load_font(size)
            try:
                draw.text((px, py), run.text, fill=(20, 20, 20), font=font, anchor="ls")
            except (ValueError, OSError):
                draw.text((px, py - size), run.text, fill=(20, 20, 20), font=font)


def _cmyk(operands) -> tuple[float, float, float]:
    c, m, y, k = (_num(v) for v in operands[:4])
    return (1 - min(1, c + k), 1 - min(1, m + k), 1 - min(1, y + k))


def _flatten_cubic(p0, p1, p2, p3, steps: int = 8):
    points = []
    for i in range(1, steps + 1):
        t = i / steps
        mt = 1 - t
        points.append(
            (
                mt**3 * p0[0] + 3 * mt**2 * t * p1[0] + 3 * mt * t**2 * p2[0] + t**3 * p3[0],
                mt**3 * p0[1] + 3 * mt**2 * t * p1[1] + 3 * mt * t**2 * p2[1] + t**3 * p3[1],
            )
        )
    return points


class CommandRenderer:
    """Invokes an external rasterizer per page.

    The command template receives {pdf} {page} {scale} {out}; it must write
    a PNG/PPM image to {out}.
    """

    def __init__(self, command_template: str, path_for: Callable[[str], str]):
        self._template = command_template
        self._path_for = path_for

    def render(self, doc_id, page_index, geom, scale, width_px, height_px) -> Image.Image:
        pdf_path = self._path_for(doc_id)
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "page.png"
            cmd = self._template.format(
                pdf=shlex.quote(pdf_path), page=page_index, scale=scale, out=shlex.quote(str(out))
            )
            proc = subprocess.run(cmd, shell=True, capture_output=True, timeout=120)
            if proc.returncode != 0 or not out.exists():
                raise RenderFailure(
                    f"renderer command failed for {doc_id} p{page_index}: "
                    f"{proc.stderr.decode(errors='replace')[:500]}"
                )
            img = Image.open(out).convert("RGB")
        if img.size != (width_px, height_px):
            img = img.resize((width_px, height_px))
        return img


def build_renderer(kind: str, store: DocumentStore | None, command: str | None = None):
    if kind == "blank":
        return BlankRenderer()
    if kind == "vector":
        if store is None:
            raise ValueError("vector renderer needs a document store")
        return VectorRenderer(store)
    if kind == "command":
        if not command or store is None:
            raise ValueError("command renderer needs a command template and document store")
        return CommandRenderer(command, store.path)
    raise ValueError(f"unknown renderer {kind!r}")
