"""Transforms between PDF user space (points, y-up) and rendered-image
pixel space (y-down), including the four page rotations.

`pdf_rect_to_pixels` and `pixels_to_pdf_rect` are exact inverses; both go
through the same corner mapping so a convention change cannot split them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .pdfmodel import PageGeometry, Rect

if TYPE_CHECKING:
    from .mining import FieldClass


class DegenerateRect(ValueError):
    """The rect rounds to zero pixels in at least one dimension."""


@dataclass(frozen=True, slots=True)
class PixelBox:
    """Axis-aligned box in rendered-image pixels, origin top-left."""

    x: float
    y: float
    w: float
    h: float
    cls: "FieldClass | None" = None

    def corners(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (self.x, self.y), (self.x + self.w, self.y + self.h)


def compute_render_scale(geom: PageGeometry, target_long_side_px: int) -> float:
    """Pixels per point so the page's longer side (rotation-invariant)
    renders at the target."""
    return target_long_side_px / max(geom.width, geom.height)


def rendered_size(geom: PageGeometry, scale: float) -> tuple[int, int]:
    """(width_px, height_px) of the rendered page; 90/270 swap the axes."""
    w = round(geom.width * scale)
    h = round(geom.height * scale)
    if geom.rotation in (90, 270):
        return h, w
    return w, h


def user_point_to_pixels(
    x: float, y: float, geom: PageGeometry, scale: float
) -> tuple[float, float]:
    mx0, my0, _, _ = geom.media_box
    u = x - mx0
    v = y - my0
    width, height = geom.width, geom.height
    rot = geom.rotation
    if rot == 0:
        return u * scale, (height - v) * scale
    if rot == 90:
        return v * scale, u * scale
    if rot == 180:
        return (width - u) * scale, v * scale
    return (height - v) * scale, (width - u) * scale  # 270


def pixels_to_user_point(
    px: float, py: float, geom: PageGeometry, scale: float
) -> tuple[float, float]:
    mx0, my0, _, _ = geom.media_box
    width, height = geom.width, geom.height
    rot = geom.rotation
    if rot == 0:
        u, v = px / scale, height - py / scale
    elif rot == 90:
        u, v = py / scale, px / scale
    elif rot == 180:
        u, v = width - px / scale, py / scale
    else:  # 270
        u, v = width - py / scale, height - px / scale
    return u + mx0, v + my0


def pdf_rect_to_pixels(
    rect: Rect,
    geom: PageGeometry,
    scale: float,
    cls: "FieldClass | None" = None,
) -> PixelBox:
    """Map a user-space rect (already clipped to the media box) into pixel
    space, clipping to the rounded image bounds.

    Raises DegenerateRect when either dimension rounds to zero pixels.
    """
    x0, y0, x1, y1 = rect
    pts = [
        user_point_to_pixels(x0, y0, geom, scale),
        user_point_to_pixels(x1, y1, geom, scale),
    ]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    width_px, height_px = rendered_size(geom, scale)
    bx0 = min(max(min(xs), 0.0), float(width_px))
    by0 = min(max(min(ys), 0.0), float(height_px))
    bx1 = min(max(max(xs), 0.0), float(width_px))
    by1 = min(max(max(ys), 0.0), float(height_px))
    w, h = bx1 - bx0, by1 - by0
    if round(w) == 0 or round(h) == 0:
        raise DegenerateRect(f"rect {rect} renders to {w:.3f}x{h:.3f} px")
    return PixelBox(x=bx0, y=by0, w=w, h=h, cls=cls)


def pixels_to_pdf_rect(box: PixelBox, geom: PageGeometry, scale: float) -> Rect:
    """Exact inverse of `pdf_rect_to_pixels` for the same geometry/scale."""
    (px0, py0), (px1, py1) = box.corners()
    pts = [
        pixels_to_user_point(px0, py0, geom, scale),
        pixels_to_user_point(px1, py1, geom, scale),
    ]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return (min(xs), min(ys), max(xs), max(ys))
