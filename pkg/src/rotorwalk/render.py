"""Binary PPM rendering of ranges coloured by first excursion."""
from __future__ import annotations

import numpy as np

from .engine import ExcursionLog

MAX_PIXELS = 10**8
WHITE = (255, 255, 255)

PALETTE = (
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40), (148, 103, 189),
    (140, 86, 75), (227, 119, 194), (127, 127, 127), (188, 189, 34), (23, 190, 207),
    (174, 199, 232), (255, 187, 120), (152, 223, 138), (255, 152, 150), (197, 176, 213),
    (196, 156, 148), (247, 182, 210), (199, 199, 199), (219, 219, 141), (158, 218, 229),
)


class RenderError(ValueError):
    pass


def first_excursion_labels(log: ExcursionLog) -> dict:
    """Vertex -> index n >= 1 of the first excursion set A_n containing it."""
    labels: dict = {}
    for n in range(1, len(log.A)):
        for v in log.A[n]:
            labels.setdefault(v, n)
    return labels


def bounding_window(vertices) -> tuple[int, int, int, int]:
    vs = list(vertices)
    if not vs:
        return 0, 0, 1, 1
    xs = [v[0] for v in vs]
    ys = [v[1] for v in vs]
    return min(xs), min(ys), max(xs) - min(xs) + 1, max(ys) - min(ys) + 1


def render_range(labels: dict, window: tuple[int, int, int, int] | None = None) -> bytes:
    """P6 image, one pixel per vertex, top row = largest y.

    Unlabelled pixels are white; label n gets ``PALETTE[(n - 1) % 20]``.
    """
    x0, y0, w, h = bounding_window(labels) if window is None else window
    if w <= 0 or h <= 0:
        raise RenderError("window must be non-empty")
    if w * h > MAX_PIXELS:
        raise RenderError(f"window of {w * h} pixels exceeds {MAX_PIXELS}")
    img = np.full((h, w, 3), 255, dtype=np.uint8)
    pal = np.array(PALETTE, dtype=np.uint8)
    for (x, y), n in labels.items():
        i, j = x - x0, y - y0
        if 0 <= i < w and 0 <= j < h:
            img[h - 1 - j, i] = pal[(n - 1) % len(PALETTE)]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes()
