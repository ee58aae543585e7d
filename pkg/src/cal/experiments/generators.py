"""Input generators: Lissajous pair, logistic map, rotating shapes, sentences."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "gen_lissajous",
    "gen_popeq",
    "popeq_series",
    "ShapeSpec",
    "SHAPES",
    "gen_shape_frame",
    "split_fields",
    "SENTENCES",
    "sentence_order",
]


def gen_lissajous(t: float) -> tuple[float, float]:
    """Two sinusoids with frequencies in the ratio 2:3; period 360 steps."""
    return float(np.sin(4 * np.pi * t / 360)), float(np.sin(6 * np.pi * t / 360 + np.pi / 6))


def gen_popeq(s: float, beta: float = 3.89) -> float:
    """Logistic map step."""
    return beta * s * (1.0 - s)


def popeq_series(n: int, s0: float = 0.5, beta: float = 3.89) -> np.ndarray:
    out = np.empty(n)
    s = s0
    for i in range(n):
        out[i] = s
        s = gen_popeq(s, beta)
    return out


SHAPES = ("square", "hexagon", "pentagon", "triangle", "star5", "star6", "circle3d")

# rotational period in degrees; frames are drawn at angle mod period so that
# symmetric rotations give identical rasters
_PERIOD = {"square": 90, "hexagon": 60, "pentagon": 72, "triangle": 120, "star5": 72, "star6": 60,
           "circle3d": 180}


@dataclass(frozen=True)
class ShapeSpec:
    kind: str
    size: int = 48
    step: float = 10.0

    def __post_init__(self):
        if self.kind not in SHAPES:
            raise ValueError(f"unknown shape {self.kind!r}")
        if self.size < 8:
            raise ValueError("frame too small")

    @property
    def frames(self) -> int:
        return int(round(360 / self.step))

    def angles(self) -> np.ndarray:
        return np.arange(self.frames) * self.step


def _polygon(n: int, radius: float, angle: float, offset: float = 90.0) -> np.ndarray:
    th = np.deg2rad(offset + angle + 360.0 * np.arange(n) / n)
    return np.stack([radius * np.cos(th), radius * np.sin(th)], axis=1)


def _closed(points: np.ndarray, stride: int = 1) -> list[tuple[np.ndarray, np.ndarray]]:
    n = len(points)
    return [(points[i], points[(i + stride) % n]) for i in range(n)]


def _draw(img: np.ndarray, segments, center: float) -> None:
    size = img.shape[0]
    for p, q in segments:
        steps = int(np.ceil(np.abs(q - p).max() * 2)) + 1
        t = np.linspace(0.0, 1.0, steps)[:, None]
        pts = p + t * (q - p)
        col = np.floor(center + pts[:, 0]).astype(int)
        row = np.floor(center - pts[:, 1]).astype(int)
        ok = (row >= 0) & (row < size) & (col >= 0) & (col < size)
        img[row[ok], col[ok]] = 1


def gen_shape_frame(spec: ShapeSpec, angle: float) -> np.ndarray:
    """Binary outline image of ``spec.kind`` rotated by ``angle`` degrees."""
    size = spec.size
    img = np.zeros((size, size), dtype=np.uint8)
    center = size / 2.0
    radius = 0.4 * size
    a = float(angle) % _PERIOD[spec.kind]
    kind = spec.kind
    if kind == "circle3d":
        # circle tilted about the horizontal in-plane axis: an ellipse
        th = np.linspace(0.0, 2 * np.pi, 8 * size, endpoint=False)
        pts = np.stack([radius * np.cos(th), radius * abs(np.cos(np.deg2rad(a))) * np.sin(th)], axis=1)
        _draw(img, _closed(pts), center)
        return img
    if kind == "square":
        segs = _closed(_polygon(4, radius, a, 45.0))
    elif kind == "hexagon":
        segs = _closed(_polygon(6, radius, a))
    elif kind == "pentagon":
        segs = _closed(_polygon(5, radius, a))
    elif kind == "triangle":
        segs = _closed(_polygon(3, radius, a))
    elif kind == "star5":
        segs = _closed(_polygon(5, radius, a), stride=2)
    else:  # star6: two overlaid triangles
        segs = _closed(_polygon(3, radius, a)) + _closed(_polygon(3, radius, a + 60.0))
    _draw(img, segs, center)
    return img


def split_fields(image: np.ndarray, grid: int = 3) -> list[np.ndarray]:
    """Row-major ``grid x grid`` tiling of a square image."""
    size = image.shape[0]
    if image.shape[1] != size or size % grid:
        raise ValueError(f"cannot split {image.shape} into {grid}x{grid} fields")
    f = size // grid
    return [image[r * f:(r + 1) * f, c * f:(c + 1) * f] for r in range(grid) for c in range(grid)]


SENTENCES = (
    "the quick brown fox jumps over the lazy dog. ",
    "a stitch in time saves nine, so they say. ",
    "every cloud has a silver lining somewhere. ",
)


def sentence_order(n: int, rng: np.random.Generator, count: int = len(SENTENCES)) -> list[int]:
    """``n`` uniformly random sentence indices with no immediate repeats."""
    order: list[int] = []
    for _ in range(n):
        choices = [i for i in range(count) if not order or i != order[-1]]
        order.append(int(choices[rng.integers(len(choices))]))
    return order
