"""Procedural 8-class shape dataset and image file IO.

Images are 64x64 RGB float grids in [0,1]: a smooth textured background with
one colored shape per image. Every pixel is a deterministic function of
(seed, split, index), so splits are reproducible and labels are correct by
construction. The eight classes are chosen to stay distinct under the random
rotation each image gets (a rotated square is still a square, so there is no
separate diamond class).

Interchange formats: binary PPM (P6, 8-bit, export only) and headerless raw
little-endian float32 (exact values, shape supplied by the reader).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .rng import RandomStream

IMAGE_SIZE = 64
CLASS_COUNT = 8

CLASS_NAMES = (
    "disc",
    "ring",
    "square",
    "triangle",
    "cross",
    "hexagram",
    "bars",
    "dots",
)


def _hsv_to_rgb(h: float, s: float, v: float) -> np.ndarray:
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    return np.array(
        [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    )


def _triangle_sdf(px: np.ndarray, py: np.ndarray, radius: float = 0.95) -> np.ndarray:
    """Signed distance-ish field of an equilateral triangle (max of half-planes)."""
    d = np.full_like(px, -np.inf)
    for ang in (np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3):
        nx, ny = np.cos(ang), np.sin(ang)
        d = np.maximum(d, nx * px + ny * py - radius * 0.5)
    return d


def _shape_field(label: int, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Negative inside the shape, positive outside, in unit-scale coords."""
    r = np.sqrt(px * px + py * py)
    if label == 0:  # disc
        return r - 0.95
    if label == 1:  # ring
        return np.abs(r - 0.72) - 0.26
    if label == 2:  # square
        return np.maximum(np.abs(px), np.abs(py)) - 0.78
    if label == 3:  # triangle
        return _triangle_sdf(px, py)
    if label == 4:  # cross
        bar1 = np.maximum(np.abs(px) - 0.95, np.abs(py) - 0.3)
        bar2 = np.maximum(np.abs(px) - 0.3, np.abs(py) - 0.95)
        return np.minimum(bar1, bar2)
    if label == 5:  # hexagram (two opposed triangles)
        return np.minimum(_triangle_sdf(px, py), _triangle_sdf(-px, -py))
    if label == 6:  # three parallel bars
        d = np.full_like(px, np.inf)
        for off in (-0.62, 0.0, 0.62):
            d = np.minimum(d, np.maximum(np.abs(px) - 0.9, np.abs(py - off) - 0.17))
        return d
    if label == 7:  # two dots
        d1 = np.sqrt((px - 0.52) ** 2 + py * py) - 0.38
        d2 = np.sqrt((px + 0.52) ** 2 + py * py) - 0.38
        return np.minimum(d1, d2)
    raise ValueError(f"label {label} outside the {CLASS_COUNT}-class task")


def render_image(label: int, stream: RandomStream, size: int = IMAGE_SIZE) -> np.ndarray:
    """One (3, size, size) float64 image in [0,1] for the given class."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    # smooth background: directional gradient between two pastel colors plus a
    # low-frequency cosine wash, kept off the [0,1] rails
    bg_a = _hsv_to_rgb(stream.uniform(), stream.uniform(low=0.05, high=0.35), stream.uniform(low=0.35, high=0.85))
    bg_b = _hsv_to_rgb(stream.uniform(), stream.uniform(low=0.05, high=0.35), stream.uniform(low=0.35, high=0.85))
    ga = stream.uniform(low=0.0, high=2 * np.pi)
    t = ((xx - size / 2) * np.cos(ga) + (yy - size / 2) * np.sin(ga)) / size + 0.5
    t = np.clip(t, 0.0, 1.0)
    fx = stream.uniform(low=0.5, high=1.8)
    fy = stream.uniform(low=0.5, high=1.8)
    phase = stream.uniform(low=0.0, high=2 * np.pi)
    wash = 0.06 * np.cos(2 * np.pi * (fx * xx + fy * yy) / size + phase)
    img = bg_a[:, None, None] * (1 - t) + bg_b[:, None, None] * t + wash

    # shape placement
    scale = stream.uniform(low=11.0, high=17.0)
    cx = size / 2 + stream.uniform(low=-6.0, high=6.0)
    cy = size / 2 + stream.uniform(low=-6.0, high=6.0)
    theta = stream.uniform(low=0.0, high=2 * np.pi)
    ct, st = np.cos(theta), np.sin(theta)
    lx = ((xx - cx) * ct + (yy - cy) * st) / scale
    ly = (-(xx - cx) * st + (yy - cy) * ct) / scale
    field = _shape_field(label, lx, ly) * scale  # back to pixel units
    alpha = np.clip(0.5 - field / 1.5, 0.0, 1.0)  # ~1.5px anti-aliased edge

    color = _hsv_to_rgb(stream.uniform(), stream.uniform(low=0.65, high=1.0), stream.uniform(low=0.55, high=1.0))
    img = img * (1 - alpha)[None] + color[:, None, None] * alpha[None]
    return np.clip(img, 0.02, 0.98)


@dataclass
class SyntheticDataset:
    """Deterministic class-balanced shapes; label of item i is i % 8."""

    seed: int
    train_size: int = 1024
    eval_size: int = 256
    class_count: int = CLASS_COUNT

    def __post_init__(self):
        if self.class_count != CLASS_COUNT:
            raise ValueError(f"renderer defines exactly {CLASS_COUNT} classes")
        self._root = RandomStream.from_seed(self.seed).substream("dataset")

    def label(self, index: int) -> int:
        return index % self.class_count

    def image(self, split: str, index: int) -> np.ndarray:
        if split not in ("train", "eval"):
            raise ValueError(f"unknown split {split!r}")
        n = self.train_size if split == "train" else self.eval_size
        if not 0 <= index < n:
            raise IndexError(f"{split} index {index} outside [0, {n})")
        return render_image(self.label(index), self._root.substream(split, index))

    def arrays(self, split: str, count: int | None = None, dtype=np.float64):
        """(images (N,3,64,64), labels (N,)) for the first ``count`` items."""
        n = self.train_size if split == "train" else self.eval_size
        if count is not None:
            n = min(count, n)
        imgs = np.stack([self.image(split, i) for i in range(n)]).astype(dtype)
        labels = np.array([self.label(i) for i in range(n)], dtype=np.int64)
        return imgs, labels


# ---------------------------------------------------------------------------
# image file IO


def quantize8(img: np.ndarray) -> np.ndarray:
    """Round-trip through 8-bit levels, staying in float [0,1]."""
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def write_ppm(path, img: np.ndarray):
    """Write (3,H,W) [0,1] floats as binary P6 (quantized to 8-bit)."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise FormatError(f"PPM writer expects (3,H,W), got {img.shape}")
    _, h, w = img.shape
    data = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(data.transpose(1, 2, 0)).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read binary P6 back to (3,H,W) floats in [0,1]."""
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        parts = []
        pos = 0
        while len(parts) < 4:
            while pos < len(blob) and blob[pos : pos + 1].isspace():
                pos += 1
            if blob[pos : pos + 1] == b"#":
                while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                    pos += 1
                continue
            start = pos
            while pos < len(blob) and not blob[pos : pos + 1].isspace():
                pos += 1
            parts.append(blob[start:pos])
        magic, w, h, maxval = parts[0], int(parts[1]), int(parts[2]), int(parts[3])
        pos += 1  # single whitespace after maxval
    except (ValueError, IndexError) as exc:
        raise FormatError(f"malformed PPM header in {path}") from exc
    if magic != b"P6":
        raise FormatError(f"{path}: expected P6 magic, got {magic!r}")
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PPM supported, maxval={maxval}")
    raw = blob[pos : pos + 3 * w * h]
    if len(raw) != 3 * w * h:
        raise FormatError(f"{path}: truncated PPM payload ({len(raw)} of {3 * w * h} bytes)")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3).transpose(2, 0, 1)
    return arr.astype(np.float64) / 255.0


def write_f32(path, img: np.ndarray):
    """Headerless raw little-endian float32 dump."""
    np.ascontiguousarray(img, dtype="<f4").tofile(path)


def read_f32(path, shape) -> np.ndarray:
    arr = np.fromfile(path, dtype="<f4")
    expected = int(np.prod(shape))
    if arr.size != expected:
        raise FormatError(f"{path}: expected {expected} float32 values, found {arr.size}")
    return arr.reshape(shape)
