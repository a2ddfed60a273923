"""Minimal binary PGM (P5, maxval 255) reading and writing.

Label images use the convention value = round(255 * label / (k - 1)) for
k >= 2 clusters; a single-label image is all zeros.
"""

from __future__ import annotations

import numpy as np

from .errors import FormatError, ShapeError

__all__ = ["write_pgm", "read_pgm", "labels_to_gray", "write_label_pgm"]


def write_pgm(image: np.ndarray, path) -> None:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ShapeError("PGM image must be 2-D")
    if image.dtype != np.uint8:
        if image.min() < 0 or image.max() > 255:
            raise ShapeError("PGM values must fit in 0..255")
        image = image.astype(np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    # header: magic, width, height, maxval as whitespace-separated tokens
    # (comments are not supported; this reader only targets our own files)
    fields = []
    pos = 0
    while len(fields) < 4 and pos < len(raw):
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if len(fields) < 4 or fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    try:
        w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    pixels = raw[pos:]
    if len(pixels) != w * h:
        raise FormatError(f"{path}: expected {w * h} pixel bytes, found {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).copy()


def labels_to_gray(labels: np.ndarray, k: int) -> np.ndarray:
    """Spread integer labels 0..k-1 over the 0..255 gray range."""
    labels = np.asarray(labels)
    if k < 1 or (labels.size and (labels.min() < 0 or labels.max() >= k)):
        raise ShapeError(f"labels must lie in [0, {k})")
    if k == 1:
        return np.zeros(labels.shape, dtype=np.uint8)
    return np.rint(255.0 * labels / (k - 1)).astype(np.uint8)


def write_label_pgm(labels: np.ndarray, k: int, path) -> None:
    write_pgm(labels_to_gray(labels, k), path)
