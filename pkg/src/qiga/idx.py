"""Reader for the big-endian IDX image/label files of the MNIST family."""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from .errors import IdxCountMismatchError, IdxFormatError, IdxMagicError, IdxTruncatedError
from .fitness import Dataset

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
IMAGES_HEADER = struct.Struct(">IIII")
LABELS_HEADER = struct.Struct(">II")
PIXEL_SCALE = 255.0


def _read(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IdxFormatError(f"Cannot read IDX file {path}: {exc}") from exc


def _header(payload: bytes, layout: struct.Struct, path: Path) -> tuple[int, ...]:
    if len(payload) < layout.size:
        raise IdxTruncatedError(
            f"{path}: header needs {layout.size} bytes, file has {len(payload)}."
        )
    return layout.unpack_from(payload)


def _check_magic(found: int, expected: int, path: Path) -> None:
    if found != expected:
        raise IdxMagicError(f"{path}: magic 0x{found:08x}, expected 0x{expected:08x}.")


def read_idx_header(path: Path) -> tuple[int, int, int]:
    """Return (count, rows, cols) of an IDX image file without loading pixels."""

    payload = _read(path)
    magic, count, rows, cols = _header(payload, IMAGES_HEADER, path)
    _check_magic(magic, IMAGES_MAGIC, path)
    return count, rows, cols


def load_idx(images_path: Path, labels_path: Path, max_samples: int | None = None) -> Dataset:
    """Load the first ``max_samples`` images (scaled to [0, 1]) and their labels."""

    images = _read(images_path)
    labels = _read(labels_path)
    magic, count, rows, cols = _header(images, IMAGES_HEADER, images_path)
    _check_magic(magic, IMAGES_MAGIC, images_path)
    label_magic, label_count = _header(labels, LABELS_HEADER, labels_path)
    _check_magic(label_magic, LABELS_MAGIC, labels_path)
    if count != label_count:
        raise IdxCountMismatchError(
            f"{images_path} holds {count} images but {labels_path} holds {label_count} labels."
        )

    wanted = count if max_samples is None else max(0, min(max_samples, count))
    pixels = rows * cols
    expected = IMAGES_HEADER.size + count * pixels
    if len(images) < expected:
        raise IdxTruncatedError(
            f"{images_path}: expected {expected} bytes, found {len(images)}."
        )
    expected_labels = LABELS_HEADER.size + label_count
    if len(labels) < expected_labels:
        raise IdxTruncatedError(
            f"{labels_path}: expected {expected_labels} bytes, found {len(labels)}."
        )

    raw = np.frombuffer(images, dtype=np.uint8, count=wanted * pixels, offset=IMAGES_HEADER.size)
    targets = np.frombuffer(labels, dtype=np.uint8, count=wanted, offset=LABELS_HEADER.size)
    logger.info(
        "idx_loaded images=%s samples=%s rows=%s cols=%s", images_path, wanted, rows, cols
    )
    return Dataset(
        images=raw.reshape(wanted, pixels).astype(np.float64) / PIXEL_SCALE,
        labels=targets.astype(np.int64),
        rows=rows,
        cols=cols,
    )


def write_idx(images_path: Path, labels_path: Path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 images of shape (n, rows, cols) and labels of shape (n,) as IDX files."""

    if images.ndim != 3 or labels.ndim != 1 or images.shape[0] != labels.shape[0]:
        raise IdxFormatError("write_idx expects images (n, rows, cols) and labels (n,).")
    count, rows, cols = images.shape
    Path(images_path).write_bytes(
        IMAGES_HEADER.pack(IMAGES_MAGIC, count, rows, cols) + images.astype(np.uint8).tobytes()
    )
    Path(labels_path).write_bytes(
        LABELS_HEADER.pack(LABELS_MAGIC, count) + labels.astype(np.uint8).tobytes()
    )
