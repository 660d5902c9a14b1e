"""Embedding file I/O: a small binary tensor format plus a CSV metadata sidecar.

Binary layout (all integers little-endian):

    magic   4 bytes  b"REID"
    version u16      currently 1
    count   u32      number of rows
    dim     u32      row width
    width   u8       bytes per float, 4 or 8
    payload count * dim little-endian IEEE floats, row-major

The sidecar CSV carries one line per row with columns
item_id,person_id,camera_id and lives next to the binary file with a
``.csv`` suffix. Values are widened to float64 on load regardless of the
stored width.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .core import ItemMeta

__all__ = [
    "EmbeddingFileError",
    "save_array",
    "load_array",
    "save_embeddings",
    "load_embeddings",
    "meta_sidecar_path",
]

MAGIC = b"REID"
VERSION = 1
_HEADER = struct.Struct("<4sHIIB")
_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


class EmbeddingFileError(ValueError):
    """File-format violation with a stable machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def meta_sidecar_path(path) -> Path:
    return Path(path).with_suffix(".csv")


def save_array(path, values, width: int = 4) -> None:
    """Write a 2-d float array in the binary format at the given float width."""
    if width not in _DTYPES:
        raise EmbeddingFileError("bad-width", f"float width must be 4 or 8, got {width}")
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    if arr.ndim != 2:
        raise ValueError("expected a 2-d array")
    payload = arr.astype(_DTYPES[width]).tobytes()
    header = _HEADER.pack(MAGIC, VERSION, arr.shape[0], arr.shape[1], width)
    Path(path).write_bytes(header + payload)


def load_array(path) -> np.ndarray:
    """Read a binary tensor file back as float64, validating the header."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise EmbeddingFileError("truncated", f"{path}: shorter than the header")
    magic, version, count, dim, width = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise EmbeddingFileError("bad-magic", f"{path}: magic {magic!r} != {MAGIC!r}")
    if version != VERSION:
        raise EmbeddingFileError("bad-version", f"{path}: version {version} != {VERSION}")
    if width not in _DTYPES:
        raise EmbeddingFileError("bad-width", f"{path}: float width {width}")
    expected = count * dim * width
    payload = blob[_HEADER.size :]
    if len(payload) != expected:
        raise EmbeddingFileError(
            "truncated", f"{path}: payload {len(payload)} bytes, expected {expected}"
        )
    flat = np.frombuffer(payload, dtype=_DTYPES[width])
    return flat.reshape(count, dim).astype(np.float64)


def save_embeddings(path, embeddings, meta: list[ItemMeta], width: int = 4) -> None:
    """Write embeddings plus the aligned metadata sidecar."""
    arr = np.asarray(embeddings, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("embeddings must be an (n, d) matrix")
    if len(meta) != arr.shape[0]:
        raise EmbeddingFileError(
            "meta-mismatch", f"{len(meta)} metadata rows for {arr.shape[0]} embeddings"
        )
    save_array(path, arr, width=width)
    with open(meta_sidecar_path(path), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["item_id", "person_id", "camera_id"])
        for m in meta:
            writer.writerow([m.item_id, m.person_id, m.camera_id])


def load_embeddings(path) -> tuple[np.ndarray, list[ItemMeta]]:
    """Read embeddings and their metadata sidecar; returns (float64 array, meta)."""
    arr = load_array(path)
    sidecar = meta_sidecar_path(path)
    if not sidecar.exists():
        raise EmbeddingFileError("meta-missing", f"sidecar {sidecar} not found")
    meta: list[ItemMeta] = []
    with open(sidecar, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["item_id", "person_id", "camera_id"]:
            raise EmbeddingFileError("meta-header", f"{sidecar}: unexpected header {header}")
        for row in reader:
            if len(row) != 3:
                raise EmbeddingFileError("meta-row", f"{sidecar}: malformed row {row}")
            try:
                meta.append(ItemMeta(row[0], int(row[1]), int(row[2])))
            except ValueError as exc:
                raise EmbeddingFileError("meta-row", f"{sidecar}: {exc}") from exc
    if len(meta) != arr.shape[0]:
        raise EmbeddingFileError(
            "meta-mismatch",
            f"{sidecar}: {len(meta)} metadata rows for {arr.shape[0]} embeddings",
        )
    return arr, meta
