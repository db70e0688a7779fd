"""The CEMB binary format: per-document contextual embedding matrices.

Layout (all integers little-endian uint32):

    b"CEMB" | version | id_length | doc id (UTF-8) | rows | dim | payload

The payload is the row-major float32 little-endian matrix, written bit
for bit so the consumer reads back exactly what the encoder produced.
Files are written atomically (temp file in the target directory, then
rename) so parallel export jobs never expose partial files.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from seal_exporter.errors import ExportError

__all__ = ["read_cemb", "write_cemb"]

_MAGIC = b"CEMB"
_VERSION = 1


def write_cemb(doc_id: str, matrix: np.ndarray, path: Path | str) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ExportError(f"{doc_id}: expected a (tokens, dim) matrix, got {matrix.shape}")
    encoded_id = doc_id.encode("utf-8")
    path = Path(path)
    handle, temp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(handle, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", _VERSION))
            fh.write(struct.pack("<I", len(encoded_id)))
            fh.write(encoded_id)
            fh.write(struct.pack("<II", matrix.shape[0], matrix.shape[1]))
            fh.write(matrix.tobytes())
        os.replace(temp_name, path)
    except BaseException:
        os.unlink(temp_name)
        raise


def read_cemb(path: Path | str) -> tuple[str, np.ndarray]:
    """Read back (doc_id, matrix); used for self-checks and tooling."""
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise ExportError(f"{path}: not a CEMB file")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _VERSION:
        raise ExportError(f"{path}: unsupported CEMB version {version}")
    (id_length,) = struct.unpack_from("<I", blob, 8)
    doc_id = blob[12 : 12 + id_length].decode("utf-8")
    rows, dim = struct.unpack_from("<II", blob, 12 + id_length)
    payload = blob[12 + id_length + 8 :]
    if len(payload) != rows * dim * 4:
        raise ExportError(f"{path}: truncated payload")
    return doc_id, np.frombuffer(payload, dtype="<f4").reshape(rows, dim).copy()
