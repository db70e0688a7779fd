"""Static word-embedding tables and per-document contextual token vectors.

Two input forms are supported: plain-text word-vector files (one ``word f1
... fd`` record per line) and the CEMB binary format for per-document
contextual matrices exported by an offline encoder.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from seal.corpus import Document, Token
from seal.errors import SealError


class DimMismatch(SealError):
    """A word-vector row whose arity disagrees with the table dimension."""


class EmptyFile(SealError):
    pass


class BadMagic(SealError):
    pass


class TruncatedPayload(SealError):
    """CEMB payload size disagrees with its header."""


class TokenCountMismatch(SealError):
    """Contextual matrix row count disagrees with the document's tokens."""


class IndexOutOfRange(SealError):
    pass


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    unk: np.ndarray

    @classmethod
    def from_vectors(cls, vectors: dict[str, np.ndarray]) -> "EmbeddingTable":
        """Build a table whose unk vector is the mean of all entries."""
        if not vectors:
            raise EmptyFile("cannot infer a dimension from an empty vector map")
        arrs = {w: np.asarray(v, dtype=np.float32) for w, v in vectors.items()}
        dim = next(iter(arrs.values())).shape[0]
        unk = np.mean(np.stack(list(arrs.values())), axis=0, dtype=np.float64)
        return cls(dim, arrs, unk.astype(np.float32))


@dataclass
class ContextualEmbeddings:
    doc_id: str
    dim: int
    matrix: np.ndarray  # (T, dim) float32


def load_table(path: Path | str) -> EmbeddingTable:
    """Load a word-vector text file; dimension is inferred from the first row.

    The unk vector is the component-wise mean of every loaded vector, which
    keeps unknown tokens inside the embedding cloud instead of at the origin.
    """
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if parts == [""]:
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise DimMismatch(f"{path.name} line {lineno}: no vector components")
            if len(values) != dim:
                raise DimMismatch(
                    f"{path.name} line {lineno}: expected {dim} components, "
                    f"got {len(values)}"
                )
            try:
                vectors[word] = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError:
                raise DimMismatch(
                    f"{path.name} line {lineno}: non-numeric vector component"
                ) from None
    if not vectors:
        raise EmptyFile(f"{path.name}: no vector records")
    return EmbeddingTable.from_vectors(vectors)


def lookup_sequence(table: EmbeddingTable, tokens: list[Token]) -> np.ndarray:
    """Per-token vectors, (T, dim).  Surfaces are lowercased; misses map to unk."""
    if not tokens:
        return np.zeros((0, table.dim), dtype=np.float32)
    rows = [table.vectors.get(tok.surface.lower(), table.unk) for tok in tokens]
    return np.stack(rows)


def context_concat(rows: np.ndarray, i: int, unk: np.ndarray) -> np.ndarray:
    """Concatenate [previous; current; next] rows, padding absent neighbors
    with the unk vector."""
    n = rows.shape[0]
    if not 0 <= i < n:
        raise IndexOutOfRange(f"token index {i} outside [0, {n})")
    prev = rows[i - 1] if i > 0 else unk
    nxt = rows[i + 1] if i + 1 < n else unk
    return np.concatenate([prev, rows[i], nxt])


_CEMB_MAGIC = b"CEMB"
_CEMB_VERSION = 1


def write_contextual(emb: ContextualEmbeddings, path: Path | str) -> None:
    """Write a CEMB file (bit-exact float32 little-endian payload)."""
    matrix = np.ascontiguousarray(emb.matrix, dtype="<f4")
    n_rows, dim = matrix.shape
    doc_id = emb.doc_id.encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(_CEMB_MAGIC)
        fh.write(struct.pack("<I", _CEMB_VERSION))
        fh.write(struct.pack("<I", len(doc_id)))
        fh.write(doc_id)
        fh.write(struct.pack("<II", n_rows, dim))
        fh.write(matrix.tobytes())


def load_contextual(path: Path | str) -> ContextualEmbeddings:
    """Read a CEMB file; header-declared shape must match the payload exactly."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != _CEMB_MAGIC:
        raise BadMagic(f"{path.name}: not a CEMB file")
    try:
        (version,) = struct.unpack_from("<I", blob, 4)
        if version != _CEMB_VERSION:
            raise BadMagic(f"{path.name}: unsupported CEMB version {version}")
        (id_len,) = struct.unpack_from("<I", blob, 8)
        doc_id = blob[12:12 + id_len].decode("utf-8")
        n_rows, dim = struct.unpack_from("<II", blob, 12 + id_len)
    except (struct.error, UnicodeDecodeError) as exc:
        raise TruncatedPayload(f"{path.name}: bad header ({exc})") from None
    payload = blob[12 + id_len + 8:]
    expected = n_rows * dim * 4
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path.name}: expected {expected} payload bytes for "
            f"{n_rows}x{dim}, got {len(payload)}"
        )
    matrix = np.frombuffer(payload, dtype="<f4").reshape(n_rows, dim)
    return ContextualEmbeddings(doc_id, dim, matrix.copy())


def contextual_for_doc(cemb_dir: Path | str, doc: Document) -> ContextualEmbeddings:
    """Load ``<doc-id>.cemb`` and check row count against the document."""
    emb = load_contextual(Path(cemb_dir) / f"{doc.id}.cemb")
    if emb.matrix.shape[0] != len(doc.tokens):
        raise TokenCountMismatch(
            f"{doc.id}: {emb.matrix.shape[0]} embedding rows for "
            f"{len(doc.tokens)} tokens"
        )
    return emb
