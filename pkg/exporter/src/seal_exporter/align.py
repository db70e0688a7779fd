"""Chunking long documents and pooling subword vectors onto word tokens.

Documents longer than the encoder window are split into overlapping
chunks (overlap 64 subwords) and each subword position takes its vector
from the chunk where it is most interior, so no kept vector sits within
32 positions of an artificial boundary.  Word vectors are then pooled
from the subwords that overlap the word's character range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from seal_exporter.errors import ExportError, TokenAlignmentFailure
from seal_exporter.tokenizer import Token

__all__ = ["Chunk", "chunk_plan", "pool_word_vectors", "CHUNK_OVERLAP"]

CHUNK_OVERLAP = 64


@dataclass(frozen=True)
class Chunk:
    """One encoder pass over subwords [start, end); keep [keep_start, keep_end)."""

    start: int
    end: int
    keep_start: int
    keep_end: int


def chunk_plan(n_subwords: int, window: int) -> list[Chunk]:
    """Split ``n_subwords`` positions into chunks of at most ``window``.

    Consecutive chunks overlap by ``CHUNK_OVERLAP`` positions and the keep
    ranges split each overlap down the middle, so every position is kept
    by exactly one chunk.
    """
    if n_subwords <= 0:
        return []
    if n_subwords <= window:
        return [Chunk(0, n_subwords, 0, n_subwords)]
    if window <= CHUNK_OVERLAP:
        raise ExportError(
            f"encoder window {window} cannot accommodate chunk overlap "
            f"{CHUNK_OVERLAP}"
        )
    half = CHUNK_OVERLAP // 2
    stride = window - CHUNK_OVERLAP
    chunks: list[Chunk] = []
    start = 0
    while True:
        end = min(start + window, n_subwords)
        keep_start = start + half if start > 0 else 0
        keep_end = end - half if end < n_subwords else n_subwords
        chunks.append(Chunk(start, end, keep_start, keep_end))
        if end == n_subwords:
            return chunks
        start += stride


def pool_word_vectors(
    subword_vectors: np.ndarray,
    subword_offsets: list[tuple[int, int]],
    words: list[Token],
    align: str,
) -> np.ndarray:
    """One pooled vector per word token, by character-offset overlap.

    ``align`` is ``"mean"`` (average of covering subwords) or ``"first"``
    (the first covering subword's vector).
    """
    if align not in ("mean", "first"):
        raise ExportError(f"unknown alignment policy {align!r}")
    if len(subword_offsets) != subword_vectors.shape[0]:
        raise ExportError(
            f"{subword_vectors.shape[0]} vectors for {len(subword_offsets)} offsets"
        )
    rows = np.empty((len(words), subword_vectors.shape[1]), dtype=np.float32)
    cursor = 0
    for w, word in enumerate(words):
        # Offsets are sorted, so scan forward from the previous word's span.
        while cursor < len(subword_offsets) and subword_offsets[cursor][1] <= word.start:
            cursor += 1
        covering = []
        for j in range(cursor, len(subword_offsets)):
            lo, hi = subword_offsets[j]
            if lo >= word.end:
                break
            if lo < hi and max(lo, word.start) < min(hi, word.end):
                covering.append(j)
        if not covering:
            raise TokenAlignmentFailure(
                f"word {word.surface!r} at [{word.start},{word.end}) is covered "
                "by no subword"
            )
        if align == "first":
            rows[w] = subword_vectors[covering[0]]
        else:
            rows[w] = subword_vectors[covering].mean(axis=0)
    return rows
