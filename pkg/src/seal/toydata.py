"""Synthetic sentinel-marked corpus for end-to-end training checks.

Every keyphrase is flanked by the sentinel tokens ``⟨KP`` and ``KP⟩``, so
a sequence model can recover the spans from local context alone — the
task is learnable by construction.  Each class draws its content words
from a disjoint vocabulary, which also makes the toy corpus usable for
classifier checks.
"""

from __future__ import annotations

import numpy as np

from .corpus import Document, KeyphraseSpan
from .embed import EmbeddingTable

__all__ = ["generate_toy_corpus", "toy_table"]

_FILLER = (
    "the of and to in we a is with for results method on this are "
    "that by from as it an using study shows been was were each"
).split()

_CONTENT = {
    "Task": (
        "segmentation classification detection parsing translation "
        "recognition prediction retrieval summarization alignment"
    ).split(),
    "Process": (
        "annealing sintering etching oxidation milling deposition "
        "welding quenching calcination electrolysis"
    ).split(),
    "Material": (
        "graphene silica titania alumina zirconia cellulose "
        "perovskite kaolinite chitosan borosilicate"
    ).split(),
}

_OPEN = "⟨KP"
_CLOSE = "KP⟩"


def _vocabulary() -> list[str]:
    words = set(_FILLER) | {"."}
    for content in _CONTENT.values():
        words.update(content)
    # sentinels as the tokenizer sees them (lowercased by table lookup)
    words.update({"⟨", "⟩", "kp"})
    return sorted(words)


def toy_table(dim: int = 16, seed: int = 0) -> EmbeddingTable:
    """Random but fixed vectors for the whole toy vocabulary."""
    rng = np.random.default_rng(seed)
    vectors = {
        word: rng.uniform(-0.5, 0.5, size=dim).astype(np.float32)
        for word in _vocabulary()
    }
    return EmbeddingTable.from_vectors(vectors)


def generate_toy_corpus(
    n_docs: int, seed: int = 0, dim: int = 16
) -> tuple[list[Document], EmbeddingTable]:
    """Build ``n_docs`` documents plus a matching embedding table.

    Each document has 1-3 sentences and at least one keyphrase; a
    keyphrase is 1-3 content words of a single class wrapped in the
    sentinels.  Gold spans cover the content words only (sentinels are
    context, not keyphrase).
    """
    rng = np.random.default_rng(seed)
    classes = list(_CONTENT)
    docs = []
    for d in range(n_docs):
        words: list[str] = []
        # (start_word_idx, end_word_idx inclusive, class) per keyphrase
        marks: list[tuple[int, int, str]] = []
        n_sentences = int(rng.integers(1, 4))
        for s in range(n_sentences):
            n_phrases = int(rng.integers(0, 3))
            if s == 0:
                n_phrases = max(1, n_phrases)  # every doc has a keyphrase
            for _ in range(n_phrases):
                words.extend(rng.choice(_FILLER, size=int(rng.integers(2, 6))))
                klass = classes[int(rng.integers(0, len(classes)))]
                content = rng.choice(
                    _CONTENT[klass], size=int(rng.integers(1, 4)), replace=False
                )
                words.append(_OPEN)
                marks.append((len(words), len(words) + len(content) - 1, klass))
                words.extend(content)
                words.append(_CLOSE)
            words.extend(rng.choice(_FILLER, size=int(rng.integers(2, 6))))
            words.append(".")

        text_parts = []
        offsets = []  # (start, end) per word
        pos = 0
        for w, word in enumerate(words):
            if w:
                text_parts.append(" ")
                pos += 1
            text_parts.append(word)
            offsets.append((pos, pos + len(word)))
            pos += len(word)
        text = "".join(text_parts)

        spans = []
        for k, (lo, hi, klass) in enumerate(marks):
            start = offsets[lo][0]
            end = offsets[hi][1]
            spans.append(
                KeyphraseSpan(
                    id=f"T{k + 1}",
                    klass=klass,
                    start=start,
                    end=end,
                    surface=text[start:end],
                )
            )
        docs.append(Document.from_text(f"toy{d:04d}", text, spans))
    return docs, toy_table(dim=dim, seed=seed)
