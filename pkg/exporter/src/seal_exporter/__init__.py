"""Offline export of contextual token embeddings to CEMB files.

The exporter runs a pretrained transformer encoder over plain-text corpus
documents and writes one binary CEMB file per document, with one vector
per word token of the consuming library's tokenizer.  The tokenization
rules are re-implemented here (and pinned by parity tests) so the two
packages stay decoupled at runtime.
"""

from seal_exporter.errors import ExportError, TokenAlignmentFailure

__all__ = ["ExportError", "TokenAlignmentFailure"]
