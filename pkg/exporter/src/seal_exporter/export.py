"""Running an export job: encode documents, align to words, write CEMB."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from seal_exporter.align import chunk_plan, pool_word_vectors
from seal_exporter.cemb import write_cemb
from seal_exporter.errors import ExportError
from seal_exporter.model import Encoder, hidden_states, special_template
from seal_exporter.tokenizer import tokenize

__all__ = ["ExportJob", "document_matrix", "export_corpus", "run_job"]

_LAYER_POLICIES = {"concat_all_layers": "all", "last_layer": "last"}
_ALIGN_POLICIES = {"mean_subtokens": "mean", "first_subtoken": "first"}


@dataclass(frozen=True)
class ExportJob:
    """Everything one batch export needs; policies use their long names."""

    corpus_dir: Path
    out_dir: Path
    encoder_name: str
    layer_policy: str = "concat_all_layers"
    alignment_policy: str = "mean_subtokens"

    def __post_init__(self):
        if self.layer_policy not in _LAYER_POLICIES:
            raise ExportError(f"unknown layer policy {self.layer_policy!r}")
        if self.alignment_policy not in _ALIGN_POLICIES:
            raise ExportError(f"unknown alignment policy {self.alignment_policy!r}")


def output_dim(encoder: Encoder, layers: str) -> int:
    return encoder.dim_all_layers if layers == "all" else encoder.hidden_size


def document_matrix(
    encoder: Encoder, text: str, layers: str = "all", align: str = "mean"
) -> np.ndarray:
    """One float32 row per word token of ``text``.

    ``layers`` selects the features: ``"all"`` concatenates every encoder
    layer's hidden state (excluding the embedding layer), ``"last"`` takes
    the final layer only.
    """
    if layers not in ("all", "last"):
        raise ExportError(f"unknown layer selection {layers!r}")
    words = tokenize(text)
    dim = output_dim(encoder, layers)
    if not words:
        return np.zeros((0, dim), dtype=np.float32)

    encoding = encoder.tokenizer(
        text, add_special_tokens=False, return_offsets_mapping=True
    )
    ids = encoding["input_ids"]
    offsets = [tuple(pair) for pair in encoding["offset_mapping"]]
    if not ids:
        raise ExportError("subword tokenizer produced no tokens for non-empty text")

    prefix, suffix = special_template(encoder.tokenizer)
    window = encoder.window - len(prefix) - len(suffix)
    vectors = np.empty((len(ids), dim), dtype=np.float32)
    for chunk in chunk_plan(len(ids), window):
        content = ids[chunk.start : chunk.end]
        states = hidden_states(encoder, prefix + content + suffix)
        if layers == "all":
            stacked = torch.cat(states[1:], dim=-1)
        else:
            stacked = states[-1]
        arr = stacked[0].numpy()
        content_rows = arr[len(prefix) : len(prefix) + len(content)]
        lo, hi = chunk.keep_start - chunk.start, chunk.keep_end - chunk.start
        vectors[chunk.keep_start : chunk.keep_end] = content_rows[lo:hi]

    return pool_word_vectors(vectors, offsets, words, align)


def export_corpus(
    encoder: Encoder,
    docs,
    out_dir: Path | str,
    layers: str = "all",
    align: str = "mean",
) -> dict[str, np.ndarray]:
    """Write ``<doc.id>.cemb`` for every document; returns the matrices.

    ``docs`` is any iterable of objects with ``id`` and ``text`` attributes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, np.ndarray] = {}
    for doc in docs:
        if doc.id in written:
            raise ExportError(f"duplicate document id {doc.id!r}")
        matrix = document_matrix(encoder, doc.text, layers=layers, align=align)
        write_cemb(doc.id, matrix, out_dir / f"{doc.id}.cemb")
        written[doc.id] = matrix
    return written


@dataclass(frozen=True)
class _TextDoc:
    id: str
    text: str


def _read_corpus(corpus_dir: Path) -> list[_TextDoc]:
    paths = sorted(corpus_dir.rglob("*.txt"))
    if not paths:
        raise ExportError(f"no .txt documents under {corpus_dir}")
    docs = []
    seen: set[str] = set()
    for path in paths:
        if path.stem in seen:
            raise ExportError(f"duplicate document id {path.stem!r} under {corpus_dir}")
        seen.add(path.stem)
        docs.append(_TextDoc(path.stem, path.read_text(encoding="utf-8")))
    return docs


def run_job(job: ExportJob, encoder: Encoder) -> int:
    """Export every document under the job's corpus root; returns the count."""
    docs = _read_corpus(Path(job.corpus_dir))
    written = export_corpus(
        encoder,
        docs,
        job.out_dir,
        layers=_LAYER_POLICIES[job.layer_policy],
        align=_ALIGN_POLICIES[job.alignment_policy],
    )
    return len(written)
