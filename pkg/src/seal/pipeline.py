"""End-to-end annotation: extract keyphrases, then classify them.

The order is fixed: extraction (BiLSTM-CRF) → BILOU repair → span
decoding → random-forest classification → abbreviation propagation →
chemical-formula override.  The result carries non-overlapping spans
sorted by start offset, each with a Task/Process/Material class.
"""

from __future__ import annotations

import dataclasses

from .classify import Forest, classify_keyphrase, predict
from .corpus import Bilou, Document, KeyphraseSpan, bilou_to_spans
from .crf import viterbi
from .embed import EmbeddingTable, context_concat, lookup_sequence
from .postprocess import (
    detect_abbreviations,
    force_material_for_formulae,
    propagate_abbrev_class,
    repair_bilou,
)
from .train import ExtractorModel

__all__ = ["AnnotationResult", "Annotator", "annotate", "classify_spans"]


@dataclasses.dataclass(frozen=True)
class AnnotationResult:
    text: str
    spans: list[KeyphraseSpan]

    def __post_init__(self) -> None:
        prev_end = -1
        for span in self.spans:
            if span.start < prev_end:
                raise ValueError(f"overlapping or unsorted span {span.id}")
            if not 0 <= span.start < span.end <= len(self.text):
                raise ValueError(f"span {span.id} outside the text")
            prev_end = span.end

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "spans": [
                {
                    "start": span.start,
                    "end": span.end,
                    "surface": span.surface,
                    "class": span.klass,
                }
                for span in self.spans
            ],
        }


@dataclasses.dataclass(frozen=True)
class Annotator:
    """A frozen model bundle; annotation calls never mutate it."""

    model: ExtractorModel
    forest: Forest
    extract_table: EmbeddingTable
    classify_table: EmbeddingTable | None = None

    @property
    def features(self) -> EmbeddingTable:
        return self.classify_table or self.extract_table


def classify_spans(
    doc: Document,
    spans: list[KeyphraseSpan],
    forest: Forest,
    table: EmbeddingTable,
) -> list[KeyphraseSpan]:
    """Majority-vote a class onto each span from per-token forest votes.

    Features are the span-internal ``[prev;cur;next]`` context rows, the
    same construction used to train the forest.
    """
    out = []
    for span in spans:
        toks = [
            tok
            for tok in doc.tokens
            if tok.start >= span.start and tok.end <= span.end
        ]
        if not toks:
            out.append(span)
            continue
        rows = lookup_sequence(table, toks)
        token_classes = [
            predict(forest, context_concat(rows, i, table.unk))[0]
            for i in range(len(toks))
        ]
        out.append(
            dataclasses.replace(span, klass=classify_keyphrase(span, token_classes))
        )
    return out


def annotate(annotator: Annotator, text: str) -> AnnotationResult:
    """Run the full pipeline on raw text."""
    doc = Document.from_text("request", text)
    if not doc.tokens:
        return AnnotationResult(text=text, spans=[])
    xs = lookup_sequence(annotator.extract_table, doc.tokens)
    emissions = annotator.model.emissions(xs)
    path = viterbi(emissions, annotator.model.crf, annotator.model.mask)
    labels = repair_bilou([Bilou(int(k)) for k in path])
    spans = bilou_to_spans(doc, labels)
    spans = classify_spans(doc, spans, annotator.forest, annotator.features)
    spans = propagate_abbrev_class(doc, spans, detect_abbreviations(doc))
    spans = force_material_for_formulae(doc, spans)
    return AnnotationResult(text=text, spans=spans)
