"""Tests for the end-to-end annotation pipeline."""

from __future__ import annotations

import pytest

from seal.corpus import KEYPHRASE_CLASSES, Document, KeyphraseSpan
from seal.pipeline import AnnotationResult, annotate, classify_spans


class TestAnnotationResult:
    def test_invariants_enforced(self):
        ok = AnnotationResult(
            text="abcdef",
            spans=[
                KeyphraseSpan(id="S1", klass="Task", start=0, end=2, surface="ab"),
                KeyphraseSpan(id="S2", klass="Task", start=3, end=5, surface="de"),
            ],
        )
        assert len(ok.spans) == 2
        with pytest.raises(ValueError, match="overlapping"):
            AnnotationResult(
                text="abcdef",
                spans=[
                    KeyphraseSpan(id="S1", klass="Task", start=0, end=4, surface="abcd"),
                    KeyphraseSpan(id="S2", klass="Task", start=2, end=5, surface="cde"),
                ],
            )
        with pytest.raises(ValueError, match="outside"):
            AnnotationResult(
                text="ab",
                spans=[
                    KeyphraseSpan(id="S1", klass="Task", start=0, end=5, surface="abcde")
                ],
            )

    def test_to_dict_shape(self):
        result = AnnotationResult(
            text="abcdef",
            spans=[KeyphraseSpan(id="S1", klass="Task", start=0, end=2, surface="ab")],
        )
        data = result.to_dict()
        assert data["text"] == "abcdef"
        assert data["spans"] == [
            {"start": 0, "end": 2, "surface": "ab", "class": "Task"}
        ]


class TestAnnotate:
    def test_finds_sentinel_keyphrases(self, toy_bundle):
        doc = toy_bundle.docs[-1]  # held out from forest training
        result = annotate(toy_bundle.annotator, doc.text)
        assert result.text == doc.text
        assert result.spans, "trained model found nothing on a toy document"
        for span in result.spans:
            assert span.klass in KEYPHRASE_CLASSES
            assert result.text[span.start : span.end] == span.surface
        starts = [s.start for s in result.spans]
        assert starts == sorted(starts)

    def test_high_agreement_with_gold_spans(self, toy_bundle):
        assert toy_bundle.dev_f1 >= 0.9
        hits = total = 0
        for doc in toy_bundle.docs[80:]:
            result = annotate(toy_bundle.annotator, doc.text)
            gold = {(s.start, s.end) for s in doc.gold_spans}
            pred = {(s.start, s.end) for s in result.spans}
            hits += len(gold & pred)
            total += len(gold)
        assert hits / total >= 0.8

    def test_deterministic(self, toy_bundle):
        text = toy_bundle.docs[5].text
        a = annotate(toy_bundle.annotator, text)
        b = annotate(toy_bundle.annotator, text)
        assert a.to_dict() == b.to_dict()

    def test_empty_and_blank_text(self, toy_bundle):
        assert annotate(toy_bundle.annotator, "").spans == []
        assert annotate(toy_bundle.annotator, "   \n\t ").spans == []

    def test_formula_override_forces_material(self, toy_bundle):
        # NaCl is out-of-vocabulary for the toy table, but the sentinels
        # around it still drive extraction; the formula rule must then win
        # over whatever the forest voted.
        text = "the results with ⟨KP NaCl KP⟩ are shown ."
        result = annotate(toy_bundle.annotator, text)
        formula_spans = [s for s in result.spans if "NaCl" in s.surface]
        assert formula_spans, "sentinel-flanked formula token was not extracted"
        assert all(s.klass == "Material" for s in formula_spans)


class TestClassifySpans:
    def test_uses_span_internal_context(self, toy_bundle):
        # a span's classification must not depend on tokens outside it
        doc_a = Document.from_text("a", "alpha beta graphene silica gamma")
        doc_b = Document.from_text("b", "totally different graphene silica words")
        span_a = KeyphraseSpan(
            id="S1", klass=None, start=11, end=26, surface="graphene silica"
        )
        span_b = KeyphraseSpan(
            id="S1", klass=None, start=18, end=33, surface="graphene silica"
        )
        assert doc_a.text[span_a.start : span_a.end] == "graphene silica"
        assert doc_b.text[span_b.start : span_b.end] == "graphene silica"
        out_a = classify_spans(
            doc_a, [span_a], toy_bundle.annotator.forest, toy_bundle.table
        )
        out_b = classify_spans(
            doc_b, [span_b], toy_bundle.annotator.forest, toy_bundle.table
        )
        assert out_a[0].klass == out_b[0].klass

    def test_learned_class_vocabulary(self, toy_bundle):
        # content words are class-disjoint by construction, so a trained
        # forest should map them back to their classes
        doc = Document.from_text("d", "graphene and annealing and segmentation")
        spans = [
            KeyphraseSpan(id="S1", klass=None, start=0, end=8, surface="graphene"),
            KeyphraseSpan(id="S2", klass=None, start=13, end=22, surface="annealing"),
            KeyphraseSpan(id="S3", klass=None, start=27, end=39, surface="segmentation"),
        ]
        out = classify_spans(doc, spans, toy_bundle.annotator.forest, toy_bundle.table)
        assert [s.klass for s in out] == ["Material", "Process", "Task"]
