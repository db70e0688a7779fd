import numpy as np
import pytest

from seal.corpus import (
    Bilou,
    Document,
    InvalidSequence,
    KeyphraseSpan,
    MalformedLine,
    SurfaceMismatch,
    Token,
    bilou_to_spans,
    parse_brat,
    project_bilou,
    snap_spans,
    tokenize,
)

B, I, L, O, U = Bilou.B, Bilou.I, Bilou.L, Bilou.O, Bilou.U


class TestTokenize:
    def test_empty(self):
        assert tokenize("") == []

    def test_simple_sentence(self):
        toks = tokenize("NaCl melts.")
        assert [t.surface for t in toks] == ["NaCl", "melts", "."]
        assert [(t.start, t.end) for t in toks] == [(0, 4), (5, 10), (10, 11)]

    def test_hyphen_and_parens(self):
        # regression fixture: hand-traced through the chunk splitting rules
        toks = tokenize("fuel-cells (SOFC)")
        assert [t.surface for t in toks] == ["fuel", "-", "cells", "(", "SOFC", ")"]
        assert [(t.start, t.end) for t in toks] == [
            (0, 4), (4, 5), (5, 10), (11, 12), (12, 16), (16, 17),
        ]

    def test_digits_stay_attached(self):
        assert [t.surface for t in tokenize("NaCl2 and TiO2.")] == [
            "NaCl2", "and", "TiO2", ".",
        ]

    def test_decimal_number_kept_whole(self):
        assert [t.surface for t in tokenize("at 3.5 K")] == ["at", "3.5", "K"]

    def test_offsets_faithful(self):
        text = "Low-temperature (YSZ/GDC) fuel-cells, ca. 600°C."
        for tok in tokenize(text):
            assert text[tok.start:tok.end] == tok.surface

    def test_no_overlap_and_sorted(self):
        toks = tokenize("a-b (c) d/e")
        for prev, cur in zip(toks, toks[1:]):
            assert prev.end <= cur.start

    def test_idempotent_on_own_surfaces(self):
        text = "Half-cell (an/ode) runs at 3.5V, e.g. NaCl2-based."
        for tok in tokenize(text):
            again = tokenize(tok.surface)
            assert [t.surface for t in again] == [tok.surface]


def make_doc(text, spans=()):
    doc = Document.from_text("d1", text)
    doc.gold_spans = [
        KeyphraseSpan(f"T{i + 1}", klass, start, end, text[start:end])
        for i, (klass, start, end) in enumerate(spans)
    ]
    return doc


class TestParseBrat:
    TEXT = "Here calcining works well."

    def test_t_line(self):
        doc = make_doc(self.TEXT)
        spans = parse_brat("T1\tProcess 5 14\tcalcining", doc)
        assert len(spans) == 1
        span = spans[0]
        assert (span.klass, span.start, span.end, span.surface) == (
            "Process", 5, 14, "calcining",
        )

    def test_non_t_lines_skipped(self):
        doc = make_doc(self.TEXT)
        ann = (
            "T1\tProcess 5 14\tcalcining\n"
            "R1\tSynonym-of Arg1:T1 Arg2:T2\n"
            "*\tSynonym-of T1 T2\n"
            "A1\tNegated T1\n"
        )
        spans = parse_brat(ann, doc)
        assert [s.id for s in spans] == ["T1"]

    def test_surface_mismatch(self):
        doc = make_doc(self.TEXT)
        with pytest.raises(SurfaceMismatch, match="line 1"):
            parse_brat("T1\tProcess 5 14\tcalcinXng", doc)

    def test_bad_field_count(self):
        doc = make_doc(self.TEXT)
        with pytest.raises(MalformedLine):
            parse_brat("T1\tProcess 5 14", doc)

    def test_non_integer_offsets(self):
        doc = make_doc(self.TEXT)
        with pytest.raises(MalformedLine, match="line 1"):
            parse_brat("T1\tProcess five 14\tcalcining", doc)

    def test_unknown_type(self):
        doc = make_doc(self.TEXT)
        with pytest.raises(MalformedLine, match="Widget"):
            parse_brat("T1\tWidget 5 14\tcalcining", doc)

    def test_offsets_out_of_range(self):
        doc = make_doc(self.TEXT)
        with pytest.raises(MalformedLine):
            parse_brat("T1\tProcess 5 999\tcalcining", doc)

    def test_offset_faithful_property(self):
        doc = make_doc(self.TEXT)
        ann = "T1\tProcess 5 14\tcalcining\nT2\tTask 15 25\tworks well"
        for span in parse_brat(ann, doc):
            assert doc.text[span.start:span.end] == span.surface


class TestProjectBilou:
    def test_multi_token_span(self):
        text = "solid oxide fuel cells ."
        doc = make_doc(text, [("Material", 0, 22)])
        assert project_bilou(doc) == [B, I, I, L, O]

    def test_single_token_span(self):
        doc = make_doc("NaCl melts .", [("Material", 0, 4)])
        assert project_bilou(doc) == [U, O, O]

    def test_no_spans_all_outside(self):
        doc = make_doc("nothing here at all")
        assert project_bilou(doc) == [O, O, O, O]

    def test_snapping_expands_partial_token(self):
        # span covers "oxi" only; snaps to the whole token "oxide"
        doc = make_doc("solid oxide fuel", [("Material", 6, 9)])
        assert project_bilou(doc) == [O, U, O]
        snapped = snap_spans(doc)
        assert (snapped[0].start, snapped[0].end) == (6, 11)
        assert snapped[0].surface == "oxide"

    def test_overlap_keeps_longer(self, caplog):
        text = "solid oxide fuel cells"
        doc = make_doc(text, [("Material", 0, 22), ("Process", 6, 11)])
        with caplog.at_level("WARNING"):
            labels = project_bilou(doc)
        assert labels == [B, I, I, L]
        assert "overlaps a longer span" in caplog.text

    def test_span_in_whitespace_dropped(self, caplog):
        text = "a  b"
        doc = Document.from_text("d1", text)
        doc.gold_spans = [KeyphraseSpan("T1", None, 1, 2, " ")]
        with caplog.at_level("WARNING"):
            assert project_bilou(doc) == [O, O]
        assert "covers no token" in caplog.text


class TestBilouToSpans:
    def test_multi_token_inverse(self):
        doc = make_doc("solid oxide fuel cells .")
        spans = bilou_to_spans(doc, [B, I, I, L, O])
        assert len(spans) == 1
        assert (spans[0].start, spans[0].end) == (0, 22)
        assert spans[0].surface == "solid oxide fuel cells"

    def test_unit_span(self):
        doc = make_doc("a NaCl b")
        spans = bilou_to_spans(doc, [O, U, O])
        assert [(s.start, s.end) for s in spans] == [(2, 6)]

    def test_adjacent_units_never_merge(self):
        doc = make_doc("NaCl MgO")
        assert len(bilou_to_spans(doc, [U, U])) == 2

    @pytest.mark.parametrize(
        "labels",
        [[I], [L], [B, O], [B, B], [O, I, O], [B, I], [U, I]],
    )
    def test_invalid_sequences_raise(self, labels):
        doc = make_doc(" ".join("w" * 1 for _ in labels))
        with pytest.raises(InvalidSequence):
            bilou_to_spans(doc, labels)

    def test_length_mismatch(self):
        doc = make_doc("one two")
        with pytest.raises(InvalidSequence):
            bilou_to_spans(doc, [O])


def random_token_aligned_spans(rng, doc, max_spans=4):
    """Non-overlapping token-aligned spans over random token ranges."""
    n = len(doc.tokens)
    taken = np.zeros(n, dtype=bool)
    spans = []
    for k in range(rng.integers(0, max_spans + 1)):
        lo = int(rng.integers(0, n))
        hi = min(n - 1, lo + int(rng.integers(0, 3)))
        if taken[lo:hi + 1].any():
            continue
        taken[lo:hi + 1] = True
        start, end = doc.tokens[lo].start, doc.tokens[hi].end
        klass = str(rng.choice(["Task", "Process", "Material"]))
        spans.append(KeyphraseSpan(f"T{k + 1}", klass, start, end, doc.text[start:end]))
    return sorted(spans, key=lambda s: s.start)


def test_round_trip_property():
    rng = np.random.default_rng(0)
    words = ["solid", "oxide", "fuel", "cells", "NaCl", "anode", "runs", "at", "600C"]
    for _ in range(200):
        text = " ".join(rng.choice(words, size=rng.integers(2, 12)))
        doc = Document.from_text("d", text)
        spans = random_token_aligned_spans(rng, doc)
        doc.gold_spans = spans
        decoded = bilou_to_spans(doc, project_bilou(doc))
        assert [(s.start, s.end) for s in decoded] == [(s.start, s.end) for s in spans]


def test_projection_length_matches_tokens():
    doc = make_doc("one two three", [("Task", 0, 7)])
    assert len(project_bilou(doc)) == len(doc.tokens)
