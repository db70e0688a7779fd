"""ScienceIE-style corpus handling.

Documents are plain-text abstracts with character-offset tokens and typed
keyphrase spans read from BRAT standoff ``.ann`` files.  Span boundaries are
converted to and from per-token BILOU labels (Beginning / Inside / Last /
Outside / Unit).
"""

from __future__ import annotations

import logging
import re
import unicodedata
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

from seal.errors import SealError

log = logging.getLogger(__name__)

KEYPHRASE_CLASSES = ("Task", "Process", "Material")


class MalformedLine(SealError):
    """A standoff line that does not follow the T-line grammar."""


class SurfaceMismatch(SealError):
    """Annotation surface text disagrees with the document substring."""


class InvalidSequence(SealError):
    """A BILOU sequence with an ill-formed transition (repair it first)."""


class Bilou(IntEnum):
    B = 0
    I = 1
    L = 2
    O = 3
    U = 4


LABEL_NAMES = tuple(lbl.name for lbl in Bilou)
NUM_LABELS = len(LABEL_NAMES)


@dataclass(frozen=True)
class Token:
    """A tokenizer output unit; offsets are code-point offsets into the text."""

    surface: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad token offsets ({self.start}, {self.end})")
        if not self.surface:
            raise ValueError("empty token surface")
        if any(ch.isspace() for ch in self.surface):
            raise ValueError(f"token surface contains whitespace: {self.surface!r}")


@dataclass(frozen=True)
class KeyphraseSpan:
    """A (possibly untyped) keyphrase over a character range of a document."""

    id: str
    klass: str | None
    start: int
    end: int
    surface: str

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise ValueError(f"bad span offsets ({self.start}, {self.end})")
        if self.klass is not None and self.klass not in KEYPHRASE_CLASSES:
            raise ValueError(f"unknown keyphrase class {self.klass!r}")


@dataclass
class Document:
    id: str
    text: str
    tokens: list[Token]
    gold_spans: list[KeyphraseSpan] = field(default_factory=list)

    @classmethod
    def from_text(
        cls,
        doc_id: str,
        text: str,
        gold_spans: list[KeyphraseSpan] | None = None,
    ) -> "Document":
        return cls(doc_id, text, tokenize(text), list(gold_spans or []))


# Characters that always become their own token inside a whitespace chunk.
_INTERNAL_SPLIT = frozenset("-/()‐‑‒–—")
_CHUNK_RE = re.compile(r"\S+")


def _is_edge_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


def tokenize(text: str) -> list[Token]:
    """Split text into offset-carrying tokens.

    Whitespace separates chunks; leading/trailing punctuation is peeled off
    one character at a time, and hyphens, slashes and parentheses inside a
    chunk become separate tokens.  Digits stay attached to letters, so
    chemical formulae like ``NaCl2`` survive as single tokens.
    """
    tokens: list[Token] = []
    for m in _CHUNK_RE.finditer(text):
        tokens.extend(_split_chunk(m.group(), m.start()))
    return tokens


def _split_chunk(chunk: str, offset: int) -> list[Token]:
    lo, hi = 0, len(chunk)
    lead: list[Token] = []
    trail: list[Token] = []
    while lo < hi and _is_edge_punct(chunk[lo]):
        lead.append(Token(chunk[lo], offset + lo, offset + lo + 1))
        lo += 1
    while hi > lo and _is_edge_punct(chunk[hi - 1]):
        trail.append(Token(chunk[hi - 1], offset + hi - 1, offset + hi))
        hi -= 1
    parts = lead
    run = lo
    for i in range(lo, hi):
        if chunk[i] in _INTERNAL_SPLIT:
            if run < i:
                parts.append(Token(chunk[run:i], offset + run, offset + i))
            parts.append(Token(chunk[i], offset + i, offset + i + 1))
            run = i + 1
    if run < hi:
        parts.append(Token(chunk[run:hi], offset + run, offset + hi))
    parts.extend(reversed(trail))
    return parts


_T_LINE_RE = re.compile(r"^T\d+$")


def parse_brat(ann_text: str, doc: Document) -> list[KeyphraseSpan]:
    """Read keyphrase spans from BRAT standoff text.

    Only T-lines (``T<k>\\t<Type> <start> <end>\\t<surface>``) are consumed;
    relation/attribute/note lines are skipped.  Every span is validated
    against ``doc.text``.
    """
    spans: list[KeyphraseSpan] = []
    for lineno, line in enumerate(ann_text.splitlines(), start=1):
        if not line.strip():
            continue
        if not line.startswith("T"):
            continue
        fields = line.split("\t")
        if len(fields) < 3:
            raise MalformedLine(f"line {lineno}: expected 3 tab-separated fields")
        tid, middle = fields[0], fields[1]
        surface = "\t".join(fields[2:])
        if not _T_LINE_RE.match(tid):
            raise MalformedLine(f"line {lineno}: bad annotation id {tid!r}")
        mid_parts = middle.split(" ")
        if len(mid_parts) != 3:
            raise MalformedLine(
                f"line {lineno}: expected '<Type> <start> <end>', got {middle!r}"
            )
        klass, start_s, end_s = mid_parts
        if klass not in KEYPHRASE_CLASSES:
            raise MalformedLine(f"line {lineno}: unknown span type {klass!r}")
        try:
            start, end = int(start_s), int(end_s)
        except ValueError:
            raise MalformedLine(f"line {lineno}: non-integer offsets {middle!r}") from None
        if not 0 <= start < end <= len(doc.text):
            raise MalformedLine(
                f"line {lineno}: offsets ({start}, {end}) outside document of "
                f"length {len(doc.text)}"
            )
        actual = doc.text[start:end]
        if actual != surface:
            raise SurfaceMismatch(
                f"line {lineno}: annotation text {surface!r} != document "
                f"substring {actual!r} at ({start}, {end})"
            )
        spans.append(KeyphraseSpan(tid, klass, start, end, surface))
    return spans


def snap_spans(doc: Document, spans: list[KeyphraseSpan] | None = None) -> list[KeyphraseSpan]:
    """Expand spans to token boundaries and resolve overlaps.

    A span that cuts through a token grows to the smallest covering token
    range.  When two snapped spans share a token the longer one is kept
    (earlier start on ties) and a warning is logged.  Spans overlapping no
    token at all are dropped with a warning.  Returned spans are sorted by
    start offset.
    """
    if spans is None:
        spans = doc.gold_spans
    snapped: list[tuple[int, int, KeyphraseSpan]] = []
    for span in spans:
        covered = [
            i
            for i, tok in enumerate(doc.tokens)
            if tok.start < span.end and tok.end > span.start
        ]
        if not covered:
            log.warning("%s: span %s covers no token, dropped", doc.id, span.id)
            continue
        snapped.append((covered[0], covered[-1], span))

    def char_len(item: tuple[int, int, KeyphraseSpan]) -> int:
        lo, hi, _ = item
        return doc.tokens[hi].end - doc.tokens[lo].start

    used: set[int] = set()
    kept: list[tuple[int, int, KeyphraseSpan]] = []
    for lo, hi, span in sorted(
        snapped, key=lambda it: (-char_len(it), doc.tokens[it[0]].start, it[2].id)
    ):
        if any(i in used for i in range(lo, hi + 1)):
            log.warning(
                "%s: span %s overlaps a longer span after snapping, dropped",
                doc.id,
                span.id,
            )
            continue
        used.update(range(lo, hi + 1))
        kept.append((lo, hi, span))

    result = []
    for lo, hi, span in sorted(kept, key=lambda it: it[0]):
        start, end = doc.tokens[lo].start, doc.tokens[hi].end
        result.append(KeyphraseSpan(span.id, span.klass, start, end, doc.text[start:end]))
    return result


def project_bilou(doc: Document, spans: list[KeyphraseSpan] | None = None) -> list[Bilou]:
    """Project (snapped) spans onto one BILOU label per token."""
    labels = [Bilou.O] * len(doc.tokens)
    starts = {tok.start: i for i, tok in enumerate(doc.tokens)}
    ends = {tok.end: i for i, tok in enumerate(doc.tokens)}
    for span in snap_spans(doc, spans):
        lo, hi = starts[span.start], ends[span.end]
        if lo == hi:
            labels[lo] = Bilou.U
        else:
            labels[lo] = Bilou.B
            for i in range(lo + 1, hi):
                labels[i] = Bilou.I
            labels[hi] = Bilou.L
    return labels


def bilou_to_spans(doc: Document, labels: list[Bilou] | list[int]) -> list[KeyphraseSpan]:
    """Decode a valid BILOU sequence back into untyped spans.

    Raises :class:`InvalidSequence` on ill-formed transitions; run
    ``postprocess.repair_bilou`` first for raw model output.
    """
    if len(labels) != len(doc.tokens):
        raise InvalidSequence(
            f"{len(labels)} labels for {len(doc.tokens)} tokens"
        )
    spans: list[KeyphraseSpan] = []
    open_at: int | None = None

    def close(lo: int, hi: int) -> None:
        start, end = doc.tokens[lo].start, doc.tokens[hi].end
        spans.append(
            KeyphraseSpan(f"S{len(spans) + 1}", None, start, end, doc.text[start:end])
        )

    for i, raw in enumerate(labels):
        lbl = Bilou(raw)
        if open_at is None:
            if lbl == Bilou.B:
                open_at = i
            elif lbl == Bilou.U:
                close(i, i)
            elif lbl in (Bilou.I, Bilou.L):
                raise InvalidSequence(f"position {i}: {lbl.name} without an open chunk")
        else:
            if lbl == Bilou.I:
                continue
            if lbl == Bilou.L:
                close(open_at, i)
                open_at = None
            else:
                raise InvalidSequence(
                    f"position {i}: {lbl.name} inside an open chunk"
                )
    if open_at is not None:
        raise InvalidSequence(f"chunk opened at {open_at} never closed")
    return spans


def load_document(txt_path: Path | str, doc_id: str | None = None) -> Document:
    """Load ``<id>.txt`` (and ``<id>.ann`` beside it, if present)."""
    txt_path = Path(txt_path)
    doc_id = doc_id or txt_path.stem
    text = txt_path.read_text(encoding="utf-8")
    doc = Document.from_text(doc_id, text)
    ann_path = txt_path.with_suffix(".ann")
    if ann_path.exists():
        try:
            doc.gold_spans = parse_brat(ann_path.read_text(encoding="utf-8"), doc)
        except SealError as exc:
            raise type(exc)(f"{ann_path.name}: {exc}") from None
    return doc


def load_split(split_dir: Path | str) -> list[Document]:
    """Load every ``.txt``/``.ann`` pair in a split directory, sorted by id."""
    split_dir = Path(split_dir)
    docs = [load_document(p) for p in sorted(split_dir.glob("*.txt"))]
    seen: set[str] = set()
    for doc in docs:
        if doc.id in seen:
            raise SealError(f"duplicate document id {doc.id!r} in {split_dir}")
        seen.add(doc.id)
    return docs


def load_corpus(root: Path | str) -> dict[str, list[Document]]:
    """Load all splits under ``root`` (subdirectories containing .txt files)."""
    root = Path(root)
    corpus: dict[str, list[Document]] = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if any(sub.glob("*.txt")):
            corpus[sub.name] = load_split(sub)
    return corpus
