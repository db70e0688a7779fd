"""ScienceIE-style micro-averaged precision/recall/F1.

Three protocols: untyped extraction (exact character-span match), typed
end-to-end (span and class must both match), and classification given
gold spans (were the gold keyphrases assigned the right class?).  Spans
match only when (start, end) are exactly equal — no partial credit — and
each gold span can satisfy at most one prediction.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
from collections import Counter

from .corpus import KEYPHRASE_CLASSES, KeyphraseSpan
from .errors import SealError

__all__ = [
    "Protocol",
    "EvalReport",
    "UnknownSpan",
    "span_f1",
    "corpus_span_f1",
    "classification_given_gold",
    "corpus_classification_given_gold",
    "aggregate",
]

logger = logging.getLogger(__name__)


class UnknownSpan(SealError):
    """A classification prediction references a span id not in the gold."""


class Protocol(str, enum.Enum):
    EXTRACTION = "extraction"
    TYPED = "typed"
    CLASSIFICATION = "classification"


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2 * precision * recall / (precision + recall) if precision + recall else 0.0
    )
    return precision, recall, f1


@dataclasses.dataclass(frozen=True)
class EvalReport:
    protocol: Protocol
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    per_class: dict[str, "EvalReport"] = dataclasses.field(default_factory=dict)

    @classmethod
    def from_counts(
        cls,
        protocol: Protocol,
        tp: int,
        fp: int,
        fn: int,
        per_class: dict[str, "EvalReport"] | None = None,
    ) -> "EvalReport":
        precision, recall, f1 = _prf(tp, fp, fn)
        return cls(
            protocol=protocol,
            tp=tp,
            fp=fp,
            fn=fn,
            precision=precision,
            recall=recall,
            f1=f1,
            per_class=dict(per_class or {}),
        )

    def to_dict(self) -> dict:
        out = {
            "protocol": self.protocol.value,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }
        if self.per_class:
            out["per_class"] = {
                name: report.to_dict() for name, report in self.per_class.items()
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_text(self) -> str:
        lines = [
            f"protocol: {self.protocol.value}",
            f"tp: {self.tp}",
            f"fp: {self.fp}",
            f"fn: {self.fn}",
            f"precision: {self.precision:.4f}",
            f"recall: {self.recall:.4f}",
            f"f1: {self.f1:.4f}",
        ]
        for name, sub in self.per_class.items():
            lines.append(
                f"{name}: tp={sub.tp} fp={sub.fp} fn={sub.fn} "
                f"p={sub.precision:.4f} r={sub.recall:.4f} f1={sub.f1:.4f}"
            )
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Span matching
# ---------------------------------------------------------------------------


def _dedup(pred: list[KeyphraseSpan]) -> list[KeyphraseSpan]:
    seen: set[tuple[int, int, str | None]] = set()
    out = []
    for span in pred:
        key = (span.start, span.end, span.klass)
        if key in seen:
            logger.warning("duplicate prediction span %s dropped: %r", span.id, key)
            continue
        seen.add(key)
        out.append(span)
    return out


def _match_counts(
    gold: list[KeyphraseSpan], pred: list[KeyphraseSpan], typed: bool
) -> tuple[int, int, int]:
    def key(span: KeyphraseSpan):
        return (span.start, span.end, span.klass) if typed else (span.start, span.end)

    remaining = Counter(key(g) for g in gold)
    tp = fp = 0
    for span in pred:
        k = key(span)
        if remaining[k] > 0:
            tp += 1
            remaining[k] -= 1
        else:
            fp += 1
    fn = sum(remaining.values())
    return tp, fp, fn


def span_f1(
    gold: list[KeyphraseSpan], pred: list[KeyphraseSpan], typed: bool = False
) -> EvalReport:
    """Exact-match span P/R/F1 for one document's gold and predictions.

    A prediction is a true positive iff an as-yet-unmatched gold span has
    the same (start, end) — and the same class when ``typed``.  Identical
    predicted (start, end, class) triples are deduplicated with a warning.
    """
    pred = _dedup(pred)
    protocol = Protocol.TYPED if typed else Protocol.EXTRACTION
    tp, fp, fn = _match_counts(gold, pred, typed)
    per_class: dict[str, EvalReport] = {}
    if typed:
        for name in KEYPHRASE_CLASSES:
            ctp, cfp, cfn = _match_counts(
                [g for g in gold if g.klass == name],
                [p for p in pred if p.klass == name],
                typed=True,
            )
            per_class[name] = EvalReport.from_counts(protocol, ctp, cfp, cfn)
    return EvalReport.from_counts(protocol, tp, fp, fn, per_class)


def aggregate(reports: list[EvalReport], protocol: Protocol) -> EvalReport:
    """Micro-aggregate: sum tp/fp/fn (and per-class counts), recompute P/R/F1."""
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    names: list[str] = []
    for r in reports:
        for name in r.per_class:
            if name not in names:
                names.append(name)
    per_class = {
        name: EvalReport.from_counts(
            protocol,
            sum(r.per_class[name].tp for r in reports if name in r.per_class),
            sum(r.per_class[name].fp for r in reports if name in r.per_class),
            sum(r.per_class[name].fn for r in reports if name in r.per_class),
        )
        for name in names
    }
    return EvalReport.from_counts(protocol, tp, fp, fn, per_class)


def corpus_span_f1(
    gold: dict[str, list[KeyphraseSpan]],
    pred: dict[str, list[KeyphraseSpan]],
    typed: bool = False,
) -> EvalReport:
    """Micro-average :func:`span_f1` over documents keyed by id.

    Documents present on only one side count as empty on the other, so
    spurious predictions for unknown documents still cost precision.
    """
    protocol = Protocol.TYPED if typed else Protocol.EXTRACTION
    doc_ids = sorted(set(gold) | set(pred))
    reports = [
        span_f1(gold.get(doc_id, []), pred.get(doc_id, []), typed)
        for doc_id in doc_ids
    ]
    return aggregate(reports, protocol)


# ---------------------------------------------------------------------------
# Classification over gold spans
# ---------------------------------------------------------------------------


def classification_given_gold(
    gold: list[KeyphraseSpan], predicted: dict[str, str]
) -> EvalReport:
    """Score predicted classes on gold spans (keyed by gold span id).

    A correctly classed span is a tp; a wrongly classed span is both a fp
    and a fn; a skipped span is a fn only.  Predictions for unknown span
    ids raise :class:`UnknownSpan`.
    """
    by_id = {span.id: span for span in gold}
    for span_id in predicted:
        if span_id not in by_id:
            raise UnknownSpan(f"prediction for unknown gold span id {span_id!r}")
    for span_id, klass in predicted.items():
        if klass not in KEYPHRASE_CLASSES:
            raise ValueError(f"invalid predicted class {klass!r} for {span_id!r}")

    tp = fp = fn = 0
    per = {name: [0, 0, 0] for name in KEYPHRASE_CLASSES}  # tp, fp, fn
    for span in gold:
        guess = predicted.get(span.id)
        if guess is None:
            fn += 1
            if span.klass in per:
                per[span.klass][2] += 1
        elif guess == span.klass:
            tp += 1
            per[span.klass][0] += 1
        else:
            fp += 1
            fn += 1
            per[guess][1] += 1  # false positive for the predicted class
            if span.klass in per:
                per[span.klass][2] += 1  # false negative for the true class
    per_class = {
        name: EvalReport.from_counts(Protocol.CLASSIFICATION, *counts)
        for name, counts in per.items()
    }
    return EvalReport.from_counts(Protocol.CLASSIFICATION, tp, fp, fn, per_class)


def corpus_classification_given_gold(
    gold: dict[str, list[KeyphraseSpan]],
    predicted: dict[str, dict[str, str]],
) -> EvalReport:
    """Micro-average :func:`classification_given_gold` over documents."""
    for doc_id in predicted:
        if doc_id not in gold:
            raise UnknownSpan(f"predictions for unknown document {doc_id!r}")
    reports = [
        classification_given_gold(spans, predicted.get(doc_id, {}))
        for doc_id, spans in sorted(gold.items())
    ]
    return aggregate(reports, Protocol.CLASSIFICATION)
