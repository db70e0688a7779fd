"""
Span-level evaluation protocols
===============================

Extraction is scored by exact character-span match under micro-averaged
precision/recall/F1.  Three protocols share the machinery: untyped
extraction, typed extraction (span and class must both match), and
classification over gold spans.
"""

from seal.corpus import KeyphraseSpan
from seal.evaluate import (
    classification_given_gold,
    corpus_span_f1,
    span_f1,
)


def spans(*triples):
    return [
        KeyphraseSpan(id=f"T{i}", klass=klass, start=start, end=end, surface="x")
        for i, (klass, start, end) in enumerate(triples, start=1)
    ]


# --- extraction: exact offsets only ---------------------------------------
gold = spans(("Task", 0, 4), ("Material", 10, 14), ("Process", 20, 28))
pred = spans(("Task", 0, 4), ("Material", 10, 15))  # second span is off by one

report = span_f1(gold, pred)
print(f"extraction: P={report.precision:.3f} R={report.recall:.3f} "
      f"F1={report.f1:.3f}")

# --- typed: the class matters too -----------------------------------------
wrong_class = spans(("Process", 0, 4), ("Material", 10, 14))
print("untyped F1:", f"{span_f1(gold, wrong_class).f1:.3f}")
print("typed   F1:", f"{span_f1(gold, wrong_class, typed=True).f1:.3f}")

# --- micro-averaging over a corpus ----------------------------------------
# Counts are summed over documents before computing P/R/F1, so a large
# document weighs more than a small one.
corpus_gold = {"docA": gold, "docB": spans(("Task", 0, 3))}
corpus_pred = {"docA": pred, "docB": []}
report = corpus_span_f1(corpus_gold, corpus_pred, typed=False)
print(f"corpus: tp={report.tp} fp={report.fp} fn={report.fn} F1={report.f1:.3f}")

# --- classification over gold spans ---------------------------------------
# The classifier is scored on gold boundaries: a wrong class is both a
# false positive and a false negative; a skipped span is only a miss.
predicted_classes = {"T1": "Task", "T2": "Process"}  # T3 left unclassified
report = classification_given_gold(gold, predicted_classes)
print(f"classification: P={report.precision:.3f} R={report.recall:.3f} "
      f"F1={report.f1:.3f}")
for name, sub in report.per_class.items():
    print(f"  {name:9s} tp={sub.tp} fp={sub.fp} fn={sub.fn}")
