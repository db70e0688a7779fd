"""
Reading annotated abstracts and the BILOU label codec
=====================================================

A corpus document is a plain-text file plus a standoff annotation file
listing typed character spans.  This walk-through builds one in memory,
tokenizes it, projects the spans onto per-token BILOU labels, and shows
that the projection is reversible.
"""

from seal.corpus import Document, bilou_to_spans, parse_brat, project_bilou, tokenize
from seal.postprocess import repair_bilou

# A miniature abstract and its annotation file, exactly as they would sit
# on disk as `doc.txt` and `doc.ann`.
text = "We study the oxidation of NaCl samples during thermal annealing."
ann = """T1\tMaterial 26 30\tNaCl
T2\tProcess 46 63\tthermal annealing
"""

# --- tokenization ---------------------------------------------------------
# Tokens are whitespace runs with punctuation peeled off the edges, each
# carrying its character offsets so spans can be mapped back to the text.
for token in tokenize(text)[:6]:
    print(f"  [{token.start:2d},{token.end:2d})  {token.surface}")

# --- standoff parsing -----------------------------------------------------
doc = Document.from_text("demo", text)
spans = parse_brat(ann, doc)
doc = Document.from_text("demo", text, spans)
for span in doc.gold_spans:
    print(f"  {span.id}: {span.klass:9s} {span.start}-{span.end} {span.surface!r}")

# --- spans -> labels -> spans ---------------------------------------------
# Each token gets one of five labels: B(egin), I(nside), L(ast), O(utside),
# U(nit-length).  "thermal annealing" becomes B L; "NaCl" becomes U.
labels = project_bilou(doc)
print("labels:", " ".join(label.name for label in labels))

decoded = bilou_to_spans(doc, labels)
assert [(s.start, s.end) for s in decoded] == [
    (s.start, s.end) for s in doc.gold_spans
]
print("round trip recovered every span")

# --- repairing raw model output -------------------------------------------
# A tagger can emit ill-formed sequences (an I with no B before it, a B
# that never closes).  repair_bilou rewrites the smallest number of chunk
# labels so the sequence decodes, and never touches O or U positions.
from seal.corpus import Bilou

broken = [Bilou.O, Bilou.I, Bilou.I, Bilou.O, Bilou.B]
fixed = repair_bilou(broken)
print("broken:", " ".join(k.name for k in broken))
print("fixed: ", " ".join(k.name for k in fixed))
assert repair_bilou(fixed) == fixed  # repairing twice changes nothing
