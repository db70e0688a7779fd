"""
The full annotation pipeline, as a library and over HTTP
========================================================

Extraction, repair, classification, abbreviation propagation and the
chemical-formula override run in a fixed order behind one ``annotate``
call.  The same object backs the HTTP service; this script trains a
small bundle, annotates locally, then queries a live server.
"""

import json
import threading
import urllib.request

from seal.classify import ClassifierConfig, build_training_set, train_forest
from seal.pipeline import Annotator, annotate
from seal.postprocess import chemical_formula_rule, detect_abbreviations
from seal.service import make_server
from seal.toydata import generate_toy_corpus
from seal.train import ExtractorConfig, StaticSource, train_extractor
from seal.corpus import Document

# --- train a small bundle --------------------------------------------------
docs, table = generate_toy_corpus(100, seed=3, dim=12)
config = ExtractorConfig(
    layer_output_sizes=(16, 8), learning_rate=1e-2, max_epochs=16, patience=16
)
model, _ = train_extractor(docs[:80], docs[80:], StaticSource(table), config)
x, y = build_training_set(docs[:80], table)
forest = train_forest(x, y, ClassifierConfig(n_trees=25, seed=7))
annotator = Annotator(model=model, forest=forest, extract_table=table)

# --- annotate text ---------------------------------------------------------
result = annotate(annotator, docs[85].text)
for span in result.spans:
    print(f"  {span.klass:9s} {span.surface!r}")

# --- the post-processing rules on their own --------------------------------
# Formula surfaces are forced to Material no matter what the forest said.
for surface in ("TiO2", "H2SO4", "CO", "Co", "oxide"):
    print(f"  chemical_formula_rule({surface!r}) = {chemical_formula_rule(surface)}")

# Abbreviations defined as "long form (SHORT)" inherit the long form's class.
abbrev_doc = Document.from_text(
    "demo", "A solid oxide fuel cell ( SOFC ) anode was tested ."
)
for short, entry in detect_abbreviations(abbrev_doc).items():
    # The entry holds token indices; map them back to character offsets.
    first = abbrev_doc.tokens[entry.long_start]
    last = abbrev_doc.tokens[entry.long_end - 1]
    print(f"  abbreviation {short!r} -> {abbrev_doc.text[first.start:last.end]!r}")

# --- the same annotator over HTTP ------------------------------------------
server = make_server(annotator, port=0)
threading.Thread(target=server.serve_forever, daemon=True).start()
host, port = server.server_address[:2]

request = urllib.request.Request(
    f"http://{host}:{port}/annotate",
    data=json.dumps({"text": docs[86].text}).encode("utf-8"),
    headers={"Content-Type": "application/json"},
    method="POST",
)
with urllib.request.urlopen(request) as response:
    payload = json.loads(response.read())
print(f"HTTP /annotate returned {len(payload['spans'])} spans")

with urllib.request.urlopen(f"http://{host}:{port}/health") as response:
    print("HTTP /health  returned", response.read().decode())

server.shutdown()
server.server_close()
