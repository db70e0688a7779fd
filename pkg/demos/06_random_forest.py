"""
Classifying keyphrases with a from-scratch random forest
========================================================

Every token inside an extracted span is classified from its context
window, and the span takes the majority class.  The forest is plain
numpy: bootstrapped Gini-split trees with a feature subsample per node.
"""

import tempfile
from pathlib import Path

from seal.classify import (
    ClassifierConfig,
    build_training_set,
    classify_keyphrase,
    load_forest,
    predict,
    save_forest,
    train_forest,
)
from seal.toydata import generate_toy_corpus

# --- training rows from gold spans ----------------------------------------
docs, table = generate_toy_corpus(80, seed=9, dim=12)
x, y = build_training_set(docs, table)
print(f"{x.shape[0]} training rows of {x.shape[1]} features "
      f"(3 x {table.dim}-dim context windows)")
print("label mix:", {name: y.count(name) for name in set(y)})

# --- fit -------------------------------------------------------------------
config = ClassifierConfig(n_trees=25, seed=7)
forest = train_forest(x, y, config)

label, votes = predict(forest, x[0])
print(f"first row: gold={y[0]} predicted={label} votes={votes}")

# --- span-level decisions --------------------------------------------------
# A 3-token span gets 3 token votes; ties break Material > Process > Task.
doc = docs[3]
span = doc.gold_spans[0]
token_votes = [predict(forest, row)[0] for row in x[:3]]
print("span vote example:", token_votes, "->", classify_keyphrase(span, token_votes))

# --- serialization ---------------------------------------------------------
# Trees flatten to a field-major node table; identical seeds give
# byte-identical files, which is how the tests pin determinism.
out = Path(tempfile.mkdtemp())
save_forest(out / "a", forest)
save_forest(out / "b", train_forest(x, y, config))
assert (out / "a" / "nodes.bin").read_bytes() == (out / "b" / "nodes.bin").read_bytes()
reloaded = load_forest(out / "a")
assert predict(reloaded, x[0])[0] == label
print("forest round-trips byte-identically")
