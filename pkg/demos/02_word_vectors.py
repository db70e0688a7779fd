"""
Static word vectors and context-window features
===============================================

Token features come from a plain-text word-vector file (one ``word v1 ...
vd`` record per line).  Out-of-vocabulary tokens fall back to the mean of
all vectors, and classification features are the concatenation of the
previous, current and next token's vectors.
"""

import tempfile
from pathlib import Path

import numpy as np

from seal.corpus import Document
from seal.embed import context_concat, load_table, lookup_sequence

# --- write a tiny vector file ---------------------------------------------
workdir = Path(tempfile.mkdtemp())
vector_file = workdir / "vectors.txt"
vector_file.write_text(
    "the 0.1 0.0 0.0\n"
    "oxide 0.0 1.0 0.2\n"
    "fuel 0.0 0.8 0.4\n"
    "cell 0.3 0.7 0.1\n",
    encoding="utf-8",
)

table = load_table(vector_file)
print(f"loaded {len(table.vectors)} vectors of dimension {table.dim}")

# Lookups are case-insensitive; unknown words map to the mean vector, so
# they sit inside the embedding cloud instead of at the origin.
print("'The'    ->", table.vectors["the"])
print("unknown  ->", np.round(table.unk, 3))

# --- per-token rows for a document ----------------------------------------
doc = Document.from_text("demo", "The solid oxide fuel cell")
rows = lookup_sequence(table, doc.tokens)
print("feature matrix:", rows.shape)  # one row per token

# --- context windows for classification -----------------------------------
# The classifier sees [previous; current; next] = 3d features per token;
# at the sequence edges the missing neighbor is the unk vector.
middle = context_concat(rows, 2, table.unk)
first = context_concat(rows, 0, table.unk)
print("window features:", middle.shape)
assert np.array_equal(first[: table.dim], table.unk)  # no left neighbor
print("edge windows are padded with the unk vector")
