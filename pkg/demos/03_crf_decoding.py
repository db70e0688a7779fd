"""
Linear-chain CRF scoring, normalization and decoding
====================================================

The CRF layer scores a label sequence as emissions plus transition,
start and stop weights.  This script checks the forward algorithm
against brute-force enumeration on a small problem and shows how the
BILOU transition mask keeps Viterbi output well-formed.
"""

import itertools

import numpy as np
from scipy.special import logsumexp

from seal.corpus import Bilou
from seal.crf import CrfParams, bilou_mask, log_partition, score_path, viterbi

rng = np.random.default_rng(0)
n_steps, n_labels = 4, 5

emissions = rng.standard_normal((n_steps, n_labels))
params = CrfParams(
    transitions=rng.standard_normal((n_labels, n_labels)),
    start=rng.standard_normal(n_labels),
    stop=rng.standard_normal(n_labels),
)

# --- the partition function, the slow way ---------------------------------
# log Z sums exp(score) over every one of the 5^4 = 625 labelings.
scores = [
    score_path(emissions, path, params)
    for path in itertools.product(range(n_labels), repeat=n_steps)
]
brute = logsumexp(scores)
fast = log_partition(emissions, params)
print(f"brute-force log Z = {brute:.10f}")
print(f"forward    log Z = {fast:.10f}")
assert abs(brute - fast) < 1e-9

# --- Viterbi decoding -----------------------------------------------------
best = viterbi(emissions, params)
print("best path:", [Bilou(int(k)).name for k in best])
assert abs(score_path(emissions, best, params) - max(scores)) < 1e-9

# --- constrained decoding --------------------------------------------------
# Raw argmax decoding can produce sequences like "I I" that no span
# projection generates.  The BILOU mask forbids invalid transitions, so
# masked Viterbi always yields a decodable sequence (B...L chunks, U, O).
rigged = np.full((3, n_labels), -5.0)
rigged[:, Bilou.I] = 5.0  # push the decoder toward an all-I path
free = viterbi(rigged, CrfParams.zeros(n_labels, dtype=np.float64))
masked = viterbi(rigged, CrfParams.zeros(n_labels, dtype=np.float64), bilou_mask())
print("unmasked:", [Bilou(int(k)).name for k in free])
print("masked:  ", [Bilou(int(k)).name for k in masked])
