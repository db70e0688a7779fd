"""
The stacked BiLSTM encoder and its hand-written gradients
=========================================================

The sequence encoder is three bidirectional LSTM layers (output widths
96, 48, 24) followed by a linear projection to the five BILOU scores.
All gradients are derived by hand; this script validates one tensor
against central finite differences, the same oracle the test suite uses
on every tensor.
"""

import numpy as np

from seal.encoder import bilstm_forward, encoder_backward, encoder_forward, init_encoder

# --- shapes ----------------------------------------------------------------
embedding_dim = 50
params = init_encoder(embedding_dim, (96, 48, 24), seed=0)
xs = np.random.default_rng(1).standard_normal((9, embedding_dim)).astype(np.float32)

features, _ = bilstm_forward(params, xs)
emissions, cache = encoder_forward(params, xs)
print("input  :", xs.shape)
print("features:", features.shape)  # (T, 24): 12 per direction at the top
print("emissions:", emissions.shape)  # (T, 5) BILOU scores

# --- gradient spot check ---------------------------------------------------
# Use float64 and a scalar loss sum(emissions * W) whose gradient w.r.t.
# emissions is W itself; everything upstream comes from the manual BPTT.
params64 = init_encoder(5, (6, 4), seed=2, dtype=np.float64)
xs64 = np.random.default_rng(3).standard_normal((4, 5))
weights = np.random.default_rng(4).standard_normal((4, 5))

_, cache64 = encoder_forward(params64, xs64)
grads, _ = encoder_backward(cache64, weights)
analytic = dict(grads.named_tensors())["lstm0.fwd.w_rec"]

target = dict(params64.named_tensors())["lstm0.fwd.w_rec"]
numeric = np.zeros_like(target)
eps = 1e-6
for index in np.ndindex(target.shape):
    saved = target[index]
    target[index] = saved + eps
    hi = float((encoder_forward(params64, xs64)[0] * weights).sum())
    target[index] = saved - eps
    lo = float((encoder_forward(params64, xs64)[0] * weights).sum())
    target[index] = saved
    numeric[index] = (hi - lo) / (2 * eps)

err = np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1e-8)
print(f"lstm0.fwd.w_rec: max relative error vs finite differences = {err:.2e}")
assert err < 1e-6
