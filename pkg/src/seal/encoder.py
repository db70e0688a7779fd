"""Stacked bidirectional LSTM encoder with a linear emission head.

Three BiLSTM layers (concatenated output widths 96/48/24 by default, i.e.
per-direction hidden sizes 48/24/12) map per-token input vectors to a
24-dimensional representation, projected to 5 per-label emission scores.
Both the forward pass and an exact analytic backward pass (backpropagation
through time) are implemented; gradients are verified against central finite
differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from seal.corpus import NUM_LABELS
from seal.errors import SealError

DEFAULT_OUTPUT_WIDTHS = (96, 48, 24)


class ShapeMismatch(SealError):
    pass


class EmptySequence(SealError):
    pass


class CacheMismatch(SealError):
    pass


@dataclass
class LstmDirectionParams:
    """One direction of one layer; gate order is input, forget, cell, output."""

    w_in: np.ndarray  # (4h, d_in)
    w_rec: np.ndarray  # (4h, h)
    bias: np.ndarray  # (4h,)

    @property
    def hidden_size(self) -> int:
        return self.w_rec.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_in.shape[1]


@dataclass
class LstmLayerParams:
    forward: LstmDirectionParams
    backward: LstmDirectionParams


@dataclass
class EncoderParams:
    layers: list[LstmLayerParams]
    proj_w: np.ndarray  # (n_labels, last_width)
    proj_b: np.ndarray  # (n_labels,)

    @property
    def input_size(self) -> int:
        return self.layers[0].forward.input_size

    @property
    def output_size(self) -> int:
        return 2 * self.layers[-1].forward.hidden_size

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        """Flat (name, array) view in a fixed serialization order."""
        out = []
        for idx, layer in enumerate(self.layers):
            for dname, dparams in (("fwd", layer.forward), ("bwd", layer.backward)):
                out.append((f"lstm{idx}.{dname}.w_in", dparams.w_in))
                out.append((f"lstm{idx}.{dname}.w_rec", dparams.w_rec))
                out.append((f"lstm{idx}.{dname}.bias", dparams.bias))
        out.append(("proj_w", self.proj_w))
        out.append(("proj_b", self.proj_b))
        return out


def _init_direction(rng, d_in: int, hidden: int, dtype) -> LstmDirectionParams:
    bound = 1.0 / np.sqrt(hidden)
    w_in = rng.uniform(-bound, bound, size=(4 * hidden, d_in))
    w_rec = rng.uniform(-bound, bound, size=(4 * hidden, hidden))
    bias = rng.uniform(-bound, bound, size=4 * hidden)
    bias[hidden:2 * hidden] += 1.0  # forget-gate bias: remember by default
    return LstmDirectionParams(
        w_in.astype(dtype), w_rec.astype(dtype), bias.astype(dtype)
    )


def init_encoder(
    input_dim: int,
    output_widths: tuple[int, ...] = DEFAULT_OUTPUT_WIDTHS,
    n_labels: int = NUM_LABELS,
    seed: int = 0,
    dtype=np.float32,
) -> EncoderParams:
    """Random encoder; each width must be even (it concatenates two directions)."""
    rng = np.random.default_rng(seed)
    layers = []
    d_in = input_dim
    for width in output_widths:
        if width % 2:
            raise ShapeMismatch(f"bidirectional output width {width} must be even")
        hidden = width // 2
        layers.append(
            LstmLayerParams(
                _init_direction(rng, d_in, hidden, dtype),
                _init_direction(rng, d_in, hidden, dtype),
            )
        )
        d_in = width
    bound = 1.0 / np.sqrt(d_in)
    proj_w = rng.uniform(-bound, bound, size=(n_labels, d_in)).astype(dtype)
    proj_b = np.zeros(n_labels, dtype=dtype)
    return EncoderParams(layers, proj_w, proj_b)


def zeros_like_params(params: EncoderParams) -> EncoderParams:
    """Same-shaped container of zeros (used as a gradient accumulator)."""
    return EncoderParams(
        [
            LstmLayerParams(
                LstmDirectionParams(
                    np.zeros_like(layer.forward.w_in),
                    np.zeros_like(layer.forward.w_rec),
                    np.zeros_like(layer.forward.bias),
                ),
                LstmDirectionParams(
                    np.zeros_like(layer.backward.w_in),
                    np.zeros_like(layer.backward.w_rec),
                    np.zeros_like(layer.backward.bias),
                ),
            )
            for layer in params.layers
        ],
        np.zeros_like(params.proj_w),
        np.zeros_like(params.proj_b),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_step(
    params: LstmDirectionParams,
    x_t: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM cell update with sigmoid gates and tanh nonlinearities."""
    hidden = params.hidden_size
    if x_t.shape != (params.input_size,) or h_prev.shape != (hidden,) or c_prev.shape != (hidden,):
        raise ShapeMismatch(
            f"lstm_step shapes x{x_t.shape} h{h_prev.shape} c{c_prev.shape} vs "
            f"d_in={params.input_size} h={hidden}"
        )
    pre = params.w_in @ x_t + params.w_rec @ h_prev + params.bias
    gate_in = _sigmoid(pre[:hidden])
    gate_forget = _sigmoid(pre[hidden:2 * hidden])
    candidate = np.tanh(pre[2 * hidden:3 * hidden])
    gate_out = _sigmoid(pre[3 * hidden:])
    c_t = gate_forget * c_prev + gate_in * candidate
    h_t = gate_out * np.tanh(c_t)
    return h_t, c_t


@dataclass
class _DirectionCache:
    # everything in processing order (already flipped for the backward direction)
    params: LstmDirectionParams
    xs: np.ndarray  # (T, d_in)
    gate_in: np.ndarray  # (T, h)
    gate_forget: np.ndarray
    candidate: np.ndarray
    gate_out: np.ndarray
    cell: np.ndarray
    tanh_cell: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    hs: np.ndarray


def _direction_forward(params: LstmDirectionParams, xs: np.ndarray) -> _DirectionCache:
    n_steps = xs.shape[0]
    hidden = params.hidden_size
    dtype = xs.dtype
    pre_in = xs @ params.w_in.T + params.bias  # (T, 4h)

    shape = (n_steps, hidden)
    cache = _DirectionCache(
        params, xs,
        np.empty(shape, dtype), np.empty(shape, dtype), np.empty(shape, dtype),
        np.empty(shape, dtype), np.empty(shape, dtype), np.empty(shape, dtype),
        np.empty(shape, dtype), np.empty(shape, dtype), np.empty(shape, dtype),
    )
    h_prev = np.zeros(hidden, dtype=dtype)
    c_prev = np.zeros(hidden, dtype=dtype)
    for t in range(n_steps):
        pre = pre_in[t] + params.w_rec @ h_prev
        gate_in = _sigmoid(pre[:hidden])
        gate_forget = _sigmoid(pre[hidden:2 * hidden])
        candidate = np.tanh(pre[2 * hidden:3 * hidden])
        gate_out = _sigmoid(pre[3 * hidden:])
        cell = gate_forget * c_prev + gate_in * candidate
        tanh_cell = np.tanh(cell)
        h_t = gate_out * tanh_cell
        cache.gate_in[t] = gate_in
        cache.gate_forget[t] = gate_forget
        cache.candidate[t] = candidate
        cache.gate_out[t] = gate_out
        cache.cell[t] = cell
        cache.tanh_cell[t] = tanh_cell
        cache.h_prev[t] = h_prev
        cache.c_prev[t] = c_prev
        cache.hs[t] = h_t
        h_prev, c_prev = h_t, cell
    return cache


def _direction_backward(
    cache: _DirectionCache, d_out: np.ndarray
) -> tuple[LstmDirectionParams, np.ndarray]:
    """BPTT for one direction; d_out in processing order.

    Returns gradients (packed in a LstmDirectionParams-shaped container) and
    the gradient w.r.t. the direction's inputs.
    """
    params = cache.params
    n_steps, hidden = cache.hs.shape
    dtype = cache.hs.dtype
    d_pre = np.empty((n_steps, 4 * hidden), dtype=dtype)
    dh_rec = np.zeros(hidden, dtype=dtype)
    dc_rec = np.zeros(hidden, dtype=dtype)
    for t in range(n_steps - 1, -1, -1):
        dh = d_out[t] + dh_rec
        d_gate_out = dh * cache.tanh_cell[t]
        dc = dc_rec + dh * cache.gate_out[t] * (1.0 - cache.tanh_cell[t] ** 2)
        d_gate_forget = dc * cache.c_prev[t]
        d_gate_in = dc * cache.candidate[t]
        d_candidate = dc * cache.gate_in[t]
        d_pre[t, :hidden] = d_gate_in * cache.gate_in[t] * (1.0 - cache.gate_in[t])
        d_pre[t, hidden:2 * hidden] = (
            d_gate_forget * cache.gate_forget[t] * (1.0 - cache.gate_forget[t])
        )
        d_pre[t, 2 * hidden:3 * hidden] = d_candidate * (1.0 - cache.candidate[t] ** 2)
        d_pre[t, 3 * hidden:] = d_gate_out * cache.gate_out[t] * (1.0 - cache.gate_out[t])
        dh_rec = params.w_rec.T @ d_pre[t]
        dc_rec = dc * cache.gate_forget[t]
    grads = LstmDirectionParams(
        d_pre.T @ cache.xs,
        d_pre.T @ cache.h_prev,
        d_pre.sum(axis=0),
    )
    d_xs = d_pre @ params.w_in
    return grads, d_xs


@dataclass
class EncoderCache:
    params: EncoderParams
    layer_caches: list[tuple[_DirectionCache, _DirectionCache]]
    hidden_out: np.ndarray  # (T, last_width), the projection input


def bilstm_forward(
    params: EncoderParams, xs: np.ndarray
) -> tuple[np.ndarray, EncoderCache]:
    """Run the full stack; returns (T, last_width) features plus the cache."""
    xs = np.asarray(xs)
    if xs.ndim != 2:
        raise ShapeMismatch(f"input must be (T, d_in), got {xs.shape}")
    if xs.shape[0] == 0:
        raise EmptySequence("empty input sequence")
    if xs.shape[1] != params.input_size:
        raise ShapeMismatch(
            f"input dim {xs.shape[1]} != encoder input dim {params.input_size}"
        )
    layer_caches = []
    current = xs
    for layer in params.layers:
        fwd = _direction_forward(layer.forward, current)
        bwd = _direction_forward(layer.backward, current[::-1])
        layer_caches.append((fwd, bwd))
        current = np.concatenate([fwd.hs, bwd.hs[::-1]], axis=1)
    return current, EncoderCache(params, layer_caches, current)


def project(hidden: np.ndarray, proj_w: np.ndarray, proj_b: np.ndarray) -> np.ndarray:
    """Linear emission scores, (T, n_labels); the CRF consumes raw scores."""
    if hidden.ndim != 2 or hidden.shape[1] != proj_w.shape[1]:
        raise ShapeMismatch(
            f"hidden {hidden.shape} incompatible with projection {proj_w.shape}"
        )
    return hidden @ proj_w.T + proj_b


def encoder_forward(
    params: EncoderParams, xs: np.ndarray
) -> tuple[np.ndarray, EncoderCache]:
    """Features plus projection in one call; returns (emissions, cache)."""
    hidden, cache = bilstm_forward(params, xs)
    return project(hidden, params.proj_w, params.proj_b), cache


def encoder_backward(
    cache: EncoderCache, d_emissions: np.ndarray
) -> tuple[EncoderParams, np.ndarray]:
    """Exact gradients for every encoder tensor given dL/d_emissions.

    Returns (gradients packed in an EncoderParams-shaped container, dL/d_xs).
    """
    params = cache.params
    d_emissions = np.asarray(d_emissions)
    expected = (cache.hidden_out.shape[0], params.proj_w.shape[0])
    if d_emissions.shape != expected:
        raise CacheMismatch(
            f"d_emissions shape {d_emissions.shape}, cache expects {expected}"
        )
    d_proj_w = d_emissions.T @ cache.hidden_out
    d_proj_b = d_emissions.sum(axis=0)
    d_current = d_emissions @ params.proj_w

    layer_grads: list[LstmLayerParams] = []
    for layer_cache in reversed(cache.layer_caches):
        fwd_cache, bwd_cache = layer_cache
        hidden = fwd_cache.hs.shape[1]
        fwd_grads, d_xs_fwd = _direction_backward(fwd_cache, d_current[:, :hidden])
        bwd_grads, d_xs_bwd = _direction_backward(bwd_cache, d_current[:, hidden:][::-1])
        d_current = d_xs_fwd + d_xs_bwd[::-1]
        layer_grads.append(LstmLayerParams(fwd_grads, bwd_grads))
    layer_grads.reverse()
    return EncoderParams(layer_grads, d_proj_w, d_proj_b), d_current
