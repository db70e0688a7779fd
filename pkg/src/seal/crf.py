"""Linear-chain CRF over BILOU labels.

Scores decompose into per-position emissions plus adjacent-label transition,
start and stop parameters.  The partition function runs in log space, exact
NLL gradients come from forward-backward marginals, and Viterbi decoding
optionally applies a structural-validity transition mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from seal.corpus import NUM_LABELS, Bilou
from seal.errors import SealError

# Large negative surrogate for -inf: keeps arithmetic finite and gradient-safe.
NEG_INF = -1.0e4


class LengthMismatch(SealError):
    pass


class EmptySequence(SealError):
    pass


class NoValidPath(SealError):
    """The transition mask admits no complete path for this length."""


@dataclass
class CrfParams:
    """transitions[i, j] scores label j immediately following label i."""

    transitions: np.ndarray  # (K, K)
    start: np.ndarray  # (K,)
    stop: np.ndarray  # (K,)

    @classmethod
    def zeros(cls, n_labels: int = NUM_LABELS, dtype=np.float64) -> "CrfParams":
        return cls(
            np.zeros((n_labels, n_labels), dtype=dtype),
            np.zeros(n_labels, dtype=dtype),
            np.zeros(n_labels, dtype=dtype),
        )

    @property
    def n_labels(self) -> int:
        return self.start.shape[0]


@dataclass
class TransitionMask:
    allowed: np.ndarray  # (K, K) bool
    start_allowed: np.ndarray  # (K,) bool
    stop_allowed: np.ndarray  # (K,) bool


def bilou_mask() -> TransitionMask:
    """Mask admitting exactly the structurally valid BILOU sequences.

    Chunks must run B I* L; I and L never start one; B and I never end one.
    A complete path exists for every length (all-O is always allowed).
    """
    allowed = np.ones((NUM_LABELS, NUM_LABELS), dtype=bool)
    forbidden = [
        (Bilou.O, Bilou.I), (Bilou.O, Bilou.L),
        (Bilou.B, Bilou.B), (Bilou.B, Bilou.O), (Bilou.B, Bilou.U),
        (Bilou.I, Bilou.B), (Bilou.I, Bilou.O), (Bilou.I, Bilou.U),
        (Bilou.U, Bilou.I), (Bilou.U, Bilou.L),
        (Bilou.L, Bilou.I), (Bilou.L, Bilou.L),
    ]
    for src, dst in forbidden:
        allowed[src, dst] = False
    start_allowed = np.ones(NUM_LABELS, dtype=bool)
    start_allowed[[Bilou.I, Bilou.L]] = False
    stop_allowed = np.ones(NUM_LABELS, dtype=bool)
    stop_allowed[[Bilou.B, Bilou.I]] = False
    return TransitionMask(allowed, start_allowed, stop_allowed)


def _check_emissions(emissions: np.ndarray) -> np.ndarray:
    emissions = np.asarray(emissions)
    if emissions.ndim != 2:
        raise LengthMismatch(f"emissions must be (T, K), got shape {emissions.shape}")
    if emissions.shape[0] == 0:
        raise EmptySequence("empty emission sequence")
    return emissions


def score_path(emissions: np.ndarray, labels, params: CrfParams) -> float:
    """Unnormalized score of one labeling."""
    emissions = _check_emissions(emissions)
    labels = np.asarray(labels, dtype=np.intp)
    n_steps = emissions.shape[0]
    if labels.shape[0] != n_steps:
        raise LengthMismatch(f"{labels.shape[0]} labels for {n_steps} emissions")
    score = params.start[labels[0]] + params.stop[labels[-1]]
    score = score + emissions[np.arange(n_steps), labels].sum()
    score = score + params.transitions[labels[:-1], labels[1:]].sum()
    return float(score)


def log_partition(
    emissions: np.ndarray, params: CrfParams, mask: TransitionMask | None = None
) -> float:
    """log sum over all labelings of exp(score), via the forward recursion.

    A mask restricts the sum to allowed paths (via the NEG_INF surrogate);
    training normally uses the unmasked partition.
    """
    emissions = _check_emissions(emissions)
    if mask is not None:
        params = _apply_mask(params, mask)
    alpha = params.start + emissions[0]
    for t in range(1, emissions.shape[0]):
        alpha = logsumexp(alpha[:, None] + params.transitions, axis=0) + emissions[t]
    return float(logsumexp(alpha + params.stop))


def forward_backward(
    emissions: np.ndarray, params: CrfParams
) -> tuple[float, np.ndarray, np.ndarray]:
    """Log-partition plus exact unary (T, K) and pairwise (T-1, K, K) marginals."""
    emissions = _check_emissions(emissions)
    n_steps, n_labels = emissions.shape
    trans = params.transitions

    alpha = np.empty((n_steps, n_labels), dtype=emissions.dtype)
    alpha[0] = params.start + emissions[0]
    for t in range(1, n_steps):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + trans, axis=0) + emissions[t]

    beta = np.empty_like(alpha)
    beta[-1] = params.stop
    for t in range(n_steps - 2, -1, -1):
        beta[t] = logsumexp(trans + (emissions[t + 1] + beta[t + 1])[None, :], axis=1)

    log_z = float(logsumexp(alpha[-1] + beta[-1]))
    unary = np.exp(alpha + beta - log_z)
    pairwise = np.empty((n_steps - 1, n_labels, n_labels), dtype=emissions.dtype)
    for t in range(n_steps - 1):
        log_pair = (
            alpha[t][:, None]
            + trans
            + (emissions[t + 1] + beta[t + 1])[None, :]
            - log_z
        )
        pairwise[t] = np.exp(log_pair)
    return log_z, unary, pairwise


def nll(
    emissions: np.ndarray,
    labels,
    params: CrfParams,
    mask: TransitionMask | None = None,
) -> float:
    """Negative log-likelihood of the gold labeling (always >= 0)."""
    return log_partition(emissions, params, mask) - score_path(emissions, labels, params)


@dataclass
class CrfGradients:
    emissions: np.ndarray
    transitions: np.ndarray
    start: np.ndarray
    stop: np.ndarray


def crf_backward(
    emissions: np.ndarray, labels, params: CrfParams
) -> tuple[float, CrfGradients]:
    """NLL value and its exact gradients (marginal minus gold indicator)."""
    emissions = _check_emissions(emissions)
    labels = np.asarray(labels, dtype=np.intp)
    n_steps = emissions.shape[0]
    if labels.shape[0] != n_steps:
        raise LengthMismatch(f"{labels.shape[0]} labels for {n_steps} emissions")

    log_z, unary, pairwise = forward_backward(emissions, params)
    loss = log_z - score_path(emissions, labels, params)

    d_emissions = unary.copy()
    d_emissions[np.arange(n_steps), labels] -= 1.0
    d_transitions = pairwise.sum(axis=0)
    np.subtract.at(d_transitions, (labels[:-1], labels[1:]), 1.0)
    d_start = unary[0].copy()
    d_start[labels[0]] -= 1.0
    d_stop = unary[-1].copy()
    d_stop[labels[-1]] -= 1.0
    return loss, CrfGradients(d_emissions, d_transitions, d_start, d_stop)


def _apply_mask(params: CrfParams, mask: TransitionMask) -> CrfParams:
    return CrfParams(
        params.transitions + np.where(mask.allowed, 0.0, NEG_INF),
        params.start + np.where(mask.start_allowed, 0.0, NEG_INF),
        params.stop + np.where(mask.stop_allowed, 0.0, NEG_INF),
    )


def _check_feasible(n_steps: int, n_labels: int, mask: TransitionMask) -> None:
    reachable = mask.start_allowed.copy()
    for _ in range(1, n_steps):
        if not reachable.any():
            break
        reachable = (reachable[:, None] & mask.allowed).any(axis=0)
    if not (reachable & mask.stop_allowed).any():
        raise NoValidPath(f"mask admits no complete path of length {n_steps}")


def viterbi(
    emissions: np.ndarray, params: CrfParams, mask: TransitionMask | None = None
) -> np.ndarray:
    """Maximum-score labeling; ties break toward the lowest label index.

    With a mask, forbidden transitions are penalized by the NEG_INF surrogate
    and structural feasibility is checked exactly.
    """
    emissions = _check_emissions(emissions)
    n_steps, n_labels = emissions.shape
    if mask is not None:
        _check_feasible(n_steps, n_labels, mask)
        params = _apply_mask(params, mask)

    delta = params.start + emissions[0]
    back = np.empty((n_steps, n_labels), dtype=np.intp)
    for t in range(1, n_steps):
        scores = delta[:, None] + params.transitions
        back[t] = scores.argmax(axis=0)  # argmax ties -> lowest index
        delta = scores[back[t], np.arange(n_labels)] + emissions[t]
    delta = delta + params.stop

    path = np.empty(n_steps, dtype=np.intp)
    path[-1] = int(delta.argmax())
    for t in range(n_steps - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path
