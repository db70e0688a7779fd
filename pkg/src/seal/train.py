"""Training loop and checkpointing for the BiLSTM-CRF extractor.

Documents are mini-batched (gradients summed, no padding), clipped by
global norm, and stepped with Adam.  After each epoch the model is scored
by span F1 on the development split; the best parameters are kept and
training stops once `patience` epochs pass without improvement.  The whole
run is a pure function of (data, config, seed): reruns are bit-identical.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .corpus import (
    LABEL_NAMES,
    NUM_LABELS,
    Bilou,
    Document,
    bilou_to_spans,
    project_bilou,
)
from .crf import CrfParams, TransitionMask, bilou_mask, crf_backward, viterbi
from .embed import EmbeddingTable, contextual_for_doc, lookup_sequence
from .encoder import (
    EncoderParams,
    LstmDirectionParams,
    LstmLayerParams,
    encoder_backward,
    encoder_forward,
    init_encoder,
)
from .errors import SealError
from .evaluate import corpus_span_f1
from .postprocess import repair_bilou

__all__ = [
    "ExtractorConfig",
    "ExtractorModel",
    "StaticSource",
    "ContextualSource",
    "MissingEmbeddings",
    "NonFiniteLoss",
    "CorruptCheckpoint",
    "Adam",
    "global_norm",
    "clip_by_global_norm",
    "train_extractor",
    "save_checkpoint",
    "load_checkpoint",
]


class MissingEmbeddings(SealError):
    """A document lacks contextual-embedding rows in the selected source."""


class NonFiniteLoss(SealError):
    """Training produced NaN/inf; aborted with diagnostics."""


class CorruptCheckpoint(SealError):
    """A checkpoint directory fails structural validation."""


@dataclasses.dataclass(frozen=True)
class ExtractorConfig:
    layer_output_sizes: tuple[int, ...] = (96, 48, 24)
    label_count: int = NUM_LABELS
    learning_rate: float = 1e-3
    max_epochs: int = 50
    patience: int = 5
    grad_clip_norm: float = 5.0
    batch_size: int = 8
    seed: int = 42
    mask_decoding: bool = True

    def __post_init__(self) -> None:
        if self.label_count != NUM_LABELS:
            raise ValueError(f"label_count must be {NUM_LABELS}")
        for name in (
            "learning_rate",
            "max_epochs",
            "patience",
            "grad_clip_norm",
            "batch_size",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.layer_output_sizes or any(
            w <= 0 for w in self.layer_output_sizes
        ):
            raise ValueError("layer_output_sizes must be positive")


# ---------------------------------------------------------------------------
# Embedding sources
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class StaticSource:
    """Per-token lookup in a static word-vector table."""

    table: EmbeddingTable

    @property
    def dim(self) -> int:
        return self.table.dim

    def rows(self, doc: Document) -> np.ndarray:
        return lookup_sequence(self.table, doc.tokens)

    def check(self, docs: list[Document]) -> None:
        pass  # the unk vector covers every token


@dataclasses.dataclass(frozen=True)
class ContextualSource:
    """Per-document ``<id>.cemb`` files produced by an exporter."""

    cemb_dir: Path
    dim: int

    @classmethod
    def open(cls, cemb_dir: str | Path, docs: list[Document]) -> "ContextualSource":
        """Probe the first non-empty document's file for the dimension."""
        cemb_dir = Path(cemb_dir)
        for doc in docs:
            if doc.tokens:
                source = cls(cemb_dir, 0)
                emb = source._load(doc)
                return cls(cemb_dir, emb.shape[1])
        raise MissingEmbeddings("no non-empty document to probe dimension from")

    def _load(self, doc: Document) -> np.ndarray:
        try:
            return contextual_for_doc(self.cemb_dir, doc).matrix
        except FileNotFoundError:
            raise MissingEmbeddings(
                f"no contextual embeddings for document {doc.id!r} "
                f"under {self.cemb_dir}"
            ) from None

    def rows(self, doc: Document) -> np.ndarray:
        rows = self._load(doc)
        if self.dim and rows.shape[1] != self.dim:
            raise MissingEmbeddings(
                f"{doc.id}: embedding dim {rows.shape[1]}, expected {self.dim}"
            )
        return rows

    def check(self, docs: list[Document]) -> None:
        missing = [
            doc.id
            for doc in docs
            if doc.tokens and not (self.cemb_dir / f"{doc.id}.cemb").exists()
        ]
        if missing:
            raise MissingEmbeddings(
                f"{len(missing)} document(s) without .cemb files: "
                + ", ".join(missing[:5])
            )


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class ExtractorModel:
    config: ExtractorConfig
    input_dim: int
    encoder: EncoderParams
    crf: CrfParams
    history: list[dict] = dataclasses.field(default_factory=list)
    best_epoch: int | None = None
    best_dev_f1: float | None = None

    @classmethod
    def init(cls, input_dim: int, config: ExtractorConfig) -> "ExtractorModel":
        encoder = init_encoder(
            input_dim,
            tuple(config.layer_output_sizes),
            n_labels=config.label_count,
            seed=config.seed,
            dtype=np.float32,
        )
        crf = CrfParams.zeros(config.label_count, dtype=np.float32)
        return cls(config=config, input_dim=input_dim, encoder=encoder, crf=crf)

    @property
    def mask(self) -> TransitionMask | None:
        return bilou_mask() if self.config.mask_decoding else None

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        return self.encoder.named_tensors() + [
            ("crf.transitions", self.crf.transitions),
            ("crf.start", self.crf.start),
            ("crf.stop", self.crf.stop),
        ]

    def emissions(self, xs: np.ndarray) -> np.ndarray:
        scores, _ = encoder_forward(self.encoder, xs)
        return scores

    def predict_labels(self, xs: np.ndarray) -> list[Bilou]:
        """Viterbi path (masked per config); always a valid BILOU sequence."""
        path = viterbi(self.emissions(xs), self.crf, self.mask)
        labels = [Bilou(int(k)) for k in path]
        if self.mask is None:
            labels = repair_bilou(labels)
        return labels

    def predict_spans(self, doc: Document, xs: np.ndarray):
        if not doc.tokens:
            return []
        return bilou_to_spans(doc, self.predict_labels(xs))


def _tensor_list(model: ExtractorModel) -> list[np.ndarray]:
    return [arr for _, arr in model.named_tensors()]


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


def global_norm(arrays: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(a, dtype=np.float64))) for a in arrays)))


def clip_by_global_norm(arrays: list[np.ndarray], max_norm: float) -> float:
    """Scale all arrays in place so their joint L2 norm is ≤ max_norm."""
    norm = global_norm(arrays)
    if np.isfinite(max_norm) and norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for a in arrays:
            a *= scale
    return norm


class Adam:
    """Standard Adam with bias correction (β1=0.9, β2=0.999, ε=1e-8)."""

    def __init__(
        self,
        params: list[np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _doc_gradients(
    model: ExtractorModel, xs: np.ndarray, labels: list[Bilou]
) -> tuple[float, list[np.ndarray]]:
    emissions, cache = encoder_forward(model.encoder, xs)
    loss, crf_grads = crf_backward(emissions, [int(b) for b in labels], model.crf)
    enc_grads, _ = encoder_backward(cache, crf_grads.emissions)
    flat = [arr for _, arr in enc_grads.named_tensors()] + [
        crf_grads.transitions,
        crf_grads.start,
        crf_grads.stop,
    ]
    return float(loss), flat


def _dev_f1(model: ExtractorModel, docs: list[Document], source) -> float:
    gold = {doc.id: doc.gold_spans for doc in docs}
    pred = {}
    for doc in docs:
        if not doc.tokens:
            pred[doc.id] = []
            continue
        pred[doc.id] = model.predict_spans(doc, source.rows(doc))
    return corpus_span_f1(gold, pred, typed=False).f1


def train_extractor(
    train_docs: list[Document],
    dev_docs: list[Document],
    source,
    config: ExtractorConfig,
) -> tuple[ExtractorModel, list[dict]]:
    """Train on BILOU-projected gold spans with early stopping on dev F1.

    Returns the best-scoring model (last epoch when no dev docs are given)
    and the per-epoch history ``{"epoch", "train_nll", "dev_f1"}`` where
    ``train_nll`` is the mean per-document negative log-likelihood.
    """
    usable = [doc for doc in train_docs if doc.tokens]
    if not usable:
        raise ValueError("no non-empty training documents")
    source.check(usable)
    source.check([doc for doc in dev_docs if doc.tokens])

    gold_labels = {doc.id: project_bilou(doc) for doc in usable}
    model = ExtractorModel.init(source.dim, config)
    params = _tensor_list(model)
    optimizer = Adam(params, lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)

    history: list[dict] = []
    best_state: list[np.ndarray] | None = None
    best_f1 = -1.0
    best_epoch: int | None = None
    epochs_since_best = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(usable))
        epoch_nll = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            summed: list[np.ndarray] | None = None
            for idx in batch:
                doc = usable[int(idx)]
                loss, grads = _doc_gradients(
                    model, source.rows(doc), gold_labels[doc.id]
                )
                if not np.isfinite(loss):
                    raise NonFiniteLoss(
                        f"non-finite loss {loss!r} on document {doc.id!r} "
                        f"at epoch {epoch}"
                    )
                epoch_nll += loss
                if summed is None:
                    summed = [g.astype(np.float32, copy=True) for g in grads]
                else:
                    for acc, g in zip(summed, grads):
                        acc += g
            assert summed is not None
            clip_by_global_norm(summed, config.grad_clip_norm)
            optimizer.step(params, summed)

        record = {"epoch": epoch, "train_nll": epoch_nll / len(usable)}
        if dev_docs:
            f1 = _dev_f1(model, dev_docs, source)
            record["dev_f1"] = f1
            if f1 > best_f1:
                best_f1 = f1
                best_epoch = epoch
                best_state = [arr.copy() for arr in params]
                epochs_since_best = 0
            else:
                epochs_since_best += 1
        else:
            record["dev_f1"] = None
        history.append(record)
        if dev_docs and epochs_since_best >= config.patience:
            break

    if best_state is not None:
        for arr, best in zip(params, best_state):
            arr[...] = best
        model.best_epoch = best_epoch
        model.best_dev_f1 = best_f1
    model.history = history
    return model, history


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_CKPT_FORMAT = "seal-extractor"
_CKPT_VERSION = 1


def save_checkpoint(model: ExtractorModel, path: str | Path) -> None:
    """Write ``manifest.json`` + ``params.bin`` (float32 little-endian).

    The payload is the concatenation of every tensor in the manifest's
    declared order; reload reproduces bit-identical predictions.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    named = model.named_tensors()
    manifest = {
        "format": _CKPT_FORMAT,
        "version": _CKPT_VERSION,
        "dtype": "float32",
        "byte_order": "little",
        "input_dim": model.input_dim,
        "label_names": list(LABEL_NAMES),
        "config": dataclasses.asdict(model.config),
        "tensors": [
            {"name": name, "shape": list(arr.shape)} for name, arr in named
        ],
        "history": model.history,
        "best_epoch": model.best_epoch,
        "best_dev_f1": model.best_dev_f1,
    }
    payload = b"".join(
        np.ascontiguousarray(arr, dtype="<f4").tobytes() for _, arr in named
    )
    (path / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (path / "params.bin").write_bytes(payload)


def _rebuild_model(
    manifest: dict, tensors: dict[str, np.ndarray]
) -> ExtractorModel:
    config = ExtractorConfig(
        layer_output_sizes=tuple(manifest["config"]["layer_output_sizes"]),
        label_count=int(manifest["config"]["label_count"]),
        learning_rate=float(manifest["config"]["learning_rate"]),
        max_epochs=int(manifest["config"]["max_epochs"]),
        patience=int(manifest["config"]["patience"]),
        grad_clip_norm=float(manifest["config"]["grad_clip_norm"]),
        batch_size=int(manifest["config"]["batch_size"]),
        seed=int(manifest["config"]["seed"]),
        mask_decoding=bool(manifest["config"]["mask_decoding"]),
    )
    layers = []
    idx = 0
    while f"lstm{idx}.fwd.w_in" in tensors:
        directions = []
        for dname in ("fwd", "bwd"):
            directions.append(
                LstmDirectionParams(
                    tensors[f"lstm{idx}.{dname}.w_in"],
                    tensors[f"lstm{idx}.{dname}.w_rec"],
                    tensors[f"lstm{idx}.{dname}.bias"],
                )
            )
        layers.append(LstmLayerParams(*directions))
        idx += 1
    if not layers:
        raise CorruptCheckpoint("no LSTM layer tensors in manifest")
    for key in ("proj_w", "proj_b", "crf.transitions", "crf.start", "crf.stop"):
        if key not in tensors:
            raise CorruptCheckpoint(f"missing tensor {key!r}")
    encoder = EncoderParams(layers, tensors["proj_w"], tensors["proj_b"])
    crf = CrfParams(
        tensors["crf.transitions"], tensors["crf.start"], tensors["crf.stop"]
    )
    model = ExtractorModel(
        config=config,
        input_dim=int(manifest["input_dim"]),
        encoder=encoder,
        crf=crf,
        history=list(manifest.get("history") or []),
        best_epoch=manifest.get("best_epoch"),
        best_dev_f1=manifest.get("best_dev_f1"),
    )
    if encoder.input_size != model.input_dim:
        raise CorruptCheckpoint(
            f"manifest input_dim {model.input_dim} != tensor shape "
            f"{encoder.input_size}"
        )
    return model


def load_checkpoint(path: str | Path) -> ExtractorModel:
    """Inverse of :func:`save_checkpoint`; raises :class:`CorruptCheckpoint`."""
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"cannot read manifest: {exc}") from exc
    if manifest.get("format") != _CKPT_FORMAT:
        raise CorruptCheckpoint(f"unexpected format {manifest.get('format')!r}")
    if manifest.get("version") != _CKPT_VERSION:
        raise CorruptCheckpoint(f"unsupported version {manifest.get('version')!r}")
    if manifest.get("dtype") != "float32" or manifest.get("byte_order") != "little":
        raise CorruptCheckpoint("unsupported dtype/byte order")
    try:
        declared = [(t["name"], tuple(int(s) for s in t["shape"])) for t in manifest["tensors"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpoint(f"malformed tensor list: {exc}") from exc

    blob = (path / "params.bin").read_bytes()
    expected = sum(int(np.prod(shape, dtype=np.int64)) for _, shape in declared) * 4
    if len(blob) != expected:
        raise CorruptCheckpoint(
            f"params.bin holds {len(blob)} bytes, manifest declares {expected}"
        )
    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in declared:
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        offset += count * 4
        tensors[name] = arr.reshape(shape).copy()
    try:
        return _rebuild_model(manifest, tensors)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpoint(f"malformed manifest: {exc}") from exc
