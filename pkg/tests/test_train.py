"""Tests for the training loop, Adam, and checkpointing."""

from __future__ import annotations

import json

import numpy as np
import pytest

from seal.corpus import Document
from seal.embed import ContextualEmbeddings, EmbeddingTable, write_contextual
from seal.toydata import generate_toy_corpus
from seal.train import (
    Adam,
    ContextualSource,
    CorruptCheckpoint,
    ExtractorConfig,
    ExtractorModel,
    MissingEmbeddings,
    NonFiniteLoss,
    StaticSource,
    clip_by_global_norm,
    global_norm,
    load_checkpoint,
    save_checkpoint,
    train_extractor,
)


def small_config(**kw) -> ExtractorConfig:
    base = dict(
        layer_output_sizes=(8, 4),
        learning_rate=1e-2,
        max_epochs=5,
        patience=5,
        batch_size=4,
        seed=42,
    )
    base.update(kw)
    return ExtractorConfig(**base)


# ---------------------------------------------------------------------------
# Config validation
# ---------------------------------------------------------------------------


class TestExtractorConfig:
    def test_defaults_match_paper_architecture(self):
        config = ExtractorConfig()
        assert config.layer_output_sizes == (96, 48, 24)
        assert config.label_count == 5

    @pytest.mark.parametrize(
        "kw",
        [
            {"learning_rate": 0.0},
            {"max_epochs": 0},
            {"patience": 0},
            {"grad_clip_norm": 0.0},
            {"batch_size": 0},
            {"label_count": 4},
            {"layer_output_sizes": ()},
            {"layer_output_sizes": (8, 0)},
        ],
    )
    def test_invalid_values_rejected(self, kw):
        with pytest.raises(ValueError):
            small_config(**kw)

    def test_infinite_clip_norm_allowed(self):
        assert small_config(grad_clip_norm=float("inf")).grad_clip_norm == float("inf")


# ---------------------------------------------------------------------------
# Optimizer pieces
# ---------------------------------------------------------------------------


class TestGlobalNorm:
    def test_known_value(self):
        arrays = [np.array([3.0]), np.array([4.0])]
        assert global_norm(arrays) == pytest.approx(5.0)

    def test_clip_scales_to_max(self):
        arrays = [np.array([3.0]), np.array([4.0])]
        returned = clip_by_global_norm(arrays, 1.0)
        assert returned == pytest.approx(5.0)  # pre-clip norm
        assert global_norm(arrays) == pytest.approx(1.0)
        assert arrays[0][0] == pytest.approx(0.6)

    def test_no_clip_below_threshold(self):
        arrays = [np.array([0.3]), np.array([0.4])]
        clip_by_global_norm(arrays, 1.0)
        assert arrays[0][0] == 0.3 and arrays[1][0] == 0.4

    def test_infinite_threshold_never_clips(self):
        arrays = [np.array([300.0])]
        clip_by_global_norm(arrays, float("inf"))
        assert arrays[0][0] == 300.0


class TestAdam:
    def test_single_step_matches_hand_formula(self):
        p = np.array([1.0, -2.0])
        g = np.array([0.5, 0.25])
        opt = Adam([p], lr=0.1)
        opt.step([p], [g.copy()])
        # t=1: m̂ = g, v̂ = g², so the update is lr·g/(|g|+ε) ≈ ±lr
        expected = np.array([1.0, -2.0]) - 0.1 * g / (np.abs(g) + 1e-8)
        np.testing.assert_allclose(p, expected, rtol=1e-12)

    def test_two_steps_match_explicit_recurrence(self):
        rng = np.random.default_rng(0)
        p = rng.normal(size=4)
        grads = [rng.normal(size=4), rng.normal(size=4)]
        p_opt = p.copy()
        opt = Adam([p_opt], lr=0.05)
        m = np.zeros(4)
        v = np.zeros(4)
        p_ref = p.copy()
        for t, g in enumerate(grads, start=1):
            opt.step([p_opt], [g.copy()])
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            p_ref -= 0.05 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        np.testing.assert_allclose(p_opt, p_ref, rtol=1e-12)

    def test_update_proportional_to_learning_rate(self):
        rng = np.random.default_rng(1)
        p0 = rng.normal(size=6)
        g = rng.normal(size=6)
        deltas = []
        for lr in (1e-3, 2e-3):
            p = p0.copy()
            Adam([p], lr=lr).step([p], [g.copy()])
            deltas.append(p - p0)
        np.testing.assert_allclose(deltas[1], 2.0 * deltas[0], rtol=1e-9)

    def test_zero_learning_rate_is_identity(self):
        rng = np.random.default_rng(2)
        docs, table = generate_toy_corpus(6, seed=5, dim=6)
        config = small_config(learning_rate=1e-30, max_epochs=1,
                              grad_clip_norm=float("inf"))
        model, _ = train_extractor(docs, [], StaticSource(table), config)
        fresh = ExtractorModel.init(table.dim, config)
        for (_, a), (_, b) in zip(model.named_tensors(), fresh.named_tensors()):
            np.testing.assert_allclose(a, b, atol=1e-22)


# ---------------------------------------------------------------------------
# Training behavior
# ---------------------------------------------------------------------------


class TestTrainExtractor:
    def test_overfits_single_document(self):
        docs, table = generate_toy_corpus(1, seed=7, dim=8)
        config = small_config(
            layer_output_sizes=(16, 8),
            learning_rate=2e-2,
            max_epochs=200,
            batch_size=1,
        )
        model, history = train_extractor(docs, [], StaticSource(table), config)
        nlls = [h["train_nll"] for h in history]
        assert nlls[-1] < 0.1
        for a, b in zip(nlls[3:], nlls[4:]):
            assert b < a  # monotone decrease once settled

    def test_deterministic_reruns(self):
        docs, table = generate_toy_corpus(10, seed=9, dim=6)
        train, dev = docs[:8], docs[8:]
        config = small_config(max_epochs=3)
        m1, h1 = train_extractor(train, dev, StaticSource(table), config)
        m2, h2 = train_extractor(train, dev, StaticSource(table), config)
        assert h1 == h2
        for (n1, a), (n2, b) in zip(m1.named_tensors(), m2.named_tensors()):
            assert n1 == n2
            np.testing.assert_array_equal(a, b)

    def test_early_stopping_and_best_selection(self):
        docs, table = generate_toy_corpus(40, seed=11, dim=10)
        train, dev = docs[:32], docs[32:]
        config = ExtractorConfig(
            layer_output_sizes=(16, 8),
            learning_rate=1e-2,
            max_epochs=40,
            patience=3,
            batch_size=8,
            seed=42,
        )
        model, history = train_extractor(train, dev, StaticSource(table), config)
        f1s = [h["dev_f1"] for h in history]
        assert model.best_dev_f1 == max(f1s)
        assert f1s[model.best_epoch - 1] == model.best_dev_f1
        if len(history) < config.max_epochs:  # stopped early
            assert f1s[-config.patience :] == [f1s[-1]] * config.patience or all(
                f <= model.best_dev_f1 for f in f1s[model.best_epoch :]
            )

    def test_learns_sentinel_task_quickly(self):
        docs, table = generate_toy_corpus(80, seed=3, dim=12)
        train, dev = docs[:60], docs[60:]
        config = ExtractorConfig(
            layer_output_sizes=(16, 8),
            learning_rate=1e-2,
            max_epochs=20,
            patience=20,
            batch_size=8,
            seed=42,
        )
        model, history = train_extractor(train, dev, StaticSource(table), config)
        assert max(h["dev_f1"] for h in history) >= 0.9

    def test_non_finite_loss_diagnostics(self):
        docs, table = generate_toy_corpus(3, seed=13, dim=5)
        bad_unk = np.full(5, np.nan, dtype=np.float32)
        bad_table = EmbeddingTable(dim=5, vectors={}, unk=bad_unk)
        with pytest.raises(NonFiniteLoss, match="epoch 1"):
            train_extractor(docs, [], StaticSource(bad_table), small_config())

    def test_empty_training_set_rejected(self):
        _, table = generate_toy_corpus(1, seed=0, dim=4)
        with pytest.raises(ValueError, match="no non-empty"):
            train_extractor([], [], StaticSource(table), small_config())


class TestContextualSource:
    def _write_cembs(self, tmp_path, docs, dim=6, skip=()):
        rng = np.random.default_rng(0)
        for doc in docs:
            if doc.id in skip:
                continue
            matrix = rng.normal(size=(len(doc.tokens), dim)).astype(np.float32)
            write_contextual(
                ContextualEmbeddings(doc_id=doc.id, dim=dim, matrix=matrix),
                tmp_path / f"{doc.id}.cemb",
            )

    def test_training_from_cemb_files(self, tmp_path):
        docs, _ = generate_toy_corpus(6, seed=17, dim=4)
        self._write_cembs(tmp_path, docs, dim=6)
        source = ContextualSource.open(tmp_path, docs)
        assert source.dim == 6
        model, history = train_extractor(
            docs[:4], docs[4:], source, small_config(max_epochs=2)
        )
        assert len(history) == 2

    def test_missing_file_detected_upfront(self, tmp_path):
        docs, _ = generate_toy_corpus(4, seed=19, dim=4)
        self._write_cembs(tmp_path, docs, dim=6, skip={docs[1].id})
        source = ContextualSource(tmp_path, 6)
        with pytest.raises(MissingEmbeddings, match=docs[1].id):
            source.check(docs)

    def test_missing_file_on_load(self, tmp_path):
        docs, _ = generate_toy_corpus(2, seed=21, dim=4)
        source = ContextualSource(tmp_path, 6)
        with pytest.raises(MissingEmbeddings):
            source.rows(docs[0])

    def test_dim_disagreement_rejected(self, tmp_path):
        docs, _ = generate_toy_corpus(2, seed=23, dim=4)
        self._write_cembs(tmp_path, docs, dim=6)
        source = ContextualSource(tmp_path, 9)
        with pytest.raises(MissingEmbeddings, match="dim"):
            source.rows(docs[0])


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


class TestCheckpoints:
    def _random_model(self, seed=0) -> ExtractorModel:
        config = small_config(seed=seed)
        return ExtractorModel.init(7, config)

    def test_round_trip_bit_exact_predictions(self, tmp_path):
        model = self._random_model()
        save_checkpoint(model, tmp_path / "ckpt")
        loaded = load_checkpoint(tmp_path / "ckpt")
        assert loaded.config == model.config
        assert loaded.input_dim == model.input_dim
        rng = np.random.default_rng(3)
        for _ in range(10):
            xs = rng.normal(size=(int(rng.integers(1, 12)), 7)).astype(np.float32)
            np.testing.assert_array_equal(
                model.predict_labels(xs), loaded.predict_labels(xs)
            )
            np.testing.assert_array_equal(model.emissions(xs), loaded.emissions(xs))

    def test_round_trip_preserves_history(self, tmp_path):
        docs, table = generate_toy_corpus(6, seed=25, dim=5)
        model, history = train_extractor(
            docs[:4], docs[4:], StaticSource(table), small_config(max_epochs=2)
        )
        save_checkpoint(model, tmp_path / "ckpt")
        loaded = load_checkpoint(tmp_path / "ckpt")
        assert loaded.history == history
        assert loaded.best_epoch == model.best_epoch
        assert loaded.best_dev_f1 == model.best_dev_f1

    def test_double_save_is_byte_identical(self, tmp_path):
        model = self._random_model()
        save_checkpoint(model, tmp_path / "a")
        loaded = load_checkpoint(tmp_path / "a")
        save_checkpoint(loaded, tmp_path / "b")
        assert (tmp_path / "a/params.bin").read_bytes() == (
            tmp_path / "b/params.bin"
        ).read_bytes()
        assert (tmp_path / "a/manifest.json").read_text() == (
            tmp_path / "b/manifest.json"
        ).read_text()

    def test_truncated_payload_rejected(self, tmp_path):
        model = self._random_model()
        save_checkpoint(model, tmp_path / "ckpt")
        blob = (tmp_path / "ckpt/params.bin").read_bytes()
        (tmp_path / "ckpt/params.bin").write_bytes(blob[:-4])
        with pytest.raises(CorruptCheckpoint, match="bytes"):
            load_checkpoint(tmp_path / "ckpt")

    def test_shape_payload_mismatch_rejected(self, tmp_path):
        model = self._random_model()
        save_checkpoint(model, tmp_path / "ckpt")
        manifest = json.loads((tmp_path / "ckpt/manifest.json").read_text())
        manifest["tensors"][0]["shape"][0] += 1
        (tmp_path / "ckpt/manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(CorruptCheckpoint):
            load_checkpoint(tmp_path / "ckpt")

    def test_bad_format_rejected(self, tmp_path):
        model = self._random_model()
        save_checkpoint(model, tmp_path / "ckpt")
        manifest = (tmp_path / "ckpt/manifest.json").read_text()
        (tmp_path / "ckpt/manifest.json").write_text(
            manifest.replace("seal-extractor", "something-else")
        )
        with pytest.raises(CorruptCheckpoint, match="format"):
            load_checkpoint(tmp_path / "ckpt")

    def test_missing_directory_rejected(self, tmp_path):
        with pytest.raises(CorruptCheckpoint):
            load_checkpoint(tmp_path / "nothing")
