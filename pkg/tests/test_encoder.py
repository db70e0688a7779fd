import math

import numpy as np
import pytest

from fdutil import central_difference, max_rel_err
from seal.encoder import (
    CacheMismatch,
    EmptySequence,
    EncoderParams,
    LstmDirectionParams,
    LstmLayerParams,
    ShapeMismatch,
    bilstm_forward,
    encoder_backward,
    encoder_forward,
    init_encoder,
    lstm_step,
    project,
    zeros_like_params,
)

SMALL_WIDTHS = (8, 6, 4)  # 3-layer stack kept tiny for finite differences


def small_encoder(d_in=3, seed=0, dtype=np.float64):
    return init_encoder(d_in, SMALL_WIDTHS, seed=seed, dtype=dtype)


class TestLstmStep:
    def test_zero_params_zero_hidden(self):
        params = LstmDirectionParams(
            np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8)
        )
        h, c = lstm_step(params, np.array([1.0, -2.0, 3.0]), np.zeros(2), np.zeros(2))
        # gates sigma(0) = 0.5, candidate tanh(0) = 0, so cell and hidden stay 0
        np.testing.assert_array_equal(c, np.zeros(2))
        np.testing.assert_array_equal(h, np.zeros(2))

    def test_scalar_hand_recurrence(self):
        # h = 1, d_in = 1; recomputed with plain math.* scalar formulas
        w_in = np.array([[0.5], [0.25], [1.0], [2.0]])
        w_rec = np.array([[0.1], [0.2], [0.3], [0.4]])
        bias = np.array([0.1, 0.2, 0.3, 0.4])
        params = LstmDirectionParams(w_in, w_rec, bias)

        def sigmoid(z):
            return 1.0 / (1.0 + math.exp(-z))

        h_ref, c_ref = 0.0, 0.0
        xs = [0.7, -0.3]
        for x in xs:
            a_i = 0.5 * x + 0.1 * h_ref + 0.1
            a_f = 0.25 * x + 0.2 * h_ref + 0.2
            a_g = 1.0 * x + 0.3 * h_ref + 0.3
            a_o = 2.0 * x + 0.4 * h_ref + 0.4
            c_ref = sigmoid(a_f) * c_ref + sigmoid(a_i) * math.tanh(a_g)
            h_ref = sigmoid(a_o) * math.tanh(c_ref)

        h = np.zeros(1)
        c = np.zeros(1)
        for x in xs:
            h, c = lstm_step(params, np.array([x]), h, c)
        assert h[0] == pytest.approx(h_ref, abs=1e-12)
        assert c[0] == pytest.approx(c_ref, abs=1e-12)

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        params = small_encoder(d_in=3, seed=1)
        xs = rng.standard_normal((1, 3))
        direction = np.asarray(rng.standard_normal(4))
        sense = rng.standard_normal((1, 5))

        def loss():
            emissions, _ = encoder_forward(params, xs)
            return float((emissions * sense).sum())

        emissions, cache = encoder_forward(params, xs)
        _, d_xs = encoder_backward(cache, sense)
        (numeric,) = central_difference(loss, [xs], eps=1e-6)
        assert max_rel_err(d_xs, numeric) < 1e-4

    def test_shape_mismatch(self):
        params = LstmDirectionParams(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8))
        with pytest.raises(ShapeMismatch):
            lstm_step(params, np.zeros(4), np.zeros(2), np.zeros(2))


class TestBilstmForward:
    def test_zero_params_zero_output_paper_widths(self):
        params = init_encoder(7, dtype=np.float64)
        params = zeros_like_params(params)
        out, _ = bilstm_forward(params, np.random.default_rng(0).standard_normal((6, 7)))
        assert out.shape == (6, 24)
        np.testing.assert_array_equal(out, np.zeros((6, 24)))

    def test_single_step_shape(self):
        params = init_encoder(7, seed=3, dtype=np.float64)
        out, _ = bilstm_forward(params, np.ones((1, 7)))
        assert out.shape == (1, 24)

    def test_reversal_swaps_direction_halves(self):
        # tie both directions of a single layer to the same weights
        rng = np.random.default_rng(4)
        hidden = 3
        shared = LstmDirectionParams(
            rng.standard_normal((4 * hidden, 2)),
            rng.standard_normal((4 * hidden, hidden)),
            rng.standard_normal(4 * hidden),
        )
        params = EncoderParams(
            [LstmLayerParams(shared, shared)],
            np.zeros((5, 2 * hidden)),
            np.zeros(5),
        )
        xs = rng.standard_normal((5, 2))
        out, _ = bilstm_forward(params, xs)
        out_rev, _ = bilstm_forward(params, xs[::-1])
        flipped = out_rev[::-1]
        np.testing.assert_allclose(flipped[:, :hidden], out[:, hidden:], atol=1e-12)
        np.testing.assert_allclose(flipped[:, hidden:], out[:, :hidden], atol=1e-12)

    def test_deterministic(self):
        params = small_encoder(seed=5)
        xs = np.random.default_rng(6).standard_normal((4, 3))
        a, _ = bilstm_forward(params, xs)
        b, _ = bilstm_forward(params, xs)
        assert a.tobytes() == b.tobytes()

    def test_finite_outputs_for_large_inputs(self):
        params = small_encoder(seed=7)
        out, _ = bilstm_forward(params, 1e6 * np.ones((3, 3)))
        assert np.isfinite(out).all()

    def test_empty_sequence(self):
        with pytest.raises(EmptySequence):
            bilstm_forward(small_encoder(), np.zeros((0, 3)))

    def test_wrong_input_dim(self):
        with pytest.raises(ShapeMismatch):
            bilstm_forward(small_encoder(d_in=3), np.zeros((2, 4)))


class TestProject:
    def test_bias_only(self):
        hidden = np.random.default_rng(8).standard_normal((4, 6))
        bias = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        out = project(hidden, np.zeros((5, 6)), bias)
        np.testing.assert_array_equal(out, np.tile(bias, (4, 1)))

    def test_identity_like_copies_columns(self):
        hidden = np.random.default_rng(9).standard_normal((3, 6))
        w = np.zeros((5, 6))
        w[:, :5] = np.eye(5)
        np.testing.assert_allclose(project(hidden, w, np.zeros(5)), hidden[:, :5])

    def test_projection_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        params = small_encoder(seed=11)
        xs = rng.standard_normal((3, 3))
        sense = rng.standard_normal((3, 5))

        def loss():
            emissions, _ = encoder_forward(params, xs)
            return float((emissions * sense).sum())

        _, cache = encoder_forward(params, xs)
        grads, _ = encoder_backward(cache, sense)
        numeric = central_difference(loss, [params.proj_w, params.proj_b], eps=1e-6)
        assert max_rel_err(grads.proj_w, numeric[0]) < 1e-4
        assert max_rel_err(grads.proj_b, numeric[1]) < 1e-4


class TestEncoderBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        params = small_encoder(seed=12)
        _, cache = encoder_forward(params, np.ones((4, 3)))
        grads, d_xs = encoder_backward(cache, np.zeros((4, 5)))
        for _, tensor in grads.named_tensors():
            np.testing.assert_array_equal(tensor, np.zeros_like(tensor))
        np.testing.assert_array_equal(d_xs, np.zeros((4, 3)))

    def test_all_tensors_match_finite_differences(self):
        rng = np.random.default_rng(13)
        params = small_encoder(seed=14)
        xs = rng.standard_normal((4, 3))
        sense = rng.standard_normal((4, 5))

        def loss():
            emissions, _ = encoder_forward(params, xs)
            return float((emissions * sense).sum())

        _, cache = encoder_forward(params, xs)
        grads, _ = encoder_backward(cache, sense)
        names = [name for name, _ in params.named_tensors()]
        arrays = [tensor for _, tensor in params.named_tensors()]
        numeric = central_difference(loss, arrays, eps=1e-5)
        analytic = dict(grads.named_tensors())
        for name, num in zip(names, numeric):
            assert max_rel_err(analytic[name], num) < 1e-4, name

    def test_gradient_additivity_over_documents(self):
        rng = np.random.default_rng(15)
        params = small_encoder(seed=16)
        xs_a = rng.standard_normal((3, 3))
        xs_b = rng.standard_normal((5, 3))
        sense_a = rng.standard_normal((3, 5))
        sense_b = rng.standard_normal((5, 5))

        _, cache_a = encoder_forward(params, xs_a)
        grads_a, _ = encoder_backward(cache_a, sense_a)
        _, cache_b = encoder_forward(params, xs_b)
        grads_b, _ = encoder_backward(cache_b, sense_b)

        def batch_loss():
            em_a, _ = encoder_forward(params, xs_a)
            em_b, _ = encoder_forward(params, xs_b)
            return float((em_a * sense_a).sum() + (em_b * sense_b).sum())

        arrays = [tensor for _, tensor in params.named_tensors()]
        numeric = central_difference(batch_loss, arrays, eps=1e-5)
        summed = {
            name: tensor + dict(grads_b.named_tensors())[name]
            for name, tensor in grads_a.named_tensors()
        }
        for (name, _), num in zip(params.named_tensors(), numeric):
            assert max_rel_err(summed[name], num) < 1e-4, name

    def test_cache_mismatch(self):
        params = small_encoder(seed=17)
        _, cache = encoder_forward(params, np.ones((4, 3)))
        with pytest.raises(CacheMismatch):
            encoder_backward(cache, np.zeros((3, 5)))
