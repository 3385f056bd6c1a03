"""Numerical core: primitives, encoder, BiLSTM, Adam, gradient checking."""
import math

import numpy as np
import pytest

from breakscore.exceptions import DataError
from breakscore.nn import (
    AdamState,
    BiLstmConfig,
    EncoderConfig,
    adam_step,
    batched_cross_entropy,
    bilstm_backward,
    bilstm_forward,
    encoder_backward,
    encoder_forward,
    gelu,
    grad_check,
    init_bilstm_params,
    init_encoder_params,
    layer_norm,
    softmax,
    softmax_cross_entropy,
    trunc_normal,
)
from breakscore.rngs import make_rng


class TestPrimitives:
    def test_softmax_rows_sum_to_one(self):
        rng = make_rng(0, "t")
        x = rng.normal(size=(4, 7))
        p = softmax(x)
        np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)
        assert (p > 0).all()

    def test_softmax_shift_invariant(self):
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(softmax(x), softmax(x + 1000.0), atol=1e-12)

    def test_layer_norm_statistics(self):
        rng = make_rng(1, "t")
        x = rng.normal(size=(3, 5, 16)) * 4 + 2
        y, _ = layer_norm(x, np.ones(16), np.zeros(16))
        np.testing.assert_allclose(y.mean(axis=-1), 0.0, atol=1e-10)
        np.testing.assert_allclose(y.std(axis=-1), 1.0, atol=1e-4)

    def test_gelu_reference_values(self):
        # tanh approximation of x * Phi(x); spot values straight from the formula.
        for x in (-2.0, -0.5, 0.0, 0.5, 2.0):
            u = math.sqrt(2 / math.pi) * (x + 0.044715 * x**3)
            want = 0.5 * x * (1 + math.tanh(u))
            got, _ = gelu(np.array([x]))
            assert got[0] == pytest.approx(want, abs=1e-12)

    def test_cross_entropy_uniform_logits(self):
        loss, grad = softmax_cross_entropy(np.zeros(3), 1)
        assert loss == pytest.approx(math.log(3))
        np.testing.assert_allclose(grad, [1 / 3, -2 / 3, 1 / 3], atol=1e-12)

    def test_batched_cross_entropy_matches_single(self):
        rng = make_rng(2, "t")
        logits = rng.normal(size=(6, 3))
        targets = rng.integers(0, 3, size=6)
        loss, dl = batched_cross_entropy(logits, targets)
        singles = [softmax_cross_entropy(logits[i], int(targets[i])) for i in range(6)]
        assert loss == pytest.approx(np.mean([s for s, _ in singles]))
        np.testing.assert_allclose(dl, np.stack([g for _, g in singles]) / 6, atol=1e-12)

    def test_batched_cross_entropy_weights_select_rows(self):
        logits = np.array([[5.0, 0.0], [0.0, 5.0]])
        w = np.array([1.0, 0.0])
        loss, dl = batched_cross_entropy(logits, [0, 0], weights=w)
        only_first, _ = softmax_cross_entropy(logits[0], 0)
        assert loss == pytest.approx(only_first)
        np.testing.assert_allclose(dl[1], 0.0, atol=1e-12)

    def test_trunc_normal_clipped(self):
        x = trunc_normal((10000,), make_rng(3, "t"), std=0.02)
        assert x.dtype == np.float32
        assert np.abs(x).max() <= 0.04 + 1e-9


def tiny_encoder(dropout=0.0):
    cfg = EncoderConfig(
        vocab_size=12, d_model=8, n_heads=2, n_layers=2, ffn_dim=16,
        max_len=10, dropout_prob=dropout,
    )
    params = init_encoder_params(cfg, make_rng(0, "init"))
    return cfg, params


class TestEncoder:
    def test_shapes_and_determinism(self):
        cfg, params = tiny_encoder()
        ids = np.array([[2, 8, 4, 9, 0], [2, 10, 5, 0, 0]])
        mask = ids != 0
        h1, _ = encoder_forward(ids, mask, params, cfg)
        h2, _ = encoder_forward(ids, mask, params, cfg)
        assert h1.shape == (2, 5, 8)
        np.testing.assert_array_equal(h1, h2)

    def test_attention_rows_sum_to_one(self):
        cfg, params = tiny_encoder()
        ids = np.array([[2, 8, 4, 9, 0]])
        _, cache = encoder_forward(ids, ids != 0, params, cfg)
        for probs in cache["attn_probs"]:
            np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-5)

    def test_padding_cannot_influence_real_positions(self):
        cfg, params = tiny_encoder()
        a = np.array([[2, 8, 4, 9, 0, 0]])
        b = np.array([[2, 8, 4, 9, 7, 11]])
        mask = np.array([[True, True, True, True, False, False]])
        ha, _ = encoder_forward(a, mask, params, cfg)
        hb, _ = encoder_forward(b, mask, params, cfg)
        np.testing.assert_allclose(ha[0, :4], hb[0, :4], atol=1e-6)

    def test_dtype_preserved(self):
        cfg, params = tiny_encoder()
        ids = np.array([[2, 8, 4]])
        h32, _ = encoder_forward(ids, ids != 0, params, cfg)
        assert h32.dtype == np.float32
        p64 = {k: v.astype(np.float64) for k, v in params.items()}
        h64, _ = encoder_forward(ids, ids != 0, p64, cfg)
        assert h64.dtype == np.float64

    def test_dropout_needs_rng_in_train_mode(self):
        cfg, params = tiny_encoder(dropout=0.1)
        ids = np.array([[2, 8]])
        with pytest.raises(DataError):
            encoder_forward(ids, ids != 0, params, cfg, train=True)

    def test_out_of_vocab_id(self):
        cfg, params = tiny_encoder()
        with pytest.raises(DataError):
            encoder_forward(np.array([[2, 99]]), np.ones((1, 2), bool), params, cfg)

    def test_gradients_against_finite_differences(self):
        cfg, params = tiny_encoder()
        ids = np.array([[2, 8, 4, 9], [2, 10, 0, 0]])
        mask = ids != 0
        w = make_rng(1, "probe").normal(size=(2, 4, 8))

        def loss_fn(p):
            h, cache = encoder_forward(ids, mask, p, cfg)
            loss = float((h * w.astype(h.dtype) * mask[..., None]).sum())
            grads = encoder_backward((w * mask[..., None]).astype(h.dtype), cache)
            return loss, grads

        assert grad_check(loss_fn, params, n_coords=40) < 1e-4

    def test_broken_gradient_is_detected(self):
        # Sensitivity check: a corrupted backward must trip the checker.
        cfg, params = tiny_encoder()
        ids = np.array([[2, 8, 4, 9]])
        mask = ids != 0

        def broken_fn(p):
            h, cache = encoder_forward(ids, mask, p, cfg)
            grads = encoder_backward(np.ones_like(h), cache)
            grads["lnf_b"] = grads["lnf_b"] * 3.0
            return float(h.sum()), grads

        assert grad_check(broken_fn, params, n_coords=40) > 1e-1


def tiny_bilstm():
    cfg = BiLstmConfig(vocab_size=12, embed_dim=6, hidden_size=5)
    params = init_bilstm_params(cfg, make_rng(0, "init"))
    return cfg, params


class TestBiLstm:
    def test_shapes(self):
        cfg, params = tiny_bilstm()
        ids = np.array([[2, 8, 4, 0], [2, 9, 0, 0]])
        h, _ = bilstm_forward(ids, ids != 0, params, cfg)
        assert h.shape == (2, 4, 10)

    def test_padded_positions_do_not_leak(self):
        cfg, params = tiny_bilstm()
        a = np.array([[2, 8, 4, 0, 0]])
        b = np.array([[2, 8, 4, 7, 11]])
        mask = np.array([[True, True, True, False, False]])
        ha, _ = bilstm_forward(a, mask, params, cfg)
        hb, _ = bilstm_forward(b, mask, params, cfg)
        np.testing.assert_allclose(ha[0, :3], hb[0, :3], atol=1e-7)

    def test_direction_swap_under_reversal(self):
        # Reversing an unpadded sequence swaps and reverses the two halves.
        cfg, params = tiny_bilstm()
        # Use identical fw/bw weights so directions are comparable.
        for k in ("wx", "wh", "b"):
            params[f"bw_{k}"] = params[f"fw_{k}"].copy()
        ids = np.array([[2, 8, 4, 9, 5]])
        mask = np.ones_like(ids, dtype=bool)
        h_fwd, _ = bilstm_forward(ids, mask, params, cfg)
        h_rev, _ = bilstm_forward(ids[:, ::-1].copy(), mask, params, cfg)
        hid = cfg.hidden_size
        np.testing.assert_allclose(
            h_fwd[0, :, :hid], h_rev[0, ::-1, hid:], atol=1e-6
        )
        np.testing.assert_allclose(
            h_fwd[0, :, hid:], h_rev[0, ::-1, :hid], atol=1e-6
        )

    def test_gradients_against_finite_differences(self):
        cfg, params = tiny_bilstm()
        ids = np.array([[2, 8, 4, 9], [2, 10, 0, 0]])
        mask = ids != 0
        w = make_rng(2, "probe").normal(size=(2, 4, 10))

        def loss_fn(p):
            h, cache = bilstm_forward(ids, mask, p, cfg)
            loss = float((h * w.astype(h.dtype) * mask[..., None]).sum())
            grads = bilstm_backward((w * mask[..., None]).astype(h.dtype), p, cache)
            return loss, grads

        assert grad_check(loss_fn, params, n_coords=40) < 1e-4


class TestAdam:
    def test_matches_reference_implementation(self):
        # Oracle: textbook bias-corrected Adam on a quadratic, 5 steps.
        def reference(theta0, grads_seq, lr, b1=0.9, b2=0.999, eps=1e-8):
            theta = theta0.copy()
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
            for t, g in enumerate(grads_seq, start=1):
                m = b1 * m + (1 - b1) * g
                v = b2 * v + (1 - b2) * g * g
                mhat = m / (1 - b1**t)
                vhat = v / (1 - b2**t)
                theta = theta - lr * mhat / (np.sqrt(vhat) + eps)
            return theta

        theta = np.array([1.0, -2.0, 0.5])
        grads_seq = [2.0 * (theta + t) for t in range(5)]  # arbitrary fixed grads
        want = reference(theta, grads_seq, lr=0.01)

        params = {"w": theta.copy()}
        state = AdamState()
        for g in grads_seq:
            adam_step(params, {"w": g.copy()}, state, lr=0.01)
        np.testing.assert_allclose(params["w"], want, atol=1e-6)

    def test_descends_a_quadratic(self):
        params = {"w": np.array([5.0, -3.0])}
        state = AdamState()
        for _ in range(2000):
            adam_step(params, {"w": 2.0 * params["w"]}, state, lr=0.01)
        assert np.abs(params["w"]).max() < 1e-2

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DataError):
            adam_step({"w": np.zeros(3)}, {"w": np.zeros(4)}, AdamState())

    def test_missing_gradient_rejected(self):
        with pytest.raises(DataError):
            adam_step({"w": np.zeros(3)}, {}, AdamState())
