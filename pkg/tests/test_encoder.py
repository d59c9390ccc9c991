"""Encoder primitives and forward pass: rearrangement oracles, attention
closed forms, residual isolation, and deterministic weight construction."""

import dataclasses
import math

import numpy as np
import pytest

import camtraj.encoder as enc
from camtraj.encoder import (
    EncoderConfig,
    MultiScaleCameraFeatures,
    build_encoder_weights,
    conv2d,
    encoder_forward,
    fuse,
    layer_norm,
    multi_head_self_attention,
    pixel_shuffle,
    pixel_unshuffle,
    res_block,
    shape_schedule,
    silu,
    sinusoidal_posemb,
    softmax,
    temporal_attention_block,
)
from camtraj.errors import IndivisibleDims, ShapeMismatch

SMALL = EncoderConfig(unshuffle_factor=2, scale_channels=(8, 16, 16, 16),
                      heads=2, mlp_ratio=2, seed=7)


def rand(rng, shape):
    return rng.standard_normal(shape).astype(np.float32)


class TestPixelUnshuffle:
    def test_two_by_two_example(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        out = pixel_unshuffle(x.reshape(1, 1, 1, 2, 2), 2)
        assert out.shape == (1, 1, 4, 1, 1)
        np.testing.assert_array_equal(out.ravel(), [1.0, 2.0, 3.0, 4.0])

    def test_index_arithmetic_oracle(self):
        rng = np.random.default_rng(0)
        r = 3
        x = rand(rng, (2, 2, 4, 6, 9))
        out = pixel_unshuffle(x, r)
        assert out.shape == (2, 2, 4 * 9, 2, 3)
        for ci in range(4):
            for dy in range(r):
                for dx in range(r):
                    np.testing.assert_array_equal(
                        out[:, :, ci * r * r + dy * r + dx],
                        x[:, :, ci, dy::r, dx::r])

    def test_round_trip_bitwise(self):
        rng = np.random.default_rng(1)
        x = rand(rng, (2, 3, 5, 8, 12))
        np.testing.assert_array_equal(pixel_shuffle(pixel_unshuffle(x, 4), 4), x)
        y = rand(rng, (1, 2, 32, 3, 5))
        np.testing.assert_array_equal(pixel_unshuffle(pixel_shuffle(y, 4), 4), y)

    def test_factor_one_is_identity(self):
        rng = np.random.default_rng(2)
        x = rand(rng, (1, 2, 3, 4, 5))
        np.testing.assert_array_equal(pixel_unshuffle(x, 1), x)

    def test_indivisible(self):
        x = np.zeros((1, 1, 1, 5, 8), dtype=np.float32)
        with pytest.raises(IndivisibleDims):
            pixel_unshuffle(x, 2)
        with pytest.raises(IndivisibleDims):
            pixel_shuffle(np.zeros((1, 1, 6, 2, 2), dtype=np.float32), 2)

    def test_wrong_rank(self):
        with pytest.raises(ShapeMismatch):
            pixel_unshuffle(np.zeros((1, 2, 4, 4), dtype=np.float32), 2)
        with pytest.raises(ShapeMismatch):
            pixel_shuffle(np.zeros((4, 4), dtype=np.float32), 2)


class TestShapeSchedule:
    def test_reference_resolution(self):
        shapes = shape_schedule(EncoderConfig(), 2, 16, 256, 384)
        assert shapes == [
            (2, 16, 384, 32, 48),
            (2, 16, 320, 32, 48),
            (2, 16, 320, 32, 48),
            (2, 16, 640, 16, 24),
            (2, 16, 1280, 8, 12),
            (2, 16, 1280, 4, 6),
        ]

    def test_second_resolution(self):
        shapes = shape_schedule(EncoderConfig(), 1, 14, 320, 576)
        assert shapes[0] == (1, 14, 384, 40, 72)
        assert shapes[-1] == (1, 14, 1280, 5, 9)

    def test_indivisible_height(self):
        with pytest.raises(IndivisibleDims):
            shape_schedule(EncoderConfig(), 1, 2, 100, 384)

    def test_small_config(self):
        shapes = shape_schedule(SMALL, 1, 3, 16, 32)
        assert shapes == [
            (1, 3, 24, 8, 16),
            (1, 3, 8, 8, 16),
            (1, 3, 8, 8, 16),
            (1, 3, 16, 4, 8),
            (1, 3, 16, 2, 4),
            (1, 3, 16, 1, 2),
        ]


class TestPrimitives:
    def test_silu_matches_logistic_form(self):
        x = np.linspace(-20, 20, 401)
        ref = x / (1.0 + np.exp(-x))
        np.testing.assert_allclose(silu(x), ref, atol=1e-12)

    def test_silu_extreme_inputs(self):
        x = np.array([-1e6, -100.0, 0.0, 100.0, 1e6], dtype=np.float32)
        out = silu(x)
        assert np.all(np.isfinite(out))
        assert out[0] == 0.0
        assert out[-1] == 1e6

    def test_softmax_rows(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((5, 7)) * 50
        s = softmax(x)
        np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-12)
        assert np.all(s >= 0)

    def test_softmax_shift_invariant(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((3, 6))
        np.testing.assert_allclose(softmax(x), softmax(x + 123.0), atol=1e-12)

    def test_layer_norm_standardizes(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((10, 64)) * 3 + 5
        g = np.ones(64)
        b = np.zeros(64)
        out = layer_norm(x, g, b)
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.std(axis=-1), 1.0, atol=1e-4)

    def test_layer_norm_affine(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((4, 8))
        g = rng.standard_normal(8)
        b = rng.standard_normal(8)
        base = layer_norm(x, np.ones(8), np.zeros(8))
        np.testing.assert_allclose(layer_norm(x, g, b), base * g + b, atol=1e-12)

    def test_posemb_first_position(self):
        pe = sinusoidal_posemb(4, 8)
        assert pe.shape == (4, 8)
        assert pe.dtype == np.float32
        np.testing.assert_array_equal(pe[0], [0, 1, 0, 1, 0, 1, 0, 1])

    def test_posemb_frequency_formula(self):
        n, c = 7, 10
        pe = sinusoidal_posemb(n, c)
        for p in range(n):
            for i in range(c // 2):
                ang = p / 10000.0 ** (2.0 * i / c)
                assert abs(pe[p, 2 * i] - math.sin(ang)) < 1e-6
                assert abs(pe[p, 2 * i + 1] - math.cos(ang)) < 1e-6

    def test_posemb_odd_width(self):
        pe = sinusoidal_posemb(3, 5)
        assert pe.shape == (3, 5)
        assert pe[1, 4] == np.float32(math.sin(1 / 10000.0 ** (4.0 / 5.0)))

    def test_posemb_deterministic(self):
        np.testing.assert_array_equal(sinusoidal_posemb(16, 320),
                                      sinusoidal_posemb(16, 320))


def naive_conv2d(x, w, b, stride):
    """Direct-summation reference in float64."""
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    pad = (kh - 1) // 2
    xp = np.pad(x.astype(np.float64), ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for ni in range(n):
        for co in range(cout):
            for y in range(ho):
                for xx in range(wo):
                    patch = xp[ni, :, y * stride:y * stride + kh,
                               xx * stride:xx * stride + kw]
                    out[ni, co, y, xx] = (patch * w[co]).sum() + b[co]
    return out


class TestConv2d:
    def test_naive_oracle(self):
        rng = np.random.default_rng(7)
        for stride in (1, 2):
            x = rand(rng, (2, 3, 7, 9))
            w = rand(rng, (4, 3, 3, 3))
            b = rand(rng, (4,))
            got = conv2d(x, w, b, stride=stride)
            ref = naive_conv2d(x, w, b, stride)
            assert got.shape == ref.shape
            np.testing.assert_allclose(got, ref, rtol=1e-4, atol=1e-5)

    def test_one_by_one_kernel(self):
        rng = np.random.default_rng(8)
        x = rand(rng, (2, 5, 4, 6))
        w = rand(rng, (3, 5, 1, 1))
        b = rand(rng, (3,))
        got = conv2d(x, w, b)
        ref = naive_conv2d(x, w, b, 1)
        np.testing.assert_allclose(got, ref, rtol=1e-4, atol=1e-6)

    def test_identity_kernel(self):
        rng = np.random.default_rng(9)
        x = rand(rng, (1, 1, 5, 5))
        w = np.zeros((1, 1, 3, 3), dtype=np.float32)
        w[0, 0, 1, 1] = 1.0
        out = conv2d(x, w, np.zeros(1, dtype=np.float32))
        np.testing.assert_array_equal(out, x)

    def test_chunking_independent(self, monkeypatch):
        # tiny chunk budget forces one frame per pass; only rounding may move
        rng = np.random.default_rng(10)
        x = rand(rng, (6, 4, 8, 8))
        w = rand(rng, (5, 4, 3, 3))
        b = rand(rng, (5,))
        base = conv2d(x, w, b)
        monkeypatch.setattr(enc, "_CONV_CHUNK_BYTES", 1)
        np.testing.assert_allclose(conv2d(x, w, b), base, rtol=1e-4, atol=1e-5)

    def test_stride_two_output_shape(self):
        x = np.zeros((1, 2, 10, 6), dtype=np.float32)
        w = np.zeros((3, 2, 3, 3), dtype=np.float32)
        out = conv2d(x, w, np.zeros(3, dtype=np.float32), stride=2)
        assert out.shape == (1, 3, 5, 3)


class TestResBlock:
    def test_no_skip_composition(self):
        rng = np.random.default_rng(11)
        w = build_encoder_weights(SMALL)
        p = w.scales[0].res
        assert p.skip is None
        x = rand(rng, (2, 8, 8, 8))
        h = conv2d(x, p.conv1.w, p.conv1.b)
        manual = conv2d(silu(h), p.conv2.w, p.conv2.b) + x
        np.testing.assert_array_equal(res_block(x, p), manual)

    def test_downsample_skip(self):
        rng = np.random.default_rng(12)
        w = build_encoder_weights(SMALL)
        p = w.scales[1].down
        assert p.skip is not None and p.stride == 2
        x = rand(rng, (2, 8, 8, 8))
        out = res_block(x, p)
        assert out.shape == (2, 16, 4, 4)
        h = conv2d(x, p.conv1.w, p.conv1.b, stride=2)
        manual = (conv2d(silu(h), p.conv2.w, p.conv2.b)
                  + conv2d(x, p.skip.w, p.skip.b, stride=2))
        np.testing.assert_array_equal(out, manual)


def small_attention(seed=13, c=8, ratio=2):
    rng = np.random.default_rng(seed)
    return enc._init_attention(rng, c, ratio)


class TestAttention:
    def test_single_token_closed_form(self):
        rng = np.random.default_rng(14)
        p = small_attention()
        x = rand(rng, (10, 1, 8))
        out = multi_head_self_attention(x, p, heads=2)
        manual = (x @ p.wv + p.bv) @ p.wo + p.bo
        np.testing.assert_array_equal(out, manual)

    def test_weights_are_row_stochastic(self):
        rng = np.random.default_rng(15)
        p = small_attention()
        x = rand(rng, (6, 5, 8))
        out, weights = multi_head_self_attention(x, p, heads=2, return_weights=True)
        assert out.shape == (6, 5, 8)
        assert weights.shape == (6, 2, 5, 5)
        assert np.all(weights >= 0)
        np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-6)

    def test_per_head_loop_oracle(self):
        rng = np.random.default_rng(16)
        p = small_attention()
        heads, hd = 2, 4
        x = rand(rng, (3, 4, 8))
        got = multi_head_self_attention(x, p, heads=heads)
        q = x @ p.wq + p.bq
        k = x @ p.wk + p.bk
        v = x @ p.wv + p.bv
        ref = np.zeros_like(got)
        for ri in range(3):
            outs = []
            for h in range(heads):
                sl = slice(h * hd, (h + 1) * hd)
                scores = q[ri][:, sl] @ k[ri][:, sl].T / math.sqrt(hd)
                a = np.exp(scores - scores.max(axis=-1, keepdims=True))
                a /= a.sum(axis=-1, keepdims=True)
                outs.append(a @ v[ri][:, sl])
            ref[ri] = np.concatenate(outs, axis=-1) @ p.wo + p.bo
        np.testing.assert_allclose(got, ref, rtol=1e-5, atol=1e-6)

    def test_constant_query_key_averages(self):
        rng = np.random.default_rng(17)
        p = small_attention()
        p = dataclasses.replace(
            p, wq=np.zeros_like(p.wq), wk=np.zeros_like(p.wk))
        x = rand(rng, (4, 6, 8))
        _, weights = multi_head_self_attention(x, p, heads=2, return_weights=True)
        np.testing.assert_allclose(weights, 1.0 / 6.0, atol=1e-7)

    def test_permutation_covariance(self):
        rng = np.random.default_rng(18)
        p = small_attention()
        x = rand(rng, (5, 7, 8))
        perm = rng.permutation(7)
        np.testing.assert_allclose(
            multi_head_self_attention(x[:, perm], p, heads=2),
            multi_head_self_attention(x, p, heads=2)[:, perm],
            atol=1e-6)


class TestTemporalAttentionBlock:
    def test_residual_isolation_bitwise(self):
        # zeroed output projections kill both branches exactly
        rng = np.random.default_rng(19)
        p = small_attention()
        p = dataclasses.replace(
            p, wo=np.zeros_like(p.wo), bo=np.zeros_like(p.bo),
            mlp_w2=np.zeros_like(p.mlp_w2), mlp_b2=np.zeros_like(p.mlp_b2))
        x = rand(rng, (12, 5, 8))
        out = temporal_attention_block(x, p, heads=2, use_posemb=False)
        np.testing.assert_array_equal(out, x)
        out_pe = temporal_attention_block(x, p, heads=2, use_posemb=True)
        np.testing.assert_array_equal(out_pe, x + sinusoidal_posemb(5, 8))

    def test_structure_oracle(self):
        rng = np.random.default_rng(20)
        p = small_attention()
        x = rand(rng, (6, 4, 8))
        z = x + sinusoidal_posemb(4, 8)
        z2 = multi_head_self_attention(
            layer_norm(z, p.ln1_gamma, p.ln1_beta), p, heads=2) + z
        h = silu(layer_norm(z2, p.ln2_gamma, p.ln2_beta) @ p.mlp_w1 + p.mlp_b1)
        manual = h @ p.mlp_w2 + p.mlp_b2 + z2
        got = temporal_attention_block(x, p, heads=2, use_posemb=True)
        np.testing.assert_array_equal(got, manual)

    def test_posemb_toggle_changes_output(self):
        rng = np.random.default_rng(21)
        p = small_attention()
        x = rand(rng, (3, 4, 8))
        a = temporal_attention_block(x, p, heads=2, use_posemb=True)
        b = temporal_attention_block(x, p, heads=2, use_posemb=False)
        assert np.abs(a - b).max() > 1e-3

    def test_permutation_covariance_without_posemb(self):
        rng = np.random.default_rng(22)
        p = small_attention()
        x = rand(rng, (4, 6, 8))
        perm = rng.permutation(6)
        np.testing.assert_allclose(
            temporal_attention_block(x[:, perm], p, heads=2, use_posemb=False),
            temporal_attention_block(x, p, heads=2, use_posemb=False)[:, perm],
            atol=1e-5)

    def test_shape_errors(self):
        p = small_attention()
        with pytest.raises(ShapeMismatch):
            temporal_attention_block(np.zeros((4, 8), dtype=np.float32), p, 2)
        with pytest.raises(ShapeMismatch):
            temporal_attention_block(np.zeros((2, 3, 10), dtype=np.float32), p, 2)
        with pytest.raises(ShapeMismatch):
            temporal_attention_block(np.zeros((2, 3, 8), dtype=np.float32), p, 3)


class TestFuse:
    def test_per_position_oracle(self):
        rng = np.random.default_rng(23)
        z = rand(rng, (2, 3, 5, 4, 4))
        c = rand(rng, (2, 3, 5, 4, 4))
        w = rand(rng, (5, 7))
        b = rand(rng, (7,))
        out = fuse(z, c, w, b)
        assert out.shape == (2, 3, 7, 4, 4)
        for y in range(4):
            for x in range(4):
                ref = (z[:, :, :, y, x] + c[:, :, :, y, x]) @ w + b
                np.testing.assert_allclose(out[:, :, :, y, x], ref, atol=1e-6)

    def test_no_bias(self):
        rng = np.random.default_rng(24)
        z = rand(rng, (1, 2, 3, 2, 2))
        c = rand(rng, (1, 2, 3, 2, 2))
        w = rand(rng, (3, 3))
        np.testing.assert_allclose(
            fuse(z, c, w), fuse(z, c, w, np.zeros(3, dtype=np.float32)), atol=0)

    def test_shape_errors(self):
        z = np.zeros((1, 2, 3, 2, 2), dtype=np.float32)
        with pytest.raises(ShapeMismatch):
            fuse(z, np.zeros((1, 2, 3, 2, 3), dtype=np.float32), np.zeros((3, 3)))
        with pytest.raises(ShapeMismatch):
            fuse(z, z, np.zeros((4, 3)))
        with pytest.raises(ShapeMismatch):
            fuse(z[0], z[0], np.zeros((3, 3)))


class TestWeights:
    def test_deterministic_rebuild(self):
        a = build_encoder_weights(SMALL)
        b = build_encoder_weights(SMALL)
        np.testing.assert_array_equal(a.stem.w, b.stem.w)
        np.testing.assert_array_equal(a.scales[3].res_attn.mlp_w2,
                                      b.scales[3].res_attn.mlp_w2)

    def test_seed_changes_weights(self):
        a = build_encoder_weights(SMALL)
        b = build_encoder_weights(dataclasses.replace(SMALL, seed=8))
        assert np.abs(a.stem.w - b.stem.w).max() > 0

    def test_stem_draw_replication(self):
        # pins the documented draw order: stem comes first from the stream
        w = build_encoder_weights(SMALL)
        rng = np.random.default_rng(SMALL.seed)
        cin = SMALL.in_channels * SMALL.unshuffle_factor ** 2
        std = np.float32(1.0 / math.sqrt(cin * 9))
        expected = rng.standard_normal((8, cin, 3, 3), dtype=np.float32) * std
        np.testing.assert_array_equal(w.stem.w, expected)
        # scale 1 has no downsample stage, so its plain block draws next
        expected_c1 = (rng.standard_normal((8, 8, 3, 3), dtype=np.float32)
                       * np.float32(1.0 / math.sqrt(8 * 9)))
        np.testing.assert_array_equal(w.scales[0].res.conv1.w, expected_c1)

    def test_biases_zero_affine_identity(self):
        w = build_encoder_weights(SMALL)
        assert np.all(w.stem.b == 0)
        attn = w.scales[2].down_attn
        assert np.all(attn.bq == 0) and np.all(attn.bo == 0)
        assert np.all(attn.ln1_gamma == 1) and np.all(attn.ln1_beta == 0)
        assert np.all(attn.ln2_gamma == 1) and np.all(attn.ln2_beta == 0)

    def test_skip_placement(self):
        w = build_encoder_weights(SMALL)
        assert w.scales[0].down is None and w.scales[0].down_attn is None
        assert w.scales[1].down.skip is not None  # 8 -> 16 with stride 2
        assert w.scales[2].down.skip is not None  # stride 2 alone forces it
        assert w.scales[0].res.skip is None
        assert all(s.res.skip is None for s in w.scales)

    def test_fan_in_scale(self):
        w = build_encoder_weights(EncoderConfig())
        measured = float(w.stem.w.std())
        assert abs(measured - 1.0 / math.sqrt(384 * 9)) < 0.1 / math.sqrt(384 * 9)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EncoderConfig(heads=7)  # does not divide 320
        with pytest.raises(ValueError):
            EncoderConfig(scale_channels=(8, 16, 16))
        with pytest.raises(ValueError):
            EncoderConfig(mlp_ratio=0)
        with pytest.raises(ValueError):
            EncoderConfig(unshuffle_factor=0)


class TestEncoderForward:
    def test_small_forward_shapes(self):
        rng = np.random.default_rng(25)
        x = rand(rng, (1, 3, 6, 16, 32))
        feats = encoder_forward(x, SMALL)
        assert isinstance(feats, MultiScaleCameraFeatures)
        assert len(feats) == 4
        expected = shape_schedule(SMALL, 1, 3, 16, 32)[2:]
        for f, s in zip(feats, expected):
            assert f.shape == s
            assert f.dtype == np.float32
            assert np.all(np.isfinite(f))

    def test_four_d_input_is_batch_one(self):
        rng = np.random.default_rng(26)
        x = rand(rng, (1, 2, 6, 16, 16))
        a = encoder_forward(x, SMALL)
        b = encoder_forward(x[0], SMALL)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)

    def test_zero_input_propagates_zero(self):
        cfg = dataclasses.replace(SMALL, use_posemb=False)
        x = np.zeros((1, 2, 6, 16, 16), dtype=np.float32)
        for f in encoder_forward(x, cfg):
            assert np.all(f == 0.0)

    def test_deterministic(self):
        rng = np.random.default_rng(27)
        x = rand(rng, (1, 2, 6, 16, 16))
        a = encoder_forward(x, SMALL)
        b = encoder_forward(x, SMALL)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)

    def test_explicit_weights_match_default(self):
        rng = np.random.default_rng(28)
        x = rand(rng, (1, 2, 6, 16, 16))
        w = build_encoder_weights(SMALL)
        a = encoder_forward(x, SMALL, weights=w)
        b = encoder_forward(x, SMALL)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)

    def test_posemb_affects_features(self):
        rng = np.random.default_rng(29)
        x = rand(rng, (1, 3, 6, 16, 16))
        a = encoder_forward(x, SMALL)
        b = encoder_forward(x, dataclasses.replace(SMALL, use_posemb=False))
        assert np.abs(a[0] - b[0]).max() > 1e-4

    def test_input_validation(self):
        with pytest.raises(ShapeMismatch):
            encoder_forward(np.zeros((2, 6, 16), dtype=np.float32), SMALL)
        with pytest.raises(ShapeMismatch):
            encoder_forward(np.zeros((1, 2, 5, 16, 16), dtype=np.float32), SMALL)
        with pytest.raises(IndivisibleDims):
            encoder_forward(np.zeros((1, 2, 6, 20, 16), dtype=np.float32), SMALL)

    def test_features_indexable(self):
        rng = np.random.default_rng(30)
        x = rand(rng, (1, 2, 6, 16, 16))
        feats = encoder_forward(x, SMALL)
        np.testing.assert_array_equal(feats[0], list(feats)[0])
        np.testing.assert_array_equal(feats[-1], feats[3])
