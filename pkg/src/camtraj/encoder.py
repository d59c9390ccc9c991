"""Deterministic multi-scale trajectory encoder, forward pass only.

The network turns a ray-embedding sequence (b, n, 6, h, w) into four feature
maps at 1/8, 1/16, 1/32, and 1/64 of the input resolution: pixel unshuffle
(factor 8), a 3x3 stem conv, then four scales. Every scale except the first
starts with a stride-2 downsample residual block; each residual block is
followed by a temporal attention block that attends over the frame axis only,
treating each (batch, y, x) position as an independent token row.

There is no training here. Weights are drawn once from
``numpy.random.default_rng(cfg.seed)`` (PCG64) as float32 in a fixed,
documented order, so the whole forward pass is reproducible bit-for-bit from
the seed. Biases start at zero, LayerNorm affine at identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import IndivisibleDims, ShapeMismatch

LN_EPS = 1e-5
# cap per-chunk im2col buffers (bytes) so convolutions stay memory-bounded
_CONV_CHUNK_BYTES = 256 * 1024 * 1024


@dataclass(frozen=True)
class EncoderConfig:
    """Architecture hyperparameters plus the weight-init seed."""

    unshuffle_factor: int = 8
    scale_channels: tuple[int, int, int, int] = (320, 640, 1280, 1280)
    heads: int = 8
    mlp_ratio: int = 4
    seed: int = 0
    in_channels: int = 6
    use_posemb: bool = True

    def __post_init__(self):
        if self.unshuffle_factor < 1:
            raise ValueError(f"unshuffle_factor must be >= 1, got {self.unshuffle_factor}")
        if len(self.scale_channels) != 4 or any(c < 1 for c in self.scale_channels):
            raise ValueError(f"need 4 positive scale channels, got {self.scale_channels}")
        for c in self.scale_channels:
            if c % self.heads != 0:
                raise ValueError(f"heads={self.heads} must divide channel width {c}")
        if self.mlp_ratio < 1:
            raise ValueError(f"mlp_ratio must be >= 1, got {self.mlp_ratio}")


@dataclass(frozen=True)
class ConvParams:
    w: np.ndarray  # (cout, cin, k, k)
    b: np.ndarray  # (cout,)


@dataclass(frozen=True)
class ResBlockParams:
    conv1: ConvParams
    conv2: ConvParams
    skip: ConvParams | None  # 1x1, present when channels or stride change
    stride: int = 1


@dataclass(frozen=True)
class AttentionParams:
    """Temporal attention block weights for width c."""

    ln1_gamma: np.ndarray
    ln1_beta: np.ndarray
    wq: np.ndarray  # (c, c), applied as x @ w
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    ln2_gamma: np.ndarray
    ln2_beta: np.ndarray
    mlp_w1: np.ndarray  # (c, ratio*c)
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray  # (ratio*c, c)
    mlp_b2: np.ndarray

    @property
    def width(self) -> int:
        return self.wq.shape[0]


@dataclass(frozen=True)
class ScaleParams:
    down: ResBlockParams | None
    down_attn: AttentionParams | None
    res: ResBlockParams
    res_attn: AttentionParams


@dataclass(frozen=True)
class EncoderWeights:
    stem: ConvParams
    scales: tuple[ScaleParams, ...]


@dataclass(frozen=True)
class MultiScaleCameraFeatures:
    """One (b, n, c_i, h_i, w_i) feature map per encoder scale."""

    scales: tuple[np.ndarray, ...] = field()

    def __iter__(self):
        return iter(self.scales)

    def __len__(self):
        return len(self.scales)

    def __getitem__(self, i):
        return self.scales[i]


# --- primitive ops ----------------------------------------------------------

def silu(x: np.ndarray) -> np.ndarray:
    # x * sigmoid(x), written via tanh so large |x| cannot overflow exp
    return x * (0.5 * (1.0 + np.tanh(0.5 * x)))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
               eps: float = LN_EPS) -> np.ndarray:
    """Normalize over the last axis, then apply the affine parameters."""
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


def sinusoidal_posemb(n: int, c: int) -> np.ndarray:
    """(n, c) sine/cosine temporal position table, float32.

    Even channels carry sin(pos / 10000^(2i/c)), odd channels the matching
    cos; recomputed from (n, c) alone, so identical on every call.
    """
    pos = np.arange(n, dtype=np.float64)[:, None]
    half = (c + 1) // 2
    i = np.arange(half, dtype=np.float64)[None, :]
    ang = pos / np.power(10000.0, 2.0 * i / c)
    pe = np.zeros((n, 2 * half), dtype=np.float32)
    pe[:, 0::2] = np.sin(ang)
    pe[:, 1::2] = np.cos(ang)
    return pe[:, :c]


def pixel_unshuffle(x: np.ndarray, r: int) -> np.ndarray:
    """Space-to-channel rearrangement on a (b, n, c, h, w) tensor.

    Output channel c*r*r + dy*r + dx holds input channel c at spatial offset
    (dy, dx) within each r x r tile; lossless and bit-exact.

    Raises:
        IndivisibleDims: if h or w is not divisible by r.
    """
    if x.ndim != 5:
        raise ShapeMismatch(f"expected (b, n, c, h, w), got shape {x.shape}")
    b, n, c, h, w = x.shape
    if h % r or w % r:
        raise IndivisibleDims(f"spatial dims {h}x{w} not divisible by r={r}")
    y = x.reshape(b, n, c, h // r, r, w // r, r)
    y = y.transpose(0, 1, 2, 4, 6, 3, 5)
    return np.ascontiguousarray(y).reshape(b, n, c * r * r, h // r, w // r)


def pixel_shuffle(x: np.ndarray, r: int) -> np.ndarray:
    """Inverse of :func:`pixel_unshuffle`."""
    if x.ndim != 5:
        raise ShapeMismatch(f"expected (b, n, c, h, w), got shape {x.shape}")
    b, n, c, h, w = x.shape
    if c % (r * r):
        raise IndivisibleDims(f"channels {c} not divisible by r*r={r * r}")
    y = x.reshape(b, n, c // (r * r), r, r, h, w)
    y = y.transpose(0, 1, 2, 5, 3, 6, 4)
    return np.ascontiguousarray(y).reshape(b, n, c // (r * r), h * r, w * r)


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1) -> np.ndarray:
    """'Same'-padded 2D convolution on (N, C, H, W) via im2col + matmul.

    Processed in frame chunks to bound the patch-buffer allocation; chunking
    depends only on shapes, so results are schedule-independent.
    """
    cout, cin, kh, kw = w.shape
    pad = (kh - 1) // 2
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    n, _, ho, wo = windows.shape[:4]
    wmat = w.reshape(cout, cin * kh * kw).T
    out = np.empty((n, cout, ho, wo), dtype=np.float32)
    per_frame = ho * wo * cin * kh * kw * 4
    chunk = max(1, _CONV_CHUNK_BYTES // max(per_frame, 1))
    for i0 in range(0, n, chunk):
        i1 = min(i0 + chunk, n)
        patches = (windows[i0:i1]
                   .transpose(0, 2, 3, 1, 4, 5)
                   .reshape((i1 - i0) * ho * wo, cin * kh * kw))
        res = patches @ wmat + b
        out[i0:i1] = res.reshape(i1 - i0, ho, wo, cout).transpose(0, 3, 1, 2)
    return out


def res_block(x: np.ndarray, p: ResBlockParams) -> np.ndarray:
    """conv3x3 -> SiLU -> conv3x3 plus skip; 1x1 skip conv when present."""
    h = conv2d(x, p.conv1.w, p.conv1.b, stride=p.stride)
    h = conv2d(silu(h), p.conv2.w, p.conv2.b, stride=1)
    skip = x if p.skip is None else conv2d(x, p.skip.w, p.skip.b, stride=p.stride)
    return h + skip


def multi_head_self_attention(x: np.ndarray, p: AttentionParams, heads: int,
                              return_weights: bool = False):
    """Self-attention over axis 1 of an (R, n, c) tensor.

    Returns the projected output, plus the (R, heads, n, n) softmax matrix
    when ``return_weights`` is set.
    """
    r, n, c = x.shape
    hd = c // heads
    scale = 1.0 / math.sqrt(hd)
    q = (x @ p.wq + p.bq).reshape(r, n, heads, hd).transpose(0, 2, 1, 3)
    k = (x @ p.wk + p.bk).reshape(r, n, heads, hd).transpose(0, 2, 1, 3)
    v = (x @ p.wv + p.bv).reshape(r, n, heads, hd).transpose(0, 2, 1, 3)
    weights = softmax(q @ k.transpose(0, 1, 3, 2) * scale, axis=-1)
    out = (weights @ v).transpose(0, 2, 1, 3).reshape(r, n, c)
    out = out @ p.wo + p.bo
    if return_weights:
        return out, weights
    return out


def temporal_attention_block(x: np.ndarray, p: AttentionParams, heads: int,
                             use_posemb: bool = True) -> np.ndarray:
    """Pre-norm attention + MLP over the temporal axis of (R, n, c) rows.

    z  = x + PosEmb
    z2 = MHSA(LayerNorm(z)) + z
    out = MLP(LayerNorm(z2)) + z2

    With the attention output projection and the MLP final layer at zero,
    both branches vanish and out is exactly x + PosEmb.

    Raises:
        ShapeMismatch: for non-3D input, a width not matching the weights,
            or heads not dividing the width.
    """
    if x.ndim != 3:
        raise ShapeMismatch(f"expected (rows, n, c), got shape {x.shape}")
    r, n, c = x.shape
    if c != p.width:
        raise ShapeMismatch(f"input width {c} does not match weights width {p.width}")
    if c % heads:
        raise ShapeMismatch(f"heads={heads} must divide width {c}")
    z = x + sinusoidal_posemb(n, c) if use_posemb else x
    z1 = layer_norm(z, p.ln1_gamma, p.ln1_beta)
    z2 = multi_head_self_attention(z1, p, heads) + z
    z3 = layer_norm(z2, p.ln2_gamma, p.ln2_beta)
    h = silu(z3 @ p.mlp_w1 + p.mlp_b1)
    return h @ p.mlp_w2 + p.mlp_b2 + z2


def fuse(z: np.ndarray, c: np.ndarray, weight: np.ndarray,
         bias: np.ndarray | None = None) -> np.ndarray:
    """Linear(z + c) over the channel axis of two (b, n, ch, h, w) maps.

    ``weight`` is (ch_in, ch_out), applied per spatial position.

    Raises:
        ShapeMismatch: if the maps differ in shape or the weight's input
            width does not match their channel count.
    """
    z = np.asarray(z)
    c = np.asarray(c)
    if z.shape != c.shape:
        raise ShapeMismatch(f"feature shapes differ: {z.shape} vs {c.shape}")
    if z.ndim != 5:
        raise ShapeMismatch(f"expected (b, n, c, h, w), got shape {z.shape}")
    if weight.shape[0] != z.shape[2]:
        raise ShapeMismatch(
            f"weight input width {weight.shape[0]} != channels {z.shape[2]}")
    s = z + c
    out = np.tensordot(s, weight, axes=([2], [0]))  # (b, n, h, w, ch_out)
    if bias is not None:
        out = out + bias
    return np.ascontiguousarray(np.moveaxis(out, -1, 2))


# --- weight construction ----------------------------------------------------

def _init_conv(rng, cout: int, cin: int, k: int) -> ConvParams:
    std = 1.0 / math.sqrt(cin * k * k)
    w = (rng.standard_normal((cout, cin, k, k), dtype=np.float32)
         * np.float32(std))
    return ConvParams(w, np.zeros(cout, dtype=np.float32))


def _init_linear(rng, din: int, dout: int) -> tuple[np.ndarray, np.ndarray]:
    std = 1.0 / math.sqrt(din)
    w = rng.standard_normal((din, dout), dtype=np.float32) * np.float32(std)
    return w, np.zeros(dout, dtype=np.float32)


def _init_attention(rng, c: int, mlp_ratio: int) -> AttentionParams:
    wq, bq = _init_linear(rng, c, c)
    wk, bk = _init_linear(rng, c, c)
    wv, bv = _init_linear(rng, c, c)
    wo, bo = _init_linear(rng, c, c)
    w1, b1 = _init_linear(rng, c, mlp_ratio * c)
    w2, b2 = _init_linear(rng, mlp_ratio * c, c)
    ones = np.ones(c, dtype=np.float32)
    zeros = np.zeros(c, dtype=np.float32)
    return AttentionParams(ones, zeros, wq, bq, wk, bk, wv, bv, wo, bo,
                           ones.copy(), zeros.copy(), w1, b1, w2, b2)


def _init_res_block(rng, cin: int, cout: int, stride: int) -> ResBlockParams:
    conv1 = _init_conv(rng, cout, cin, 3)
    conv2 = _init_conv(rng, cout, cout, 3)
    skip = None
    if cin != cout or stride != 1:
        skip = _init_conv(rng, cout, cin, 1)
    return ResBlockParams(conv1, conv2, skip, stride)


def build_encoder_weights(cfg: EncoderConfig) -> EncoderWeights:
    """Draw all weights from PCG64 seeded with cfg.seed.

    Draw order: stem conv, then per scale in order (downsample block where
    present, its attention, plain block, its attention). Weight std is
    1/sqrt(fan_in); biases zero; LayerNorm affine at identity. Changing any
    architectural field changes the stream, so weights are only comparable
    across identical configs.
    """
    rng = np.random.default_rng(cfg.seed)
    r = cfg.unshuffle_factor
    stem = _init_conv(rng, cfg.scale_channels[0], cfg.in_channels * r * r, 3)
    scales = []
    prev = cfg.scale_channels[0]
    for i, c in enumerate(cfg.scale_channels):
        if i == 0:
            down = None
            down_attn = None
        else:
            down = _init_res_block(rng, prev, c, stride=2)
            down_attn = _init_attention(rng, c, cfg.mlp_ratio)
        res = _init_res_block(rng, c, c, stride=1)
        res_attn = _init_attention(rng, c, cfg.mlp_ratio)
        scales.append(ScaleParams(down, down_attn, res, res_attn))
        prev = c
    return EncoderWeights(stem, tuple(scales))


# --- full forward -----------------------------------------------------------

def shape_schedule(cfg: EncoderConfig, b: int, n: int, h: int, w: int) -> list:
    """The six tensor shapes of the forward pass, in order.

    Entries: after unshuffle, after the stem conv, then after each of the
    four scales. Spatial dims must divide by 8 * unshuffle_factor (the three
    stride-2 stages after the unshuffle).

    Raises:
        IndivisibleDims.
    """
    r = cfg.unshuffle_factor
    divisor = r * 8
    if h % divisor or w % divisor:
        raise IndivisibleDims(f"spatial dims {h}x{w} not divisible by {divisor}")
    c1, c2, c3, c4 = cfg.scale_channels
    hr, wr = h // r, w // r
    return [
        (b, n, cfg.in_channels * r * r, hr, wr),
        (b, n, c1, hr, wr),
        (b, n, c1, hr, wr),
        (b, n, c2, hr // 2, wr // 2),
        (b, n, c3, hr // 4, wr // 4),
        (b, n, c4, hr // 8, wr // 8),
    ]


def _conv5(x: np.ndarray, p: ConvParams, stride: int = 1) -> np.ndarray:
    b, n = x.shape[:2]
    y = conv2d(x.reshape(b * n, *x.shape[2:]), p.w, p.b, stride)
    return y.reshape(b, n, *y.shape[1:])


def _res_block5(x: np.ndarray, p: ResBlockParams) -> np.ndarray:
    b, n = x.shape[:2]
    y = res_block(x.reshape(b * n, *x.shape[2:]), p)
    return y.reshape(b, n, *y.shape[1:])


def _attend5(x: np.ndarray, p: AttentionParams, cfg: EncoderConfig) -> np.ndarray:
    b, n, c, h, w = x.shape
    rows = np.ascontiguousarray(x.transpose(0, 3, 4, 1, 2)).reshape(b * h * w, n, c)
    out = temporal_attention_block(rows, p, cfg.heads, use_posemb=cfg.use_posemb)
    return np.ascontiguousarray(
        out.reshape(b, h, w, n, c).transpose(0, 3, 4, 1, 2))


def encoder_forward(p: np.ndarray, cfg: EncoderConfig,
                    weights: EncoderWeights | None = None) -> MultiScaleCameraFeatures:
    """Run the full encoder on an (n, c, h, w) or (b, n, c, h, w) input.

    A 4D input is treated as batch size 1. Weights default to
    :func:`build_encoder_weights`; pass them explicitly to reuse across
    calls or to probe modified parameters.

    Raises:
        IndivisibleDims: spatial dims not divisible by 8 * unshuffle_factor.
        ShapeMismatch: wrong rank or channel count.
    """
    x = np.asarray(p, dtype=np.float32)
    if x.ndim == 4:
        x = x[None]
    if x.ndim != 5:
        raise ShapeMismatch(f"expected 4D or 5D input, got shape {x.shape}")
    if x.shape[2] != cfg.in_channels:
        raise ShapeMismatch(
            f"expected {cfg.in_channels} input channels, got {x.shape[2]}")
    b, n, _, h, w = x.shape
    shape_schedule(cfg, b, n, h, w)  # validates divisibility up front
    if weights is None:
        weights = build_encoder_weights(cfg)
    x = pixel_unshuffle(x, cfg.unshuffle_factor)
    x = _conv5(x, weights.stem)
    feats = []
    for sw in weights.scales:
        if sw.down is not None:
            x = _res_block5(x, sw.down)
            x = _attend5(x, sw.down_attn, cfg)
        x = _res_block5(x, sw.res)
        x = _attend5(x, sw.res_attn, cfg)
        feats.append(x)
    return MultiScaleCameraFeatures(tuple(feats))
