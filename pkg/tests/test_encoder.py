import numpy as np
import pytest

from framefuse.autodiff import MASK_BLOCKED, Tensor
from framefuse.encoder import (AttentionScope, EncoderConfig, build_scope_mask,
                               encode, init_encoder_params, merge_heads,
                               multihead_attention, split_heads)
from framefuse.errors import IndivisibleTokens, ShapeMismatch
from framefuse.rng import RngState


def small_encoder(layers=1, hidden=8, heads=2, ffn=12, seed=0):
    cfg = EncoderConfig(layers=layers, hidden=hidden, heads=heads, ffn_hidden=ffn)
    params = init_encoder_params(cfg, RngState(seed))
    return cfg, params


def test_scope_mask_small_case():
    sm = build_scope_mask(4, 2)
    allowed = sm.mask.data == 0.0
    expect = np.array([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]],
                      dtype=bool)
    assert np.array_equal(allowed, expect)
    assert sm.block == 2
    assert sm.total == 4


def test_scope_mask_allowed_pair_count():
    sm = build_scope_mask(6, 3)
    assert int((sm.mask.data == 0.0).sum()) == 18
    assert np.all(sm.mask.data[(sm.mask.data != 0.0)] == MASK_BLOCKED)


def test_scope_mask_single_block_is_dense():
    sm = build_scope_mask(5, 5)
    assert np.all(sm.mask.data == 0.0)


def test_scope_mask_indivisible():
    with pytest.raises(IndivisibleTokens):
        build_scope_mask(10, 4)
    with pytest.raises(IndivisibleTokens):
        build_scope_mask(4, 0)


def test_encoder_config_head_divisibility():
    with pytest.raises(ShapeMismatch):
        EncoderConfig(hidden=10, heads=4)


def test_split_merge_heads_round_trip():
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(size=(2, 6, 8)))
    assert np.array_equal(merge_heads(split_heads(x, 2)).data, x.data)


def test_encode_identity_with_zero_output_projections():
    cfg, params = small_encoder(layers=2)
    for name, p in params.items():
        if name.endswith(".wo") or name.endswith(".ffn_w2"):
            p.data[...] = 0.0
    rng = np.random.default_rng(1)
    tokens = Tensor(rng.normal(size=(6, 8)))
    out = encode(tokens, cfg, build_scope_mask(6, 3), params)
    assert np.array_equal(out.data, tokens.data)


def test_encode_accepts_batched_and_flat():
    cfg, params = small_encoder()
    rng = np.random.default_rng(2)
    flat = rng.normal(size=(4, 8))
    batched = flat[None]
    mask = build_scope_mask(4, 2)
    out_flat = encode(Tensor(flat), cfg, mask, params)
    out_batched = encode(Tensor(batched), cfg, mask, params)
    assert out_flat.shape == (4, 8)
    assert np.array_equal(out_batched.data[0], out_flat.data)


def test_encode_rejects_wrong_hidden():
    cfg, params = small_encoder()
    with pytest.raises(ShapeMismatch):
        encode(Tensor(np.zeros((4, 5))), cfg, build_scope_mask(4, 2), params)


def test_encode_rejects_mask_length_mismatch():
    cfg, params = small_encoder()
    with pytest.raises(ShapeMismatch):
        encode(Tensor(np.zeros((4, 8))), cfg, build_scope_mask(6, 3), params)


def test_block_mask_equals_independent_encoding():
    # frames folded into one masked sequence must match per-frame encoding
    # bitwise: blocked attention weights underflow to exactly zero
    cfg, params = small_encoder(layers=2, seed=3)
    rng = np.random.default_rng(4)
    frames = rng.normal(size=(3, 4, 8))
    flat = Tensor(frames.reshape(12, 8))
    fused = encode(flat, cfg, build_scope_mask(12, 4), params).data.reshape(3, 4, 8)
    dense = build_scope_mask(4, 4)
    for f in range(3):
        alone = encode(Tensor(frames[f]), cfg, dense, params).data
        assert np.array_equal(fused[f], alone)


def test_multihead_attention_shapes():
    cfg, params = small_encoder()
    rng = np.random.default_rng(5)
    x = Tensor(rng.normal(size=(2, 4, 8)))
    out = multihead_attention(x, x, None, params, "enc.0", cfg.heads)
    assert out.shape == (2, 4, 8)


def test_multihead_attention_weights_expose_heads():
    cfg, params = small_encoder()
    rng = np.random.default_rng(6)
    x = Tensor(rng.normal(size=(4, 8)))
    out, weights = multihead_attention(x, x, None, params, "enc.0", cfg.heads,
                                       return_weights=True)
    assert out.shape == (4, 8)
    assert weights.shape == (2, 4, 4)
    assert np.allclose(weights.data.sum(axis=-1), 1.0)


def test_encoder_has_no_key_bias():
    _, params = small_encoder(layers=2)
    assert not any(name.endswith(".bk") for name in params)
    assert "enc.0.bq" in params and "enc.1.bo" in params


def test_scope_enum_values():
    assert AttentionScope.PER_FRAME.value == "per-frame"
    assert AttentionScope.PER_GROUP.value == "per-group"
