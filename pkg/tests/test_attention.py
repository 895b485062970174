import math

import numpy as np
import pytest
from oracles import swsa_oracle

from dnswin import functional as F
from dnswin.attention import (
    AttentionConfig,
    WindowAttention,
    attention_unit,
    build_shift_mask,
    flops_msa,
    flops_wsa,
    partition_hwc,
    relative_position_index,
    swsa,
    window_attention,
    window_partition,
    window_reverse,
    wsa,
)
from dnswin.gradcheck import max_relative_error, projected, rand64
from dnswin.tensor import Tensor, default_dtype, mac_counter, no_grad


def _unit(m, heads, c, shift=0, seed=0, bias_scale=0.5):
    rng = np.random.default_rng(seed)
    w = WindowAttention(AttentionConfig(m, heads, c, shift), rng)
    w.bias_table.data = rng.uniform(-bias_scale, bias_scale, size=w.bias_table.shape).astype(w.bias_table.dtype)
    return w


# -- partitioning --------------------------------------------------------------


def test_partition_counts():
    out = window_partition(Tensor(np.zeros((3, 8, 8))), 4)
    assert out.shape == (4, 16, 3)


def test_single_window_row_major():
    x = np.arange(9, dtype=np.float32).reshape(1, 3, 3)
    out = window_partition(Tensor(x), 3)
    np.testing.assert_array_equal(out.data[0, :, 0], np.arange(9))


def test_partition_round_trip():
    x = np.random.default_rng(0).normal(size=(3, 8, 8)).astype(np.float32)
    back = window_reverse(window_partition(Tensor(x), 2), 2, 8, 8)
    np.testing.assert_array_equal(back.data, x)


def test_partition_rejects_indivisible():
    with pytest.raises(ValueError):
        window_partition(Tensor(np.zeros((1, 6, 8))), 4)


# -- wsa -----------------------------------------------------------------------


def test_single_token_windows():
    w = _unit(1, 1, 4)
    x = np.random.default_rng(1).normal(size=(4, 3, 3)).astype(np.float32)
    out = wsa(Tensor(x), w.cfg, w)
    tokens = x.reshape(4, -1).T
    expected = (tokens @ w.v.data) @ w.proj.weight.data + w.proj.bias.data
    np.testing.assert_allclose(out.data.reshape(4, -1).T, expected, rtol=1e-5, atol=1e-6)


def test_zero_query_gives_window_mean():
    w = _unit(2, 2, 4, bias_scale=0.0)
    w.q.data[:] = 0
    w.proj.weight.data = np.eye(4, dtype=np.float32)
    w.proj.bias.data[:] = 0
    x = np.random.default_rng(2).normal(size=(4, 4, 4)).astype(np.float32)
    out = wsa(Tensor(x), w.cfg, w).data
    v = np.einsum("chw,cd->dhw", x, w.v.data)
    mean = v.reshape(4, 2, 2, 2, 2).mean(axis=(2, 4))
    np.testing.assert_allclose(out, np.repeat(np.repeat(mean, 2, axis=1), 2, axis=2), rtol=1e-5, atol=1e-6)


def test_scalar_softmax_hand_value():
    w = _unit(2, 1, 1, bias_scale=0.0)
    for p in (w.q, w.k, w.v, w.proj.weight):
        p.data[:] = 1
    w.proj.bias.data[:] = 0
    tokens = Tensor(np.array([1, 0, 0, 0], dtype=np.float32).reshape(1, 1, 4, 1))
    # hide the last two tokens so the window behaves like a 2-token sequence
    mask = np.zeros((1, 4, 4))
    mask[:, :, 2:] = -1e9
    out, attn = window_attention(tokens, w, mask=mask, return_attn=True)
    e = math.e
    np.testing.assert_allclose(attn.data[0, 0, 0, :2], [e / (e + 1), 1 / (e + 1)], rtol=1e-6)
    assert abs(out.data[0, 0, 0, 0] - 0.7311) < 1e-4


def test_channel_head_mismatch_rejected():
    with pytest.raises(ValueError):
        AttentionConfig(4, 3, 8)
    w = _unit(2, 1, 4)
    with pytest.raises(ValueError):
        wsa(Tensor(np.zeros((6, 4, 4))), w.cfg, w)


def test_wsa_rejects_shifted_config():
    w = _unit(4, 1, 4, shift=2)
    with pytest.raises(ValueError):
        wsa(Tensor(np.zeros((4, 8, 8))), w.cfg, w)


def test_window_order_independence():
    w = _unit(2, 2, 4)
    x = Tensor(np.random.default_rng(3).normal(size=(1, 8, 8, 4)))
    tokens = partition_hwc(x, 2)
    perm = np.random.default_rng(4).permutation(tokens.shape[1])
    direct = window_attention(tokens, w).data
    permuted = window_attention(Tensor(tokens.data[:, perm]), w).data
    np.testing.assert_array_equal(permuted[:, np.argsort(perm)], direct)


# -- shift mask ------------------------------------------------------------------


def test_mask_zero_shift():
    assert not build_shift_mask(8, 8, 4, 0).any()


def test_mask_single_window_all_regions():
    mask = build_shift_mask(2, 2, 2, 1)
    assert mask.shape == (1, 4, 4)
    assert int((mask == -1e9).sum()) == 12
    np.testing.assert_array_equal(np.diag(mask[0]), 0)


@pytest.mark.parametrize("m", [2, 4, 8])
def test_mask_only_last_band_windows(m):
    mask = build_shift_mask(2 * m, 2 * m, m, m // 2)
    touched = [bool((mask[i] != 0).any()) for i in range(4)]
    assert touched == [False, True, True, True]


def test_mask_rejects_bad_shift():
    with pytest.raises(ValueError):
        build_shift_mask(8, 8, 4, 1)


def _region_ids(h, w, s):
    """Brute-force: which contiguous block of the unshifted map each shifted site came from."""
    ids = np.zeros((h, w), dtype=int)
    for r in range(h):
        for c in range(w):
            src_r, src_c = (r + s) % h, (c + s) % w
            ids[r, c] = 2 * int(src_r < s) + int(src_c < s)
    return ids


@pytest.mark.parametrize("h,w,m", [(4, 4, 2), (8, 8, 4), (8, 12, 4), (16, 8, 8)])
def test_mask_matches_enumeration(h, w, m):
    s = m // 2
    ids = _region_ids(h, w, s)
    mask = build_shift_mask(h, w, m, s)
    n = 0
    for wr in range(h // m):
        for wc in range(w // m):
            block = ids[wr * m : (wr + 1) * m, wc * m : (wc + 1) * m].reshape(-1)
            expected = np.where(block[:, None] != block[None, :], -1e9, 0.0)
            np.testing.assert_array_equal(mask[n], expected)
            n += 1


# -- relative position bias ------------------------------------------------------


def test_bias_index_bijective_for_m2():
    idx = relative_position_index(2)
    rows, cols = np.divmod(np.arange(4), 2)
    seen = {}
    for p1 in range(4):
        for p2 in range(4):
            off = (rows[p1] - rows[p2], cols[p1] - cols[p2])
            seen.setdefault(off, set()).add(int(idx[p1, p2]))
    assert len(seen) == 9
    assert all(len(v) == 1 for v in seen.values())
    assert sorted(next(iter(v)) for v in seen.values()) == list(range(9))


@pytest.mark.parametrize("m", [3, 4])
def test_equal_offsets_share_entries(m):
    idx = relative_position_index(m)
    rows, cols = np.divmod(np.arange(m * m), m)
    off = (rows[:, None] - rows[None, :]) * 100 + (cols[:, None] - cols[None, :])
    for value in np.unique(off):
        assert len(np.unique(idx[off == value])) == 1


# -- swsa ------------------------------------------------------------------------


def test_swsa_zero_shift_equals_wsa_bitwise():
    w = _unit(4, 2, 8)
    x = Tensor(np.random.default_rng(5).normal(size=(2, 8, 8, 8)))
    cfg0 = w.cfg.unshifted()
    a = wsa(x, cfg0, w).data
    b = swsa(x, cfg0, w).data
    assert a.tobytes() == b.tobytes()


def test_masked_weights_vanish():
    w = _unit(4, 2, 8, shift=2)
    x = Tensor(np.random.default_rng(6).normal(size=(1, 8, 8, 8)))
    _, attn = attention_unit(x, w, shift=2, return_attn=True)
    mask = build_shift_mask(8, 8, 4, 2)
    a = attn.data.reshape(1, 4, 2, 16, 16)
    masked = np.broadcast_to((mask != 0)[None, :, None], a.shape)
    assert a[masked].max() < 1e-6
    np.testing.assert_allclose(a.sum(axis=-1), 1.0, atol=1e-6)


@pytest.mark.parametrize("m,heads,c", [(2, 1, 4), (2, 2, 4), (4, 2, 8)])
def test_swsa_matches_subwindow_oracle(m, heads, c):
    w = _unit(m, heads, c, shift=m // 2, seed=m + heads)
    x = np.random.default_rng(7).normal(size=(c, 2 * m, 2 * m)).astype(np.float32)
    out = swsa(Tensor(x), w.cfg, w).data
    ref = swsa_oracle(x.astype(np.float64), w, m, m // 2)
    assert np.abs(out - ref).max() < 1e-5


# -- complexity --------------------------------------------------------------------


def test_flops_reference_values():
    assert flops_wsa(64, 64, 32, 8) == 33_554_432
    assert flops_msa(64, 64, 32) == 1_090_519_040
    assert flops_wsa(8, 8, 4, 2) == 6144


def test_single_global_window_matches_msa():
    assert flops_wsa(8, 8, 16, 8) == flops_msa(8, 8, 16)


@pytest.mark.parametrize("h,w,c,m", [(8, 8, 4, 2), (16, 8, 8, 4), (64, 64, 32, 8)])
def test_mac_counter_splits(h, w, c, m):
    unit = WindowAttention(AttentionConfig(m, 1, c), np.random.default_rng(0))
    x = Tensor(np.ones((1, h, w, c)))
    with no_grad(), mac_counter() as counter:
        attention_unit(x, unit)
    assert counter["proj"] == 4 * h * w * c * c
    assert counter["attn"] == 2 * m * m * h * w * c


# -- gradients ---------------------------------------------------------------------


@pytest.mark.parametrize("shift", [0, 2])
def test_attention_gradients(shift):
    rng = np.random.default_rng(8 + shift)
    with default_dtype(np.float64):
        w = _unit(4, 2, 4, shift=shift, seed=9)
        x = rand64(rng, (1, 8, 8, 4))
        f = projected(lambda: attention_unit(x, w, shift=shift), (1, 8, 8, 4), rng)
        params = [x, w.q, w.k, w.v, w.proj.weight, w.proj.bias, w.bias_table]
        assert max_relative_error(f, params, rng=rng) < 1e-4


def test_partition_gradient():
    rng = np.random.default_rng(10)
    x = rand64(rng, (2, 8, 4))
    with default_dtype(np.float64):
        f = projected(lambda: F.mul(window_partition(x, 2), 1.0), (8, 4, 2), rng)
        assert max_relative_error(f, [x], rng=rng) < 1e-4
