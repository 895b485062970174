import numpy as np
import pytest

from dnswin import functional as F
from dnswin.gradcheck import max_relative_error, projected, rand64
from dnswin.residual import ResidualBlock, residual_block
from dnswin.tensor import Tensor, default_dtype, no_grad
from dnswin.wavelet import SubbandSet
from dnswin.wswt import WSWTBlock, WSWTStage, hf_swsa_block, lf_wsa_block, wswt_stage, zero_stage_weights


def _zero(module):
    for name, p in module.named_parameters():
        if "norm" not in name:
            p.data = np.zeros_like(p.data)


# -- residual block ---------------------------------------------------------------


def test_rb_zero_weights_is_identity():
    rb = ResidualBlock(4, 4, np.random.default_rng(0))
    _zero(rb)
    x = np.random.default_rng(1).normal(size=(4, 6, 6)).astype(np.float32)
    np.testing.assert_array_equal(residual_block(Tensor(x), rb).data, x)


def test_rb_preserves_shape():
    rb = ResidualBlock(32, 32, np.random.default_rng(0))
    assert rb(Tensor(np.zeros((32, 16, 16)))).shape == (32, 16, 16)


def test_rb_channel_change():
    rb = ResidualBlock(8, 4, np.random.default_rng(0))
    assert rb(Tensor(np.zeros((2, 8, 6, 6)))).shape == (2, 4, 6, 6)


def test_rb_channel_mismatch_rejected():
    rb = ResidualBlock(4, 4, np.random.default_rng(0))
    with pytest.raises(ValueError):
        rb(Tensor(np.zeros((3, 6, 6))))


@pytest.mark.parametrize("c_out", [3, 5])
def test_rb_gradient(c_out):
    rng = np.random.default_rng(2)
    with default_dtype(np.float64):
        rb = ResidualBlock(3, c_out, rng)
        x = rand64(rng, (2, 3, 6, 6))
        f = projected(lambda: rb(x), (2, c_out, 6, 6), rng)
        assert max_relative_error(f, [x] + rb.parameters(), rng=rng) < 1e-4


# -- blocks -----------------------------------------------------------------------


@pytest.mark.parametrize("shifted", [False, True])
def test_block_zero_weights_is_identity(shifted):
    blk = WSWTBlock(6, 2, 4, 4.0, np.random.default_rng(0), shifted=shifted)
    _zero(blk)
    x = np.random.default_rng(1).normal(size=(6, 8, 8)).astype(np.float32)
    run = hf_swsa_block if shifted else lf_wsa_block
    np.testing.assert_array_equal(run(Tensor(x), blk).data, x)


@pytest.mark.parametrize("shifted", [False, True])
def test_block_shape_and_liveness(shifted):
    blk = WSWTBlock(6, 2, 4, 4.0, np.random.default_rng(0), shifted=shifted)
    x = np.random.default_rng(1).normal(size=(6, 8, 8)).astype(np.float32)
    y = (hf_swsa_block if shifted else lf_wsa_block)(Tensor(x), blk).data
    assert y.shape == x.shape
    assert np.linalg.norm(y - x) > 0


def test_block_kinds():
    rng = np.random.default_rng(0)
    assert WSWTBlock(4, 1, 4, 4.0, rng, shifted=True).shift == 2
    assert WSWTBlock(4, 1, 4, 4.0, rng, shifted=False).shift == 0
    hf = WSWTBlock(4, 1, 4, 4.0, rng, shifted=True)
    assert hf.attn1.cfg.shift == 0


def test_lf_equals_hf_with_shift_forced_to_zero():
    blk = WSWTBlock(4, 2, 2, 4.0, np.random.default_rng(3), shifted=True)
    x = Tensor(np.random.default_rng(4).normal(size=(2, 4, 8, 8)))
    lf = lf_wsa_block(x, blk).data
    forced = F.transpose(blk(F.transpose(x, (0, 2, 3, 1)), shift=0), (0, 3, 1, 2)).data
    assert lf.tobytes() == forced.tobytes()
    assert not np.array_equal(hf_swsa_block(x, blk).data, lf)


@pytest.mark.parametrize("shifted", [False, True])
def test_block_gradient(shifted):
    rng = np.random.default_rng(5)
    with default_dtype(np.float64):
        blk = WSWTBlock(4, 2, 2, 2.0, rng, shifted=shifted)
        x = rand64(rng, (1, 4, 4, 4))
        run = hf_swsa_block if shifted else lf_wsa_block
        f = projected(lambda: run(x, blk), (1, 4, 4, 4), rng)
        assert max_relative_error(f, [x] + blk.parameters(), max_coords=12, rng=rng) < 1e-4


# -- stage ------------------------------------------------------------------------


def test_stage_reduces_to_positional_shift_with_zero_weights():
    stage = WSWTStage(4, 8, 8, 2, 2, np.random.default_rng(0), lf_depth=1, hf_depth=1)
    zero_stage_weights(stage)
    x = np.random.default_rng(1).integers(-4, 5, size=(4, 8, 8)).astype(np.float32)
    out = wswt_stage(Tensor(x), stage).data
    np.testing.assert_allclose(out, x + stage.pos.data, atol=1e-6)


def test_stage_shape_and_liveness():
    stage = WSWTStage(64, 32, 32, 8, 2, np.random.default_rng(0), lf_depth=1, hf_depth=1)
    x = np.random.default_rng(1).normal(size=(64, 32, 32)).astype(np.float32)
    with no_grad():
        y = stage(Tensor(x)).data
    assert y.shape == x.shape
    assert np.linalg.norm(y - x) > 0


def test_stage_rejects_bad_geometry():
    with pytest.raises(ValueError, match="6x6"):
        WSWTStage(4, 12, 12, 4, 1, np.random.default_rng(0))
    with pytest.raises(ValueError, match="even"):
        WSWTStage(4, 7, 8, 1, 1, np.random.default_rng(0))
    stage = WSWTStage(4, 8, 8, 2, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        stage(Tensor(np.zeros((4, 16, 16))))


def test_hf_shift_disabled_when_window_covers_subband():
    rng = np.random.default_rng(0)
    assert WSWTStage(4, 8, 8, 2, 1, rng).hf_blocks[0].shift == 1
    assert WSWTStage(4, 8, 8, 4, 1, rng).hf_blocks[0].shift == 0
    assert WSWTStage(4, 8, 8, 2, 1, rng, sliding=False).hf_blocks[0].shift == 0


def test_hh_impulse_never_reaches_ll_branch():
    stage = WSWTStage(4, 8, 8, 2, 2, np.random.default_rng(6), lf_depth=1, hf_depth=1)
    x = Tensor(np.random.default_rng(7).normal(size=(4, 8, 8)))
    with no_grad():
        s = stage.decompose(x)
        base = stage.process_subbands(s)
        hh = s.hh.data.copy()
        hh[1, 2, 3] += 1.0
        bumped = stage.process_subbands(SubbandSet(s.ll, s.lh, s.hl, Tensor(hh)))
    assert base.ll.data.tobytes() == bumped.ll.data.tobytes()
    assert not np.array_equal(base.lh.data, bumped.lh.data)


def test_stage_gradient():
    rng = np.random.default_rng(8)
    with default_dtype(np.float64):
        stage = WSWTStage(4, 8, 8, 2, 2, rng, lf_depth=1, hf_depth=1, mlp_ratio=2.0)
        x = rand64(rng, (4, 8, 8))
        f = projected(lambda: stage(x), (4, 8, 8), rng)
        picks = [stage.pos, stage.rb_hh.conv1.weight, stage.lf_blocks[0].attn1.q,
                 stage.hf_blocks[0].attn2.bias_table, stage.hf_blocks[0].mlp2.fc1.weight,
                 stage.lf_blocks[0].norm3.weight]
        assert max_relative_error(f, [x] + picks, max_coords=12, rng=rng) < 1e-4
