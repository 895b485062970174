import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnswin.data import (
    ImagePair,
    load_image,
    load_paired_folder,
    sample_patches,
    save_image,
    synthesize_awgn,
    synthetic_image,
    write_paired_folder,
)
from dnswin.metrics import psnr, ssim

# -- AWGN ---------------------------------------------------------------------------


def test_zero_sigma_copies():
    clean = np.random.default_rng(0).uniform(size=(3, 8, 8)).astype(np.float32)
    pair = synthesize_awgn(clean, 0.0, np.random.default_rng(1))
    np.testing.assert_array_equal(pair.noisy, clean)


def test_noise_statistics():
    clean = np.full((3, 256, 256), 0.5, dtype=np.float32)
    pair = synthesize_awgn(clean, 25.0, np.random.default_rng(2))
    n = (pair.noisy.astype(np.float64) - clean) * 255.0
    assert abs(n.mean()) < 0.5
    assert abs(n.std() / 25.0 - 1.0) < 0.02
    assert abs(psnr(pair.noisy, clean) - 20.172) < 0.1
    assert "25" in pair.provenance


def test_noise_is_not_clipped():
    pair = synthesize_awgn(np.zeros((3, 32, 32)), 25.0, np.random.default_rng(3))
    assert pair.noisy.min() < 0


def test_awgn_reproducible():
    clean = np.random.default_rng(0).uniform(size=(3, 16, 16))
    a = synthesize_awgn(clean, 10.0, np.random.default_rng(9)).noisy
    b = synthesize_awgn(clean, 10.0, np.random.default_rng(9)).noisy
    assert a.tobytes() == b.tobytes()


def test_negative_sigma_rejected():
    with pytest.raises(ValueError):
        synthesize_awgn(np.zeros((3, 4, 4)), -1.0, np.random.default_rng(0))


def test_pair_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        ImagePair(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))


def test_synthetic_image_range():
    img = synthetic_image(40, np.random.default_rng(4))
    assert img.shape == (3, 40, 40)
    assert 0.0 <= img.min() and img.max() <= 1.0
    assert img.std() > 0.01


# -- PSNR ---------------------------------------------------------------------------


def test_psnr_identical_is_inf():
    x = np.random.default_rng(0).uniform(size=(3, 4, 4))
    assert psnr(x, x) == math.inf


def test_psnr_uniform_error():
    x = np.zeros((3, 8, 8))
    assert abs(psnr(x + 0.1, x) - 20.0) < 1e-9


def test_psnr_halving_rmse():
    rng = np.random.default_rng(1)
    x, e = rng.uniform(size=(2, 3, 8, 8))
    assert abs(psnr(x + e / 2, x) - psnr(x + e, x) - 20 * math.log10(2)) < 1e-9


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 0.5), st.floats(1e-4, 0.5))
def test_psnr_symmetric_and_decreasing(e1, e2):
    x = np.zeros((1, 4, 4))
    assert psnr(x, x + e1) == psnr(x + e1, x)
    if e1 < e2:
        assert psnr(x + e1, x) > psnr(x + e2, x)


# -- SSIM ---------------------------------------------------------------------------


def ssim_reference(a, b, data_range=1.0):
    """Loop over every window position and compute the local statistics directly (float64)."""
    x = np.asarray(a, dtype=np.float64).mean(axis=0)
    y = np.asarray(b, dtype=np.float64).mean(axis=0)
    ax = np.arange(11) - 5.0
    g = np.exp(-(ax**2) / (2 * 1.5**2))
    w = np.outer(g, g) / np.outer(g, g).sum()
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    vals = []
    for i in range(x.shape[0] - 10):
        for j in range(x.shape[1] - 10):
            px, py = x[i : i + 11, j : j + 11], y[i : i + 11, j : j + 11]
            mx, my = (w * px).sum(), (w * py).sum()
            vx = (w * (px - mx) ** 2).sum()
            vy = (w * (py - my) ** 2).sum()
            cxy = (w * (px - mx) * (py - my)).sum()
            vals.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def test_ssim_identity_exact():
    x = np.random.default_rng(0).uniform(size=(3, 16, 16))
    assert ssim(x, x) == 1.0


def test_ssim_inverted_below_one():
    x = synthetic_image(24, np.random.default_rng(1))
    assert ssim(x, 1.0 - x) < 1.0


@pytest.mark.parametrize("seed", range(3))
def test_ssim_matches_reference(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(size=(3, 20, 17))
    b = np.clip(a + rng.normal(0, 0.1, size=a.shape), 0, 1)
    assert abs(ssim(a, b) - ssim_reference(a, b)) < 1e-6
    assert abs(ssim(a, b) - ssim(b, a)) < 1e-9


def test_ssim_too_small_rejected():
    with pytest.raises(ValueError):
        ssim(np.zeros((3, 10, 20)), np.zeros((3, 10, 20)))


# -- patches ------------------------------------------------------------------------


def test_full_size_patch():
    rng = np.random.default_rng(0)
    pair = synthesize_awgn(rng.uniform(size=(3, 8, 8)), 5.0, rng)
    crops = sample_patches(pair, 8, 3, np.random.default_rng(1))
    assert len(crops) == 3
    for c in crops:
        np.testing.assert_array_equal(c.noisy, pair.noisy)
        np.testing.assert_array_equal(c.clean, pair.clean)


def test_crops_in_bounds_and_aligned():
    h, w = 13, 9
    idx = np.arange(h * w, dtype=np.float64).reshape(1, h, w)
    pair = ImagePair(idx.copy(), -idx)
    for c in sample_patches(pair, 4, 10_000, np.random.default_rng(2)):
        assert c.clean.shape == (1, 4, 4)
        np.testing.assert_array_equal(c.noisy, -c.clean)
        top = int(c.noisy[0, 0, 0])
        i, j = divmod(top, w)
        assert i + 4 <= h and j + 4 <= w


def test_crops_deterministic():
    pair = ImagePair(np.random.default_rng(0).uniform(size=(3, 16, 16)), np.zeros((3, 16, 16)))
    a = sample_patches(pair, 5, 6, np.random.default_rng(3))
    b = sample_patches(pair, 5, 6, np.random.default_rng(3))
    assert all(x.noisy.tobytes() == y.noisy.tobytes() for x, y in zip(a, b))


def test_oversize_patch_rejected():
    with pytest.raises(ValueError):
        sample_patches(ImagePair(np.zeros((3, 4, 4)), np.zeros((3, 4, 4))), 5, 1, np.random.default_rng(0))


# -- files --------------------------------------------------------------------------


def test_png_round_trip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, size=(3, 5, 7)) / 255.0
    save_image(tmp_path / "a.png", img)
    np.testing.assert_allclose(load_image(tmp_path / "a.png"), img, atol=1e-6)


def test_pgm_is_replicated_grey(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, size=(1, 5, 7)) / 255.0
    save_image(tmp_path / "a.pgm", np.repeat(img, 3, axis=0))
    back = load_image(tmp_path / "a.pgm")
    assert back.shape == (3, 5, 7)
    np.testing.assert_allclose(back[0], img[0], atol=1e-6)
    np.testing.assert_array_equal(back[0], back[2])


def test_paired_folder(tmp_path):
    rng = np.random.default_rng(0)
    pairs = [synthesize_awgn(synthetic_image(16, rng), 10.0, rng) for _ in range(2)]
    write_paired_folder(tmp_path, pairs, names=["b", "a"])
    loaded = load_paired_folder(tmp_path)
    assert [p.provenance.endswith(f"{n}.png") for p, n in zip(loaded, "ab")] == [True, True]
    np.testing.assert_allclose(loaded[1].clean, pairs[0].clean, atol=1 / 255)


def test_paired_folder_lists_orphans(tmp_path):
    rng = np.random.default_rng(0)
    write_paired_folder(tmp_path, [synthesize_awgn(synthetic_image(8, rng), 5.0, rng)], names=["x"])
    save_image(tmp_path / "noisy" / "lonely.png", np.zeros((3, 8, 8)))
    save_image(tmp_path / "clean" / "stray.png", np.zeros((3, 8, 8)))
    with pytest.raises(ValueError, match="lonely.*stray"):
        load_paired_folder(tmp_path)
