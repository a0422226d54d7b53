"""Constellation normalization, bit mapping, the differentiable chain, BCE,
and the training loop plumbing."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import finite_difference_grad, max_rel_error
from ofdmlink import constellation as cn
from ofdmlink import demapper as dm
from ofdmlink import diffpipe
from ofdmlink import numgrad as ng
from ofdmlink import ofdm
from ofdmlink import training as tr
from ofdmlink.channel import generate_batch, MobilityProfile
from ofdmlink.neuralrx import init_params, forward, r2c, run_inference
from ofdmlink.pilots import make_pattern


# ---------------------------------------------------------------------------
# constellation normalization (centering + unit power)

def test_qam16_already_normalized():
    pts = cn.qam_points(4)
    np.testing.assert_allclose(cn.normalize_points(pts), pts, atol=1e-12)
    assert abs(pts.mean()) < 1e-12
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_normalization_shift_invariance(rng):
    pts = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    shifted = pts + (3.7 - 2.2j)
    np.testing.assert_allclose(cn.normalize_points(pts), cn.normalize_points(shifted), atol=1e-12)


def test_normalization_scale_invariance(rng):
    pts = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    np.testing.assert_allclose(cn.normalize_points(pts), cn.normalize_points(2.5 * pts), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_normalized_output_contract(seed):
    r = np.random.default_rng(seed)
    pts = r.standard_normal(8) + 1j * r.standard_normal(8)
    out = cn.normalize_points(pts)
    assert abs(out.mean()) < 1e-9
    assert np.mean(np.abs(out) ** 2) == pytest.approx(1.0, abs=1e-9)


def test_degenerate_constellation_rejected():
    pts = np.full(4, 1.0 + 1.0j)
    with pytest.raises(cn.DegenerateConstellationError):
        cn.normalize_points(pts)
    with pytest.raises(cn.DegenerateConstellationError):
        cn.normalize_raw(ng.constant(cn.points_to_raw(pts)))


def test_diff_normalization_matches_numpy(rng):
    pts = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    via_graph = cn.raw_to_points(cn.normalize_raw(ng.constant(cn.points_to_raw(pts))).values)
    np.testing.assert_allclose(via_graph, cn.normalize_points(pts), atol=1e-12)


def test_normalization_gradient(rng):
    raw = rng.standard_normal((8, 2))
    weights = rng.standard_normal((8, 2))

    def build(x):
        return ng.array_sum(ng.mul(cn.normalize_raw(x), ng.constant(weights)))

    from conftest import check_grads
    check_grads(build, [raw], tol=1e-5)


# ---------------------------------------------------------------------------
# bit mapping

def test_map_bits_bpsk_first_point():
    pts = cn.qam_points(1)
    out = cn.map_bits(np.array([0, 1, 0]), pts)
    np.testing.assert_array_equal(out, [pts[0], pts[1], pts[0]])


def test_qam_gray_labeling_structure():
    pts = cn.qam_points(4)
    labels = cn.point_labels(4)
    # neighbors on each axis differ in exactly one label bit
    for i in range(16):
        for j in range(16):
            d = pts[i] - pts[j]
            if abs(d) == pytest.approx(2 / np.sqrt(10), abs=1e-9):
                assert np.sum(labels[i] != labels[j]) == 1


def test_map_bits_average_power(rng):
    pts = cn.qam_points(4)
    bits = rng.integers(0, 2, size=100_000 * 4)
    symbols = cn.map_bits(bits, pts)
    assert np.mean(np.abs(symbols) ** 2) == pytest.approx(1.0, abs=1e-2)


def test_map_demap_round_trip_at_zero_noise(rng):
    pts = cn.qam_points(4)
    bits = rng.integers(0, 2, size=32 * 4)
    symbols = cn.map_bits(bits, pts)
    out = dm.gaussian_demap(symbols.reshape(-1, 1), np.ones(32), 0.0, 1e-9, pts,
                            np.ones((32, 1), bool))
    hard = (out.values[:, 0, :] > 0).astype(np.uint8).reshape(-1)
    np.testing.assert_array_equal(hard, bits)


def test_bits_to_indices_msb_first():
    idx = cn.bits_to_indices(np.array([1, 0, 1, 1]), 2)
    np.testing.assert_array_equal(idx, [2, 3])


# ---------------------------------------------------------------------------
# differentiable chain vs the plain numpy pipeline

@pytest.mark.parametrize("cp", [0, 2])
def test_diff_chain_matches_numpy_pipeline(cp, rng):
    cfg = ofdm.GridConfig(n_subcarriers=8, n_symbols=14, cp_length=cp)
    pattern = make_pattern("2P", cfg)
    pts = cn.qam_points(4)
    batch, n_data = 3, pattern.data_indices.size
    bits = rng.integers(0, 2, size=(batch, n_data, 4))
    profile = MobilityProfile(30.0, 30.0, n_subcarriers=8)
    taps, _ = generate_batch(profile, cfg.n_samples, batch, seed=7, n_taps=3)
    noise = 0.1 * (rng.standard_normal((batch, cfg.n_samples))
                   + 1j * rng.standard_normal((batch, cfg.n_samples)))

    view = ng.constant(cn.points_to_raw(pts))
    z_diff = r2c(diffpipe.transmit_frames(bits, view, pattern, cfg, taps, noise).values)

    for b in range(batch):
        vec_grid = pattern.values.flatten(order="F").copy()
        vec_grid[pattern.data_indices] = cn.map_bits(bits[b].reshape(-1), pts)
        grid = ofdm.ResourceGrid(ofdm.unvec(vec_grid, cfg), pattern.data_mask)
        x = ofdm.modulate(grid, cfg)
        y = ofdm.apply_channel(x, taps[b]) + noise[b]
        np.testing.assert_allclose(z_diff[b], ofdm.demodulate(y, cfg), atol=1e-9)


def test_diff_chain_gradient_reaches_constellation(rng):
    cfg = ofdm.GridConfig(n_subcarriers=4, n_symbols=2, cp_length=0)
    pattern = make_pattern("none", cfg)
    bits = rng.integers(0, 2, size=(2, 8, 2))
    taps = np.ones((2, cfg.n_samples, 1), dtype=complex)
    raw = cn.points_to_raw(cn.qam_points(2))

    def build(x):
        z = diffpipe.transmit_frames(bits, cn.normalize_raw(x), pattern, cfg, taps, None)
        return ng.array_sum(ng.cabs2(z))

    from conftest import check_grads
    check_grads(build, [raw], tol=1e-5)


# ---------------------------------------------------------------------------
# total BCE

def _llr_grid(cfg, values):
    return ng.constant(values)


def test_bce_all_zero_llrs_is_bits_per_frame_exactly():
    cfg = ofdm.GridConfig(n_subcarriers=72, n_symbols=14, cp_length=0)
    pattern = make_pattern("none", cfg)
    bits = np.random.default_rng(0).integers(0, 2, size=(5, 1008, 4))
    llrs = ng.constant(np.zeros((5, 72, 14, 4)))
    loss = diffpipe.total_bce(llrs, bits, pattern, cfg)
    assert float(loss.values) == 4.0 * 1008.0  # log2(2) per data bit, exact


def test_bit_sign_grid_matches_data_index_order(rng):
    cfg = ofdm.GridConfig(n_subcarriers=8, n_symbols=14, cp_length=0)
    pattern = make_pattern("1P", cfg)
    n_data = pattern.data_indices.size
    bits = rng.integers(0, 2, size=(1, n_data, 4))
    signs = diffpipe.bit_sign_grid(bits, pattern, cfg)
    for k, r in enumerate(pattern.data_indices):
        sc, sym = r % 8, r // 8
        np.testing.assert_array_equal(signs[0, sc, sym], 2.0 * bits[0, k] - 1.0)
    assert (signs[0][pattern.pilot_mask] == 0).all()


def test_bce_pilot_positions_do_not_contribute(rng):
    cfg = ofdm.GridConfig(n_subcarriers=8, n_symbols=14, cp_length=0)
    pattern = make_pattern("1P", cfg)
    n_data = pattern.data_indices.size
    bits = rng.integers(0, 2, size=(2, n_data, 4))
    llrs_a = rng.standard_normal((2, 8, 14, 4))
    llrs_b = llrs_a.copy()
    # wreck the pilot-RE LLRs; the loss must not move
    pilot_grid_mask = pattern.pilot_mask
    llrs_b[:, pilot_grid_mask, :] += 100.0
    la = diffpipe.total_bce(ng.constant(llrs_a), bits, pattern, cfg)
    lb = diffpipe.total_bce(ng.constant(llrs_b), bits, pattern, cfg)
    assert float(la.values) == float(lb.values)


def test_bce_confident_correct_goes_to_zero(rng):
    cfg = ofdm.GridConfig(n_subcarriers=4, n_symbols=2, cp_length=0)
    pattern = make_pattern("none", cfg)
    bits = rng.integers(0, 2, size=(1, 8, 2))
    signs = diffpipe.bit_sign_grid(bits, pattern, cfg)
    loss = diffpipe.total_bce(ng.constant(60.0 * signs), bits, pattern, cfg)
    assert float(loss.values) < 1e-12


def test_bce_single_bit_value():
    cfg = ofdm.GridConfig(n_subcarriers=1, n_symbols=1, cp_length=0)
    pattern = make_pattern("none", cfg)
    bits = np.array([[[1]]])
    loss = diffpipe.total_bce(ng.constant(np.full((1, 1, 1, 1), 2.0)), bits, pattern, cfg)
    assert float(loss.values) == pytest.approx(math.log2(1 + math.exp(-2.0)), abs=1e-12)


def test_bce_rejects_nonfinite_llrs(rng):
    cfg = ofdm.GridConfig(n_subcarriers=4, n_symbols=2, cp_length=0)
    pattern = make_pattern("none", cfg)
    bits = rng.integers(0, 2, size=(1, 8, 2))
    bad = np.zeros((1, 4, 2, 2))
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="finite"):
        diffpipe.total_bce(ng.constant(bad), bits, pattern, cfg)


def test_bce_gradient_wrt_constellation_tiny_e2e(rng):
    """Finite differences through bits -> map -> OFDM -> channel -> receiver -> BCE."""
    cfg = ofdm.GridConfig(n_subcarriers=4, n_symbols=2, cp_length=0)
    pattern = make_pattern("none", cfg)
    rx_cfg = tr.TrainingConfig(scheme="gs", n_subcarriers=4, n_symbols=2, width=8,
                               bits_per_re=4).rx_config()
    params = init_params(rx_cfg, seed=11, zero_output=False, trainable=False)
    bits = rng.integers(0, 2, size=(2, 8, 4))
    profile = MobilityProfile(50.0, 50.0, n_subcarriers=4)
    taps, _ = generate_batch(profile, cfg.n_samples, 2, seed=3, n_taps=2)
    noise = 0.05 * (rng.standard_normal((2, cfg.n_samples))
                    + 1j * rng.standard_normal((2, cfg.n_samples)))
    raw0 = cn.points_to_raw(cn.qam_points(4)) + 0.05 * rng.standard_normal((16, 2))

    def loss_value(arrays):
        x = ng.constant(arrays[0])
        z = diffpipe.transmit_frames(bits, cn.normalize_raw(x), pattern, cfg, taps, noise)
        llrs = forward(z, params, rx_cfg)
        return float(diffpipe.total_bce(llrs, bits, pattern, cfg).values)

    raw_leaf = ng.leaf(raw0.copy())
    z = diffpipe.transmit_frames(bits, cn.normalize_raw(raw_leaf), pattern, cfg, taps, noise)
    llrs = forward(z, params, rx_cfg)
    ng.backward(diffpipe.total_bce(llrs, bits, pattern, cfg))
    numeric = finite_difference_grad(loss_value, [raw0], 0)
    assert max_rel_error(raw_leaf.grad, numeric) < 1e-4


# ---------------------------------------------------------------------------
# training loop

def test_frozen_transmitter_constellation_untouched(tmp_path):
    cfg = tr.TrainingConfig(scheme="nrx-cp", iterations=3, batch_frames=2, width=8,
                            n_subcarriers=8, channel="awgn", esn0_db=10.0,
                            out_dir=str(tmp_path), seed=5, checkpoint_every=0)
    qam_raw = cn.points_to_raw(cn.qam_points(4))
    result = tr.train(cfg)
    const, _, _, meta = tr.load_checkpoint(result.checkpoint_path)
    np.testing.assert_array_equal(const.raw.values, qam_raw)
    assert const.raw.grad is None
    assert meta["scheme"] == "nrx-cp"


def test_gs_training_reduces_loss_smoke(tmp_path):
    cfg = tr.TrainingConfig(scheme="gs", iterations=250, batch_frames=8, width=8,
                            n_subcarriers=16, n_symbols=4, channel="awgn", esn0_db=10.0,
                            out_dir=str(tmp_path), seed=7, checkpoint_every=0)
    result = tr.train(cfg)
    assert result.losses[0] == 4.0 * 16 * 4  # zero-init output conv
    assert min(result.losses) < 0.8 * result.losses[0]


def test_checkpoint_reload_bit_identical_inference(tmp_path, rng):
    cfg = tr.TrainingConfig(scheme="gs", iterations=4, batch_frames=2, width=8,
                            n_subcarriers=8, channel="awgn", esn0_db=8.0,
                            out_dir=str(tmp_path), seed=9, checkpoint_every=0)
    result = tr.train(cfg)
    const, params, rx_cfg, _ = tr.load_checkpoint(result.checkpoint_path)
    const2, params2, rx_cfg2, _ = tr.load_checkpoint(result.checkpoint_path)
    z = rng.standard_normal((8, 14)) + 1j * rng.standard_normal((8, 14))
    a = run_inference(z, params, rx_cfg)
    b = run_inference(z, params2, rx_cfg2)
    assert np.array_equal(a, b)
    assert np.array_equal(const.raw.values, const2.raw.values)


def test_training_divergence_aborts_with_checkpoint(tmp_path, monkeypatch):
    cfg = tr.TrainingConfig(scheme="gs", iterations=5, batch_frames=2, width=8,
                            n_subcarriers=8, channel="awgn", esn0_db=10.0,
                            out_dir=str(tmp_path), seed=11, checkpoint_every=0)

    calls = {"n": 0}
    real_step = tr.training_step

    def poisoned(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 3:
            return ng.constant(np.array(np.nan))
        return real_step(*args, **kwargs)

    monkeypatch.setattr(tr, "training_step", poisoned)
    with pytest.raises(tr.TrainingDivergedError) as err:
        tr.train(cfg)
    assert err.value.checkpoint_path.exists()
    const, params, _, meta = tr.load_checkpoint(err.value.checkpoint_path)
    assert meta["iteration"] == 2  # last completed iteration


def test_loss_trace_format(tmp_path):
    cfg = tr.TrainingConfig(scheme="gs", iterations=3, batch_frames=2, width=8,
                            n_subcarriers=8, channel="awgn", esn0_db=10.0,
                            out_dir=str(tmp_path), seed=13, checkpoint_every=0)
    result = tr.train(cfg)
    lines = result.trace_path.read_text().strip().splitlines()
    assert lines[0] == "iteration,loss,lr,seed"
    assert len(lines) == 4
    it, loss, lr, seed = lines[1].split(",")
    assert int(it) == 0 and float(loss) > 0 and float(lr) == 1e-3 and int(seed) == 13


def test_training_config_validation():
    with pytest.raises(ValueError, match="unknown trainable scheme"):
        tr.TrainingConfig(scheme="lmmse")
    with pytest.raises(ValueError, match="positive"):
        tr.TrainingConfig(scheme="gs", iterations=0)
