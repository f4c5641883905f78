import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import block_diag

from bdris.channel_model import (BdRisConfig, ChannelRealization, InvalidParameterError,
                                 PathLossParams, blocks_from_theta, cascade, db_to_linear,
                                 dbm_to_watt, draw_channels, effective_downlink, path_loss,
                                 surface_matrix, theta_from_blocks)
from bdris.linalg import haar_unitary, vec

from .conftest import crandn


def test_config_derived_sizes():
    cfg = BdRisConfig(M=32, group_size=2, tile_size=4, N=2, K=2)
    assert (cfg.num_groups, cfg.num_tiles, cfg.pattern_length) == (16, 4, 16)
    assert cfg.training_overhead == 32


@pytest.mark.parametrize("kw", [dict(M=6, group_size=4), dict(M=8, group_size=2, tile_size=3),
                                dict(M=0), dict(M=4, N=0), dict(M=4, group_size=1.5)])
def test_config_rejects_inconsistent_sizes(kw):
    with pytest.raises(InvalidParameterError):
        BdRisConfig(**kw)


def test_hadamard_compatibility():
    assert BdRisConfig(M=16, group_size=4, tile_size=1).hadamard_compatible()
    assert not BdRisConfig(M=12, group_size=4, tile_size=1).hadamard_compatible()


def test_path_loss_matches_direct_formula():
    lam = 299792458.0 / 2.4e9
    rho = 4 ** 3 * np.pi ** 4 * 30 ** 2.5 * 10 ** 2.5 / lam ** 4
    assert path_loss(PathLossParams()) == pytest.approx(rho, rel=1e-12)


def test_path_loss_sector_ratio():
    r = path_loss(PathLossParams(sectors=4)) / path_loss(PathLossParams(sectors=2))
    assert r == pytest.approx((1 - np.cos(np.pi / 4)) ** 2, rel=1e-12)
    assert r == pytest.approx(0.0858, abs=5e-5)


@pytest.mark.parametrize("name", ["d1", "d2", "freq", "gain_t"])
def test_path_loss_rejects_nonpositive(name):
    with pytest.raises(InvalidParameterError):
        PathLossParams(**{name: 0.0})


def test_unit_conversions():
    assert db_to_linear(0.0) == 1.0
    assert dbm_to_watt(-100.0) == pytest.approx(1e-13)
    assert dbm_to_watt(30.0) == pytest.approx(1.0)


def test_draw_is_deterministic():
    cfg = BdRisConfig(M=8, group_size=2, N=2, K=2)
    a = draw_channels(cfg, PathLossParams(), 1.0, (7, 3))
    b = draw_channels(cfg, PathLossParams(), 1.0, (7, 3))
    c = draw_channels(cfg, PathLossParams(), 1.0, (7, 4))
    assert np.array_equal(a.G, b.G) and np.array_equal(a.H, b.H)
    assert not np.array_equal(a.G, c.G)


def test_nlos_second_moment_matches_link_scale():
    cfg = BdRisConfig(M=250, N=20, K=20)
    p = PathLossParams()
    ch = draw_channels(cfg, p, 0.0, 11)
    scale = path_loss(p) ** -0.5
    for a in (ch.G, ch.H):
        assert a.size >= 5000
    g = np.concatenate([draw_channels(cfg, p, 0.0, s).G.ravel() for s in range(20)])
    assert g.size >= 1e5
    assert np.mean(np.abs(g) ** 2) == pytest.approx(scale, rel=0.02)
    assert abs(np.mean(g)) < 0.02 * np.sqrt(scale)


def test_large_rician_factor_is_deterministic_los():
    cfg = BdRisConfig(M=8, N=2, K=2)
    ch = draw_channels(cfg, PathLossParams(), 1e6, 3)
    amp = path_loss(PathLossParams()) ** -0.25
    # LoS parts have unit-modulus entries
    assert np.allclose(np.abs(ch.G) / amp, 1.0, atol=5e-3)
    assert np.allclose(np.abs(ch.H) / amp, 1.0, atol=5e-3)


def test_negative_rician_factor_rejected():
    with pytest.raises(InvalidParameterError):
        draw_channels(BdRisConfig(M=2), PathLossParams(), -1.0, 0)


def test_cascade_hand_example():
    cfg = BdRisConfig(M=2, group_size=2, N=1, K=1)
    casc = cascade(ChannelRealization(G=np.array([[1.0, 0.0]]), H=np.array([[1.0], [0.0]])), cfg)
    assert casc.Q_bar.ravel().tolist() == [1, 0, 0, 0]


def test_cascade_single_element_groups_are_conventional_columns(rng):
    cfg = BdRisConfig(M=4, N=3, K=1)
    G, H = crandn(rng, 3, 4), crandn(rng, 4, 1)
    casc = cascade(ChannelRealization(G=G, H=H), cfg)
    assert np.allclose(casc.Q, G * H[:, 0], atol=1e-14)


@given(st.sampled_from([(4, 2, 1), (8, 2, 2), (8, 4, 1), (12, 3, 2), (6, 1, 3)]),
       st.integers(1, 3), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_cascade_matches_brute_force_surface(dims, N, K, seed):
    M, mb, gb = dims
    rng = np.random.default_rng(seed)
    cfg = BdRisConfig(M=M, group_size=mb, tile_size=gb, N=N, K=K)
    G, H = crandn(rng, N, M), crandn(rng, M, K)
    casc = cascade(ChannelRealization(G=G, H=H), cfg)
    # per-group patterns through Q_bar
    groups = [haar_unitary(rng, mb) for _ in range(cfg.num_groups)]
    direct = G @ block_diag(*groups) @ H
    via_bar = casc.Q_bar @ np.concatenate([vec(b) for b in groups])
    assert np.max(np.abs(via_bar - vec(direct))) <= 1e-12 * max(1, np.abs(direct).max())
    # tile patterns through Q agree with repeated group patterns through Q_bar
    tiles = [haar_unitary(rng, mb) for _ in range(cfg.num_tiles)]
    rep = [t for t in tiles for _ in range(gb)]
    assert np.allclose(casc.Q @ np.concatenate([vec(t) for t in tiles]),
                       casc.Q_bar @ np.concatenate([vec(b) for b in rep]), atol=1e-12)
    # tile columns are sums of their group columns
    n = mb * mb
    for i in range(cfg.num_tiles):
        s = sum(casc.Q_bar[:, (i * gb + j) * n:(i * gb + j + 1) * n] for j in range(gb))
        assert np.allclose(casc.Q[:, i * n:(i + 1) * n], s, atol=1e-13)


@given(st.integers(0, 2 ** 32 - 1))
def test_effective_downlink_matches_reciprocal_surface(seed):
    rng = np.random.default_rng(seed)
    cfg = BdRisConfig(M=8, group_size=2, tile_size=2, N=3, K=2)
    G, H = crandn(rng, 3, 8), crandn(rng, 8, 2)
    casc = cascade(ChannelRealization(G=G, H=H), cfg)
    blocks = [haar_unitary(rng, 2) for _ in range(cfg.num_tiles)]
    theta = theta_from_blocks(blocks)
    direct = H.T @ surface_matrix(blocks, 2) @ G.T
    assert np.max(np.abs(effective_downlink(casc, theta) - direct)) <= 1e-12
    a = np.exp(0.7j)
    assert np.allclose(effective_downlink(casc, a * theta), a * direct, atol=1e-12)


def test_effective_downlink_identity_pattern(rng):
    cfg = BdRisConfig(M=1, N=2, K=3)
    casc = cascade(ChannelRealization(G=crandn(rng, 2, 1), H=crandn(rng, 1, 3)), cfg)
    hd = effective_downlink(casc, np.array([1.0]))
    assert np.array_equal(hd, casc.Q.reshape(3, 2))
    assert hd.shape == (3, 2)


def test_effective_downlink_rejects_bad_length(rng):
    with pytest.raises(InvalidParameterError):
        effective_downlink(np.zeros((4, 4)), np.zeros(3), 2, 2)
    with pytest.raises(InvalidParameterError):
        effective_downlink(np.zeros((4, 4)), np.zeros(4))


def test_theta_block_roundtrip(rng):
    blocks = [crandn(rng, 3, 3) for _ in range(4)]
    back = blocks_from_theta(theta_from_blocks(blocks), 3)
    assert all(np.array_equal(a, b) for a, b in zip(blocks, back))
    with pytest.raises(InvalidParameterError):
        blocks_from_theta(np.zeros(5), 2)


def test_cascade_shape_mismatch():
    with pytest.raises(InvalidParameterError):
        cascade(ChannelRealization(G=np.zeros((2, 4)), H=np.zeros((4, 1))),
                BdRisConfig(M=4, N=2, K=2))
