import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bdris import beam_mimo
from bdris.channel_model import (BdRisConfig, ChannelRealization, InvalidParameterError,
                                 blocks_from_theta, cascade, effective_downlink,
                                 theta_from_blocks)
from bdris.linalg import gram_deviation, haar_unitary

from .conftest import crandn


def _Q(rng, N=2, K=2, M=8, mb=2, gb=1):
    cfg = BdRisConfig(M=M, group_size=mb, tile_size=gb, N=N, K=K)
    return cascade(ChannelRealization(G=crandn(rng, N, M), H=crandn(rng, M, K)), cfg).Q


def test_single_tile_quadratic_is_full_gram(rng):
    Q = _Q(rng, M=2, mb=2)
    V = beam_mimo.build_quadratics(Q, 2)
    assert V.shape == (1, 1, 4, 4)
    assert np.allclose(V[0, 0], Q.T @ Q.conj())


@given(st.integers(0, 2 ** 32 - 1))
def test_quadratic_identity(seed):
    rng = np.random.default_rng(seed)
    Q = _Q(rng, M=8, mb=2)
    V = beam_mimo.build_quadratics(Q, 2)
    for i in range(V.shape[0]):
        assert np.linalg.norm(V[i, i] - V[i, i].conj().T) <= 1e-12
        assert np.linalg.eigvalsh(V[i, i])[0] >= -1e-10
    blocks = [haar_unitary(rng, 2) for _ in range(4)]
    th = theta_from_blocks(blocks)
    thb = th.reshape(4, 4)
    quad = sum(thb[i] @ V[i, j] @ thb[j].conj() for i in range(4) for j in range(4))
    hd = effective_downlink(Q, th, 2, 2)
    assert quad.real == pytest.approx(beam_mimo.channel_strength(Q, th), rel=1e-12)
    assert quad.real == pytest.approx(np.trace(hd @ hd.conj().T).real, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_phase_only_matches_grid(seed):
    rng = np.random.default_rng(seed)
    Q = _Q(rng, M=2, mb=1)
    theta, _ = beam_mimo.optimize_theta(Q, 1)
    grid = np.exp(1j * np.linspace(0, 2 * np.pi, 3600, endpoint=False))
    # strength is invariant to a common phase, so fix the first element
    vals = np.sum(np.abs(Q[:, :1] + Q[:, 1:] * grid[None, :]) ** 2, axis=0)
    assert beam_mimo.channel_strength(Q, theta) == pytest.approx(vals.max(), rel=1e-5)
    assert np.allclose(np.abs(theta), 1.0)


def test_single_block_beats_random_sampling():
    rng = np.random.default_rng(3)
    Q = _Q(rng, M=2, mb=2)
    theta, _ = beam_mimo.optimize_theta(Q, 2)
    best = max(beam_mimo.channel_strength(Q, theta_from_blocks([haar_unitary(rng, 2)]))
               for _ in range(10000))
    assert beam_mimo.channel_strength(Q, theta) >= best - 1e-9 * best


@given(st.sampled_from([(8, 1, 1), (8, 2, 1), (8, 2, 2), (16, 4, 1), (8, 4, 2)]),
       st.integers(0, 2 ** 32 - 1))
def test_sweeps_ascend_and_stay_unitary(dims, seed):
    M, mb, gb = dims
    rng = np.random.default_rng(seed)
    Q = _Q(rng, M=M, mb=mb, gb=gb)
    theta, strengths = beam_mimo.optimize_theta(Q, mb)
    assert np.all(np.diff(strengths) >= -1e-12 * strengths[-1])
    assert strengths[-1] == pytest.approx(beam_mimo.channel_strength(Q, theta), rel=1e-10)
    assert all(gram_deviation(b) <= 1e-8 for b in blocks_from_theta(theta, mb))


def test_larger_groups_never_lose_with_nested_start(rng):
    N = K = 2
    G, H = crandn(rng, N, 8), crandn(rng, 8, K)
    ch = ChannelRealization(G=G, H=H)
    q1 = cascade(ch, BdRisConfig(M=8, group_size=1, N=N, K=K)).Q
    q2 = cascade(ch, BdRisConfig(M=8, group_size=2, N=N, K=K)).Q
    th1, s1 = beam_mimo.optimize_theta(q1, 1)
    init = [np.diag(th1[2 * i:2 * i + 2]) for i in range(4)]
    th2, s2 = beam_mimo.optimize_theta(q2, 2, init=init)
    assert s2[0] == pytest.approx(s1[-1], rel=1e-10)
    assert s2[-1] >= s1[-1] * (1 - 1e-12)


def test_bad_inputs(rng):
    with pytest.raises(InvalidParameterError):
        beam_mimo.optimize_theta(np.zeros((4, 8)), 2)
    with pytest.raises(InvalidParameterError):
        beam_mimo.build_quadratics(np.zeros((4, 6)), 2)
    with pytest.raises(InvalidParameterError):
        beam_mimo.optimize_theta(_Q(rng), 2, init=[np.eye(2)])


def test_svd_identity_channel():
    P, W = beam_mimo.svd_transceiver(np.eye(2), 2, 2.0)
    assert np.allclose(P, np.eye(2)) and np.allclose(W, np.eye(2))


def test_svd_dimension_assignment(rng):
    H = crandn(rng, 3, 5)  # K x N
    P, W = beam_mimo.svd_transceiver(H, 2, 4.0)
    assert P.shape == (5, 2) and W.shape == (3, 2)
    assert np.linalg.norm(P) ** 2 == pytest.approx(4.0)
    assert np.allclose(W.conj().T @ W, np.eye(2))
    s = np.linalg.svd(H, compute_uv=False)
    assert np.allclose(np.abs(np.diag(W.conj().T @ H @ P)), np.sqrt(2.0) * s[:2])


def test_rank_one_capacity(rng):
    a, b = crandn(rng, 3, 1), crandn(rng, 2, 1)
    H = a @ b.conj().T
    P, W = beam_mimo.svd_transceiver(H, 1, 2.0)
    r = beam_mimo.rate(H, P, W, 0.5)
    assert r == pytest.approx(np.log2(1 + 2.0 * np.linalg.norm(H) ** 2 / 0.5), rel=1e-12)


def test_row_permutation_invariance(rng):
    H = crandn(rng, 3, 3)
    perm = [2, 0, 1]
    P, W = beam_mimo.svd_transceiver(H, 2, 1.0)
    P2, W2 = beam_mimo.svd_transceiver(H[perm], 2, 1.0)
    assert np.allclose(np.abs(W2), np.abs(W[perm]), atol=1e-10)
    assert beam_mimo.rate(H[perm], P2, W2, 0.1) == pytest.approx(beam_mimo.rate(H, P, W, 0.1))


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_rate_matches_eigen_oracle(K, N, seed):
    rng = np.random.default_rng(seed)
    H = crandn(rng, K, N)
    ns = min(K, N)
    P, W = beam_mimo.svd_transceiver(H, ns, 3.0)
    s = np.linalg.svd(H, compute_uv=False)[:ns]
    expect = np.sum(np.log2(1 + 3.0 / ns * s ** 2 / 0.2))
    assert beam_mimo.rate(H, P, W, 0.2) == pytest.approx(expect, rel=1e-9)
    if ns == N:
        assert beam_mimo.rate(H, P, W, 0.2) <= beam_mimo.rate_upper_bound(H, 3.0, 0.2) + 1e-12


def test_rate_zero_precoder_and_se(rng):
    H = crandn(rng, 2, 2)
    assert beam_mimo.rate(H, np.zeros((2, 2)), np.eye(2), 1.0) == 0.0
    assert beam_mimo.se(6.0, 300, 200, 1000) == pytest.approx(3.0)
    with pytest.raises(InvalidParameterError):
        beam_mimo.se(6.0, 600, 0, 600)


def test_singular_combiner_and_bad_streams(rng):
    H = crandn(rng, 2, 2)
    with pytest.raises(np.linalg.LinAlgError):
        beam_mimo.rate(H, np.eye(2), np.ones((2, 2)), 1.0)
    with pytest.raises(InvalidParameterError):
        beam_mimo.svd_transceiver(H, 3, 1.0)
    with pytest.raises(InvalidParameterError):
        beam_mimo.svd_transceiver(np.zeros((2, 2)), 1, 1.0)
    with pytest.warns(RuntimeWarning):
        beam_mimo.svd_transceiver(np.outer([1, 1], [1, 0]).astype(complex), 2, 1.0)


@given(st.integers(0, 2 ** 32 - 1))
def test_design_constraints(seed):
    rng = np.random.default_rng(seed)
    Q = _Q(rng, M=8, mb=2, gb=2)
    Qn = Q + 0.1 * crandn(rng, *Q.shape)
    d = beam_mimo.design_mimo(Qn, 2, 2, 2, 2, 1.5, 0.01, Q_true=Q, T1=8, T=600)
    assert all(gram_deviation(b) <= 1e-8 for b in d.blocks(2))
    assert np.linalg.norm(d.P) ** 2 <= 1.5 + 1e-9
    assert gram_deviation(d.W) <= 1e-10
    assert d.se == pytest.approx((1 - 8 / 600) * d.rate)
    hd = effective_downlink(Q, d.theta, 2, 2)
    assert d.rate <= beam_mimo.rate_upper_bound(hd, 1.5, 0.01) + 1e-9


def test_perfect_csi_design_beats_random(rng):
    Q = _Q(rng, M=16, mb=2)
    best = beam_mimo.design_mimo(Q, 2, 2, 2, 2, 1.0, 0.1).rate
    for s in range(20):
        r = beam_mimo.random_design(Q, 2, 2, 2, 2, 1.0, 0.1, seed=s)
        assert r.rate <= best + 1e-9
        assert all(gram_deviation(b) <= 1e-10 for b in r.blocks(2))


def test_random_single_element_groups_are_phases(rng):
    Q = _Q(rng, M=8, mb=1)
    r = beam_mimo.random_design(Q, 2, 2, 1, 2, 1.0, 0.1, seed=0)
    assert np.allclose(np.abs(r.theta), 1.0)
