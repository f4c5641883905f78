"""Reflective BD-RIS point-to-point MIMO design from cascaded-channel estimates.

Two stages: block-coordinate maximization of the channel strength
``||Q theta||^2 = tr(H_d H_d^H)`` over unitary tile patterns, then an SVD
transceiver with equal power per stream.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import stiefel
from .channel_model import (InvalidParameterError, blocks_from_theta,
                            effective_downlink, make_rng, theta_from_blocks)
from .linalg import haar_unitary

# Inner solves only need to make progress; the sweeps drive convergence.
INNER_OPTIONS = stiefel.SolverOptions(max_iters=3)


def build_quadratics(Q_hat, group_size):
    """Blocks ``V[i, i'] = [Q_hat^T Q_hat^*]_(i, i')`` of shape ``(G2, G2, Mbar^2, Mbar^2)``."""
    Q_hat = np.asarray(Q_hat)
    n = group_size * group_size
    if Q_hat.shape[1] % n:
        raise InvalidParameterError("channel width is not a multiple of Mbar^2")
    g2 = Q_hat.shape[1] // n
    V = Q_hat.T @ Q_hat.conj()
    return V.reshape(g2, n, g2, n).transpose(0, 2, 1, 3)


def channel_strength(Q, theta):
    """``||Q theta||^2``, the Frobenius energy of the effective channel."""
    return float(np.sum(np.abs(np.asarray(Q) @ theta) ** 2))


def _tile_update(Vii, chi, block, opts, polar_steps):
    # maximize theta^T Vii theta^* + 2 Re{theta^T chi} over unitary blocks
    if block.shape == (1, 1):
        # on the unit circle the quadratic term is constant; the optimum is closed form
        c = chi[0]
        return block if c == 0 else np.array([[np.conj(c) / abs(c)]])
    for _ in range(polar_steps):
        block = stiefel.mm_step(-Vii, chi, block, shift=0.0)
    return stiefel.maximize(-Vii, chi, block, opts).X


def optimize_theta(Q_hat, group_size, init=None, tol=1e-6, max_sweeps=100, opts=None,
                   polar_steps=1):
    """Maximize ``||Q_hat theta||^2`` over block-unitary ``theta``.

    Tiles are updated in ascending order; each update maximizes
    ``theta_i^T V_ii theta_i^* + 2 Re{theta_i^T chi_i}`` with
    ``chi_i = sum_{i' != i} V_{i,i'} theta_{i'}^*`` and the other tiles fixed.
    Single-element tiles use the closed-form phase ``conj(chi)/|chi|``.
    Larger tiles take ``polar_steps`` minorize-maximize steps
    (:func:`stiefel.mm_step`) before a short conjugate-gradient refinement;
    both are ascent steps, so the strength is non-decreasing over sweeps.

    Parameters
    ----------
    Q_hat : ndarray, shape (N K, Mbar^2 G2)
    group_size : int
    init : list of ndarray, optional
        Starting tile patterns; identity blocks by default.
    tol : float
        Relative change in channel strength that ends the sweeps.
    opts : stiefel.SolverOptions, optional
        Inner solver options; defaults to :data:`INNER_OPTIONS`.
    polar_steps : int
        MM warm-start steps per tile update (0 gives plain CG updates).

    Returns
    -------
    theta : ndarray
        Stacked ``vec(Theta_i^T)``.
    strengths : list of float
        Channel strength ``||Q_hat theta||^2`` after each sweep (first entry at ``init``).
    """
    opts = opts or INNER_OPTIONS
    Q_hat = np.asarray(Q_hat)
    scale = np.linalg.norm(Q_hat)
    if scale == 0:
        raise InvalidParameterError("channel estimate is identically zero")
    Qn = Q_hat / scale
    V = build_quadratics(Qn, group_size)
    g2 = V.shape[0]
    mb = group_size
    if init is None:
        blocks = [np.eye(mb, dtype=complex) for _ in range(g2)]
    else:
        blocks = [np.array(b, dtype=complex) for b in init]
        if len(blocks) != g2:
            raise InvalidParameterError(f"expected {g2} initial blocks, got {len(blocks)}")
    thetas = [b.T.reshape(-1, order="F") for b in blocks]
    strengths = [channel_strength(Qn, np.concatenate(thetas))]
    for _ in range(max_sweeps):
        for i in range(g2):
            chi = sum((V[i, j] @ thetas[j].conj() for j in range(g2) if j != i),
                      np.zeros(mb * mb, dtype=complex))
            blocks[i] = _tile_update(V[i, i], chi, blocks[i], opts, polar_steps)
            thetas[i] = blocks[i].T.reshape(-1, order="F")
        strengths.append(channel_strength(Qn, np.concatenate(thetas)))
        if abs(strengths[-1] - strengths[-2]) <= tol * abs(strengths[-1]):
            break
    return theta_from_blocks(blocks), [s * scale ** 2 for s in strengths]


def svd_transceiver(H_d, N_s, P_d):
    """Equal-power SVD precoder ``P`` (N x N_s) and combiner ``W`` (K x N_s).

    ``H_d`` is the ``K x N`` downlink channel; the leading right singular
    vectors steer the transmitter and the leading left singular vectors
    combine at the receiver, with ``||P||_F^2 = P_d``.
    """
    H_d = np.asarray(H_d)
    K, N = H_d.shape
    if not 1 <= N_s <= min(N, K):
        raise InvalidParameterError(f"need 1 <= N_s <= min(N, K) = {min(N, K)}")
    u, s, vh = np.linalg.svd(H_d)
    if s[0] == 0:
        raise InvalidParameterError("effective channel is zero")
    if np.sum(s > s[0] * 1e-12) < N_s:
        warnings.warn("N_s exceeds the channel rank; some streams have zero gain",
                      RuntimeWarning, stacklevel=2)
    W = u[:, :N_s]
    P = np.sqrt(P_d / N_s) * vh.conj().T[:, :N_s]
    return P, W


def rate(H_d, P, W, noise_power):
    """``log2 det(I + (sigma^2 W^H W)^-1 W^H H_d P P^H H_d^H W)`` in bits/s/Hz."""
    H_d, P, W = np.asarray(H_d), np.asarray(P), np.asarray(W)
    g = W.conj().T @ H_d @ P
    ww = noise_power * (W.conj().T @ W)
    if np.linalg.cond(ww) > 1e12:
        raise np.linalg.LinAlgError("combiner Gram matrix is singular")
    m = np.eye(W.shape[1]) + np.linalg.solve(ww, g @ g.conj().T)
    sign, logdet = np.linalg.slogdet(m)
    return float(logdet / np.log(2.0))


def se(rate_value, T1, T2, T):
    """Overhead-scaled spectral efficiency ``(1 - (T1 + T2)/T) * rate``."""
    if T <= T1 + T2:
        raise InvalidParameterError(f"frame length T={T} does not exceed overhead {T1 + T2}")
    return (1.0 - (T1 + T2) / T) * rate_value


def rate_upper_bound(H_d, P_d, noise_power):
    """``P_d / N * tr(H_d H_d^H) / (ln2 sigma^2)``; valid for ``N_s = N`` streams."""
    H_d = np.asarray(H_d)
    zeta2 = P_d / H_d.shape[1]
    return float(zeta2 * np.sum(np.abs(H_d) ** 2) / (np.log(2.0) * noise_power))


@dataclass(frozen=True, eq=False)
class MimoDesign:
    theta: np.ndarray
    P: np.ndarray
    W: np.ndarray
    rate: float
    se: float = None
    strengths: list = field(default_factory=list, repr=False)

    def blocks(self, group_size):
        return blocks_from_theta(self.theta, group_size)


def design_mimo(Q_hat, N, K, group_size, N_s, P_d, noise_power, Q_true=None,
                T1=0, T2=0, T=None, init=None):
    """Full pipeline: optimize ``theta`` on ``Q_hat``, SVD on the estimated
    effective channel, rate on the true one (``Q_true``, or ``Q_hat`` if absent).
    """
    theta, strengths = optimize_theta(Q_hat, group_size, init=init)
    P, W = svd_transceiver(effective_downlink(Q_hat, theta, N, K), N_s, P_d)
    Q_eval = Q_hat if Q_true is None else Q_true
    r = rate(effective_downlink(Q_eval, theta, N, K), P, W, noise_power)
    s = None if T is None else se(r, T1, T2, T)
    return MimoDesign(theta=theta, P=P, W=W, rate=r, se=s, strengths=strengths)


def random_design(Q_hat, N, K, group_size, N_s, P_d, noise_power, seed, Q_true=None):
    """Random block-diagonal unitary surface with an SVD transceiver on the estimated channel."""
    rng = make_rng(seed)
    g2 = np.shape(Q_hat)[1] // (group_size * group_size)
    theta = theta_from_blocks([haar_unitary(rng, group_size) for _ in range(g2)])
    P, W = svd_transceiver(effective_downlink(Q_hat, theta, N, K), N_s, P_d)
    Q_eval = Q_hat if Q_true is None else Q_true
    r = rate(effective_downlink(Q_eval, theta, N, K), P, W, noise_power)
    return MimoDesign(theta=theta, P=P, W=W, rate=r)
