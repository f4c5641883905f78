"""Uplink training simulation and least-squares cascaded-channel estimation."""

from dataclasses import dataclass

import numpy as np

from .channel_model import (ChannelRealization, InvalidParameterError, cascade,
                            make_rng)
from .linalg import crandn, unvec, vec
from .pattern_builder import assemble_phi_hat, make_plan

FAST_PATH_TOL = 1e-8


class SingularPatternError(ValueError):
    """The stacked sensing matrix is rank deficient; the LS estimate is ambiguous."""


@dataclass(frozen=True, eq=False)
class UplinkSim:
    P_u: float
    noise_power: float
    plan: object
    truth: object

    def __post_init__(self):
        if not self.P_u > 0 or self.noise_power < 0:
            raise InvalidParameterError("need P_u > 0 and noise power >= 0")


@dataclass(frozen=True, eq=False)
class ChannelEstimate:
    """LS estimate ``q_hat`` and its ``NK x Mbar^2 G2`` form ``Q_hat``."""

    q_hat: np.ndarray
    Q_hat: np.ndarray
    T1: int
    e_theory: float = None
    e_norm: float = None


def _check(plan, truth):
    N = truth.N
    if truth.K != plan.K or truth.Q.shape[1] != plan.pattern_length:
        raise InvalidParameterError(
            f"plan (K={plan.K}, length {plan.pattern_length}) does not match "
            f"channel (K={truth.K}, width {truth.Q.shape[1]})")
    return N


def simulate_uplink(sim, seed):
    """Received training signal ``y`` (length ``N*T1``), slots stacked in order.

    Slot ``t`` receives ``sqrt(Pu) kron(phi_t^T, x_t^T, I_N) q + n_t``.
    """
    plan, truth = sim.plan, sim.truth
    N = _check(plan, truth)
    rng = make_rng(seed)
    q_r = unvec(truth.q, N, plan.codes.shape[0])
    Y = np.sqrt(sim.P_u) * (q_r @ plan.codes)
    if sim.noise_power > 0:
        Y = Y + np.sqrt(sim.noise_power) * crandn(rng, *Y.shape)
    return vec(Y)


def ls_estimate(y, plan, N, P_u, mode="fast", noise_power=None, truth=None):
    """Least-squares estimate of ``q = vec(Q)``.

    ``mode="fast"`` uses ``Phi_hat^dagger = Phi_hat^H / (K Mbar G2)`` and
    refuses plans that are not scaled-unitary; ``mode="pinv"`` solves the
    normal equations with the explicitly assembled ``Phi_hat`` and works for
    any full-rank plan.  ``mode="codes"`` gives the same LS solution for any
    full-rank plan without assembling ``Phi_hat``: since
    ``Phi_hat = S^T kron I_N``, ``q_hat = vec(Y S^H (S S^H)^-1) / sqrt(Pu)``.
    """
    y = np.asarray(y)
    cols = plan.codes.shape[0]
    if y.size != N * plan.T1:
        raise InvalidParameterError(f"expected {N * plan.T1} samples, got {y.size}")
    if mode == "fast":
        if plan.orthogonality_error > FAST_PATH_TOL:
            raise ValueError("fast LS path requires a scaled-unitary sensing matrix; use mode='pinv'")
        scale = plan.K * plan.group_size * plan.num_tiles
        Y = unvec(y, N, plan.T1)
        q_hat = vec(Y @ plan.codes.conj().T) / (scale * np.sqrt(P_u))
    elif mode == "codes":
        s = plan.codes
        gram = s @ s.conj().T
        if np.linalg.matrix_rank(gram) < gram.shape[0]:
            raise SingularPatternError("sensing matrix is rank deficient")
        Y = unvec(y, N, plan.T1)
        q_hat = vec(np.linalg.solve(gram.T, (Y @ s.conj().T).T).T) / np.sqrt(P_u)
    elif mode == "pinv":
        phi_hat = assemble_phi_hat(plan, N)
        gram = phi_hat.conj().T @ phi_hat
        if np.linalg.matrix_rank(gram) < gram.shape[0]:
            raise SingularPatternError("sensing matrix is rank deficient")
        q_hat = np.linalg.solve(gram, phi_hat.conj().T @ y) / np.sqrt(P_u)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    K = plan.K
    Q_hat = unvec(q_hat, N * K, cols // K)
    e_theory = None if noise_power is None else mse_theory(N, plan.group_size, noise_power, P_u)
    e_norm = None
    if truth is not None:
        q = truth.q
        e_norm = float(np.sum(np.abs(q_hat - q) ** 2) / np.sum(np.abs(q) ** 2))
    return ChannelEstimate(q_hat=q_hat, Q_hat=Q_hat, T1=plan.T1,
                           e_theory=e_theory, e_norm=e_norm)


def mse_theory(N, group_size, noise_power, P_u):
    """Minimum LS MSE ``N Mbar sigma^2 / Pu``."""
    return N * group_size * noise_power / P_u


def sensing_trace(plan, N):
    """``tr((Phi_hat^H Phi_hat)^-1)`` via the slot codes (``Phi_hat = S^T kron I_N``)."""
    s = plan.codes
    return float(N * np.real(np.trace(np.linalg.inv(s @ s.conj().T))))


@dataclass(frozen=True)
class MseResult:
    mse: float
    normalized_mse: float
    analytic: float
    minimum: float
    trials: int


def mse_empirical(plan, truth, P_u, noise_power, trials, seed, mode=None):
    """Monte Carlo MSE of the LS estimate for a fixed channel.

    Trial ``j`` draws its noise from the substream ``(seed, j)``.  The
    normalized MSE is the mean of per-trial ratios ``||q_hat - q||^2 / ||q||^2``.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    if mode is None:
        mode = "fast" if plan.orthogonality_error <= FAST_PATH_TOL else "codes"
    N = truth.N
    sim = UplinkSim(P_u=P_u, noise_power=noise_power, plan=plan, truth=truth)
    q = truth.q
    qn = np.sum(np.abs(q) ** 2)
    err = np.empty(trials)
    for j in range(trials):
        y = simulate_uplink(sim, (seed, j))
        est = ls_estimate(y, plan, N, P_u, mode=mode)
        err[j] = np.sum(np.abs(est.q_hat - q) ** 2)
    mse = float(err.mean())
    return MseResult(mse=mse, normalized_mse=float(np.mean(err / qn)),
                     analytic=noise_power / P_u * sensing_trace(plan, N),
                     minimum=mse_theory(N, plan.group_size, noise_power, P_u),
                     trials=trials)


def snr_for_plan(P_u, T1, xi, noise_power):
    """Training SNR ``Pu T1 / (xi sigma^2)``."""
    return P_u * T1 / (xi * noise_power)


def power_for_snr(snr, T1, xi, noise_power):
    """Per-antenna transmit power achieving training SNR ``snr``."""
    return snr * xi * noise_power / T1


def _estimate_users(G, H, cfg, kind, P_u, noise_power, seed, mode="fast"):
    """Train with every column of ``H`` as one pilot stream; return the estimate and plan."""
    K = H.shape[1]
    sub = type(cfg)(M=cfg.M, group_size=cfg.group_size, tile_size=cfg.tile_size,
                    sectors=cfg.sectors, N=cfg.N, K=K)
    truth = cascade(ChannelRealization(G=G, H=H), sub)
    plan = make_plan(kind, cfg.group_size, cfg.num_tiles, K, seed=seed)
    sim = UplinkSim(P_u=P_u, noise_power=noise_power, plan=plan, truth=truth)
    y = simulate_uplink(sim, seed)
    return ls_estimate(y, plan, cfg.N, P_u, mode=mode, noise_power=noise_power, truth=truth), plan


def split_users(Q_hat, N, antennas):
    """Slice a joint ``NK x .`` estimate into per-user blocks of ``N * K_u`` rows."""
    out, r = [], 0
    for k in antennas:
        out.append(Q_hat[r:r + N * k])
        r += N * k
    return out


def estimate_multiuser(cfg, ch, P_u, noise_power, seed, kind="dft", antennas=None,
                       scheme="joint"):
    """Estimate the cascaded channels of several users sharing one reflective surface.

    ``scheme="joint"`` lets all users send orthogonal pilots at once (``K`` is
    the total antenna count); ``"sequential"`` trains users one after another,
    each with its own pilot block.  Returns per-user ``N K_u x Mbar^2 G2``
    estimates and the total overhead.
    """
    if antennas is None:
        antennas = [1] * cfg.K
    if sum(antennas) != cfg.K:
        raise InvalidParameterError("per-user antenna counts must sum to K")
    if scheme == "joint":
        est, _ = _estimate_users(ch.G, ch.H, cfg, kind, P_u, noise_power, seed)
        return split_users(est.Q_hat, cfg.N, antennas), est.T1
    if scheme != "sequential":
        raise ValueError(f"unknown scheme {scheme!r}")
    blocks, t1, c = [], 0, 0
    for u, k in enumerate(antennas):
        est, _ = _estimate_users(ch.G, ch.H[:, c:c + k], cfg, kind, P_u, noise_power,
                                 (*np.atleast_1d(seed), u))
        blocks.append(est.Q_hat)
        t1 += est.T1
        c += k
    return blocks, t1


def sector_of_users(sector_sizes):
    """User index -> sector index for contiguous sector blocks."""
    return np.repeat(np.arange(len(sector_sizes)), sector_sizes)


def estimate_multisector(cfg, ch, sector_sizes, P_u, noise_power, seed, kind="dft"):
    """Sector-by-sector training for hybrid/multi-sector surfaces.

    Sector ``l`` trains its ``K_l`` single-antenna users for ``K_l Mbar^2 G2``
    slots while every other sector is switched off, so only ``ch.H[:, K_l]``
    contributes.  ``ch.H`` column ``k`` is user ``k``'s channel to the array of
    its own sector.  Returns the per-user ``N x Mbar^2 G2`` estimates (user
    order) and the total overhead.
    """
    if sum(sector_sizes) != ch.H.shape[1] or any(k < 0 for k in sector_sizes):
        raise InvalidParameterError("sector sizes must partition the users")
    if len(sector_sizes) != cfg.sectors:
        raise InvalidParameterError("one size per sector required")
    out, t1, c = [], 0, 0
    for l, kl in enumerate(sector_sizes):
        if kl == 0:
            continue
        est, _ = _estimate_users(ch.G, ch.H[:, c:c + kl], cfg, kind, P_u, noise_power,
                                 (*np.atleast_1d(seed), l))
        out.extend(split_users(est.Q_hat, cfg.N, [1] * kl))
        t1 += est.T1
        c += kl
    return out, t1
