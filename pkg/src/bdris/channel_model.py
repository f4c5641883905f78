"""Rician channels, BD-RIS path loss and the cascaded (tile-based) channel.

Conventions used throughout the package:

* ``vec`` is column-major; ``unvec`` of a length ``N*K`` vector gives ``N x K``.
* ``G`` is the RIS->BS channel (``N x M``), ``H`` the user->RIS channel
  (``M x K``).  Downlink uses TDD reciprocity, i.e. ``G^T`` and ``H^T``.
* A BD-RIS vector ``theta`` stacks ``vec(Theta_i^T)`` over tiles.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import speed_of_light
from scipy.linalg import block_diag

from .linalg import crandn, unvec, vec


class InvalidParameterError(ValueError):
    """Raised for inconsistent dimensions or non-physical parameters."""


def is_hadamard_order(n):
    """True if ``n`` is in {1, 2} or a multiple of 4."""
    return n in (1, 2) or (n > 0 and n % 4 == 0)


@dataclass(frozen=True)
class BdRisConfig:
    """Surface dimensions and antenna counts.

    Parameters
    ----------
    M : int
        Elements per sector.
    group_size : int
        Ports per fully-connected group (``M/G1``).
    tile_size : int
        Groups per tile sharing one pattern during training.
    sectors : int
        1 for a reflective surface, ``L >= 2`` for hybrid/multi-sector mode.
    N, K : int
        BS antennas and user antennas (or single-antenna users for MU-MISO).
    """

    M: int
    group_size: int = 1
    tile_size: int = 1
    sectors: int = 1
    N: int = 1
    K: int = 1

    def __post_init__(self):
        for name in ("M", "group_size", "tile_size", "sectors", "N", "K"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {v!r}")
        if self.M % self.group_size:
            raise InvalidParameterError(
                f"group size {self.group_size} does not divide M={self.M}")
        if self.num_groups % self.tile_size:
            raise InvalidParameterError(
                f"tile size {self.tile_size} does not divide G1={self.num_groups}")

    @property
    def num_groups(self):
        return self.M // self.group_size

    @property
    def num_tiles(self):
        return self.num_groups // self.tile_size

    @property
    def pattern_length(self):
        """Length of the stacked tile pattern, ``Mbar^2 * G2``."""
        return self.group_size ** 2 * self.num_tiles

    @property
    def training_overhead(self):
        """Pilot slots ``T1 = K * Mbar^2 * G2`` (equivalently ``K M Mbar / Gbar``)."""
        return self.K * self.pattern_length

    def hadamard_compatible(self):
        return is_hadamard_order(self.group_size) and is_hadamard_order(self.num_tiles)


@dataclass(frozen=True)
class PathLossParams:
    """Large-scale parameters; defaults are the simulation setup values."""

    d1: float = 30.0
    d2: float = 10.0
    eps1: float = 2.5
    eps2: float = 2.5
    freq: float = 2.4e9
    gain_t: float = 1.0
    gain_r: float = 1.0
    sectors: int = 2

    def __post_init__(self):
        for name in ("d1", "d2", "freq", "gain_t", "gain_r"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        # reflective surfaces are evaluated with sectors=2 (half-space coverage)
        if int(self.sectors) != self.sectors or self.sectors < 1:
            raise InvalidParameterError("path-loss sector count must be a positive integer")


def path_loss(p):
    """End-to-end BS-RIS-user path loss ``xi`` (linear, > 1 means attenuation).

    ``xi = rho * (1 - cos(pi/L))**2`` with
    ``rho = 4^3 pi^4 d1^eps1 d2^eps2 lambda^-4 / (Gt Gr)``.
    """
    lam = speed_of_light / p.freq
    rho = (4.0 ** 3 * np.pi ** 4 * p.d1 ** p.eps1 * p.d2 ** p.eps2
           * lam ** -4 / (p.gain_t * p.gain_r))
    return float(rho * (1.0 - np.cos(np.pi / p.sectors)) ** 2)


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm_to_watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def make_rng(seed):
    """Return a Generator; ``seed`` may be an int, a tuple of ints or a Generator.

    Tuples such as ``(seed, trial)`` give independent, reproducible substreams.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ula_steering(n, angle):
    """Half-wavelength ULA response, unit-modulus entries."""
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


@dataclass(frozen=True)
class ChannelRealization:
    G: np.ndarray
    H: np.ndarray
    seed: object = None
    kappa: float = 0.0
    xi: float = 1.0


def _rician(rng, los, kappa):
    nlos = crandn(rng, *los.shape)
    return np.sqrt(kappa / (kappa + 1.0)) * los + np.sqrt(1.0 / (kappa + 1.0)) * nlos


def draw_channels(cfg, p, kappa, seed):
    """Draw one Rician realization of ``G`` (N x M) and ``H`` (M x K).

    The end-to-end power loss ``xi`` is split symmetrically: each link is
    scaled by ``xi**-0.25`` so that ``G @ H`` carries ``1/xi``.  LoS parts are
    outer products of ULA responses with angles uniform in [-pi/2, pi/2].
    """
    if kappa < 0:
        raise InvalidParameterError("Rician factor must be non-negative")
    rng = make_rng(seed)
    xi = path_loss(p)
    ang = rng.uniform(-np.pi / 2, np.pi / 2, size=4)
    g_los = np.outer(ula_steering(cfg.N, ang[0]), ula_steering(cfg.M, ang[1]).conj())
    h_los = np.outer(ula_steering(cfg.M, ang[2]), ula_steering(cfg.K, ang[3]).conj())
    amp = xi ** -0.25
    G = amp * _rician(rng, g_los, kappa)
    H = amp * _rician(rng, h_los, kappa)
    return ChannelRealization(G=G, H=H, seed=seed, kappa=float(kappa), xi=xi)


@dataclass(frozen=True)
class CascadedChannel:
    """Tile-based cascaded channel ``Q`` and the per-group ``Q_bar``.

    ``Q`` is ``N K x Mbar^2 G2``; rows ``k*N:(k+1)*N`` belong to user antenna k.
    """

    Q: np.ndarray
    Q_bar: np.ndarray = field(repr=False)
    N: int
    K: int
    group_size: int
    tile_size: int

    @property
    def q(self):
        return vec(self.Q)

    def user_block(self, k):
        """The ``N x Mbar^2 G2`` slice seen by user antenna ``k``."""
        return self.Q[k * self.N:(k + 1) * self.N]


def cascade(ch, cfg):
    """Build ``Q_bar_g = H_g^T kron G_g`` per group and sum groups inside each tile."""
    G, H = np.asarray(ch.G), np.asarray(ch.H)
    if G.shape != (cfg.N, cfg.M) or H.shape != (cfg.M, cfg.K):
        raise InvalidParameterError(
            f"channel shapes {G.shape}, {H.shape} do not match "
            f"N={cfg.N}, M={cfg.M}, K={cfg.K}")
    mb = cfg.group_size
    blocks = [np.kron(H[g * mb:(g + 1) * mb].T, G[:, g * mb:(g + 1) * mb])
              for g in range(cfg.num_groups)]
    Q_bar = np.hstack(blocks)
    gb = cfg.tile_size
    Q = np.hstack([sum(blocks[i * gb:(i + 1) * gb]) for i in range(cfg.num_tiles)])
    return CascadedChannel(Q=Q, Q_bar=Q_bar, N=cfg.N, K=cfg.K,
                           group_size=mb, tile_size=gb)


def effective_downlink(Q, theta, N=None, K=None):
    """Downlink channel ``H_d = unvec(Q theta)^T`` of shape ``K x N``.

    ``Q`` may be a :class:`CascadedChannel` or a plain ``NK x len(theta)`` array
    (then ``N`` and ``K`` are required).
    """
    if isinstance(Q, CascadedChannel):
        N, K, Q = Q.N, Q.K, Q.Q
    elif N is None or K is None:
        raise InvalidParameterError("N and K are required for a bare array")
    theta = np.asarray(theta)
    if Q.shape[1] != theta.size:
        raise InvalidParameterError(
            f"pattern length {theta.size} does not match channel width {Q.shape[1]}")
    return unvec(Q @ theta, N, K).T


def theta_from_blocks(blocks):
    """Stack ``vec(Theta_i^T)`` for a sequence of square blocks."""
    return np.concatenate([vec(np.asarray(b).T) for b in blocks])


def blocks_from_theta(theta, group_size):
    """Inverse of :func:`theta_from_blocks`."""
    mb = group_size
    n = mb * mb
    theta = np.asarray(theta)
    if theta.size % n:
        raise InvalidParameterError("theta length is not a multiple of Mbar^2")
    return [unvec(theta[i * n:(i + 1) * n], mb, mb).T for i in range(theta.size // n)]


def surface_matrix(blocks, tile_size):
    """Full ``M x M`` scattering matrix ``blkdiag(I_Gbar kron Theta_i)``."""
    eye = np.eye(tile_size)
    return block_diag(*[np.kron(eye, b) for b in blocks])
