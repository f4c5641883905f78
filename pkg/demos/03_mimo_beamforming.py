"""
Point-to-point MIMO through a reflective surface
================================================

Estimates the cascaded channel of one realization, optimizes the tile
patterns by block-coordinate ascent, and evaluates the SVD transceiver on
the true channel.
"""

import numpy as np

from bdris import beam_mimo
from bdris.channel_model import (BdRisConfig, PathLossParams, cascade, dbm_to_watt,
                                 draw_channels)
from bdris.estimator import estimate_multiuser

cfg = BdRisConfig(M=32, group_size=2, tile_size=2, N=2, K=2)
noise = float(dbm_to_watt(-100.0))
P_u, P_d = 0.25, 0.5
ch = draw_channels(cfg, PathLossParams(sectors=2), kappa=1.0, seed=(0, 0))
truth = cascade(ch, cfg)

###############################################################################
# Joint training of the K receive antennas (T1 = K Mbar^2 G2 slots).

(Q_hat,), T1 = estimate_multiuser(cfg, ch, P_u, noise, seed=(0, 0, 1), antennas=[cfg.K])
err = np.linalg.norm(Q_hat - truth.Q) ** 2 / np.linalg.norm(truth.Q) ** 2
print(f"T1 = {T1} slots, normalized estimation error {err:.2e}")

###############################################################################
# Channel strength rises monotonically over the sweeps.

theta, strengths = beam_mimo.optimize_theta(Q_hat, cfg.group_size)
print("strength per sweep:", np.array(strengths[:6]) / strengths[0])

perfect = beam_mimo.design_mimo(truth.Q, cfg.N, cfg.K, 2, 2, P_d, noise)
estimated = beam_mimo.design_mimo(Q_hat, cfg.N, cfg.K, 2, 2, P_d, noise, Q_true=truth.Q,
                                  T1=T1, T=600)
random = beam_mimo.random_design(Q_hat, cfg.N, cfg.K, 2, 2, P_d, noise, seed=3, Q_true=truth.Q)
print(f"rate, perfect CSI:   {perfect.rate:.3f} bit/s/Hz")
print(f"rate, estimated CSI: {estimated.rate:.3f} bit/s/Hz (se at T=600: {estimated.se:.3f})")
print(f"rate, random surface: {random.rate:.3f} bit/s/Hz")
