"""Channel estimation and beamforming for beyond-diagonal reconfigurable surfaces.

Modules
-------
channel_model
    Surface configuration, Rician channels and the cascaded-channel form.
pattern_builder
    MSE-optimal training patterns built from Kronecker products of unitary bases.
estimator
    Uplink training simulation and least-squares estimation.
stiefel
    Riemannian conjugate gradient on complex Stiefel manifolds.
beam_mimo
    Point-to-point MIMO design with an SVD transceiver.
beam_mumiso
    Fractional-programming sum-rate design for multi-sector MU-MISO.
harness
    Seeded Monte Carlo experiments producing CSV tables.
"""

from .channel_model import (BdRisConfig, InvalidParameterError, PathLossParams,
                            cascade, draw_channels)
from .estimator import ls_estimate, simulate_uplink
from .pattern_builder import TrainingPlan, UnsupportedOrderError, make_plan

__version__ = "0.1.0"

__all__ = ["BdRisConfig", "InvalidParameterError", "PathLossParams", "TrainingPlan",
           "UnsupportedOrderError", "cascade", "draw_channels", "ls_estimate", "make_plan",
           "simulate_uplink"]
