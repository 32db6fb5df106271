"""Evidential time-to-event regression with Gaussian random fuzzy numbers."""

from .grfn import GRFN, VACUOUS, LognormalRFN, RealInterval, bel_pl, bpi, combine, contour, time_bel_pl
from .model import ModelParams, forward, forward_batch, init_params
from .training import LossConfig, TrainConfig, fit, loss_sample, total_cost

__version__ = "0.1.0"

__all__ = [
    "GRFN", "VACUOUS", "LognormalRFN", "RealInterval", "bel_pl", "bpi", "combine", "contour", "time_bel_pl",
    "ModelParams", "forward", "forward_batch", "init_params",
    "LossConfig", "TrainConfig", "fit", "loss_sample", "total_cost",
]
