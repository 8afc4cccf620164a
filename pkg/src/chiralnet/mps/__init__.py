"""Liouville-space matrix product states for the plaquette chain."""

from .chain import ChainModel, build_chain_model
from .checkpoint import load_checkpoint, save_checkpoint
from .experiment import MpsRunOptions, initial_product, run_mps_experiment
from .measure import TraceEnvironments, measure
from .mpo import LiouvillianMPO, build_liouvillian_mpo
from .state import VectorizedMPS
from .tdvp import TdvpConfig, TdvpEngine, tdvp_step

__all__ = [
    "ChainModel",
    "LiouvillianMPO",
    "MpsRunOptions",
    "TdvpConfig",
    "TdvpEngine",
    "TraceEnvironments",
    "VectorizedMPS",
    "build_chain_model",
    "build_liouvillian_mpo",
    "initial_product",
    "load_checkpoint",
    "measure",
    "run_mps_experiment",
    "save_checkpoint",
    "tdvp_step",
]
