"""Data ingestion, the synthetic trial generator, and log validation."""

from .io import (TrialLog, read_depth_pgm, read_mask_pgm, read_point_cloud,
                 read_trial_log, write_depth_pgm, write_mask_pgm,
                 write_point_cloud_ply, write_point_cloud_xyz, write_trial_log)
from .protocol import CategoryLatent, GeneratorTruth, ProtocolSpec, simulate
from .validate import Violation, validate

__all__ = [
    "TrialLog", "read_trial_log", "write_trial_log",
    "read_point_cloud", "write_point_cloud_ply", "write_point_cloud_xyz",
    "read_depth_pgm", "write_depth_pgm", "read_mask_pgm", "write_mask_pgm",
    "ProtocolSpec", "GeneratorTruth", "CategoryLatent", "simulate",
    "validate", "Violation",
]
