"""Patch-wise generative priors for compressive image recovery."""

from importlib.resources import files

from .calibrate import CalibStats, calib_stats, solve_calibration
from .errors import (DimensionMismatch, EmptyDataset, EmptyInput, FormatError, GPPError,
                     IndexOutOfRange, ModelMismatch, ShapeMismatch, SingularSystem)
from .imagecore import PatchSet, inverse_patch_transform, patch_transform, psnr
from .imageio import read_image, write_image
from .recovery import (RecoveryConfig, RecoveryResult, recover, recover_gpp, recover_gpp_sc,
                       recover_mask, recover_phase, sweep_calibration)
from .rng import SplitMix64
from .sensing import (CalibrationParams, MeasurementBundle, MeasurementOperator, Model,
                      make_operator, measure_image, read_bundle, write_bundle)
from .tensornet import GeneratorNet, load_weights, make_generator, save_weights

__version__ = "0.1.0"


def bundled_prior_path():
    """Path of the shipped 16x16 decoder prior (latent dim 64)."""
    return files(__package__).joinpath("data/prior16.gppw")


def bundled_prior() -> GeneratorNet:
    return load_weights(bundled_prior_path())
