"""Kernel quantile, IQR-type and MAD-type scale estimation."""

__version__ = "0.1.0"

from .dataset import Dataset
from .errors import (
    ConvergenceError, CSVParseError, InputError, ModelFormatError, ModelIntegrityError,
    ModelVersionError, NumericalError, ScalefitError, ScheduleError, UnsupportedOperationError,
)
from .estimators import (
    CombinationModel, CrossingReport, MadModel, detect_crossing, fit_asymmetry, fit_combination,
    fit_iqr, fit_mad, fit_quantile, mad_risk, predict_scale,
)
from .experiments import (
    ConvergenceReport, LambdaSchedule, infimal_mad_risk, l1_distance, run_convergence,
)
from .kernels import GramMatrix, KernelSpec, eval_kernel, gram, sup_norm
from .losses import LossSpec, loss, loss_d1, loss_d2, pinball_gap
from .persist import DatasetFile, load_csv, load_model, read_csv, save_model
from .solver import FitConfig, QuantileModel, fit, objective, predict
from .synth import GeneratorSpec, sample, true_iqr, true_mad, true_quantile

__all__ = [name for name in dir() if not name.startswith("_")]
