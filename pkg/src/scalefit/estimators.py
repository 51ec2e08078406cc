"""Scale estimators assembled from kernel quantile fits.

* :func:`fit_combination` -- weighted sums ``sum_j c_j f_{tau_j}`` of
  pinball fits; ``c = (-1, +1)`` gives an interquantile-range estimate and
  ``c = (+1, -2, +1)`` an asymmetry estimate.
* :func:`fit_mad` -- two-stage MAD estimate: a median fit, then a
  smoothed-pinball median fit of the absolute in-sample residuals, clipped
  at zero.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import losses
from ._parallel import max_workers
from .dataset import Dataset
from .errors import InputError
from .kernels import KernelSpec, as_points
from .losses import LossSpec
from .solver import FitConfig, QuantileModel, fit

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.1
IQR_WEIGHTS = (-1.0, 1.0)
ASYMMETRY_WEIGHTS = (1.0, -2.0, 1.0)

Predictor = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CombinationModel:
    """``x -> sum_j weights[j] * parts[j](x)``.

    Strictly increasing ``taus`` are enforced by :func:`fit_combination`;
    direct construction only checks shapes so degenerate models can be
    built by hand.
    """

    taus: tuple[float, ...]
    weights: tuple[float, ...]
    parts: tuple[QuantileModel, ...]

    def __post_init__(self) -> None:
        if not len(self.taus) == len(self.weights) == len(self.parts) >= 1:
            raise InputError("taus, weights and parts must have the same nonzero length")
        if not any(w != 0 for w in self.weights):
            raise InputError("weights must not all be zero")

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def part_predictions(self, X) -> np.ndarray:
        """Array of shape (m, len(X)) with one row per component fit."""
        X = as_points(X, self.dim)
        return np.stack([p.predict(X) for p in self.parts])

    def predict(self, X) -> np.ndarray:
        return np.asarray(self.weights) @ self.part_predictions(X)


@dataclass(frozen=True)
class MadModel:
    median_model: QuantileModel
    residual_model: QuantileModel
    epsilon: float
    clip_at_zero: bool = True

    @property
    def dim(self) -> int:
        return self.median_model.dim

    def predict_unclipped(self, X) -> np.ndarray:
        return self.residual_model.predict(X)

    def predict(self, X) -> np.ndarray:
        g = self.predict_unclipped(X)
        return np.maximum(g, 0.0) if self.clip_at_zero else g


@dataclass(frozen=True)
class CrossingReport:
    indices: np.ndarray
    points: np.ndarray
    max_violation: float

    @property
    def crossed(self) -> bool:
        return self.indices.size > 0


def _check_dataset(dataset: Dataset) -> None:
    if dataset.n < 1:
        raise InputError("dataset is empty")


def fit_quantile(dataset: Dataset, tau: float, kernel: KernelSpec, config: FitConfig) -> QuantileModel:
    _check_dataset(dataset)
    return fit(dataset, kernel, LossSpec.pinball(tau), config)


def _broadcast(value, m: int, name: str) -> list:
    if isinstance(value, (list, tuple)):
        if len(value) != m:
            raise InputError(f"expected {m} {name}, got {len(value)}")
        return list(value)
    return [value] * m


def fit_combination(
    dataset: Dataset,
    taus: Sequence[float],
    weights: Sequence[float],
    kernels: KernelSpec | Sequence[KernelSpec],
    configs: FitConfig | Sequence[FitConfig],
) -> CombinationModel:
    """Fit one pinball model per level in ``taus`` and combine with ``weights``.

    ``kernels`` and ``configs`` may be single values shared by all parts.
    Parts are fitted concurrently, capped by ``SCALEFIT_THREADS``.
    """
    taus = [float(t) for t in taus]
    weights = [float(c) for c in weights]
    m = len(taus)
    if m == 0 or len(weights) != m:
        raise InputError(f"need matching nonempty taus and weights, got {m} and {len(weights)}")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise InputError(f"taus must be strictly increasing and distinct, got {taus}")
    kernels = _broadcast(kernels, m, "kernels")
    configs = _broadcast(configs, m, "configs")
    _check_dataset(dataset)

    def one(j: int) -> QuantileModel:
        return fit_quantile(dataset, taus[j], kernels[j], configs[j])

    with ThreadPoolExecutor(max_workers=min(m, max_workers())) as pool:
        parts = list(pool.map(one, range(m)))
    return CombinationModel(tuple(taus), tuple(weights), tuple(parts))


def fit_iqr(dataset: Dataset, kernels, configs, taus: Sequence[float] = (0.25, 0.75)) -> CombinationModel:
    if len(taus) != 2 or not (taus[0] < 0.5 < taus[1]):
        raise InputError(f"IQR levels need tau1 < 0.5 < tau2, got {tuple(taus)}")
    return fit_combination(dataset, taus, IQR_WEIGHTS, kernels, configs)


def fit_asymmetry(dataset: Dataset, kernels, configs,
                  taus: Sequence[float] = (0.05, 0.5, 0.95)) -> CombinationModel:
    if len(taus) != 3 or not (taus[0] < 0.5 == taus[1] < taus[2]):
        raise InputError(f"asymmetry levels need tau1 < tau2 = 0.5 < tau3, got {tuple(taus)}")
    return fit_combination(dataset, taus, ASYMMETRY_WEIGHTS, kernels, configs)


def fit_mad(
    dataset: Dataset,
    kernel1: KernelSpec,
    config1: FitConfig,
    kernel2: KernelSpec,
    config2: FitConfig,
    epsilon: float = DEFAULT_EPSILON,
) -> MadModel:
    if not epsilon > 0:
        raise InputError(f"epsilon must be > 0, got {epsilon}")
    median_model = fit_quantile(dataset, 0.5, kernel1, config1)
    residuals = np.abs(dataset.y - median_model.predict(dataset.X))
    residual_model = fit(Dataset(dataset.X, residuals), kernel2, LossSpec.smoothed(epsilon), config2)
    return MadModel(median_model, residual_model, float(epsilon))


def predict_scale(model: CombinationModel | MadModel, x) -> float:
    """Scale estimate at one point: a combination value (any sign) or a clipped MAD."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.dim,):
        raise InputError(f"dimension mismatch: expected ({model.dim},), got {x.shape}")
    return float(model.predict(x.reshape(1, -1))[0])


def detect_crossing(model: CombinationModel, grid) -> CrossingReport:
    """Grid points where the lower-level quantile fit exceeds the upper one."""
    if len(model.parts) != 2 or tuple(model.weights) != IQR_WEIGHTS:
        raise InputError("crossing detection needs a two-part model with weights (-1, +1)")
    G = as_points(grid, model.dim)
    if G.shape[0] == 0:
        raise InputError("grid is empty")
    lower, upper = model.part_predictions(G)
    violation = lower - upper
    idx = np.flatnonzero(violation > 0)
    worst = float(violation[idx].max()) if idx.size else 0.0
    return CrossingReport(idx, G[idx], worst)


def mad_risk(X, y, f: Predictor, g: Predictor, loss: LossSpec | None = None) -> float:
    """Empirical mean of ``L(|y_i - f(x_i)|, g(x_i))``; 0.5-pinball by default."""
    loss = loss or LossSpec.pinball(0.5)
    if loss.tau != 0.5:
        raise InputError("mad_risk needs the 0.5-pinball or the smoothed pinball loss")
    X = as_points(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size == 0:
        raise InputError("mad_risk needs a nonempty sample")
    if X.shape[0] != y.size:
        raise InputError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    return float(np.mean(losses.loss(loss, np.abs(y - f(X)), g(X))))
