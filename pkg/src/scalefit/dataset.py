from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernels import as_points


@dataclass(frozen=True)
class Dataset:
    """Paired inputs ``X`` (n, d) and real outputs ``y`` (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        X = as_points(self.X)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise InputError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InputError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx])
