"""Synthetic location-scale data with closed-form conditional oracles.

Draws are ``x ~ U[a, b]`` and ``y = loc(x) + scale(x) * e`` with ``e``
independent of ``x``. Because the noise law is fixed, every conditional
quantile, the conditional MAD and every interquantile range are known in
closed form:

    q_tau(x)  = loc(x) + scale(x) * Q(tau)
    MAD(x)    = scale(x) * median(|e - Q(0.5)|)

Noise families
--------------
gaussian  standard normal
laplace   Laplace with unit scale
skewed    Exp(1) shifted by its median ``log 2`` (so its median is 0)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.special import ndtri

from .dataset import Dataset
from .errors import InputError

LOG2 = math.log(2.0)

LOCATIONS = ("constant", "sine", "lidar_like")
SCALES = ("constant", "linear_increasing", "step")
NOISES = ("gaussian", "laplace", "skewed")


@dataclass(frozen=True)
class GeneratorSpec:
    """Shape of the location and scale curves plus the noise law.

    ``loc_level``/``loc_amplitude`` parametrize the location curve and
    ``scale_level``/``scale_slope`` the scale curve:

    * location ``constant``: ``loc_level``
    * location ``sine``: ``loc_level + loc_amplitude * sin(2 pi (x - a) / (b - a))``
    * location ``lidar_like``: flat at ``loc_level`` up to 60% of the domain,
      then a quadratic drop of total size ``loc_amplitude``
    * scale ``constant``: ``scale_level``
    * scale ``linear_increasing``: ``scale_level + scale_slope * (x - a)``
    * scale ``step``: ``scale_level``, plus ``scale_slope`` on the upper half
    """

    location: Literal["constant", "sine", "lidar_like"] = "sine"
    scale: Literal["constant", "linear_increasing", "step"] = "linear_increasing"
    noise: Literal["gaussian", "laplace", "skewed"] = "gaussian"
    a: float = 0.0
    b: float = 1.0
    seed: int = 0
    loc_level: float = 0.0
    loc_amplitude: float = 1.0
    scale_level: float = 0.2
    scale_slope: float = 1.0

    def __post_init__(self) -> None:
        if self.location not in LOCATIONS:
            raise InputError(f"unknown location {self.location!r}; choose from {LOCATIONS}")
        if self.scale not in SCALES:
            raise InputError(f"unknown scale {self.scale!r}; choose from {SCALES}")
        if self.noise not in NOISES:
            raise InputError(f"unknown noise {self.noise!r}; choose from {NOISES}")
        if not self.a < self.b:
            raise InputError(f"domain needs a < b, got [{self.a}, {self.b}]")
        ends = self.scale_fn(np.array([self.a, self.b, (self.a + self.b) / 2]))
        if not np.all(ends > 0):
            raise InputError("scale function must be strictly positive on [a, b]")

    @property
    def symmetric(self) -> bool:
        return self.noise != "skewed"

    def loc_fn(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.location == "constant":
            return np.full_like(x, self.loc_level)
        u = (x - self.a) / (self.b - self.a)
        if self.location == "sine":
            return self.loc_level + self.loc_amplitude * np.sin(2 * np.pi * u)
        knee = 0.6
        drop = np.clip((u - knee) / (1 - knee), 0.0, None) ** 2
        return self.loc_level - self.loc_amplitude * drop

    def scale_fn(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.scale == "constant":
            return np.full_like(x, self.scale_level)
        if self.scale == "linear_increasing":
            return self.scale_level + self.scale_slope * (x - self.a)
        return self.scale_level + self.scale_slope * (x >= (self.a + self.b) / 2)


def _flatten(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise InputError("generators are one-dimensional")
        arr = arr[:, 0]
    return arr


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def noise_quantile(noise: str, tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if np.any((tau <= 0) | (tau >= 1)):
        raise InputError("tau must lie in (0, 1)")
    if noise == "gaussian":
        return ndtri(tau)
    if noise == "laplace":
        return np.where(tau < 0.5, np.log(2 * tau), -np.log(2 * (1 - tau)))
    if noise == "skewed":
        return -np.log1p(-tau) - LOG2
    raise InputError(f"unknown noise {noise!r}")


def _skewed_abs_cdf(s: float) -> float:
    # P(|E - log 2| <= s) for E ~ Exp(1)
    return math.exp(-max(LOG2 - s, 0.0)) - math.exp(-(LOG2 + s))


@lru_cache(maxsize=None)
def noise_mad(noise: str) -> float:
    """``median(|e - median(e)|)`` for the noise family."""
    if noise == "gaussian":
        return float(ndtri(0.75))
    if noise == "laplace":
        return LOG2
    if noise != "skewed":
        raise InputError(f"unknown noise {noise!r}")
    lo, hi = 0.0, 2.0
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if _skewed_abs_cdf(mid) < 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample(spec: GeneratorSpec, n: int) -> Dataset:
    """``n`` i.i.d. draws, reproducible from ``spec.seed`` (Philox stream)."""
    if int(n) != n or n < 1:
        raise InputError(f"n must be a positive integer, got {n}")
    rng = np.random.Generator(np.random.Philox(spec.seed))
    x = rng.uniform(spec.a, spec.b, size=int(n))
    if spec.noise == "gaussian":
        e = rng.standard_normal(int(n))
    elif spec.noise == "laplace":
        e = rng.laplace(0.0, 1.0, size=int(n))
    else:
        e = rng.standard_exponential(int(n)) - LOG2
    y = spec.loc_fn(x) + spec.scale_fn(x) * e
    return Dataset(x.reshape(-1, 1), y)


def true_quantile(spec: GeneratorSpec, tau: float, x):
    x = _flatten(x)
    return _out(spec.loc_fn(x) + spec.scale_fn(x) * noise_quantile(spec.noise, tau))


def true_median(spec: GeneratorSpec, x):
    return true_quantile(spec, 0.5, x)


def true_mad(spec: GeneratorSpec, x):
    return _out(spec.scale_fn(_flatten(x)) * noise_mad(spec.noise))


def true_iqr(spec: GeneratorSpec, tau1: float, tau2: float, x):
    if not tau1 < tau2:
        raise InputError(f"need tau1 < tau2, got {tau1}, {tau2}")
    width = noise_quantile(spec.noise, tau2) - noise_quantile(spec.noise, tau1)
    return _out(spec.scale_fn(_flatten(x)) * width)


def true_asymmetry(spec: GeneratorSpec, tau1: float, tau2: float, tau3: float, x):
    q1, q2, q3 = (noise_quantile(spec.noise, t) for t in (tau1, tau2, tau3))
    return _out(spec.scale_fn(_flatten(x)) * ((q3 - q2) - (q2 - q1)))
