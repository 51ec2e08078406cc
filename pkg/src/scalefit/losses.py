"""Pinball loss and its epsilon-smoothed, logistic-type variant.

All functions are vectorised over ``y`` and ``t`` and return floats for
scalar input.

The smoothed loss is

    L_eps(y, t) = (y - t) / 2 - eps * log(2 * sigmoid((y - t) / eps))
                = pinball_0.5(y, t) - eps * log(2 * sigmoid(|y - t| / eps))

and is evaluated through the second form, with ``log(2 sigmoid(r))``
written as ``log 2 - log1p(exp(-r))`` for ``r >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import expit

from .errors import InputError, UnsupportedOperationError

LossFamily = Literal["pinball", "smoothed_pinball"]
LOG2 = math.log(2.0)


@dataclass(frozen=True)
class LossSpec:
    family: LossFamily = "pinball"
    tau: float = 0.5
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.family not in ("pinball", "smoothed_pinball"):
            raise InputError(f"unknown loss family {self.family!r}")
        if not 0.0 < self.tau < 1.0:
            raise InputError(f"tau must lie in (0, 1), got {self.tau}")
        if self.family == "smoothed_pinball":
            if self.epsilon is None or not self.epsilon > 0:
                raise InputError(f"smoothed_pinball needs epsilon > 0, got {self.epsilon}")
            if self.tau != 0.5:
                raise InputError("smoothed_pinball is only defined for tau == 0.5")

    @classmethod
    def pinball(cls, tau: float) -> "LossSpec":
        return cls("pinball", tau)

    @classmethod
    def smoothed(cls, epsilon: float = 0.1) -> "LossSpec":
        return cls("smoothed_pinball", 0.5, epsilon)


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def _log_two_sigmoid_abs(r):
    # log(2 sigmoid(|r|)) in [0, log 2]
    return LOG2 - np.log1p(np.exp(-np.abs(r)))


def pinball(tau: float, y, t):
    u = np.asarray(y, dtype=float) - np.asarray(t, dtype=float)
    return _out(np.where(u >= 0, tau * u, (tau - 1.0) * u))


def pinball_gap(epsilon: float, y, t):
    """``pinball_0.5(y, t) - L_eps(y, t)`` in closed form; lies in [0, eps log 2]."""
    if not epsilon > 0:
        raise InputError(f"epsilon must be > 0, got {epsilon}")
    u = np.asarray(y, dtype=float) - np.asarray(t, dtype=float)
    return _out(epsilon * _log_two_sigmoid_abs(u / epsilon))


def loss(spec: LossSpec, y, t):
    if spec.family == "pinball":
        return pinball(spec.tau, y, t)
    u = np.asarray(y, dtype=float) - np.asarray(t, dtype=float)
    val = 0.5 * np.abs(u) - spec.epsilon * _log_two_sigmoid_abs(u / spec.epsilon)
    return _out(np.maximum(val, 0.0))


def loss_d1(spec: LossSpec, y, t):
    """Derivative in ``t``; for the pinball loss a subgradient (0 at ``y == t``)."""
    u = np.asarray(y, dtype=float) - np.asarray(t, dtype=float)
    if spec.family == "pinball":
        return _out(np.where(u > 0, -spec.tau, np.where(u < 0, 1.0 - spec.tau, 0.0)))
    return _out(0.5 - expit(u / spec.epsilon))


def loss_d2(spec: LossSpec, y, t):
    if spec.family != "smoothed_pinball":
        raise UnsupportedOperationError("second derivative is only defined for smoothed_pinball")
    u = np.asarray(y, dtype=float) - np.asarray(t, dtype=float)
    s = expit(-np.abs(u) / spec.epsilon)
    # s * (1 - s) is symmetric in r; using -|r| keeps s small and accurate
    return _out(s * (1.0 - s) / spec.epsilon)


def logistic_form(epsilon: float, y, t):
    """``-(eps/2) log(4 sigmoid(r)(1 - sigmoid(r)))``, an equivalent form of ``L_eps``.

    Used to cross-check :func:`loss`; evaluated through log-sigmoids so it stays
    finite for large ``|r|``.
    """
    r = (np.asarray(y, dtype=float) - np.asarray(t, dtype=float)) / epsilon
    log_sig = -np.logaddexp(0.0, -r)
    log_one_minus = -np.logaddexp(0.0, r)
    return _out(-0.5 * epsilon * (2 * LOG2 + log_sig + log_one_minus))
