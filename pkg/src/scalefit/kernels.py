"""Kernel functions, Gram matrices and the kernel sup-norm.

Three families are supported: the Gaussian RBF kernel
``k(x, x') = exp(-gamma * ||x - x'||^2)``, the linear kernel ``<x, x'>`` and
the inhomogeneous polynomial kernel ``(<x, x'> + coef0) ** degree``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InputError, NumericalError

KernelFamily = Literal["gaussian_rbf", "linear", "polynomial"]
KERNEL_FAMILIES: tuple[str, ...] = ("gaussian_rbf", "linear", "polynomial")

DEFAULT_JITTER = 1e-10

# rows per block when accumulating squared distances in long double
_BLOCK = 256


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily = "gaussian_rbf"
    gamma: float = 1.0
    degree: int = 2
    coef0: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in KERNEL_FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}")
        if self.family == "gaussian_rbf" and not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise InputError(f"gaussian_rbf kernel needs gamma > 0, got {self.gamma}")
        if self.family == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise InputError(f"polynomial kernel needs integer degree >= 1, got {self.degree}")


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    jitter: float

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor; raises :class:`NumericalError` if K is not PD."""
        try:
            return np.linalg.cholesky(self.entries)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"Gram matrix is not positive definite: {exc}") from exc


def as_points(X, dim: int | None = None) -> np.ndarray:
    """Coerce ``X`` to a 2-D float array of shape (m, d).

    A 1-D array is read as m scalar inputs when ``dim`` is None or 1, and as
    a single point when ``dim`` equals its length.
    """
    try:
        arr = np.asarray(X, dtype=float)
    except ValueError as exc:
        raise InputError(f"inputs do not form a rectangular numeric array: {exc}") from None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if dim is not None and dim > 1:
            if arr.shape[0] != dim:
                raise InputError(f"expected a point of dimension {dim}, got length {arr.shape[0]}")
            arr = arr.reshape(1, -1)
        else:
            arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise InputError(f"inputs must be at most 2-D, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise InputError(f"dimension mismatch: expected {dim}, got {arr.shape[1]}")
    return arr


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    out = np.empty((A.shape[0], B.shape[0]))
    Bl = B.astype(np.longdouble)
    for start in range(0, A.shape[0], _BLOCK):
        a = A[start:start + _BLOCK].astype(np.longdouble)
        diff = a[:, None, :] - Bl[None, :, :]
        out[start:start + _BLOCK] = np.einsum("ijk,ijk->ij", diff, diff).astype(float)
    return out


def cross_kernel(spec: KernelSpec, A, B) -> np.ndarray:
    """Matrix ``[k(a_i, b_j)]`` for two point sets of equal dimension."""
    A = as_points(A)
    B = as_points(B)
    if A.shape[1] != B.shape[1]:
        raise InputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.family == "gaussian_rbf":
        return np.exp(-spec.gamma * _sq_dists(A, B))
    inner = A @ B.T
    if spec.family == "linear":
        return inner
    return (inner + spec.coef0) ** int(spec.degree)


def eval_kernel(spec: KernelSpec, x, x_prime) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.ndim != 1 or x.shape != x_prime.shape:
        raise InputError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    return float(cross_kernel(spec, x.reshape(1, -1), x_prime.reshape(1, -1))[0, 0])


def kernel_diagonal(spec: KernelSpec, X) -> np.ndarray:
    X = as_points(X)
    if spec.family == "gaussian_rbf":
        return np.ones(X.shape[0])
    sq = np.einsum("ij,ij->i", X, X)
    if spec.family == "linear":
        return sq
    return (sq + spec.coef0) ** int(spec.degree)


def sup_norm(spec: KernelSpec, inputs=None) -> float:
    """``sup_x sqrt(k(x, x))``.

    Exact (= 1) for the RBF kernel. For the other families the supremum is
    taken over ``inputs`` only, which is an empirical stand-in for the
    supremum over the whole input space.
    """
    if spec.family == "gaussian_rbf":
        return 1.0
    if inputs is None or np.asarray(inputs).size == 0:
        raise InputError(f"sup_norm of a {spec.family} kernel needs a nonempty input set")
    diag = kernel_diagonal(spec, inputs)
    return float(np.sqrt(np.max(np.maximum(diag, 0.0))))


def gram(spec: KernelSpec, inputs, jitter: float = DEFAULT_JITTER) -> GramMatrix:
    if not jitter >= 0:
        raise InputError(f"jitter must be >= 0, got {jitter}")
    X = as_points(inputs)
    n = X.shape[0]
    K = cross_kernel(spec, X, X)
    # mirror the upper triangle so symmetry is exact regardless of the family
    iu = np.triu_indices(n, 1)
    K[(iu[1], iu[0])] = K[iu]
    K[np.diag_indices(n)] += jitter
    return GramMatrix(entries=K, jitter=float(jitter))
