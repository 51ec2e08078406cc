"""Regularized empirical risk minimization over the span of kernel sections.

Every fitted function has the form ``f(x) = sum_i beta_i k(x_i, x)`` and the
objective minimized is

    J(beta) = (1/n) sum_i L(y_i, (K beta)_i) + lam * beta' K beta

with no intercept. The pinball loss is handled by coordinate ascent on the
box-constrained dual (with periodic conjugate-gradient steps on the free
coordinates); the smoothed pinball loss by damped Newton-Raphson.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import losses
from .dataset import Dataset
from .errors import ConvergenceError, InputError
from .kernels import DEFAULT_JITTER, GramMatrix, KernelSpec, as_points, cross_kernel, gram
from .losses import LossSpec

log = logging.getLogger(__name__)

ARMIJO = 1e-4
MAX_HALVINGS = 60
# recompute K @ beta from scratch every this many sweeps to flush drift
_REFRESH_EVERY = 25
_FACE_STEP_EVERY = 10


@dataclass(frozen=True)
class FitConfig:
    lam: float
    max_iter: int | None = None
    tol: float = 1e-8
    jitter: float = DEFAULT_JITTER
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise InputError(f"lambda must be > 0, got {self.lam}")
        if not self.tol > 0:
            raise InputError(f"tol must be > 0, got {self.tol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise InputError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.jitter >= 0:
            raise InputError(f"jitter must be >= 0, got {self.jitter}")

    def iterations_for(self, loss: LossSpec) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return 10_000 if loss.family == "pinball" else 100


@dataclass(frozen=True)
class SolverReport:
    method: str
    iterations: int
    residual: float
    converged: bool = True
    objective_trace: tuple[float, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class QuantileModel:
    kernel: KernelSpec
    loss: LossSpec
    lam: float
    train_inputs: np.ndarray
    coefficients: np.ndarray
    objective_value: float = float("nan")
    report: SolverReport | None = None

    @property
    def dim(self) -> int:
        return self.train_inputs.shape[1]

    def predict(self, X) -> np.ndarray:
        X = as_points(X, self.dim)
        return cross_kernel(self.kernel, X, self.train_inputs) @ self.coefficients


def predict(model: QuantileModel, x) -> float:
    """Value of the fitted function at a single point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.dim,):
        raise InputError(f"dimension mismatch: expected ({model.dim},), got {x.shape}")
    return float(model.predict(x.reshape(1, -1))[0])


def _data_term(loss: LossSpec, y: np.ndarray, f: np.ndarray) -> float:
    return float(np.mean(losses.loss(loss, y, f)))


def _objective(K: np.ndarray, y: np.ndarray, loss: LossSpec, lam: float, beta: np.ndarray) -> float:
    f = K @ beta
    return _data_term(loss, y, f) + lam * float(beta @ f)


def objective(dataset: Dataset, kernel: KernelSpec, loss: LossSpec, config: FitConfig, beta) -> float:
    """``J(beta)`` with the Gram matrix built as in :func:`fit`."""
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != dataset.n:
        raise InputError(f"beta has length {beta.shape[0]}, expected {dataset.n}")
    K = gram(kernel, dataset.X, config.jitter).entries
    return _objective(K, dataset.y, loss, config.lam, beta)


def pinball_box(tau: float, lam: float, n: int) -> tuple[float, float]:
    """Bounds ``[-(1 - tau) / (2 lam n), tau / (2 lam n)]`` on each coefficient."""
    s = 2.0 * lam * n
    return -(1.0 - tau) / s, tau / s


@njit(cache=True, nogil=True)
def _dual_sweep(K, y, beta, f, lo, hi, order, lam):
    best = 0.0
    n = K.shape[0]
    for i in order:
        r = y[i] - f[i]
        kii = K[i, i]
        if kii > 0.0:
            new = beta[i] + r / kii
        elif r > 0.0:
            new = hi
        elif r < 0.0:
            new = lo
        else:
            new = beta[i]
        if new < lo:
            new = lo
        elif new > hi:
            new = hi
        delta = new - beta[i]
        if delta != 0.0:
            beta[i] = new
            for j in range(n):
                f[j] += delta * K[i, j]
            gain = lam * (2.0 * delta * r - delta * delta * kii)
            if gain > best:
                best = gain
    return best


def duality_gap(y: np.ndarray, f: np.ndarray, beta: np.ndarray, tau: float, lam: float) -> float:
    """Primal minus dual objective at box-feasible ``beta`` with ``f = K beta``.

    Each summand ``rho_tau(u_i) - a_i u_i`` with ``a_i = 2 lam n beta_i`` is
    nonnegative, so the sum is a certificate on the primal suboptimality.
    """
    n = y.shape[0]
    u = y - f
    a = 2.0 * lam * n * beta
    return float(np.sum(losses.pinball(tau, u, 0.0) - a * u) / n)


def _dual(y, beta, f, lam) -> float:
    return lam * float(2.0 * beta @ y - beta @ f)


def _face_step(K, y, beta, f, lo, hi, lam, passes: int = 5):
    """Conjugate-gradient ascent of the dual on the coordinates inside the box.

    With the bounded coordinates held fixed, the dual restricted to the
    free block ``F`` is the concave quadratic ``2 r'd - d'K_FF d`` (up to the
    factor ``lam``), ``r = y_F - f_F``. CG iterates increase it
    monotonically; the first iterate that would leave the box is cut at
    the boundary, that coordinate becomes bounded, and the next pass runs
    on the smaller block. Plain coordinate sweeps act like Gauss-Seidel on
    the free block and stall when ``K`` is ill conditioned.
    """
    for _ in range(passes):
        free = np.flatnonzero((beta > lo) & (beta < hi))
        if free.size == 0:
            break
        A = K[np.ix_(free, free)]
        b0 = beta[free]
        d = np.zeros(free.size)
        res = y[free] - f[free]
        p = res.copy()
        rr = float(res @ res)
        hit = False
        for _ in range(2 * free.size + 10):
            if rr <= 1e-30:
                break
            Ap = A @ p
            curv = float(p @ Ap)
            if not curv > 0:
                break
            alpha = rr / curv
            x = b0 + d
            with np.errstate(divide="ignore", invalid="ignore"):
                room = np.where(p > 0, (hi - x) / p, np.where(p < 0, (lo - x) / p, np.inf))
            tmax = float(np.min(room))
            if alpha >= tmax:
                d += max(tmax, 0.0) * p
                hit = True
                break
            d += alpha * p
            res -= alpha * Ap
            rr_new = float(res @ res)
            p = res + (rr_new / rr) * p
            rr = rr_new
        new = beta.copy()
        new[free] = np.clip(b0 + d, lo, hi)
        f_new = K @ new
        if not _dual(y, new, f_new, lam) > _dual(y, beta, f, lam):
            break
        beta, f = new, f_new
        if not hit:
            break
    return beta, f


def _fit_pinball(K: np.ndarray, y: np.ndarray, loss: LossSpec, config: FitConfig):
    n = y.shape[0]
    lo, hi = pinball_box(loss.tau, config.lam, n)
    beta = np.zeros(n)
    f = np.zeros(n)
    rng = np.random.Generator(np.random.Philox(config.seed))
    max_iter = config.iterations_for(loss)
    Kc = np.ascontiguousarray(K)
    gap = duality_gap(y, f, beta, loss.tau, config.lam)
    sweeps = 0
    while gap > config.tol:
        if sweeps >= max_iter:
            raise ConvergenceError(
                f"dual coordinate ascent did not reach gap {config.tol:g} in {max_iter} sweeps "
                f"(gap {gap:.3e})", beta, gap, sweeps)
        order = rng.permutation(n)
        _dual_sweep(Kc, y, beta, f, lo, hi, order, config.lam)
        sweeps += 1
        if sweeps % _FACE_STEP_EVERY == 0:
            beta, f = _face_step(Kc, y, beta, f, lo, hi, config.lam)
        if sweeps % _REFRESH_EVERY == 0:
            f = Kc @ beta
        gap = duality_gap(y, f, beta, loss.tau, config.lam)
    return beta, SolverReport("dual_coordinate_ascent", sweeps, gap)


def _fit_smoothed(K: np.ndarray, y: np.ndarray, loss: LossSpec, config: FitConfig):
    n = y.shape[0]
    lam = config.lam
    beta = np.zeros(n)
    f = np.zeros(n)
    J = _data_term(loss, y, f)
    trace = [J]
    max_iter = config.iterations_for(loss)
    eye = np.eye(n)
    for it in range(max_iter + 1):
        g = losses.loss_d1(loss, y, f) / n + 2.0 * lam * beta
        grad = K @ g
        res = float(np.max(np.abs(grad)))
        if res <= config.tol:
            return beta, SolverReport("newton_raphson", it, res, True, tuple(trace))
        if it == max_iter:
            break
        d2 = losses.loss_d2(loss, y, f)
        # K H_red = Hessian, where H_red = diag(d2) K / n + 2 lam I; K cancels from both sides
        try:
            step = np.linalg.solve(d2[:, None] * K / n + 2.0 * lam * eye + config.jitter * eye, -g)
        except np.linalg.LinAlgError:
            log.debug("Newton system singular at iteration %d, taking a gradient step", it)
            step = -grad
        slope = float(grad @ step)
        if not slope < 0:
            step, slope = -grad, -float(grad @ grad)
        Kstep = K @ step
        s = 1.0
        for _ in range(MAX_HALVINGS):
            f_new = f + s * Kstep
            beta_new = beta + s * step
            J_new = _data_term(loss, y, f_new) + lam * float(beta_new @ f_new)
            if J_new <= J + ARMIJO * s * slope:
                break
            s *= 0.5
        else:
            # at the floating-point floor: no representable decrease remains
            return beta, SolverReport("newton_raphson", it, res, res <= config.tol, tuple(trace))
        beta, f, J = beta_new, f_new, J_new
        trace.append(J)
    raise ConvergenceError(
        f"Newton-Raphson did not reach gradient norm {config.tol:g} in {max_iter} iterations "
        f"(residual {res:.3e})", beta, res, max_iter)


def fit_gram(G: GramMatrix | np.ndarray, y, loss: LossSpec, config: FitConfig):
    """Solve for the coefficients given a precomputed Gram matrix.

    Returns ``(beta, objective_value, report)``.
    """
    K = G.entries if isinstance(G, GramMatrix) else np.asarray(G, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if K.shape != (y.shape[0], y.shape[0]):
        raise InputError(f"Gram matrix shape {K.shape} does not match {y.shape[0]} targets")
    if loss.family == "pinball":
        beta, report = _fit_pinball(K, y, loss, config)
    else:
        beta, report = _fit_smoothed(K, y, loss, config)
    return beta, _objective(K, y, loss, config.lam, beta), report


def fit(dataset: Dataset, kernel: KernelSpec, loss: LossSpec, config: FitConfig) -> QuantileModel:
    if dataset.n < 1:
        raise InputError("cannot fit on an empty dataset")
    G = gram(kernel, dataset.X, config.jitter)
    beta, value, report = fit_gram(G, dataset.y, loss, config)
    log.debug("fit %s tau=%g lam=%g: %s", loss.family, loss.tau, config.lam, report)
    return QuantileModel(kernel, loss, config.lam, dataset.X.copy(), beta, value, report)
