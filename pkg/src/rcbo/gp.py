"""Gaussian-process surrogate with a squared-exponential ARD kernel.

Targets are standardised before fitting; the prior mean is the training
mean.  Kernel parameters maximise the log marginal likelihood, optimised
in log coordinates by L-BFGS-B from several starts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize
from scipy.linalg import lapack

JITTER_START = 1e-10
JITTER_MAX = 1e-4
LOG_2PI = math.log(2.0 * math.pi)


class GPError(ArithmeticError):
    """Kernel matrix could not be factorised, or too little data."""


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float
    length_scales: tuple[float, ...]
    noise_variance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "length_scales", tuple(float(v) for v in self.length_scales))
        if not self.signal_variance > 0:
            raise GPError(f"signal_variance must be > 0, got {self.signal_variance}")
        if not all(v > 0 for v in self.length_scales):
            raise GPError(f"length scales must be > 0, got {self.length_scales}")
        if not self.noise_variance >= 0:
            raise GPError(f"noise_variance must be >= 0, got {self.noise_variance}")

    def to_dict(self) -> dict:
        return {"signal_variance": self.signal_variance,
                "length_scales": list(self.length_scales),
                "noise_variance": self.noise_variance}


@dataclass(frozen=True)
class GPConfig:
    n_random_starts: int = 8
    max_evals: int = 200
    noise_floor: float = 1e-8
    signal_bounds: tuple[float, float] = (1e-3, 1e3)
    length_bounds: tuple[float, float] = (0.05, 20.0)
    noise_bounds: tuple[float, float] = (1e-8, 1.0)


@dataclass(frozen=True, eq=False)
class GPModel:
    X: np.ndarray          # n x d unit-space inputs
    y: np.ndarray          # raw targets
    y_mean: float
    y_std: float
    params: KernelParams
    L: np.ndarray          # lower Cholesky factor of K + (noise + jitter) I
    alpha: np.ndarray      # K^-1 standardised targets
    jitter: float
    info: dict = field(default_factory=dict)

    @property
    def y_standardised(self) -> np.ndarray:
        return (self.y - self.y_mean) / self.y_std

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def kernel_matrix(self) -> np.ndarray:
        """The factorised matrix, noise and jitter included."""
        K = se_kernel(self.X, self.X, self.params)
        K[np.diag_indices_from(K)] += self.params.noise_variance + self.jitter
        return K

    def snapshot(self) -> dict:
        return {**self.params.to_dict(), "jitter": self.jitter,
                "log_marginal_likelihood": log_marginal_likelihood(self)}


def se_kernel(A, B, params: KernelParams) -> np.ndarray:
    """``s2 * exp(-0.5 * sum_d ((a_d - b_d) / l_d)^2)``."""
    ls = np.asarray(params.length_scales)
    diff = (np.asarray(A)[:, None, :] - np.asarray(B)[None, :, :]) / ls
    return params.signal_variance * np.exp(-0.5 * np.sum(diff * diff, axis=-1))


def _sq_dists(X):
    diff = X[:, None, :] - X[None, :, :]
    return np.moveaxis(diff * diff, -1, 0)  # d x n x n


def _factor(K, signal_variance):
    """Cholesky with jitter escalation; returns (L, jitter)."""
    n = K.shape[0]
    jitter = JITTER_START * signal_variance
    while True:
        Kj = K.copy()
        Kj.flat[::n + 1] += jitter
        L, info = lapack.dpotrf(Kj, lower=1, clean=1)
        if info == 0:
            return L, jitter
        jitter *= 10.0
        if jitter > JITTER_MAX * signal_variance * (1 + 1e-9):
            raise GPError("kernel matrix not positive definite even with maximal jitter")


def _standardise(y):
    mean = float(np.mean(y))
    std = float(np.std(y))
    if not std > 1e-12 * max(1.0, abs(mean)):
        std = 1.0
    return mean, std


def _build(X, y, mean, std, params, info=None) -> GPModel:
    K = se_kernel(X, X, params)
    K.flat[::K.shape[0] + 1] += params.noise_variance
    L, jitter = _factor(K, params.signal_variance)
    alpha = linalg.cho_solve((L, True), (y - mean) / std)
    return GPModel(X, y, mean, std, params, L, alpha, jitter, info or {})


def _neg_lml_and_grad(theta, X, ys, D, d):
    s2 = math.exp(theta[0])
    ls = np.exp(theta[1:1 + d])
    noise = math.exp(theta[-1])
    n = ys.shape[0]
    SE = s2 * np.exp(-0.5 * np.tensordot(1.0 / ls ** 2, D, axes=1))
    K = SE.copy()
    K.flat[::n + 1] += noise
    try:
        L, _ = _factor(K, s2)
    except GPError:
        return 1e25, np.zeros_like(theta)
    a, _ = lapack.dpotrs(L, ys, lower=1)
    lml = -0.5 * ys @ a - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI
    Kinv, _ = lapack.dpotri(L, lower=1)
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    M = np.outer(a, a) - Kinv
    MS = M * SE
    grad = np.empty_like(theta)
    grad[0] = 0.5 * MS.sum()
    grad[1:1 + d] = 0.5 * np.tensordot(D, MS, axes=([1, 2], [0, 1])) / ls ** 2
    grad[-1] = 0.5 * noise * np.trace(M)
    return -lml, -grad


def fit(points, values, params: KernelParams | None = None, config: GPConfig | None = None,
        rng: np.random.Generator | int | None = None) -> GPModel:
    """Fit a GP to unit-space ``points`` and raw objective ``values``.

    If ``params`` is given they are used as-is; otherwise the log marginal
    likelihood is maximised from one start at unit length scales plus
    ``config.n_random_starts`` log-uniform random starts, each refined by
    L-BFGS-B for at most ``config.max_evals`` evaluations.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(values, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise GPError(f"{X.shape[0]} points but {y.shape[0]} values")
    if X.shape[0] < 2:
        raise GPError("need at least 2 observations")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise GPError("non-finite training data")
    mean, std = _standardise(y)
    if params is not None:
        return _build(X, y, mean, std, params)

    cfg = config or GPConfig()
    rng = np.random.default_rng(rng)
    d = X.shape[1]
    ys = (y - mean) / std
    D = _sq_dists(X)
    noise_lo = max(cfg.noise_bounds[0], cfg.noise_floor)
    bounds = ([tuple(np.log(cfg.signal_bounds))] + [tuple(np.log(cfg.length_bounds))] * d
              + [(math.log(noise_lo), math.log(max(cfg.noise_bounds[1], noise_lo)))])
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    starts = [np.clip(np.r_[0.0, np.zeros(d), math.log(1e-4)], lo, hi)]
    starts += [rng.uniform(lo, hi) for _ in range(cfg.n_random_starts)]

    best_theta, best_val, n_evals = None, np.inf, 0
    for theta0 in starts:
        res = optimize.minimize(_neg_lml_and_grad, theta0, args=(X, ys, D, d), jac=True,
                                method="L-BFGS-B", bounds=bounds,
                                options={"maxfun": cfg.max_evals})
        n_evals += res.nfev
        if res.fun < best_val:
            best_theta, best_val = res.x, res.fun
    if best_theta is None or not np.isfinite(best_val) or best_val >= 1e25:
        raise GPError("likelihood optimisation failed at every start")
    p = KernelParams(math.exp(best_theta[0]), tuple(np.exp(best_theta[1:1 + d])),
                     max(math.exp(best_theta[-1]), cfg.noise_floor))
    return _build(X, y, mean, std, p, {"n_evals": n_evals, "n_starts": len(starts)})


def predict(model: GPModel, x):
    """Posterior mean and latent-function variance in objective units.

    ``x`` is one unit vector (scalars returned) or an m x d array.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Xs = np.atleast_2d(x)
    Ks = se_kernel(Xs, model.X, model.params)
    mu = Ks @ model.alpha
    v = linalg.solve_triangular(model.L, Ks.T, lower=True)
    var = np.maximum(model.params.signal_variance - np.sum(v * v, axis=0), 0.0)
    mean = model.y_mean + model.y_std * mu
    var = var * model.y_std ** 2
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def log_marginal_likelihood(model: GPModel) -> float:
    """Exact log marginal likelihood of the standardised targets."""
    ys = model.y_standardised
    return float(-0.5 * ys @ model.alpha - np.sum(np.log(np.diag(model.L)))
                 - 0.5 * model.n * LOG_2PI)
