"""Expected improvement and next-candidate proposal (minimisation convention)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from rcbo import gp
from rcbo.hyperspace import HyperPoint, HyperSpace, from_unit, to_unit

log = logging.getLogger(__name__)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class AcquisitionConfig:
    candidate_pool_size: int = 4096
    local_refinement_steps: int = 50
    duplicate_tol: float = 1e-6
    exploration_jitter: float = 0.0
    initial_step: float = 0.05

    def __post_init__(self):
        if self.candidate_pool_size < 1:
            raise ValueError("candidate_pool_size must be >= 1")
        if self.exploration_jitter < 0 or self.duplicate_tol < 0:
            raise ValueError("exploration_jitter and duplicate_tol must be >= 0")


def expected_improvement(mean, sd, f_best: float, xi: float = 0.0):
    """``E[max(0, f_best - xi - Y)]`` for ``Y ~ N(mean, sd^2)``.

    At ``sd == 0`` this is ``max(0, f_best - mean - xi)``.  Works on scalars
    and arrays.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if np.any(sd < 0):
        raise ValueError("sd must be >= 0")
    imp = f_best - mean - xi
    safe = np.where(sd > 0, sd, 1.0)
    # tiny sd sends z to +-inf, where both terms take their correct limits
    with np.errstate(over="ignore"):
        z = imp / safe
        ei = imp * ndtr(z) + safe * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    ei = np.where(sd > 0, np.maximum(ei, 0.0), np.maximum(imp, 0.0))
    return float(ei) if ei.ndim == 0 else ei


def _ei_at(model, U, f_best, xi):
    mean, var = gp.predict(model, U)
    return expected_improvement(mean, np.sqrt(var), f_best, xi)


def _min_dist(U, H):
    """Infinity-norm distance from each row of U to its nearest row of H."""
    if H.shape[0] == 0:
        return np.full(U.shape[0], np.inf)
    return np.min(np.max(np.abs(U[:, None, :] - H[None, :, :]), axis=2), axis=1)


def _pool(d, size, rng):
    seed = int(rng.integers(2 ** 63 - 1))
    if size & (size - 1) == 0:
        return qmc.Sobol(d, scramble=True, seed=seed).random_base2(int(math.log2(size)))
    return qmc.Sobol(d, scramble=True, seed=seed).random(size)


def propose_next(model: gp.GPModel, space: HyperSpace, history: Sequence[HyperPoint],
                 cfg: AcquisitionConfig = AcquisitionConfig(),
                 rng: np.random.Generator | int | None = None,
                 f_best: float | None = None) -> HyperPoint:
    """Maximise EI over a scrambled-Sobol pool, refine the winner coordinate-wise.

    Candidates within ``cfg.duplicate_tol`` of a history point are rejected.
    If the whole pool is duplicate the pool is redrawn once at double size;
    failing that the best pool point is returned with a warning.
    ``f_best`` defaults to the smallest training target of ``model``.
    """
    rng = np.random.default_rng(rng)
    d = space.n_active
    H = np.array([to_unit(space, p) for p in history]).reshape(-1, d)
    fb = float(np.min(model.y)) if f_best is None else f_best
    xi = cfg.exploration_jitter

    size = cfg.candidate_pool_size
    for attempt in range(2):
        U = _pool(d, size, rng)
        ei = _ei_at(model, U, fb, xi)
        ok = _min_dist(U, H) > cfg.duplicate_tol
        if ok.any():
            break
        size *= 2
    else:
        log.warning("every acquisition candidate duplicates a probed point; returning best anyway")
        return from_unit(space, U[int(np.argmax(ei))])

    # stable order: highest EI first, then pool index
    i = int(np.flatnonzero(ok)[np.argmax(ei[ok])])
    x, best = U[i].copy(), float(ei[i])
    x, best = _refine(model, x, best, H, fb, xi, cfg, rng)
    return from_unit(space, x)


def _refine(model, x, best, H, fb, xi, cfg, rng):
    """Coordinate-wise +/- step search; the step halves after a sweep without gain."""
    d = x.shape[0]
    step = cfg.initial_step
    improved_in_sweep = False
    for s in range(cfg.local_refinement_steps):
        k = s % d
        trials = np.repeat(x[None, :], 2, axis=0)
        trials[0, k] = min(x[k] + step, 1.0)
        trials[1, k] = max(x[k] - step, 0.0)
        ei = _ei_at(model, trials, fb, xi)
        ok = _min_dist(trials, H) > cfg.duplicate_tol
        ei = np.where(ok, ei, -np.inf)
        j = int(np.argmax(ei))
        if ei[j] > best:
            x, best = trials[j], float(ei[j])
            improved_in_sweep = True
        if k == d - 1:
            if not improved_in_sweep:
                step *= 0.5
            improved_in_sweep = False
    return x, best
