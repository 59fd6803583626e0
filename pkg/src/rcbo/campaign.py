"""Optimisation campaigns: Bayesian loop, grid baseline and their analysis."""
from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from rcbo import gp
from rcbo.acquisition import AcquisitionConfig, propose_next
from rcbo.hyperspace import (DomainError, GridSpec, HyperPoint, HyperSpace, from_unit,
                             grid_points, is_duplicate, to_unit)

log = logging.getLogger(__name__)

INITIAL, BAYES, GRID = "initial", "bayes", "grid"
MAXIMISE, MINIMISE = "max", "min"


class CampaignError(ValueError):
    pass


@dataclass(frozen=True)
class Observation:
    iteration: int
    method: str
    point: HyperPoint
    objective: float | None
    wall_time: float = 0.0
    seed: int | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.objective is None


@dataclass
class CampaignLog:
    space: HyperSpace
    method: str
    direction: str = MAXIMISE
    seed: int | None = None
    budget: int | None = None
    init_count: int | None = None
    task: dict = field(default_factory=dict)
    observations: list[Observation] = field(default_factory=list)
    snapshots: list[dict] = field(default_factory=list)
    stop_reason: str = "budget"

    def successful(self) -> list[Observation]:
        return [o for o in self.observations if not o.failed]

    def __len__(self):
        return len(self.observations)


def _better(a: float, b: float, direction: str) -> bool:
    return a > b if direction == MAXIMISE else a < b


def _direction_of(objective, direction):
    d = direction or getattr(objective, "direction", MAXIMISE)
    if d not in (MAXIMISE, MINIMISE):
        raise CampaignError(f"direction must be 'max' or 'min', got {d!r}")
    return d


def _evaluate(objective, point, iteration, method, seed) -> Observation:
    t0 = time.perf_counter()
    try:
        value = float(objective(point))
        err = None if math.isfinite(value) else f"non-finite objective {value!r}"
    except Exception as exc:  # evaluator failures are recorded, not fatal
        value, err = float("nan"), f"{type(exc).__name__}: {exc}"
    dt = time.perf_counter() - t0
    if err is not None:
        log.warning("iteration %d failed: %s", iteration, err)
        return Observation(iteration, method, point, None, dt, seed, err)
    return Observation(iteration, method, point, value, dt, seed)


# ------------------------------------------------------------- initial design

def initial_design(space: HyperSpace, count: int, rng) -> list[HyperPoint]:
    """Greedy-maximin corners of the unit cube plus its centre.

    Starts at the all-low corner; each further corner maximises the
    Euclidean distance to those already chosen, ties broken by ``rng``.
    ``count - 1`` corners are taken, then the centre.  Requests beyond
    ``2**d + 1`` points are filled with uniform non-duplicate draws.
    """
    if count < 2:
        raise CampaignError(f"initial design needs count >= 2, got {count}")
    rng = np.random.default_rng(rng)
    d = space.n_active
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    n_corners = min(count - 1, corners.shape[0])
    chosen = [0]
    while len(chosen) < n_corners:
        rest = [i for i in range(corners.shape[0]) if i not in chosen]
        dist = np.min(np.linalg.norm(corners[rest][:, None, :] - corners[chosen][None, :, :],
                                     axis=2), axis=1)
        ties = [r for r, dv in zip(rest, dist) if dv >= dist.max() - 1e-12]
        chosen.append(ties[int(rng.integers(len(ties)))])
    units = [corners[i] for i in chosen] + [np.full(d, 0.5)]
    while len(units) < count:
        u = rng.random(d)
        if not is_duplicate(space, u, units, 1e-6):
            units.append(u)
    return [from_unit(space, u) for u in units]


# --------------------------------------------------------------- the campaigns

def run_bayesian(objective: Callable[[HyperPoint], float], space: HyperSpace, budget: int,
                 init_count: int = 8, seed: int = 0, *, direction: str | None = None,
                 acquisition: AcquisitionConfig = AcquisitionConfig(),
                 gp_config: gp.GPConfig = gp.GPConfig(),
                 target: float | None = None, patience: int | None = None,
                 callback: Callable[[Observation, dict | None], None] | None = None,
                 task: dict | None = None) -> CampaignLog:
    """Initial design, then fit -> propose -> evaluate until the budget is spent.

    Stops early when ``target`` is reached or after ``patience`` consecutive
    Bayesian iterations without improvement.  Failed evaluations are logged
    and left out of the surrogate's training set.
    """
    if init_count < 2:
        raise CampaignError("init_count must be >= 2")
    if budget < init_count:
        raise CampaignError(f"budget {budget} < init_count {init_count}")
    direction = _direction_of(objective, direction)
    sign = -1.0 if direction == MAXIMISE else 1.0
    design_ss, loop_ss = np.random.SeedSequence(seed).spawn(2)
    loop_rng = np.random.default_rng(loop_ss)
    clog = CampaignLog(space, BAYES, direction, seed, budget, init_count, dict(task or {}))

    def record(obs, snap):
        clog.observations.append(obs)
        if snap is not None:
            clog.snapshots.append(snap)
        if callback is not None:
            callback(obs, snap)

    def target_hit():
        return target is not None and any(
            not _better(target, o.objective, direction) for o in clog.successful())

    for i, p in enumerate(initial_design(space, init_count, design_ss), start=1):
        record(_evaluate(objective, p, i, INITIAL, seed), None)
    if target_hit():
        clog.stop_reason = "target"
        return clog

    best_so_far = _running_best_value(clog)
    stale = 0
    for it in range(init_count + 1, budget + 1):
        gp_rng, acq_rng = (np.random.default_rng(s) for s in loop_rng.integers(2 ** 63 - 1, size=2))
        history = [o.point for o in clog.observations]
        ok = clog.successful()
        snap = {"iteration": it}
        point = None
        if len(ok) >= 2:
            U = np.array([to_unit(space, o.point) for o in ok])
            y = sign * np.array([o.objective for o in ok])
            try:
                model = gp.fit(U, y, config=gp_config, rng=gp_rng)
                point = propose_next(model, space, history, acquisition, acq_rng)
                snap.update(model.snapshot())
            except gp.GPError as exc:
                log.warning("surrogate fit failed at iteration %d: %s", it, exc)
                snap["error"] = str(exc)
        if point is None:
            point = _random_point(space, history, acquisition.duplicate_tol, acq_rng)
            snap.setdefault("error", "too few successful observations")
        if is_duplicate(space, point, history, acquisition.duplicate_tol):
            snap["duplicate_fallback"] = True
        obs = _evaluate(objective, point, it, BAYES, seed)
        record(obs, snap)
        if target_hit():
            clog.stop_reason = "target"
            break
        current = _running_best_value(clog)
        if current is not None and (best_so_far is None or _better(current, best_so_far, direction)):
            best_so_far, stale = current, 0
        else:
            stale += 1
        if patience is not None and stale >= patience:
            clog.stop_reason = "patience"
            break
    return clog


def _random_point(space, history, tol, rng):
    for _ in range(1000):
        u = rng.random(space.n_active)
        if not is_duplicate(space, u, history, tol):
            return from_unit(space, u)
    return from_unit(space, rng.random(space.n_active))


def _running_best_value(clog):
    ok = clog.successful()
    if not ok:
        return None
    vals = [o.objective for o in ok]
    return max(vals) if clog.direction == MAXIMISE else min(vals)


def run_grid(objective: Callable[[HyperPoint], float], space: HyperSpace, grid: GridSpec,
             *, direction: str | None = None, workers: int = 1, seed: int | None = None,
             callback: Callable[[Observation, dict | None], None] | None = None,
             task: dict | None = None) -> CampaignLog:
    """Evaluate every grid point; the log keeps grid order whatever ``workers`` is."""
    direction = _direction_of(objective, direction)
    points = grid_points(space, grid)
    clog = CampaignLog(space, GRID, direction, seed, len(points), None, dict(task or {}))
    jobs = [(p, i) for i, p in enumerate(points, start=1)]

    def run(job):
        return _evaluate(objective, job[0], job[1], GRID, seed)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = ex.map(run, jobs)
            for obs in results:
                clog.observations.append(obs)
                if callback is not None:
                    callback(obs, None)
    else:
        for job in jobs:
            obs = run(job)
            clog.observations.append(obs)
            if callback is not None:
                callback(obs, None)
    return clog


# ------------------------------------------------------------------- analysis

def best(clog: CampaignLog) -> Observation:
    """Best successful observation; the earliest iteration wins ties."""
    top = None
    for o in clog.observations:
        if o.failed:
            continue
        if top is None or _better(o.objective, top.objective, clog.direction):
            top = o
    if top is None:
        raise CampaignError("log has no successful observation")
    return top


def running_best(clog: CampaignLog) -> list[tuple[int, float | None, float | None]]:
    """``(iteration, objective, best so far)`` per observation."""
    rows, cur = [], None
    for o in clog.observations:
        if not o.failed and (cur is None or _better(o.objective, cur, clog.direction)):
            cur = o.objective
        rows.append((o.iteration, o.objective, cur))
    return rows


def iterations_to_within(clog: CampaignLog, slack: float) -> int:
    """First iteration whose running best is within ``slack`` of the final best."""
    final = best(clog).objective
    eps = 1e-12 * max(1.0, abs(final))
    for it, _, cur in running_best(clog):
        if cur is None:
            continue
        gap = final - cur if clog.direction == MAXIMISE else cur - final
        if gap <= slack + eps:
            return it
    raise CampaignError("unreachable: final best never attained")  # pragma: no cover


@dataclass(frozen=True)
class DimensionSpread:
    name: str
    low: float
    high: float
    flag: str

    @property
    def spread(self) -> float:
        return self.high - self.low


@dataclass(frozen=True)
class SensitivityReport:
    n_observations: int
    n_top: int
    top_fraction: float
    dims: tuple[DimensionSpread, ...]
    fixed: dict
    sufficient: bool

    def flagged(self, flag: str) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims if d.flag == flag)


INSENSITIVE_SPREAD = 0.8
SENSITIVE_SPREAD = 0.2
MIN_SENSITIVITY_OBS = 10


def sensitivity_report(clog: CampaignLog, top_fraction: float = 0.1) -> SensitivityReport:
    """Per-dimension range, in unit coordinates, of the best observations.

    A free dimension whose top observations spread over >= 0.8 of its range
    is flagged ``insensitive``; one confined to <= 0.2 is ``sensitive``.
    """
    if not 0 < top_fraction <= 1:
        raise CampaignError(f"top_fraction must be in (0, 1], got {top_fraction}")
    ok = clog.successful()
    space = clog.space
    if len(ok) < MIN_SENSITIVITY_OBS:
        return SensitivityReport(len(ok), 0, top_fraction, (), dict(space.fixed), False)
    sgn = -1.0 if clog.direction == MAXIMISE else 1.0
    ranked = sorted(ok, key=lambda o: (sgn * o.objective, o.iteration))
    k = max(1, math.ceil(top_fraction * len(ok) - 1e-9))
    U = np.array([to_unit(space, o.point) for o in ranked[:k]])
    dims = []
    for j, name in enumerate(space.active):
        lo, hi = float(U[:, j].min()), float(U[:, j].max())
        spread = hi - lo
        flag = ("insensitive" if spread >= INSENSITIVE_SPREAD
                else "sensitive" if spread <= SENSITIVE_SPREAD else "undetermined")
        dims.append(DimensionSpread(name, lo, hi, flag))
    return SensitivityReport(len(ok), k, top_fraction, tuple(dims), dict(space.fixed), True)


def duplicate_pairs(clog: CampaignLog, tol: float = 1e-6) -> list[tuple[int, int]]:
    """Iteration pairs of successful Bayesian observations closer than ``tol``."""
    obs = [o for o in clog.successful() if o.method == BAYES]
    out = []
    for a, b in itertools.combinations(obs, 2):
        if is_duplicate(clog.space, a.point, [b.point], tol):
            out.append((a.iteration, b.iteration))
    return out
