"""The four-dimensional reservoir hyper-parameter domain.

A point is a setting of the feedback gain ``alpha``, the input gain
``beta``, the interconnection gain ``gamma`` and the interconnection
density ``rho``.  Searches run in unit coordinates: linear dimensions are
mapped affinely, log-scaled dimensions affinely in log10 space, so one
kernel length-scale regime covers values spanning ten decades.

Any subset of the dimensions can be pinned to a fixed value; unit
vectors then only carry the free ("active") dimensions, in the
canonical order ``alpha, beta, gamma, rho``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

NAMES = ("alpha", "beta", "gamma", "rho")
LINEAR = "linear"
LOG10 = "log10"

# relative slack when checking bounds, absorbs log/exp round-off
_BOUND_RTOL = 1e-12


class DomainError(ValueError):
    """A value lies outside the domain of an operation."""


@dataclass(frozen=True)
class HyperPoint:
    """One setting of the reservoir hyper-parameters (natural units)."""

    alpha: float
    beta: float
    gamma: float
    rho: float

    def __post_init__(self):
        for name in NAMES:
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.beta, self.gamma, self.rho)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(NAMES, self.as_tuple()))

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "HyperPoint":
        if len(values) != 4:
            raise DomainError(f"expected 4 values, got {len(values)}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class Dimension:
    name: str
    low: float
    high: float
    scale: str = LINEAR

    def __post_init__(self):
        if self.name not in NAMES:
            raise DomainError(f"unknown dimension {self.name!r}")
        if self.scale not in (LINEAR, LOG10):
            raise DomainError(f"{self.name}: scale must be 'linear' or 'log10', got {self.scale!r}")
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise DomainError(f"{self.name}: bounds must be finite")
        if not self.low < self.high:
            raise DomainError(f"{self.name}: need low < high, got [{self.low}, {self.high}]")
        if self.scale == LOG10 and self.low <= 0:
            raise DomainError(f"{self.name}: log10 scale needs low > 0, got {self.low}")

    def contains(self, v: float) -> bool:
        slack = _BOUND_RTOL * max(abs(self.low), abs(self.high))
        return self.low - slack <= v <= self.high + slack

    def to_unit(self, v: float) -> float:
        if self.scale == LOG10:
            lo, hi = math.log10(self.low), math.log10(self.high)
            u = (math.log10(v) - lo) / (hi - lo)
        else:
            u = (v - self.low) / (self.high - self.low)
        return min(max(u, 0.0), 1.0)

    def from_unit(self, u: float) -> float:
        if self.scale == LOG10:
            lo, hi = math.log10(self.low), math.log10(self.high)
            v = 10.0 ** (lo + u * (hi - lo))
        else:
            v = self.low + u * (self.high - self.low)
        # endpoints exact, interior clipped against round-off
        if u == 0.0:
            return self.low
        if u == 1.0:
            return self.high
        return min(max(v, self.low), self.high)


@dataclass(frozen=True)
class HyperSpace:
    """Bounds and scales of the four dimensions, plus optional pinned values.

    Parameters
    ----------
    dims : sequence of Dimension
        Exactly one entry per name in ``NAMES``, in that order.
    fixed : mapping, optional
        ``name -> value`` for dimensions excluded from the search.  Each
        value must lie within its dimension's bounds.
    """

    dims: tuple[Dimension, ...]
    fixed: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        dims = tuple(self.dims)
        if tuple(d.name for d in dims) != NAMES:
            raise DomainError(f"dimensions must be {NAMES}, got {tuple(d.name for d in dims)}")
        object.__setattr__(self, "dims", dims)
        fixed = {k: float(v) for k, v in dict(self.fixed).items()}
        for name, v in fixed.items():
            if name not in NAMES:
                raise DomainError(f"unknown fixed dimension {name!r}")
            if not self.dim(name).contains(v):
                raise DomainError(f"fixed {name}={v} outside bounds")
        if len(fixed) == len(NAMES):
            raise DomainError("at least one dimension must be free")
        object.__setattr__(self, "fixed", fixed)

    def __hash__(self):
        return hash((self.dims, tuple(sorted(self.fixed.items()))))

    def dim(self, name: str) -> Dimension:
        return self.dims[NAMES.index(name)]

    @property
    def active(self) -> tuple[str, ...]:
        return tuple(n for n in NAMES if n not in self.fixed)

    @property
    def n_active(self) -> int:
        return len(self.active)

    def with_fixed(self, **values: float) -> "HyperSpace":
        return HyperSpace(self.dims, {**self.fixed, **values})

    def check(self, p: HyperPoint) -> None:
        for d in self.dims:
            v = getattr(p, d.name)
            if not d.contains(v):
                raise DomainError(f"{d.name}={v!r} outside [{d.low}, {d.high}]")
            if d.name in self.fixed and v != self.fixed[d.name]:
                raise DomainError(f"{d.name}={v!r} differs from fixed value {self.fixed[d.name]!r}")

    def to_dict(self) -> dict:
        return {
            "dims": {d.name: {"low": d.low, "high": d.high, "scale": d.scale} for d in self.dims},
            "fixed": dict(self.fixed),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "HyperSpace":
        dims = data["dims"]
        return cls(
            tuple(Dimension(n, float(dims[n]["low"]), float(dims[n]["high"]),
                            dims[n].get("scale", LINEAR)) for n in NAMES),
            dict(data.get("fixed", {})),
        )


def default_space() -> HyperSpace:
    """Bayesian search intervals: alpha linear on [0.1, 1.5], the rest log10 on [1e-10, 1]."""
    return HyperSpace((
        Dimension("alpha", 0.1, 1.5, LINEAR),
        Dimension("beta", 1e-10, 1.0, LOG10),
        Dimension("gamma", 1e-10, 1.0, LOG10),
        Dimension("rho", 1e-10, 1.0, LOG10),
    ))


@dataclass(frozen=True)
class GridSpec:
    """Explicit value lists per dimension for exhaustive search."""

    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    gamma: tuple[float, ...]
    rho: tuple[float, ...]

    def __post_init__(self):
        for name in NAMES:
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    def lists(self) -> tuple[tuple[float, ...], ...]:
        return tuple(getattr(self, n) for n in NAMES)

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.lists())

    def validate(self, space: HyperSpace) -> None:
        for name, values in zip(NAMES, self.lists()):
            if not values:
                raise DomainError(f"grid list for {name} is empty")
            d = space.dim(name)
            for v in values:
                if not d.contains(v):
                    raise DomainError(f"grid value {name}={v} outside [{d.low}, {d.high}]")


def baseline_grid() -> GridSpec:
    """The 3 x 2 x 3 x 3 grid-search lattice (54 points)."""
    return GridSpec(
        alpha=(0.6, 0.8, 1.0),
        beta=(0.01, 0.1),
        gamma=(0.001, 0.01, 0.1),
        rho=(0.001, 0.01, 0.1),
    )


def to_unit(space: HyperSpace, p: HyperPoint) -> np.ndarray:
    """Map a point to the unit cube of the active dimensions."""
    space.check(p)
    return np.array([space.dim(n).to_unit(getattr(p, n)) for n in space.active])


def from_unit(space: HyperSpace, u: Iterable[float]) -> HyperPoint:
    """Inverse of :func:`to_unit`; fixed dimensions take their pinned value."""
    u = np.asarray(list(u) if not isinstance(u, np.ndarray) else u, dtype=float).ravel()
    if u.shape[0] != space.n_active:
        raise DomainError(f"expected {space.n_active} unit coordinates, got {u.shape[0]}")
    values = dict(space.fixed)
    for name, c in zip(space.active, u):
        c = float(c)
        if not 0.0 <= c <= 1.0:
            raise DomainError(f"unit coordinate for {name}={c!r} outside [0, 1]")
        values[name] = space.dim(name).from_unit(c)
    return HyperPoint(**values)


def grid_points(space: HyperSpace, grid: GridSpec) -> list[HyperPoint]:
    """Cartesian product of the grid lists, row-major over (alpha, beta, gamma, rho)."""
    grid.validate(space)
    return [HyperPoint(*combo) for combo in itertools.product(*grid.lists())]


def is_duplicate(space: HyperSpace, p: HyperPoint | np.ndarray,
                 history: Sequence[HyperPoint | np.ndarray], tol: float = 1e-6) -> bool:
    """True iff some history entry is within ``tol`` of ``p`` (unit-space infinity norm).

    Points and history entries may be given as HyperPoints or as unit vectors.
    """
    if tol < 0:
        raise DomainError(f"tol must be >= 0, got {tol}")
    if len(history) == 0:
        return False
    u = _as_unit(space, p)
    h = np.array([_as_unit(space, q) for q in history])
    return bool(np.any(np.max(np.abs(h - u), axis=1) <= tol))


def _as_unit(space: HyperSpace, p) -> np.ndarray:
    if isinstance(p, HyperPoint):
        return to_unit(space, p)
    return np.asarray(p, dtype=float)
