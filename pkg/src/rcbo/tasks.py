"""Objective functions for campaigns.

* ``toy_surface``: cheap analytic landscapes with known optima.
* ``generate_synthetic`` / ``load_features``: labelled feature sequences.
* ``evaluate_objective``: test accuracy of a reservoir with a given
  hyper-parameter point, the expensive black box being optimised.

Feature directory layout (``export_dataset`` writes, ``load_features`` reads)::

    <dir>/manifest.tsv
        # rcbo-dataset 1
        # n_features <K>
        # n_classes <C>
        file<TAB>label<TAB>split
        seq_00000.txt<TAB>3<TAB>train
        ...
    <dir>/seq_00000.txt   one frame per line, K space-separated decimals

Exported values carry 17 significant digits, so export/load is bit-exact.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from rcbo import readout
from rcbo.hyperspace import DomainError, HyperPoint, HyperSpace, to_unit
from rcbo.reservoir import (ReservoirConfig, ReservoirError, generate_input_mask,
                            generate_interconnection, run_sequence)

TRAIN, TEST = "train", "test"
MANIFEST = "manifest.tsv"
DATASET_MAGIC = "# rcbo-dataset"
DATASET_VERSION = 1


class DatasetError(ValueError):
    pass


# ---------------------------------------------------------------- toy surfaces

def _double_min_1d(u):
    x = u[0]
    return 100.0 * (x - 0.8) ** 2 * ((x - 0.2) ** 2 + 0.01)


def _pit_2d(u):
    r2 = ((u[0] - 0.3) / 0.12) ** 2 + ((u[1] - 0.65) / 0.12) ** 2
    return -0.70 - 0.16 * math.exp(-0.5 * r2)


def _sensitive_2of4_4d(u):
    r2 = ((u[0] - 0.7) / 0.15) ** 2 + ((u[1] - 0.35) / 0.15) ** 2
    return -math.exp(-0.5 * r2)


@dataclass(frozen=True)
class ToySurface:
    """Analytic cost (lower is better) on the unit cube of ``n_dims`` dimensions."""

    name: str
    n_dims: int
    func: Callable = field(repr=False)
    argmin: tuple[float, ...]
    minimum: float
    doc: str = ""


# double_min_1d: 100 (x-0.8)^2 ((x-0.2)^2 + 0.01); global minimum 0 at 0.8,
# local minimum ~0.3497 at x ~ 0.2177, separated by a hump at x ~ 0.482.
# pit_2d: plateau -0.70 with a Gaussian pit of depth 0.16 (width 0.12) at
# (0.3, 0.65); minimum -0.86.
# sensitive_2of4_4d: -exp(-r^2/2), r from (0.7, 0.35) over dims 1-2 in units
# of 0.15; dims 3-4 do not enter.
TOY_SURFACES = {
    "double_min_1d": ToySurface("double_min_1d", 1, _double_min_1d, (0.8,), 0.0),
    "pit_2d": ToySurface("pit_2d", 2, _pit_2d, (0.3, 0.65), -0.86),
    "sensitive_2of4_4d": ToySurface("sensitive_2of4_4d", 4, _sensitive_2of4_4d,
                                    (0.7, 0.35, 0.5, 0.5), -1.0),
}
PIT_PLATEAU = -0.70


def double_min_local_minimum() -> tuple[float, float]:
    """Location and value of the non-global minimum of ``double_min_1d``.

    Root of the cubic derivative in (0, 0.5).
    """
    # d/dx (x-q)^2((x-p)^2+e) = 2(x-q)[(x-p)^2 + e + (x-p)(x-q)]
    p, q, e = 0.2, 0.8, 0.01
    roots = np.roots([2.0, -(3 * p + q), p * p + e + p * q])
    x = float(min(r.real for r in roots if abs(r.imag) < 1e-12))
    return x, _double_min_1d((x,))


def toy_surface(name: str, x) -> float:
    try:
        surf = TOY_SURFACES[name]
    except KeyError:
        raise DomainError(f"unknown toy surface {name!r}; have {sorted(TOY_SURFACES)}") from None
    u = np.asarray(x, dtype=float).ravel()
    if u.shape[0] != surf.n_dims:
        raise DomainError(f"{name} takes {surf.n_dims} coordinates, got {u.shape[0]}")
    return float(surf.func(u))


class ToyObjective:
    """Evaluates a toy surface at the unit coordinates of a point in ``space``."""

    direction = "min"

    def __init__(self, name: str, space: HyperSpace):
        if name not in TOY_SURFACES:
            raise DomainError(f"unknown toy surface {name!r}")
        if space.n_active != TOY_SURFACES[name].n_dims:
            raise DomainError(f"{name} needs {TOY_SURFACES[name].n_dims} free dimensions,"
                              f" space has {space.n_active}")
        self.name, self.space = name, space

    def __call__(self, point: HyperPoint) -> float:
        return toy_surface(self.name, to_unit(self.space, point))


# -------------------------------------------------------------------- datasets

@dataclass(frozen=True, eq=False)
class Dataset:
    sequences: list
    labels: np.ndarray
    splits: list
    n_features: int
    n_classes: int

    def __post_init__(self):
        if not (len(self.sequences) == len(self.labels) == len(self.splits)):
            raise DatasetError("sequences, labels and splits differ in length")
        for i, (s, lab, sp) in enumerate(zip(self.sequences, self.labels, self.splits)):
            if s.ndim != 2 or s.shape[1] != self.n_features:
                raise DatasetError(f"sequence {i} has shape {s.shape}, expected (T, {self.n_features})")
            if not 0 <= lab < self.n_classes:
                raise DatasetError(f"sequence {i}: label {lab} outside [0, {self.n_classes})")
            if sp not in (TRAIN, TEST):
                raise DatasetError(f"sequence {i}: unknown split {sp!r}")
        if TRAIN not in self.splits or TEST not in self.splits:
            raise DatasetError("both train and test splits must be nonempty")

    def indices(self, split: str) -> list[int]:
        return [i for i, s in enumerate(self.splits) if s == split]

    def __len__(self):
        return len(self.sequences)

    def equals(self, other: "Dataset") -> bool:
        return (self.n_features == other.n_features and self.n_classes == other.n_classes
                and list(self.splits) == list(other.splits)
                and np.array_equal(self.labels, other.labels)
                and all(np.array_equal(a, b) for a, b in zip(self.sequences, other.sequences))
                and len(self) == len(other))


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """Desk-scale stand-in for a video-feature classification task.

    Each class gets a random mean direction of norm ``separation``; a
    sequence is its class mean plus an AR(1) process with lag-one
    correlation ``correlation`` and stationary per-feature std ``noise``.
    """

    n_features: int = 20
    n_classes: int = 6
    sequences_per_class: int = 20
    min_length: int = 24
    max_length: int = 60
    separation: float = 1.0
    correlation: float = 0.8
    noise: float = 1.0
    train_fraction: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if self.separation < 0:
            raise DatasetError("separation must be >= 0")
        if self.min_length < 2 or self.max_length < self.min_length:
            raise DatasetError("need 2 <= min_length <= max_length")
        if not 0 <= self.correlation < 1:
            raise DatasetError("correlation must be in [0, 1)")
        n_train = round(self.train_fraction * self.sequences_per_class)
        if not 0 < n_train < self.sequences_per_class:
            raise DatasetError("train_fraction leaves an empty split")


def generate_synthetic(spec: SyntheticTaskSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    K, C = spec.n_features, spec.n_classes
    means = rng.normal(size=(C, K))
    means *= spec.separation / np.linalg.norm(means, axis=1, keepdims=True)
    n_train = round(spec.train_fraction * spec.sequences_per_class)
    innov = math.sqrt(1.0 - spec.correlation ** 2)
    seqs, labels, splits = [], [], []
    for c in range(C):
        for s in range(spec.sequences_per_class):
            T = int(rng.integers(spec.min_length, spec.max_length + 1))
            eps = rng.normal(size=(T, K)) * spec.noise
            z = np.empty((T, K))
            z[0] = eps[0]
            for t in range(1, T):
                z[t] = spec.correlation * z[t - 1] + innov * eps[t]
            seqs.append(means[c] + z)
            labels.append(c)
            splits.append(TRAIN if s < n_train else TEST)
    return Dataset(seqs, np.array(labels), splits, K, C)


def export_dataset(ds: Dataset, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = [f"{DATASET_MAGIC} {DATASET_VERSION}", f"# n_features {ds.n_features}",
             f"# n_classes {ds.n_classes}", "file\tlabel\tsplit"]
    for i, (seq, lab, sp) in enumerate(zip(ds.sequences, ds.labels, ds.splits)):
        name = f"seq_{i:05d}.txt"
        (d / name).write_text("\n".join(" ".join(f"{v:.17g}" for v in row) for row in seq) + "\n")
        lines.append(f"{name}\t{int(lab)}\t{sp}")
    (d / MANIFEST).write_text("\n".join(lines) + "\n")
    return d


def load_features(path, manifest: str = MANIFEST) -> Dataset:
    d = Path(path)
    mpath = d / manifest
    if not mpath.is_file():
        raise DatasetError(f"manifest not found: {mpath}")
    lines = mpath.read_text().splitlines()
    meta, rows = {}, []
    for ln in lines:
        if not ln.strip():
            continue
        if ln.startswith("#"):
            parts = ln[1:].split()
            if len(parts) >= 2:
                meta[parts[0]] = parts[1]
            continue
        rows.append(ln.split("\t"))
    if meta.get("rcbo-dataset") != str(DATASET_VERSION):
        raise DatasetError(f"{mpath}: missing or unsupported '{DATASET_MAGIC}' header")
    try:
        K, C = int(meta["n_features"]), int(meta["n_classes"])
    except (KeyError, ValueError):
        raise DatasetError(f"{mpath}: n_features / n_classes missing") from None
    if rows and rows[0] == ["file", "label", "split"]:
        rows = rows[1:]
    seqs, labels, splits = [], [], []
    for r in rows:
        if len(r) != 3:
            raise DatasetError(f"{mpath}: bad manifest row {r!r}")
        name, lab, sp = r
        f = d / name
        if not f.is_file():
            raise DatasetError(f"{name}: file missing")
        try:
            label = int(lab)
        except ValueError:
            raise DatasetError(f"{name}: label {lab!r} is not an integer") from None
        if not 0 <= label < C:
            raise DatasetError(f"{name}: unknown label {label} (n_classes={C})")
        if sp not in (TRAIN, TEST):
            raise DatasetError(f"{name}: unknown split {sp!r}")
        try:
            seq = np.loadtxt(f, ndmin=2)
        except ValueError as exc:
            raise DatasetError(f"{name}: inconsistent or non-numeric table ({exc})") from None
        if seq.shape[1] != K:
            raise DatasetError(f"{name}: {seq.shape[1]} columns, expected {K}")
        seqs.append(seq)
        labels.append(label)
        splits.append(sp)
    return Dataset(seqs, np.array(labels, dtype=int), splits, K, C)


# ------------------------------------------------------------------ objective

def _states(ds, idx, cfg, W, b, workers, backend, reset_state=True):
    def run(i):
        return run_sequence(cfg, W, b, ds.sequences[i], backend=backend) / cfg.i0
    if not reset_state:
        # one continuous stream: each sequence starts where the previous ended
        out, x = [], None
        for i in idx:
            traj = run_sequence(cfg, W, b, ds.sequences[i], x0=x, backend=backend)
            if traj.shape[0]:
                x = traj[-1]
            out.append(traj / cfg.i0)
        return out
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(run, idx))
    return [run(i) for i in idx]


def _fit_and_score(train_states, train_labels, test_states, test_labels, C, tc):
    S = np.vstack(train_states)
    D = np.vstack([readout.one_hot(np.full(s.shape[0], lab), C)
                   for s, lab in zip(train_states, train_labels)])
    w = readout.ridge_train(S, D, tc)
    pred = [readout.classify_sequence(w.apply(s)) for s in test_states]
    return readout.accuracy(pred, test_labels)


def select_lambda(train_states, train_labels, C, tc: readout.TrainingConfig) -> float:
    """Pick the grid value with best accuracy on every 4th training sequence.

    Ties go to the larger value.
    """
    n = len(train_states)
    val = [i for i in range(n) if i % 4 == 3]
    fit = [i for i in range(n) if i % 4 != 3]
    if not val or not fit:
        return tc.ridge_lambda
    best_lam, best_acc = tc.ridge_lambda, -1.0
    for lam in sorted(tc.lambda_grid):
        sub = readout.TrainingConfig(lam, tc.include_bias)
        try:
            acc = _fit_and_score([train_states[i] for i in fit], [train_labels[i] for i in fit],
                                 [train_states[i] for i in val], [train_labels[i] for i in val],
                                 C, sub)
        except np.linalg.LinAlgError:
            continue
        if acc >= best_acc:
            best_lam, best_acc = lam, acc
    return best_lam


def evaluate_objective(ds: Dataset, point: HyperPoint, rc: ReservoirConfig,
                       tc: readout.TrainingConfig = readout.TrainingConfig(),
                       workers: int = 1, backend: str | None = None,
                       reset_state: bool = True) -> float:
    """Test accuracy of the reservoir at ``point``.

    Masks are drawn once, every sequence starts from the zero state (or,
    with ``reset_state=False``, from the final state of the sequence run
    before it, training split first, then test), the
    readout is ridge-trained on all training frames against one-hot
    targets, and each test sequence is labelled by winner-takes-all voting.
    """
    if rc.n_inputs != ds.n_features:
        raise ReservoirError(f"reservoir takes {rc.n_inputs} inputs, dataset has {ds.n_features}")
    cfg = rc.with_point(point)
    W = generate_interconnection(cfg)
    b = generate_input_mask(cfg)
    tr, te = ds.indices(TRAIN), ds.indices(TEST)
    states = _states(ds, tr + te, cfg, W, b, workers, backend, reset_state)
    tr_states, te_states = states[:len(tr)], states[len(tr):]
    tr_labels = [int(ds.labels[i]) for i in tr]
    te_labels = [int(ds.labels[i]) for i in te]
    if tc.tune_lambda:
        lam = select_lambda(tr_states, tr_labels, ds.n_classes, tc)
        tc = readout.TrainingConfig(lam, tc.include_bias)
    return _fit_and_score(tr_states, tr_labels, te_states, te_labels, ds.n_classes, tc)


class ClassificationObjective:
    """``point -> test accuracy`` on a fixed dataset (higher is better)."""

    direction = "max"

    def __init__(self, ds: Dataset, rc: ReservoirConfig,
                 tc: readout.TrainingConfig = readout.TrainingConfig(),
                 workers: int = 1, backend: str | None = None, reset_state: bool = True):
        self.ds, self.rc, self.tc = ds, rc, tc
        self.workers, self.backend, self.reset_state = workers, backend, reset_state

    def __call__(self, point: HyperPoint) -> float:
        return evaluate_objective(self.ds, point, self.rc, self.tc, self.workers, self.backend,
                                  self.reset_state)
