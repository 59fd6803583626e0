"""Campaign configuration files.

A campaign is described by one YAML document::

    seed: 0
    output: runs/pit            # overridden by --out or RCBO_OUTPUT_DIR
    workers: 1
    task:
      kind: toy                 # toy | synthetic | features
      surface: pit_2d           # toy only
      # synthetic: any SyntheticTaskSpec field (n_features, seed, ...)
      # features: path (directory), manifest (default manifest.tsv)
    reservoir:                  # ignored by toy tasks
      n_nodes: 64
      i0: 1.0
      quant_in_bits: 8
      quant_out_bits: 10
      quantisation: true
      seed: 0
      reset_state: true
    space:
      alpha: {low: 0.1, high: 1.5, scale: linear}
      beta:  {low: 1e-10, high: 1, scale: log10}
      gamma: {low: 1e-10, high: 1, scale: log10}
      rho:   {low: 1e-10, high: 1, scale: log10}
      fixed: {gamma: 0.01, rho: 0.01}
    method:
      kind: bayes               # bayes | grid
      budget: 39
      init_count: 8
      target: null
      patience: null
      acquisition: {candidate_pool_size: 4096, exploration_jitter: 0.0}
      gp: {n_random_starts: 8}
      # grid: values: {alpha: [...], beta: [...], gamma: [...], rho: [...]}
    training:
      ridge_lambda: 1e-4
      include_bias: true
      tune_lambda: false

Unknown keys are errors.  Numbers written in a form YAML reads as text
(``1e-10``) are accepted.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from rcbo import gp, tasks
from rcbo.acquisition import AcquisitionConfig
from rcbo.hyperspace import NAMES, DomainError, GridSpec, HyperSpace, from_unit
from rcbo.readout import ReadoutError, TrainingConfig
from rcbo.reservoir import ReservoirConfig, ReservoirError

OUTPUT_ENV = "RCBO_OUTPUT_DIR"
TASK_KINDS = ("toy", "synthetic", "features")
METHOD_KINDS = ("bayes", "grid")


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ coercion

def _number(v, where, integer=False):
    if isinstance(v, bool):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    if isinstance(v, str):
        try:
            v = float(v)
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {v!r}") from None
    if not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}: expected a finite number, got {v!r}")
    if integer:
        if float(v) != int(v):
            raise ConfigError(f"{where}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _bool(v, where):
    if not isinstance(v, bool):
        raise ConfigError(f"{where}: expected true/false, got {v!r}")
    return v


def _block(data, key, required=True) -> dict:
    v = data.get(key)
    if v is None:
        if required:
            raise ConfigError(f"missing '{key}' block")
        return {}
    if not isinstance(v, Mapping):
        raise ConfigError(f"'{key}' must be a mapping")
    return dict(v)


def _no_extra(d, allowed, where):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(str, extra))}")


def _typed_fields(cls, raw, where, skip=()):
    """Coerce ``raw`` entries to the field types of dataclass ``cls``."""
    out = {}
    types = {f.name: f for f in fields(cls) if f.name not in skip}
    _no_extra(raw, types, where)
    for k, v in raw.items():
        default = types[k].default
        if isinstance(default, bool):
            out[k] = _bool(v, f"{where}.{k}")
        elif isinstance(default, int):
            out[k] = _number(v, f"{where}.{k}", integer=True)
        elif isinstance(default, float):
            out[k] = _number(v, f"{where}.{k}")
        elif isinstance(default, tuple):
            if not isinstance(v, (list, tuple)):
                raise ConfigError(f"{where}.{k}: expected a list")
            out[k] = tuple(_number(x, f"{where}.{k}") for x in v)
        else:
            out[k] = v
    return out


# ------------------------------------------------------------------ the config

@dataclass(frozen=True)
class TaskConfig:
    kind: str
    surface: str | None = None
    synthetic: tasks.SyntheticTaskSpec | None = None
    path: Path | None = None
    manifest: str = tasks.MANIFEST

    def describe(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "toy":
            d["surface"] = self.surface
        elif self.kind == "synthetic":
            d.update({f.name: getattr(self.synthetic, f.name) for f in fields(self.synthetic)})
        else:
            d.update({"path": str(self.path), "manifest": self.manifest})
        return d


@dataclass(frozen=True)
class MethodConfig:
    kind: str
    budget: int | None = None
    init_count: int = 8
    target: float | None = None
    patience: int | None = None
    acquisition: AcquisitionConfig = AcquisitionConfig()
    gp: gp.GPConfig = gp.GPConfig()
    grid: GridSpec | None = None


@dataclass(frozen=True)
class CampaignConfig:
    seed: int
    output: Path | None
    workers: int
    task: TaskConfig
    space: HyperSpace
    method: MethodConfig
    n_nodes: int = 64
    i0: float = 1.0
    quant_in_bits: int = 8
    quant_out_bits: int = 10
    quantisation: bool = True
    reservoir_seed: int = 0
    reset_state: bool = True
    training: TrainingConfig = field(default_factory=TrainingConfig)
    source: Path | None = None

    def output_dir(self, override=None) -> Path:
        """``override`` (the --out flag) wins, then the environment, then the file."""
        out = override or os.environ.get(OUTPUT_ENV) or self.output
        if not out:
            raise ConfigError("no output directory: set 'output', --out or " + OUTPUT_ENV)
        return Path(out)

    def with_overrides(self, seed=None, workers=None, tune_lambda=None) -> "CampaignConfig":
        kw = {}
        if seed is not None:
            kw["seed"] = int(seed)
        if workers is not None:
            if workers < 1:
                raise ConfigError("--workers must be >= 1")
            kw["workers"] = int(workers)
        if tune_lambda:
            t = self.training
            kw["training"] = TrainingConfig(t.ridge_lambda, t.include_bias, True, t.lambda_grid)
        return replace(self, **kw)

    def reservoir_config(self, n_inputs: int, point) -> ReservoirConfig:
        return ReservoirConfig(self.n_nodes, n_inputs, point, i0=self.i0,
                               quant_in_bits=self.quant_in_bits,
                               quant_out_bits=self.quant_out_bits,
                               quantisation_enabled=self.quantisation,
                               rng_seed=self.reservoir_seed)

    def describe_task(self) -> dict:
        d = self.task.describe()
        if self.task.kind != "toy":
            d["reservoir"] = {"n_nodes": self.n_nodes, "i0": self.i0,
                              "quant_in_bits": self.quant_in_bits,
                              "quant_out_bits": self.quant_out_bits,
                              "quantisation": self.quantisation, "seed": self.reservoir_seed,
                              "reset_state": self.reset_state}
            t = self.training
            d["training"] = {"ridge_lambda": t.ridge_lambda, "include_bias": t.include_bias,
                             "tune_lambda": t.tune_lambda}
        return d


# -------------------------------------------------------------------- parsing

def _parse_task(raw, base: Path) -> TaskConfig:
    kind = raw.get("kind")
    if kind not in TASK_KINDS:
        raise ConfigError(f"task.kind must be one of {TASK_KINDS}, got {kind!r}")
    rest = {k: v for k, v in raw.items() if k != "kind"}
    if kind == "toy":
        _no_extra(rest, ("surface",), "task")
        name = rest.get("surface")
        if name not in tasks.TOY_SURFACES:
            raise ConfigError(f"task.surface must be one of {sorted(tasks.TOY_SURFACES)}, got {name!r}")
        return TaskConfig(kind, surface=name)
    if kind == "synthetic":
        try:
            spec = tasks.SyntheticTaskSpec(**_typed_fields(tasks.SyntheticTaskSpec, rest, "task"))
        except tasks.DatasetError as exc:
            raise ConfigError(f"task: {exc}") from None
        return TaskConfig(kind, synthetic=spec)
    _no_extra(rest, ("path", "manifest"), "task")
    if "path" not in rest:
        raise ConfigError("task.path is required for kind 'features'")
    p = Path(str(rest["path"]))
    if not p.is_absolute():
        p = base / p
    manifest = str(rest.get("manifest", tasks.MANIFEST))
    if not p.is_dir():
        raise ConfigError(f"task.path {p} is not a directory")
    if not (p / manifest).is_file():
        raise ConfigError(f"task manifest {p / manifest} does not exist")
    return TaskConfig(kind, path=p, manifest=manifest)


def _parse_space(raw) -> HyperSpace:
    _no_extra(raw, NAMES + ("fixed",), "space")
    dims = {}
    for name in NAMES:
        d = raw.get(name)
        if not isinstance(d, Mapping):
            raise ConfigError(f"space.{name}: bounds missing")
        _no_extra(d, ("low", "high", "scale"), f"space.{name}")
        if "low" not in d or "high" not in d:
            raise ConfigError(f"space.{name}: needs both 'low' and 'high'")
        dims[name] = {"low": _number(d["low"], f"space.{name}.low"),
                      "high": _number(d["high"], f"space.{name}.high"),
                      "scale": d.get("scale", "linear")}
    fixed = raw.get("fixed") or {}
    if not isinstance(fixed, Mapping):
        raise ConfigError("space.fixed must be a mapping")
    fixed = {k: _number(v, f"space.fixed.{k}") for k, v in fixed.items()}
    try:
        return HyperSpace.from_dict({"dims": dims, "fixed": fixed})
    except DomainError as exc:
        raise ConfigError(f"space: {exc}") from None


def _opt(raw, key, where, integer=False):
    v = raw.get(key)
    return None if v is None else _number(v, f"{where}.{key}", integer)


def _parse_method(raw, space: HyperSpace) -> MethodConfig:
    kind = raw.get("kind")
    if kind not in METHOD_KINDS:
        raise ConfigError(f"method.kind must be one of {METHOD_KINDS}, got {kind!r}")
    if kind == "grid":
        _no_extra(raw, ("kind", "values"), "method")
        values = raw.get("values")
        if not isinstance(values, Mapping):
            raise ConfigError("method.values must map each dimension to a list")
        _no_extra(values, NAMES, "method.values")
        lists = {}
        for name in NAMES:
            v = values.get(name)
            if v is None and name in space.fixed:
                v = [space.fixed[name]]
            if not isinstance(v, (list, tuple)) or not v:
                raise ConfigError(f"method.values.{name}: expected a nonempty list")
            lists[name] = tuple(_number(x, f"method.values.{name}") for x in v)
        grid = GridSpec(**lists)
        try:
            grid.validate(space)
        except DomainError as exc:
            raise ConfigError(f"method.values: {exc}") from None
        for name, val in space.fixed.items():
            if grid.lists()[NAMES.index(name)] != (val,):
                raise ConfigError(f"method.values.{name}: fixed dimension must list only {val}")
        return MethodConfig(kind, budget=grid.size, grid=grid)

    _no_extra(raw, ("kind", "budget", "init_count", "target", "patience", "acquisition", "gp"),
              "method")
    if "budget" not in raw:
        raise ConfigError("method.budget is required for kind 'bayes'")
    budget = _number(raw["budget"], "method.budget", integer=True)
    init = _number(raw.get("init_count", 8), "method.init_count", integer=True)
    if init < 2:
        raise ConfigError("method.init_count must be >= 2")
    if budget < init:
        raise ConfigError(f"method.budget ({budget}) must be >= init_count ({init})")
    patience = _opt(raw, "patience", "method", integer=True)
    if patience is not None and patience < 1:
        raise ConfigError("method.patience must be >= 1")
    acq_raw = _block(raw, "acquisition", required=False)
    gp_raw = _block(raw, "gp", required=False)
    try:
        acq = AcquisitionConfig(**_typed_fields(AcquisitionConfig, acq_raw, "method.acquisition"))
    except ValueError as exc:
        raise ConfigError(f"method.acquisition: {exc}") from None
    gpc = gp.GPConfig(**_typed_fields(gp.GPConfig, gp_raw, "method.gp"))
    return MethodConfig(kind, budget, init, _opt(raw, "target", "method"), patience, acq, gpc)


def from_dict(data: Mapping, base: Path | None = None, source: Path | None = None) -> CampaignConfig:
    """Validate a parsed config document.  Relative paths resolve against ``base``."""
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a mapping at top level")
    data = dict(data)
    _no_extra(data, ("seed", "output", "workers", "task", "reservoir", "space", "method",
                     "training"), "config")
    base = base or Path.cwd()
    seed = _number(data.get("seed", 0), "seed", integer=True)
    workers = _number(data.get("workers", 1), "workers", integer=True)
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    output = data.get("output")
    output = None if output is None else Path(str(output))
    if output is not None and not output.is_absolute():
        output = base / output

    task = _parse_task(_block(data, "task"), base)
    space = _parse_space(_block(data, "space"))
    method = _parse_method(_block(data, "method"), space)

    if task.kind == "toy":
        need = tasks.TOY_SURFACES[task.surface].n_dims
        if space.n_active != need:
            raise ConfigError(f"surface {task.surface} needs {need} free dimensions, "
                              f"space has {space.n_active}; pin the others under space.fixed")

    res = _block(data, "reservoir", required=False)
    _no_extra(res, ("n_nodes", "i0", "quant_in_bits", "quant_out_bits", "quantisation", "seed",
                    "reset_state"), "reservoir")
    kw = {
        "n_nodes": _number(res.get("n_nodes", 64), "reservoir.n_nodes", integer=True),
        "i0": _number(res.get("i0", 1.0), "reservoir.i0"),
        "quant_in_bits": _number(res.get("quant_in_bits", 8), "reservoir.quant_in_bits", True),
        "quant_out_bits": _number(res.get("quant_out_bits", 10), "reservoir.quant_out_bits", True),
        "quantisation": _bool(res.get("quantisation", True), "reservoir.quantisation"),
        "reservoir_seed": _number(res.get("seed", 0), "reservoir.seed", integer=True),
        "reset_state": _bool(res.get("reset_state", True), "reservoir.reset_state"),
    }
    tr = _block(data, "training", required=False)
    try:
        training = TrainingConfig(**_typed_fields(TrainingConfig, tr, "training"))
    except ReadoutError as exc:
        raise ConfigError(f"training: {exc}") from None
    cfg = CampaignConfig(seed, output, workers, task, space, method, training=training,
                         source=source, **kw)
    if task.kind != "toy":
        try:
            cfg.reservoir_config(1, _any_point(space))
        except (ReservoirError, ValueError) as exc:
            raise ConfigError(f"reservoir: {exc}") from None
    return cfg


def _any_point(space):
    return from_unit(space, [0.5] * space.n_active)


def load(path) -> CampaignConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: not valid YAML ({exc})") from None
    return from_dict(data or {}, base=p.parent.resolve(), source=p.resolve())


# ------------------------------------------------------------------ building

def build_objective(cfg: CampaignConfig, backend: str | None = None):
    """The objective callable plus the dataset it runs on (``None`` for toys)."""
    if cfg.task.kind == "toy":
        return tasks.ToyObjective(cfg.task.surface, cfg.space), None
    ds = load_dataset(cfg)
    rc = cfg.reservoir_config(ds.n_features, _any_point(cfg.space))
    obj = tasks.ClassificationObjective(ds, rc, cfg.training, cfg.workers, backend,
                                        cfg.reset_state)
    return obj, ds


def load_dataset(cfg: CampaignConfig) -> tasks.Dataset:
    if cfg.task.kind == "synthetic":
        return tasks.generate_synthetic(cfg.task.synthetic)
    if cfg.task.kind == "features":
        return tasks.load_features(cfg.task.path, cfg.task.manifest)
    raise ConfigError("toy tasks have no dataset")
