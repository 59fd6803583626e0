"""Command-line front end.

Exit codes: 0 success, 1 runtime failure or replay divergence,
2 configuration or input-format error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import yaml

from rcbo import __version__, campaign as cp, config as cfgmod, logio, tasks
from rcbo.hyperspace import NAMES, to_unit

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
CONFIG_COPY = "config.yaml"
SLACKS = (0.0, 0.013)

log = logging.getLogger("rcbo")


class _Divergence(Exception):
    def __init__(self, iteration, detail):
        super().__init__(detail)
        self.iteration, self.detail = iteration, detail


def _err(msg):
    print(f"rcbo: error: {msg}", file=sys.stderr)


# ------------------------------------------------------------------- helpers

def _load_config(args) -> cfgmod.CampaignConfig:
    cfg = cfgmod.load(args.config)
    return cfg.with_overrides(seed=getattr(args, "seed", None),
                              workers=getattr(args, "workers", None),
                              tune_lambda=getattr(args, "tune_lambda", False))


def _run(cfg: cfgmod.CampaignConfig, objective, callback=None) -> cp.CampaignLog:
    m = cfg.method
    task = cfg.describe_task()
    if m.kind == "grid":
        return cp.run_grid(objective, cfg.space, m.grid, workers=cfg.workers, seed=cfg.seed,
                           callback=callback, task=task)
    return cp.run_bayesian(objective, cfg.space, m.budget, m.init_count, cfg.seed,
                           acquisition=m.acquisition, gp_config=m.gp, target=m.target,
                           patience=m.patience, callback=callback, task=task)


def _header(cfg: cfgmod.CampaignConfig, objective) -> dict:
    m = cfg.method
    clog = cp.CampaignLog(cfg.space, cp.GRID if m.kind == "grid" else cp.BAYES,
                          objective.direction, cfg.seed, m.budget,
                          None if m.kind == "grid" else m.init_count, cfg.describe_task())
    return logio.header_record(clog)


def _config_copy(cfg: cfgmod.CampaignConfig) -> dict:
    """The effective config (overrides applied, paths absolute) for later replay."""
    raw = yaml.safe_load(Path(cfg.source).read_text()) or {}
    raw["seed"] = cfg.seed
    raw["workers"] = cfg.workers
    raw.pop("output", None)
    if cfg.task.kind == "features":
        raw["task"]["path"] = str(cfg.task.path)
    if cfg.training.tune_lambda:
        raw.setdefault("training", {})["tune_lambda"] = True
    return raw


# ------------------------------------------------------------------ commands

def cmd_optimize(args) -> int:
    try:
        cfg = _load_config(args)
        out = cfg.output_dir(args.out)
        objective, _ = cfgmod.build_objective(cfg)
    except (cfgmod.ConfigError, tasks.DatasetError) as exc:
        _err(exc)
        return EXIT_CONFIG
    if out.exists() and not out.is_dir():
        _err(f"output path {out} exists and is not a directory")
        return EXIT_CONFIG

    header = _header(cfg, objective)
    writer = logio.LogWriter(out, header)
    (out / CONFIG_COPY).write_text(f"# rcbo-config {logio.VERSION}: effective settings, "
                                   "pass to 'rcbo replay'\n"
                                   + yaml.safe_dump(_config_copy(cfg), sort_keys=False))

    def progress(obs, snap):
        writer(obs, snap)
        log.info("%4d %-7s %s -> %s", obs.iteration, obs.method,
                 " ".join(f"{n}={v:.4g}" for n, v in obs.point.as_dict().items()),
                 "FAILED" if obs.failed else f"{obs.objective:.6g}")

    try:
        clog = _run(cfg, objective, progress)
    except Exception as exc:  # keep what was streamed, report, exit 1
        writer.close()
        _err(f"campaign aborted: {type(exc).__name__}: {exc}")
        try:
            partial = logio.read_log(out)
            partial.stop_reason = f"error: {exc}"
            logio.write_outputs(partial, out)
        except Exception:  # pragma: no cover - best effort
            pass
        return EXIT_RUNTIME
    writer.close()
    logio.write_outputs(clog, out)
    if not clog.successful():
        _err("every evaluation failed")
        return EXIT_RUNTIME
    b = cp.best(clog)
    print(f"{len(clog)} evaluations, best {b.objective:.6g} at iteration {b.iteration}; "
          f"log written to {out}")
    return EXIT_OK


def report_dict(clog: cp.CampaignLog, top_fraction: float = 0.1) -> dict:
    out = {"method": clog.method, "direction": clog.direction, "seed": clog.seed,
           "n_observations": len(clog), "n_failed": sum(o.failed for o in clog.observations),
           "best": None, "sensitivity": None, "iterations_to_within": []}
    if not clog.successful():
        return out
    b = cp.best(clog)
    out["best"] = logio.observation_record(b)
    out["best"]["unit"] = [float(v) for v in to_unit(clog.space, b.point)]
    rep = cp.sensitivity_report(clog, top_fraction)
    out["sensitivity"] = {
        "sufficient": rep.sufficient, "n_top": rep.n_top, "top_fraction": rep.top_fraction,
        "fixed": rep.fixed,
        "dims": [{"name": d.name, "low": d.low, "high": d.high, "spread": d.spread,
                  "flag": d.flag} for d in rep.dims],
    }
    out["iterations_to_within"] = [{"slack": s, "iteration": cp.iterations_to_within(clog, s)}
                                   for s in SLACKS]
    return out


def _print_report(r: dict) -> None:
    print(f"campaign: {r['method']} ({r['direction']}imise), seed {r['seed']}, "
          f"{r['n_observations']} observations, {r['n_failed']} failed")
    b = r["best"]
    if b is None:
        print("best: none (no successful observation)")
        return
    pt = "  ".join(f"{n}={b[n]:.6g}" for n in NAMES)
    print(f"best: iteration {b['iteration']} ({b['method']})  objective {b['objective']:.6g}")
    print(f"      {pt}")
    s = r["sensitivity"]
    if not s["sufficient"]:
        print(f"sensitivity: insufficient data ({r['n_observations'] - r['n_failed']} "
              f"successful observations, need {cp.MIN_SENSITIVITY_OBS})")
    else:
        print(f"sensitivity: top {s['n_top']} observations "
              f"(fraction {s['top_fraction']:g}), unit coordinates")
        for d in s["dims"]:
            print(f"  {d['name']:<6} [{d['low']:.3f}, {d['high']:.3f}]  "
                  f"spread {d['spread']:.3f}  {d['flag']}")
        for n, v in s["fixed"].items():
            print(f"  {n:<6} fixed at {v:g}")
    print("iterations to within slack of the final best:")
    for row in r["iterations_to_within"]:
        print(f"  slack {row['slack']:<6g} iteration {row['iteration']}")


def cmd_report(args) -> int:
    try:
        clog = logio.read_log(args.log)
    except (logio.LogFormatError, OSError) as exc:
        _err(exc)
        return EXIT_CONFIG
    if not 0 < args.top_fraction <= 1:
        _err("--top-fraction must be in (0, 1]")
        return EXIT_CONFIG
    r = report_dict(clog, args.top_fraction)
    if args.json:
        print(json.dumps(r, indent=2))
    else:
        _print_report(r)
    return EXIT_OK


def _same(a: float | None, b: float | None) -> bool:
    if a is None or b is None:
        return a is b
    return a == b or (math.isnan(a) and math.isnan(b))


def _compare(stored: cp.Observation, fresh: cp.Observation) -> str | None:
    if stored.iteration != fresh.iteration:
        return f"iteration number {stored.iteration} != {fresh.iteration}"
    if stored.method != fresh.method:
        return f"method {stored.method!r} != {fresh.method!r}"
    if stored.seed != fresh.seed:
        return f"seed {stored.seed!r} != {fresh.seed!r}"
    for n in NAMES:
        a, b = getattr(stored.point, n), getattr(fresh.point, n)
        if a != b:
            return f"{n} {a!r} != {b!r}"
    if not _same(stored.objective, fresh.objective):
        return f"objective {stored.objective!r} != {fresh.objective!r}"
    return None


def cmd_replay(args) -> int:
    try:
        stored = logio.read_log(args.log)
    except (logio.LogFormatError, OSError) as exc:
        _err(exc)
        return EXIT_CONFIG
    try:
        cfg = _load_config(args)
        objective, _ = cfgmod.build_objective(cfg)
    except (cfgmod.ConfigError, tasks.DatasetError) as exc:
        _err(exc)
        return EXIT_CONFIG

    obs = iter(stored.observations)
    count = 0

    def check(fresh, _snap):
        nonlocal count
        s = next(obs, None)
        if s is None:
            raise _Divergence(fresh.iteration, "replay produced more observations than the log")
        why = _compare(s, fresh)
        if why is not None:
            raise _Divergence(s.iteration, why)
        count += 1

    try:
        _run(cfg, objective, check)
    except _Divergence as d:
        print(f"DIVERGED at iteration {d.iteration}: {d.detail}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        _err(f"replay aborted: {type(exc).__name__}: {exc}")
        return EXIT_RUNTIME
    leftover = next(obs, None)
    if leftover is not None:
        print(f"DIVERGED at iteration {leftover.iteration}: log has more observations "
              "than the replay", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"replay identical: {count} observations")
    return EXIT_OK


def cmd_export_dataset(args) -> int:
    try:
        cfg = _load_config(args)
        if cfg.task.kind == "toy":
            raise cfgmod.ConfigError("toy tasks have no dataset to export")
        out = Path(args.out) if args.out else cfg.output_dir()
        ds = cfgmod.load_dataset(cfg)
    except (cfgmod.ConfigError, tasks.DatasetError) as exc:
        _err(exc)
        return EXIT_CONFIG
    tasks.export_dataset(ds, out)
    print(f"wrote {len(ds)} sequences to {out}")
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rcbo", description="Bayesian hyper-parameter search "
                                "for a simulated photonic reservoir computer.")
    p.add_argument("--version", action="version", version=f"rcbo {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="log progress (-v) or debug detail (-vv) to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", required=True, help="campaign YAML file")
        sp.add_argument("--out", help=out_help)
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--workers", type=int, help="parallel sequence/grid evaluations")
        sp.add_argument("--tune-lambda", action="store_true",
                        help="select the ridge penalty on held-out training sequences")

    o = sub.add_parser("optimize", help="run a campaign")
    common(o, f"output directory (else ${cfgmod.OUTPUT_ENV}, else the config's 'output')")
    o.set_defaults(func=cmd_optimize)

    r = sub.add_parser("report", help="summarise a campaign log")
    r.add_argument("log", help="campaign directory or its observations.jsonl")
    r.add_argument("--json", action="store_true", help="machine-readable output")
    r.add_argument("--top-fraction", type=float, default=0.1,
                   help="fraction of best observations used for sensitivity (default 0.1)")
    r.set_defaults(func=cmd_report)

    rp = sub.add_parser("replay", help="re-run a campaign and check it matches its log")
    rp.add_argument("log", help="campaign directory or its observations.jsonl")
    common(rp, "unused; accepted for symmetry")
    rp.set_defaults(func=cmd_replay)

    e = sub.add_parser("export-dataset", help="write a task's dataset as feature files")
    common(e, "target directory (else the config's 'output')")
    e.set_defaults(func=cmd_export_dataset)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors already
        return int(exc.code or 0)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
