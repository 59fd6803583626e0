"""Campaign log files.

An output directory holds:

``observations.jsonl``
    Line 1 is a header object ``{"format": "rcbo-campaign-log", "version": 1,
    "method", "direction", "seed", "budget", "init_count", "space", "task"}``.
    Every further line is one observation::

        {"iteration": 3, "method": "bayes", "alpha": ..., "beta": ...,
         "gamma": ..., "rho": ..., "objective": 0.83 | null,
         "wall_time": 1.2, "seed": 7, "error": null}

    ``objective`` is ``null`` for failed evaluations.  Floats are written
    with ``repr`` precision, so points round-trip exactly.
``surrogate.jsonl``
    Header ``{"format": "rcbo-surrogate", "version": 1}``, then one kernel
    snapshot per Bayesian iteration.
``summary.json``
    ``{"format": "rcbo-campaign-summary", "version": 1, ...}``.
``trace.tsv``
    A ``# rcbo-trace 1`` comment line, then a header row and
    ``iteration<TAB>objective<TAB>running_best`` rows for plotting.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from rcbo import campaign as cp
from rcbo.hyperspace import NAMES, HyperPoint, HyperSpace

LOG_FORMAT = "rcbo-campaign-log"
SURROGATE_FORMAT = "rcbo-surrogate"
SUMMARY_FORMAT = "rcbo-campaign-summary"
TRACE_FORMAT = "rcbo-trace"
VERSION = 1
KNOWN_VERSIONS = (1,)

OBSERVATIONS = "observations.jsonl"
SURROGATE = "surrogate.jsonl"
SUMMARY = "summary.json"
TRACE = "trace.tsv"


class LogFormatError(ValueError):
    pass


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def header_record(clog: cp.CampaignLog) -> dict:
    return {"format": LOG_FORMAT, "version": VERSION, "method": clog.method,
            "direction": clog.direction, "seed": clog.seed, "budget": clog.budget,
            "init_count": clog.init_count, "space": clog.space.to_dict(),
            "task": _plain(clog.task)}


def observation_record(o: cp.Observation) -> dict:
    rec = {"iteration": o.iteration, "method": o.method}
    rec.update(o.point.as_dict())
    rec.update({"objective": o.objective, "wall_time": o.wall_time, "seed": o.seed,
                "error": o.error})
    return rec


def parse_observation(rec: dict) -> cp.Observation:
    try:
        obj = rec["objective"]
        return cp.Observation(int(rec["iteration"]), str(rec["method"]),
                              HyperPoint(*(float(rec[n]) for n in NAMES)),
                              None if obj is None else float(obj),
                              float(rec.get("wall_time", 0.0)), rec.get("seed"),
                              rec.get("error"))
    except (KeyError, TypeError, ValueError) as exc:
        raise LogFormatError(f"bad observation record {rec!r}: {exc}") from None


class LogWriter:
    """Appends observations as they arrive so partial campaigns survive crashes."""

    def __init__(self, directory, clog_header: dict):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._obs = open(self.dir / OBSERVATIONS, "w")
        self._sur = open(self.dir / SURROGATE, "w")
        self._write(self._obs, clog_header)
        self._write(self._sur, {"format": SURROGATE_FORMAT, "version": VERSION})

    @staticmethod
    def _write(fh, rec):
        fh.write(json.dumps(_plain(rec)) + "\n")
        fh.flush()

    def __call__(self, obs: cp.Observation, snapshot: dict | None) -> None:
        self._write(self._obs, observation_record(obs))
        if snapshot is not None:
            self._write(self._sur, snapshot)

    def close(self):
        self._obs.close()
        self._sur.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _check_header(rec, fmt, path):
    if not isinstance(rec, dict) or rec.get("format") != fmt:
        raise LogFormatError(f"{path}: not a {fmt} file")
    if rec.get("version") not in KNOWN_VERSIONS:
        raise LogFormatError(f"{path}: unsupported version {rec.get('version')!r}")


def _read_jsonl(path):
    out = []
    for i, ln in enumerate(Path(path).read_text().splitlines(), start=1):
        if not ln.strip():
            continue
        try:
            out.append(json.loads(ln))
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"{path}:{i}: {exc}") from None
    return out


def read_log(path) -> cp.CampaignLog:
    """Load a campaign from its directory or its ``observations.jsonl``."""
    p = Path(path)
    obs_path = p / OBSERVATIONS if p.is_dir() else p
    if not obs_path.is_file():
        raise LogFormatError(f"no campaign log at {path}")
    recs = _read_jsonl(obs_path)
    if not recs:
        raise LogFormatError(f"{obs_path}: empty")
    head = recs[0]
    _check_header(head, LOG_FORMAT, obs_path)
    try:
        space = HyperSpace.from_dict(head["space"])
    except Exception as exc:
        raise LogFormatError(f"{obs_path}: bad space block ({exc})") from None
    clog = cp.CampaignLog(space, head.get("method", "?"), head.get("direction", cp.MAXIMISE),
                          head.get("seed"), head.get("budget"), head.get("init_count"),
                          head.get("task") or {})
    clog.observations = [parse_observation(r) for r in recs[1:]]
    its = [o.iteration for o in clog.observations]
    if any(b <= a for a, b in zip(its, its[1:])):
        raise LogFormatError(f"{obs_path}: iterations not strictly increasing")
    sur = obs_path.parent / SURROGATE
    if sur.is_file():
        srecs = _read_jsonl(sur)
        if srecs:
            _check_header(srecs[0], SURROGATE_FORMAT, sur)
            clog.snapshots = srecs[1:]
    return clog


def summary(clog: cp.CampaignLog) -> dict:
    out = {"format": SUMMARY_FORMAT, "version": VERSION, "method": clog.method,
           "direction": clog.direction, "seed": clog.seed, "budget": clog.budget,
           "n_observations": len(clog), "n_failed": sum(o.failed for o in clog.observations),
           "stop_reason": clog.stop_reason, "best": None}
    if clog.successful():
        out["best"] = observation_record(cp.best(clog))
    return out


def write_outputs(clog: cp.CampaignLog, directory) -> None:
    """Write ``summary.json`` and ``trace.tsv`` for a finished campaign."""
    d = Path(directory)
    (d / SUMMARY).write_text(json.dumps(_plain(summary(clog)), indent=2) + "\n")
    lines = [f"# {TRACE_FORMAT} {VERSION}", "iteration\tobjective\trunning_best"]
    for it, val, cur in cp.running_best(clog):
        lines.append(f"{it}\t{_fmt(val)}\t{_fmt(cur)}")
    (d / TRACE).write_text("\n".join(lines) + "\n")


def _fmt(v):
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def write_log(clog: cp.CampaignLog, directory) -> None:
    """Write a complete log in one go (the CLI streams instead)."""
    snaps = iter(clog.snapshots)
    with LogWriter(directory, header_record(clog)) as w:
        for o in clog.observations:
            w(o, next(snaps, None) if o.method == cp.BAYES else None)
    write_outputs(clog, directory)
