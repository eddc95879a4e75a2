"""Experiment driver: settings x seeds x methods, metrics against ground truth, reports.

A *setting* fixes the swept variables (number of users and the two privacy
budgets). For every setting and seed the dataset is regenerated from the
seed, every method classifies the whole population, and one report row is
produced per (method, setting, seed). Cross-seed means and standard
deviations are appended as summary rows.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng as streams
from .data import (Dataset, GenConfig, gen_synthetic, load_checkins, load_dataset,
                   oracle_labels, params_from_dict, params_to_dict)
from .errors import ClassificationError
from .model import ContactParams, confusion_metrics
from .net.client import run_client
from .net.server import ContactServer
from .protocols import ClassificationResult, Method, ServerState, classify_population, total_ops

MODES = ("inproc", "tcp", "counting")
FORMATS = ("csv", "json")
SCHEMA_NAME = "contactguard-report"
SCHEMA_VERSION = 1

# default grids for the benchmark sweeps
USER_GRID = (200, 400, 800, 1600)
EPS_GRID = (2.0, 3.0, 4.0, 5.0)
SCALE_GRID = (10_000, 100_000)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run. Sweep fields of ``None`` take the single default."""

    methods: tuple[str, ...] = ("mpc", "geoi", "cg")
    seeds: tuple[int, ...] = (0,)
    mode: str = "inproc"
    output_format: str = "csv"
    params: ContactParams = field(default_factory=ContactParams)
    gen: GenConfig = field(default_factory=GenConfig)
    dataset_path: str | None = None
    patient_ratio: float = 0.01
    n_users: tuple[int, ...] | None = None
    eps_user: tuple[float, ...] | None = None
    eps_patients: tuple[float, ...] | None = None
    latency_ms: float = 0.0
    include_timing: bool = True

    def __post_init__(self):
        for name in ("methods", "seeds", "n_users", "eps_user", "eps_patients"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, tuple):
                object.__setattr__(self, name, tuple(v))
        self.validate()

    def validate(self) -> None:
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if any(s < 0 for s in self.seeds):
            raise ValueError("seeds must be non-negative")
        if not self.methods:
            raise ValueError("at least one method is required")
        for m in self.methods:
            Method(m)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.output_format not in FORMATS:
            raise ValueError(f"output format must be one of {FORMATS}")
        if self.latency_ms < 0:
            raise ValueError("latency must be non-negative")
        if self.latency_ms and self.mode != "tcp":
            raise ValueError("latency emulation applies to tcp mode only")
        if self.dataset_path is not None and self.n_users is not None:
            raise ValueError("a user-count sweep needs a synthetic dataset source")
        for name in ("n_users", "eps_user", "eps_patients"):
            v = getattr(self, name)
            if v is not None and not v:
                raise ValueError(f"{name} sweep must be non-empty")

    def settings(self) -> list["Setting"]:
        users = self.n_users or (self.gen.n_users,)
        eps = self.eps_user or (self.params.eps_user,)
        eps_p = self.eps_patients or (self.params.eps_patients,)
        return [Setting(n, e, ep) for n, e, ep in itertools.product(users, eps, eps_p)]

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["params"] = params_to_dict(self.params)
        gen = asdict(self.gen)
        gen["visits_per_user"] = list(self.gen.visits_per_user)
        gen["region"] = list(self.gen.region)
        d["gen"] = gen
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "params" in d:
            d["params"] = params_from_dict(d["params"])
        if "gen" in d:
            d["gen"] = GenConfig(**d["gen"])
        return cls(**d)


@dataclass(frozen=True)
class Setting:
    n_users: int
    eps_user: float
    eps_patients: float


ROW_COLUMNS = (
    "kind", "method", "n_users", "eps_user", "eps_patients", "seed", "n_seeds",
    "tp", "fp", "tn", "fn", "recall", "precision", "f1", "accuracy",
    "secure_cmps", "secure_mults", "oblivious_loads", "total_visits", "selected_visits",
)
TIMING_COLUMNS = ("wall_seconds", "comm_seconds")
_SUMMARY_FIELDS = ("tp", "fp", "tn", "fn", "recall", "precision", "f1", "accuracy",
                   "secure_cmps", "secure_mults", "oblivious_loads", "total_visits",
                   "selected_visits", "wall_seconds", "comm_seconds")


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)

    @property
    def columns(self) -> tuple[str, ...]:
        return ROW_COLUMNS + (TIMING_COLUMNS if self.config.include_timing else ())

    def select(self, method: str, **setting) -> list[dict]:
        """Per-seed rows of one method, optionally filtered by setting fields."""
        return [r for r in self.rows if r["method"] == method
                and all(r[k] == v for k, v in setting.items())]

    def mean(self, method: str, column: str, **setting) -> float:
        return float(np.mean([r[column] for r in self.select(method, **setting)]))


def _build_dataset(cfg: ExperimentConfig, setting: Setting, seed: int,
                   params: ContactParams) -> Dataset:
    if cfg.dataset_path is None:
        return gen_synthetic(replace(cfg.gen, n_users=setting.n_users, seed=seed), params)
    path = Path(cfg.dataset_path)
    if path.suffix.lower() == ".csv":
        return load_checkins(path, params, split_seed=seed, patient_ratio=cfg.patient_ratio)
    ds = load_dataset(path)
    # stored labels are for the file's thresholds, which the run may override
    ds.params = params
    ds.ground_truth = oracle_labels(ds.users, ds.patients_union, params)
    return ds


def _classify_tcp(ds: Dataset, server: ServerState, method: str, seed: int,
                  latency: float) -> list[ClassificationResult]:
    results = []
    with ContactServer(("127.0.0.1", 0), server, method, seed) as srv:
        for uid, L_u in zip(ds.user_ids, ds.users):
            client_rng = streams.user_streams(seed, uid)[0]
            try:
                results.append(run_client(srv.address, L_u, method, server.params, client_rng,
                                          user_id=uid, latency=latency))
            except Exception as exc:
                raise ClassificationError(f"user {uid} ({method}) over tcp: {exc}") from exc
    return results


def _fmt(v):
    """Round floats to 6 significant digits; the rounded value is what gets emitted."""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return v
        return float(f"{v:.6g}")
    if isinstance(v, np.integer):
        return int(v)
    return v


def _row(method: str, setting: Setting, seed: int, ds: Dataset,
         results: Sequence[ClassificationResult]) -> dict:
    m = confusion_metrics([r.predicted for r in results], ds.ground_truth)
    ops = total_ops(results)
    row = {
        "kind": "seed", "method": method, "n_users": len(ds), "eps_user": setting.eps_user,
        "eps_patients": setting.eps_patients, "seed": seed, "n_seeds": 1,
        "tp": m.tp, "fp": m.fp, "tn": m.tn, "fn": m.fn, "recall": m.recall,
        "precision": m.precision, "f1": m.f1, "accuracy": m.accuracy,
        "secure_cmps": ops.secure_cmps, "secure_mults": ops.secure_mults,
        "oblivious_loads": ops.oblivious_loads, "total_visits": ds.total_visits,
        "selected_visits": sum(r.n_selected for r in results),
        "wall_seconds": sum(r.wall_nanos for r in results) / 1e9,
        "comm_seconds": sum(r.comm_nanos for r in results) / 1e9,
    }
    return row


def _summarize(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["method"], r["n_users"], r["eps_user"], r["eps_patients"]),
                          []).append(r)
    out = []
    for (method, n, e, ep), members in groups.items():
        for kind, fn in (("mean", np.mean), ("std", np.std)):
            s = {"kind": kind, "method": method, "n_users": n, "eps_user": e,
                 "eps_patients": ep, "seed": None, "n_seeds": len(members)}
            for col in _SUMMARY_FIELDS:
                s[col] = float(fn([m[col] for m in members]))
            out.append(s)
    return out


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run every (setting, seed, method) combination of ``cfg``."""
    cfg.validate()
    if cfg.mode == "counting" and cfg.latency_ms:
        raise ValueError("counting mode has no transport")
    report = ExperimentReport(cfg)
    method_order = {m: i for i, m in enumerate(cfg.methods)}
    settings = cfg.settings()
    for si, setting in enumerate(settings):
        params = replace(cfg.params, eps_user=setting.eps_user,
                         eps_patients=setting.eps_patients)
        for seed in cfg.seeds:
            where = f"setting {asdict(setting)} seed {seed}"
            try:
                ds = _build_dataset(cfg, setting, seed, params)
            except (OSError, ValueError) as exc:
                raise ValueError(f"{where}: {exc}") from exc
            server = ServerState(ds.patients_union, params)
            for method in cfg.methods:
                try:
                    if cfg.mode == "tcp":
                        results = _classify_tcp(ds, server, method, seed, cfg.latency_ms / 1e3)
                    else:
                        backend = "counting" if cfg.mode == "counting" else "sharing"
                        results = classify_population(ds.users, server, method, seed,
                                                      backend=backend, user_ids=ds.user_ids)
                except ClassificationError as exc:
                    raise ClassificationError(f"{where}: {exc}") from exc
                row = _row(method, setting, seed, ds, results)
                row["_order"] = (si, seed, method_order[method])
                report.rows.append(row)
    report.rows.sort(key=lambda r: r["_order"])
    for r in report.rows:
        del r["_order"]
    report.summary = _summarize(report.rows)
    return report


def _table(report: ExperimentReport) -> list[dict]:
    cols = report.columns
    return [{c: _fmt(r[c]) for c in cols} for r in report.rows + report.summary]


def report_bytes(report: ExperimentReport, fmt: str = "csv") -> bytes:
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}")
    table = _table(report)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(report.columns), lineterminator="\n")
        w.writeheader()
        for row in table:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue().encode("utf-8")
    doc = {"schema": SCHEMA_NAME, "schema_version": SCHEMA_VERSION,
           "config": report.config.to_dict(), "columns": list(report.columns),
           "rows": [r for r in table if r["kind"] == "seed"],
           "summary": [r for r in table if r["kind"] != "seed"]}
    return (json.dumps(doc, indent=2, sort_keys=False) + "\n").encode("utf-8")


def emit_report(report: ExperimentReport, fmt: str = "csv", destination=None) -> bytes:
    """Serialize ``report``; also write it to ``destination`` (path or binary file) if given."""
    data = report_bytes(report, fmt)
    if destination is not None:
        if hasattr(destination, "write"):
            destination.write(data)
        else:
            Path(destination).write_bytes(data)
    return data
