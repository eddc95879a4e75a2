"""Command-line front end: ``gen``, ``run``, ``bench``, ``serve`` and ``client``.

Experiment settings come from built-in defaults, then an optional JSON
config file (``--config``), then command-line flags, later sources winning.
Failures print one JSON object ``{"error": <category>, "message": ...}`` on
stderr and exit with the category's code.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import rng as streams
from .bench import (EPS_GRID, SCALE_GRID, USER_GRID, ExperimentConfig, emit_report,
                    run_experiment)
from .data import (GenConfig, gen_synthetic, load_checkins, load_dataset, params_from_dict,
                   params_to_dict, save_dataset)
from .errors import (ClassificationError, HandshakeError, ProtocolError, TransportError)
from .protocols import Method, ServerState
from .net.client import run_client
from .net.server import run_server
from .net.wire import DEFAULT_PORT

EXIT_CODES = {"ok": 0, "internal": 1, "config": 2, "data": 3, "transport": 4,
              "protocol": 5, "io": 6}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("config", f"{self.prog}: {message}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    """``"0,3,5"`` or a half-open range ``"0:20"``."""
    if ":" in text:
        lo, hi = text.split(":")
        return tuple(range(int(lo), int(hi)))
    return tuple(int(v) for v in text.split(","))


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("contact parameters")
    g.add_argument("--r", type=float, help="distance threshold (units)")
    g.add_argument("--delta", type=int, help="time window (seconds)")
    g.add_argument("--r-prime", type=float, help="fixed high-risk radius (default: per user)")
    g.add_argument("--geoi-radius", type=float, help="decision radius of the Geo-I baseline")
    g.add_argument("--temporal-mode", choices=["patient-earlier", "absolute"])


def _add_gen_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic data")
    g.add_argument("--n-patients", type=int)
    g.add_argument("--visits-min", type=int)
    g.add_argument("--visits-max", type=int)
    g.add_argument("--plant-rate", type=float)


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    p.add_argument("--methods", type=lambda s: tuple(s.split(",")), help="e.g. mpc,geoi,cg")
    p.add_argument("--seeds", type=_ints, help="comma list or range lo:hi")
    p.add_argument("--mode", choices=["inproc", "tcp", "counting"])
    p.add_argument("--format", dest="output_format", choices=["csv", "json"])
    p.add_argument("--out", type=Path, help="report path (default: stdout)")
    p.add_argument("--n-users", type=_ints, help="user count(s) to sweep")
    p.add_argument("--eps", dest="eps_user", type=_floats, help="user budget(s)")
    p.add_argument("--eps-patients", type=_floats, help="randomized-response budget(s)")
    p.add_argument("--dataset", dest="dataset_path", help="dataset file or check-in CSV")
    p.add_argument("--patient-ratio", type=float)
    p.add_argument("--latency-ms", type=float, help="per-frame client delay in tcp mode")
    p.add_argument("--no-timing", dest="include_timing", action="store_const", const=False,
                   help="omit wall and communication time columns")
    _add_param_flags(p)
    _add_gen_flags(p)


def _params_from_args(base, args) -> "ContactParams":  # noqa: F821
    d = params_to_dict(base)
    for key in ("r", "delta", "r_prime", "geoi_radius", "temporal_mode"):
        if getattr(args, key, None) is not None:
            d[key] = getattr(args, key)
    return params_from_dict(d)


def _gen_from_args(base: GenConfig, args) -> GenConfig:
    upd = {}
    if args.n_patients is not None:
        upd["n_patients"] = args.n_patients
    if args.plant_rate is not None:
        upd["contact_plant_rate"] = args.plant_rate
    if args.visits_min is not None or args.visits_max is not None:
        lo, hi = base.visits_per_user
        upd["visits_per_user"] = (args.visits_min or lo, args.visits_max or hi)
    return replace(base, **upd)


def build_config(args, preset: dict | None = None) -> ExperimentConfig:
    """Defaults, then the preset of a bench sweep, then ``--config``, then flags."""
    d = dict(preset or {})
    if args.config is not None:
        try:
            d.update(json.loads(args.config.read_text()))
        except OSError as exc:
            raise CliError("io", f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise CliError("config", f"{args.config}: {exc}") from exc
    try:
        cfg = ExperimentConfig.from_dict(d)
        upd = {k: getattr(args, k) for k in
               ("methods", "seeds", "mode", "output_format", "n_users", "eps_user",
                "eps_patients", "dataset_path", "patient_ratio", "latency_ms", "include_timing")
               if getattr(args, k, None) is not None}
        upd["params"] = _params_from_args(cfg.params, args)
        upd["gen"] = _gen_from_args(cfg.gen, args)
        return replace(cfg, **upd)
    except (TypeError, ValueError) as exc:
        raise CliError("config", str(exc)) from exc


BENCH_PRESETS = {
    "users": {"n_users": list(USER_GRID)},
    "eps": {"eps_user": list(EPS_GRID)},
    "eps-patients": {"eps_patients": list(EPS_GRID)},
    # patients held fixed so the count identity is comparable across sizes
    "scale": {"n_users": list(SCALE_GRID), "mode": "counting", "methods": ["mpc", "cg"],
              "gen": {"n_patients": 10}},
}


def _experiment(args, preset=None) -> int:
    cfg = build_config(args, preset)
    report = run_experiment(cfg)
    try:
        if args.out is None:
            sys.stdout.buffer.write(emit_report(report, cfg.output_format))
            sys.stdout.flush()
        else:
            emit_report(report, cfg.output_format, args.out)
    except OSError as exc:
        raise CliError("io", f"cannot write report: {exc}") from exc
    return 0


def cmd_run(args) -> int:
    return _experiment(args)


def cmd_bench(args) -> int:
    preset = dict(BENCH_PRESETS[args.vary])
    preset.setdefault("seeds", list(range(args.n_seeds)))
    return _experiment(args, preset)


def cmd_gen(args) -> int:
    params = _params_from_args(ExperimentConfig().params, args)
    try:
        if args.checkins is not None:
            ds = load_checkins(args.checkins, params, split_seed=args.seed,
                               patient_ratio=args.patient_ratio)
        else:
            gen = _gen_from_args(GenConfig(n_users=args.n_users, seed=args.seed), args)
            ds = gen_synthetic(gen, params)
    except OSError as exc:
        raise CliError("io", str(exc)) from exc
    try:
        save_dataset(ds, args.out)
    except OSError as exc:
        raise CliError("io", f"cannot write dataset: {exc}") from exc
    print(json.dumps({"users": len(ds), "positives": int(ds.ground_truth.sum()),
                      "patient_visits": len(ds.patients_union), "out": str(args.out)}))
    return 0


def _load(path):
    try:
        return load_dataset(path)
    except OSError as exc:
        raise CliError("io", str(exc)) from exc


def cmd_serve(args) -> int:
    ds = _load(args.data)
    state = ServerState(ds.patients_union, ds.params)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", stream=sys.stderr)
    report = run_server((args.host, args.port), state, args.method, args.seed,
                        max_sessions=args.max_sessions)
    print(json.dumps({"sessions": len(report.results), "errors": report.errors,
                      "positives": sum(r.predicted for r in report.results)}))
    return 0


def cmd_client(args) -> int:
    ds = _load(args.data)
    try:
        idx = ds.user_ids.index(args.user_id)
    except ValueError:
        raise CliError("data", f"user {args.user_id} not in {args.data}") from None
    rng = streams.user_streams(args.seed, args.user_id)[0]
    res = run_client((args.host, args.port), ds.users[idx], args.method, ds.params, rng,
                     user_id=args.user_id, latency=args.latency_ms / 1e3)
    print(json.dumps({"user_id": res.user_id, "contact": res.predicted,
                      "secure_cmps": res.secure_ops.secure_cmps,
                      "secure_mults": res.secure_ops.secure_mults,
                      "selected_visits": res.n_selected,
                      "wall_seconds": res.wall_nanos / 1e9,
                      "comm_seconds": res.comm_nanos / 1e9}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="contactguard", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic dataset or convert check-ins")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n-users", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkins", type=Path, help="check-in CSV to convert instead")
    p.add_argument("--patient-ratio", type=float, default=0.01)
    _add_param_flags(p)
    _add_gen_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run one experiment configuration")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run a preset parameter sweep")
    p.add_argument("--vary", choices=sorted(BENCH_PRESETS), default="eps")
    p.add_argument("--n-seeds", type=int, default=20, help="seeds 0..n-1 unless --seeds")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_bench)

    methods = [m.value for m in Method]
    for name, fn, help_ in (("serve", cmd_serve, "serve classifications over TCP"),
                            ("client", cmd_client, "classify one user against a server")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--data", type=Path, required=True, help="dataset file")
        p.add_argument("--method", choices=methods, default="cg")
        p.add_argument("--host", default="127.0.0.1")
        p.add_argument("--port", type=int, default=DEFAULT_PORT)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=fn)
        if name == "serve":
            p.add_argument("--max-sessions", type=int, help="exit after this many sessions")
        else:
            p.add_argument("--user-id", type=int, required=True)
            p.add_argument("--latency-ms", type=float, default=0.0)
    return parser


def _categorize(exc: BaseException) -> str:
    if isinstance(exc, CliError):
        return exc.category
    if isinstance(exc, ClassificationError):
        exc = exc.__cause__ or exc
    if isinstance(exc, (HandshakeError, ProtocolError)):
        return "protocol"
    if isinstance(exc, TransportError):
        return "transport"
    if isinstance(exc, OSError):
        return "io"
    if isinstance(exc, (ValueError, KeyError)):
        return "data"
    return "internal"


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except Exception as exc:
        category = _categorize(exc)
        print(json.dumps({"error": category, "message": str(exc)}), file=sys.stderr)
        return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
