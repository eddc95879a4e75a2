import csv
import io
import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from contactguard.bench import (ROW_COLUMNS, SCHEMA_VERSION, ExperimentConfig, ExperimentReport,
                                emit_report, report_bytes, run_experiment)
from contactguard.data import GenConfig
from contactguard.model import ContactParams

GOLDEN = Path(__file__).parent / "data" / "golden_report_default.csv"
SMALL = GenConfig(n_users=40, contact_plant_rate=0.2)


def test_config_validation():
    for bad in (dict(seeds=()), dict(methods=("mpc", "lasso")), dict(mode="gpu"),
                dict(output_format="xml"), dict(latency_ms=5.0, mode="counting"),
                dict(seeds=(-1,)), dict(eps_user=()),
                dict(dataset_path="x.csv", n_users=(10,))):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)
    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_dict({"sedes": [1]})


def test_config_dict_roundtrip():
    cfg = ExperimentConfig(seeds=(1, 2), eps_user=(2.0, 3.0), gen=SMALL,
                           params=ContactParams(temporal_mode="absolute", r_prime=12.0))
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_single_user_single_seed_one_row():
    cfg = ExperimentConfig(methods=("cg",), n_users=(1,), gen=SMALL)
    rep = run_experiment(cfg)
    assert len(rep.rows) == 1 and rep.rows[0]["n_users"] == 1
    assert [s["kind"] for s in rep.summary] == ["mean", "std"]


def test_empty_report_is_header_only():
    rep = ExperimentReport(ExperimentConfig(include_timing=False))
    assert report_bytes(rep, "csv").decode() == ",".join(ROW_COLUMNS) + "\n"


def test_golden_default_run():
    rep = run_experiment(ExperimentConfig(include_timing=False))
    assert report_bytes(rep, "csv") == GOLDEN.read_bytes()


def test_golden_file_invariants():
    rows = list(csv.DictReader(io.StringIO(GOLDEN.read_text())))
    by = {r["method"]: r for r in rows if r["kind"] == "seed"}
    assert by["mpc"]["recall"] == by["mpc"]["precision"] == "1"
    assert by["cg"]["precision"] == "1" and by["cg"]["fp"] == "0"
    cg_c, mpc_c = int(by["cg"]["secure_cmps"]), int(by["mpc"]["secure_cmps"])
    assert cg_c * int(by["mpc"]["total_visits"]) == mpc_c * int(by["cg"]["selected_visits"])
    assert by["geoi"]["secure_cmps"] == "0"


def _check_rows(rep):
    for r in rep.rows + rep.summary:
        for k in ("recall", "precision", "f1", "accuracy"):
            assert 0 <= r[k] <= 1
    for r in rep.rows:
        if r["precision"] + r["recall"]:
            hm = 2 * r["precision"] * r["recall"] / (r["precision"] + r["recall"])
            assert r["f1"] == pytest.approx(hm, abs=1e-9)
        if r["method"] == "mpc":
            assert r["fp"] == r["fn"] == 0


def test_counting_equals_inproc_and_reproducible():
    cfg = ExperimentConfig(seeds=(0, 1), gen=SMALL, include_timing=False,
                           eps_patients=(2.0, 5.0))
    inproc = run_experiment(cfg)
    counting = run_experiment(replace(cfg, mode="counting"))
    _check_rows(inproc)
    assert report_bytes(inproc) == report_bytes(counting)
    assert report_bytes(run_experiment(cfg), "json") == report_bytes(inproc, "json")


def test_tcp_mode_matches_inproc():
    cfg = ExperimentConfig(gen=GenConfig(n_users=12, contact_plant_rate=0.3),
                           include_timing=False)
    assert report_bytes(run_experiment(replace(cfg, mode="tcp"))) == \
        report_bytes(run_experiment(cfg))
    timed = run_experiment(replace(cfg, mode="tcp", include_timing=True, methods=("cg",)))
    assert timed.rows[0]["comm_seconds"] > 0


def test_user_sweep_linear_in_visits():
    cfg = ExperimentConfig(methods=("mpc",), mode="counting", n_users=(200, 400, 800, 1600),
                           gen=GenConfig(n_patients=3))
    rep = run_experiment(cfg)
    ratios = {r["secure_cmps"] / r["total_visits"] for r in rep.rows}
    assert len(ratios) == 1  # 2 |L_P| for every size
    assert [r["n_users"] for r in rep.rows] == [200, 400, 800, 1600]


def test_json_schema_and_exact_numbers():
    cfg = ExperimentConfig(seeds=(0, 1, 2), gen=SMALL, mode="counting")
    rep = run_experiment(cfg)
    doc = json.loads(report_bytes(rep, "json"))
    assert doc["schema"] == "contactguard-report" and doc["schema_version"] == SCHEMA_VERSION
    assert doc["columns"][:len(ROW_COLUMNS)] == list(ROW_COLUMNS)
    assert len(doc["rows"]) == 9 and len(doc["summary"]) == 6
    for row in doc["rows"] + doc["summary"]:
        assert list(row) == doc["columns"]
        for v in row.values():
            if isinstance(v, float):
                assert float(f"{v:.6g}") == v
                assert json.loads(json.dumps(v)) == v
    csv_rows = list(csv.DictReader(io.StringIO(report_bytes(rep, "csv").decode())))
    for jr, cr in zip(doc["rows"], csv_rows):
        for k, v in jr.items():
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                assert float(cr[k]) == v


def test_summary_statistics():
    cfg = ExperimentConfig(seeds=(0, 1, 2, 3), gen=SMALL, mode="counting", methods=("geoi",))
    rep = run_experiment(cfg)
    mean = next(s for s in rep.summary if s["kind"] == "mean")
    std = next(s for s in rep.summary if s["kind"] == "std")
    recalls = [r["recall"] for r in rep.rows]
    assert mean["recall"] == pytest.approx(np.mean(recalls))
    assert std["recall"] == pytest.approx(np.std(recalls))
    assert mean["n_seeds"] == 4 and mean["seed"] is None
    assert rep.mean("geoi", "recall") == pytest.approx(np.mean(recalls))


def test_emit_to_destination(tmp_path):
    rep = run_experiment(ExperimentConfig(gen=SMALL, mode="counting", methods=("mpc",)))
    out = tmp_path / "r.json"
    data = emit_report(rep, "json", out)
    assert out.read_bytes() == data
    buf = io.BytesIO()
    emit_report(rep, "csv", buf)
    assert buf.getvalue() == report_bytes(rep, "csv")
    with pytest.raises(OSError):
        emit_report(rep, "csv", tmp_path / "missing" / "r.csv")
    with pytest.raises(ValueError):
        report_bytes(rep, "xml")


def test_checkin_source(tmp_path):
    fixture = Path(__file__).parent / "data" / "checkins_fixture.csv"
    cfg = ExperimentConfig(dataset_path=str(fixture), patient_ratio=0.2, mode="counting",
                           params=ContactParams(r=5.0, delta=7200), seeds=(0, 1, 2))
    rep = run_experiment(cfg)
    assert all(r["n_users"] == 4 for r in rep.rows)
    _check_rows(rep)


def test_dataset_file_source_relabels(tmp_path):
    from contactguard.data import gen_synthetic, save_dataset
    ds = gen_synthetic(SMALL, ContactParams())
    path = tmp_path / "d.jsonl"
    save_dataset(ds, path)
    wide = ExperimentConfig(dataset_path=str(path), mode="counting", methods=("mpc",),
                            params=ContactParams(r=400.0, delta=10**6))
    rep = run_experiment(wide)
    assert rep.rows[0]["tp"] > int(ds.ground_truth.sum())
    _check_rows(rep)
