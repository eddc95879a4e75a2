import json
from pathlib import Path

import numpy as np
import pytest

from contactguard.data import (EPOCH0, GenConfig, LatLonProjection, dataset_bytes,
                               gen_synthetic, load_checkins, load_dataset, parse_timestamp,
                               read_checkins, save_dataset)
from contactguard.model import ContactParams, is_contact_exact

DATA = Path(__file__).parent / "data"
FIXTURE = DATA / "checkins_fixture.csv"


def test_gen_deterministic_and_bounded(params):
    cfg = GenConfig(n_users=150, contact_plant_rate=0.1, seed=4)
    a, b = gen_synthetic(cfg, params), gen_synthetic(cfg, params)
    assert dataset_bytes(a) == dataset_bytes(b)
    assert dataset_bytes(a) != dataset_bytes(gen_synthetic(GenConfig(n_users=150, seed=5), params))
    w, h = cfg.region
    for tr in a.users + [a.patients_union]:
        assert np.all((tr.xy >= 0) & (tr.xy <= (w, h)))
        assert np.all((tr.t >= EPOCH0) & (tr.t < EPOCH0 + cfg.window + params.delta))
        assert 2 <= len(tr) or tr is a.patients_union
    a.verify()
    assert cfg.patients == 2 and GenConfig(n_users=10).patients == 1


def test_plant_rate_positives(params):
    for seed in range(8):
        ds = gen_synthetic(GenConfig(n_users=200, contact_plant_rate=0.1, seed=seed), params)
        assert ds.ground_truth.sum() >= 18
        assert np.array_equal(ds.ground_truth,
                              [is_contact_exact(u, ds.patients_union, params) for u in ds.users])


def test_no_plants_on_huge_region(params):
    cfg = GenConfig(n_users=300, contact_plant_rate=0.0, region=(1e6, 1e6), seed=1)
    assert gen_synthetic(cfg, params).ground_truth.sum() == 0


@pytest.mark.parametrize("bad", [dict(contact_plant_rate=1.5), dict(visits_per_user=(0, 3)),
                                 dict(visits_per_user=(5, 2)), dict(n_patients=0),
                                 dict(n_users=-1), dict(region=(0, 5))])
def test_gen_config_validation(bad):
    with pytest.raises(ValueError):
        GenConfig(**bad)


def test_fixture_matches_manifest():
    manifest = json.loads((DATA / "checkins_fixture.manifest.json").read_text())
    by_user = read_checkins(FIXTURE)
    assert {u: len(t) for u, t in by_user.items()} == manifest["users"]
    assert sum(len(t) for t in by_user.values()) == manifest["rows"]
    for user, ts in manifest["first_timestamp"].items():
        assert by_user[user].t[0] == ts
    p = ContactParams(r=5.0, delta=7200)
    for user, patient, _ in manifest["covisits"]:
        assert is_contact_exact(by_user[user], by_user[patient], p)


def test_patient_split(tmp_path):
    p = ContactParams(r=5.0, delta=7200)
    ds = load_checkins(FIXTURE, p, split_seed=3, patient_ratio=0.2)
    prov = ds.provenance
    assert len(prov["patient_keys"]) == 1 and len(ds) == 4
    assert not set(prov["patient_keys"]) & set(prov["user_keys"])
    ds.verify()
    with pytest.raises(ValueError, match="no patients"):
        load_checkins(FIXTURE, p, patient_ratio=0.0)
    with pytest.raises(ValueError, match="no users"):
        load_checkins(FIXTURE, p, patient_ratio=1.0)


def test_two_user_covisit(tmp_path):
    f = tmp_path / "two.csv"
    f.write_text("user_id,timestamp,x,y\n"
                 "A,2021-06-10T10:00:00Z,10,10\n"
                 "B,2021-06-10T10:30:00Z,11,10\n")
    p = ContactParams(r=5.0, delta=7200)
    for seed in range(20):
        ds = load_checkins(f, p, split_seed=seed, patient_ratio=0.5)
        if ds.provenance["patient_keys"] == ["A"]:
            assert list(ds.ground_truth) == [True]
            break
    else:
        pytest.fail("A was never drawn as the patient")


def test_checkin_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("user_id,timestamp,x,y\nA,2021-06-10T10:00:00Z,1,2\nB,yesterday,1,2\n")
    with pytest.raises(ValueError, match=r"bad.csv:3"):
        read_checkins(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("user_id,timestamp,x,y\n")
    with pytest.raises(ValueError, match="no check-ins"):
        read_checkins(empty)
    nocols = tmp_path / "nocols.csv"
    nocols.write_text("id,when\n1,2\n")
    with pytest.raises(ValueError, match="columns"):
        read_checkins(nocols)


def test_latlon_projection_and_region_filter(tmp_path):
    f = tmp_path / "ll.csv"
    f.write_text("user_id,timestamp,lat,lon\n"
                 "A,2021-06-10T10:00:00Z,30.0,-97.0\n"
                 "A,2021-06-10T11:00:00Z,30.01,-96.99\n"
                 "B,2021-06-10T11:00:00Z,40.0,-80.0\n")
    proj = LatLonProjection(origin_lat=30.0, origin_lon=-97.0, scale_x=1000.0, scale_y=1000.0)
    by_user = read_checkins(f, proj, region_filter=(0, 0, 100, 100))
    assert list(by_user) == ["A"]
    assert np.allclose(by_user["A"].xy, [[0, 0], [10, 10]])
    with pytest.raises(ValueError, match="projection"):
        read_checkins(f)


def test_parse_timestamp():
    assert parse_timestamp("2021-06-10T00:00:00Z") == EPOCH0
    assert parse_timestamp("2021-06-10 00:00:00") == EPOCH0
    assert parse_timestamp("2021-06-10T02:00:00+02:00") == EPOCH0


def test_dataset_file_roundtrip(tmp_path, params):
    ds = gen_synthetic(GenConfig(n_users=30, contact_plant_rate=0.2, seed=2), params)
    path = tmp_path / "ds.jsonl"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert dataset_bytes(back) == dataset_bytes(ds)
    header = json.loads(path.read_text().splitlines()[0])
    assert header["format"] == "contactguard-dataset" and header["version"] == 1
    assert header["provenance"]["gen_config"]["seed"] == 2

    lines = path.read_text().splitlines()
    rec = json.loads(lines[2])
    rec["contact"] = not rec["contact"]
    lines[2] = json.dumps(rec)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="oracle"):
        load_dataset(path)
    path.write_text('{"format": "other"}\n')
    with pytest.raises(ValueError, match="dataset file"):
        load_dataset(path)
