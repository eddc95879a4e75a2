"""Synthetic datasets with planted contacts, check-in CSV ingestion, and dataset files."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import rng as streams
from .model import ContactParams, TemporalMode, Trajectory, is_contact_exact

REGION = (10549.0, 8499.0)
WINDOW = 14 * 86_400
EPOCH0 = 1_623_283_200  # 2021-06-10T00:00:00Z
FORMAT_NAME = "contactguard-dataset"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GenConfig:
    n_users: int = 200
    n_patients: int | None = None
    visits_per_user: tuple[int, int] = (2, 8)
    region: tuple[float, float] = REGION
    contact_plant_rate: float = 0.05
    seed: int = 0
    window: int = WINDOW
    t0: int = EPOCH0

    def __post_init__(self):
        object.__setattr__(self, "visits_per_user", tuple(self.visits_per_user))
        object.__setattr__(self, "region", tuple(float(v) for v in self.region))
        lo, hi = self.visits_per_user
        if self.n_users < 0:
            raise ValueError("n_users must be non-negative")
        if not 1 <= lo <= hi:
            raise ValueError(f"invalid visits_per_user range {self.visits_per_user}")
        if not 0.0 <= self.contact_plant_rate <= 1.0:
            raise ValueError("contact_plant_rate must lie in [0, 1]")
        if self.n_patients is not None and self.n_patients < 1:
            raise ValueError("need at least one patient")
        if min(self.region) <= 0 or self.window <= 0:
            raise ValueError("region and window must be positive")

    @property
    def patients(self) -> int:
        """Explicit patient count, or about 1% of the users (at least one)."""
        if self.n_patients is not None:
            return self.n_patients
        return max(1, round(0.01 * self.n_users))


@dataclass
class Dataset:
    user_ids: list[int]
    users: list[Trajectory]
    patients_union: Trajectory
    ground_truth: np.ndarray
    params: ContactParams
    region: tuple[float, float] = REGION
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ground_truth = np.asarray(self.ground_truth, dtype=bool)
        if not (len(self.user_ids) == len(self.users) == self.ground_truth.shape[0]):
            raise ValueError("user ids, trajectories and labels differ in length")

    def __len__(self) -> int:
        return len(self.users)

    def verify(self) -> None:
        """Recompute every label with the oracle; raise on any mismatch."""
        truth = oracle_labels(self.users, self.patients_union, self.params)
        bad = np.flatnonzero(truth != self.ground_truth)
        if bad.size:
            raise ValueError(f"ground truth disagrees with the oracle for users "
                             f"{[self.user_ids[i] for i in bad[:5]]}")

    @property
    def total_visits(self) -> int:
        return sum(len(u) for u in self.users)


def oracle_labels(users, L_P: Trajectory, params: ContactParams) -> np.ndarray:
    return np.array([is_contact_exact(u, L_P, params) for u in users], dtype=bool)


def _split(xy: np.ndarray, t: np.ndarray, counts: np.ndarray) -> list[Trajectory]:
    bounds = np.cumsum(counts)[:-1]
    return [Trajectory(a, b) for a, b in zip(np.split(xy, bounds), np.split(t, bounds))]


def gen_synthetic(cfg: GenConfig, params: ContactParams) -> Dataset:
    """Uniform visits over the region and window, with planted contacts.

    ``round(contact_plant_rate * n_users)`` users get one visit replaced by a
    point within ``r/2`` of a random patient visit and at most ``delta/2``
    seconds after it. Labels always come from the oracle, so incidental
    contacts count as positives too.
    """
    rng = streams.stream(cfg.seed, streams.DATA)
    lo, hi = cfg.visits_per_user
    w, h = cfg.region

    def draw(n):
        counts = rng.integers(lo, hi + 1, size=n)
        total = int(counts.sum())
        xy = rng.uniform((0.0, 0.0), (w, h), size=(total, 2))
        t = cfg.t0 + rng.integers(0, cfg.window, size=total)
        return counts, xy, t

    p_counts, p_xy, p_t = draw(cfg.patients)
    L_P = Trajectory(p_xy, p_t)
    u_counts, u_xy, u_t = draw(cfg.n_users)
    u_xy, u_t = u_xy.copy(), u_t.copy()

    n_plant = int(round(cfg.contact_plant_rate * cfg.n_users))
    if n_plant:
        planted = rng.choice(cfg.n_users, size=n_plant, replace=False)
        starts = np.concatenate([[0], np.cumsum(u_counts)[:-1]])
        rows = starts[planted] + rng.integers(0, u_counts[planted])
        src = rng.integers(0, len(L_P), size=n_plant)
        rad = 0.5 * params.r * np.sqrt(rng.random(n_plant))
        ang = rng.uniform(0.0, 2.0 * math.pi, n_plant)
        pts = L_P.xy[src] + np.column_stack((rad * np.cos(ang), rad * np.sin(ang)))
        # projecting onto the box never moves a point away from an in-box patient visit
        u_xy[rows] = np.clip(pts, 0.0, (w, h))
        u_t[rows] = L_P.t[src] + rng.integers(0, int(params.delta // 2) + 1, size=n_plant)

    users = _split(u_xy, u_t, u_counts)
    return Dataset(
        user_ids=list(range(cfg.n_users)),
        users=users,
        patients_union=L_P,
        ground_truth=oracle_labels(users, L_P, params),
        params=params,
        region=cfg.region,
        provenance={"source": "synthetic", "gen_config": _config_dict(cfg)},
    )


def _config_dict(cfg: GenConfig) -> dict:
    d = asdict(cfg)
    d["visits_per_user"] = list(cfg.visits_per_user)
    d["region"] = list(cfg.region)
    return d


@dataclass(frozen=True)
class LatLonProjection:
    """Affine stand-in for a map projection: ``x = (lon - lon0) * sx``, ``y = (lat - lat0) * sy``."""

    origin_lat: float
    origin_lon: float
    scale_x: float
    scale_y: float

    def __call__(self, lat: float, lon: float) -> tuple[float, float]:
        return (lon - self.origin_lon) * self.scale_x, (lat - self.origin_lat) * self.scale_y


def parse_timestamp(text: str) -> int:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return int(ts.timestamp())


def read_checkins(path, projection: LatLonProjection | None = None,
                  region_filter: tuple[float, float, float, float] | None = None
                  ) -> dict[str, Trajectory]:
    """Group check-in rows into per-user trajectories, in file order."""
    rows: dict[str, tuple[list, list]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        planar = {"x", "y"} <= cols
        if not {"user_id", "timestamp"} <= cols or not (planar or {"lat", "lon"} <= cols):
            raise ValueError(f"{path}: need columns user_id, timestamp and x, y (or lat, lon)")
        if not planar and projection is None:
            raise ValueError(f"{path}: lat/lon columns require a projection")
        for line_no, row in enumerate(reader, start=2):
            try:
                if planar:
                    x, y = float(row["x"]), float(row["y"])
                else:
                    x, y = projection(float(row["lat"]), float(row["lon"]))
                t = parse_timestamp(row["timestamp"])
                uid = row["user_id"].strip()
                if not uid or not (math.isfinite(x) and math.isfinite(y)) or t < 0:
                    raise ValueError("empty id, non-finite coordinate or negative time")
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: malformed row: {exc}") from None
            if region_filter is not None:
                x0, y0, x1, y1 = region_filter
                if not (x0 <= x <= x1 and y0 <= y <= y1):
                    continue
            xs, ts = rows.setdefault(uid, ([], []))
            xs.append((x, y))
            ts.append(t)
    if not rows:
        raise ValueError(f"{path}: no check-ins")
    return {uid: Trajectory(np.array(xs), np.array(ts)) for uid, (xs, ts) in rows.items()}


def load_checkins(path, params: ContactParams, split_seed: int = 0,
                  patient_ratio: float = 0.01, *,
                  region_filter: tuple[float, float, float, float] | None = None,
                  projection: LatLonProjection | None = None) -> Dataset:
    """Read check-ins, sample ``ceil(patient_ratio * n)`` users as patients, label the rest."""
    by_user = read_checkins(path, projection, region_filter)
    ids = sorted(by_user)
    n_pat = math.ceil(patient_ratio * len(ids))
    if n_pat < 1:
        raise ValueError(f"patient_ratio {patient_ratio} selects no patients out of {len(ids)}")
    if n_pat >= len(ids):
        raise ValueError("patient_ratio leaves no users to test")
    rng = streams.stream(split_seed, streams.DATA)
    chosen = set(rng.choice(len(ids), size=n_pat, replace=False).tolist())
    patients = [by_user[ids[i]] for i in sorted(chosen)]
    rest = [i for i in range(len(ids)) if i not in chosen]
    L_P = Trajectory.concat(patients)
    users = [by_user[ids[i]] for i in rest]
    return Dataset(
        user_ids=rest,
        users=users,
        patients_union=L_P,
        ground_truth=oracle_labels(users, L_P, params),
        params=params,
        region=REGION,
        provenance={"source": "checkins", "path": str(path), "split_seed": split_seed,
                    "patient_ratio": patient_ratio, "user_keys": [ids[i] for i in rest],
                    "patient_keys": [ids[i] for i in sorted(chosen)]},
    )


def params_to_dict(params: ContactParams) -> dict:
    d = asdict(params)
    d["temporal_mode"] = params.temporal_mode.value
    return d


def params_from_dict(d: dict) -> ContactParams:
    d = dict(d)
    d["temporal_mode"] = TemporalMode(d.get("temporal_mode", "patient-earlier"))
    return ContactParams(**d)


def _traj_record(tr: Trajectory) -> dict:
    return {"xy": tr.xy.tolist(), "t": tr.t.tolist()}


def save_dataset(ds: Dataset, path) -> None:
    """Line-delimited JSON: provenance header, patient union, then one line per user."""
    Path(path).write_bytes(dataset_bytes(ds))


def dataset_bytes(ds: Dataset) -> bytes:
    header = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "region": list(ds.region),
              "params": params_to_dict(ds.params), "provenance": ds.provenance}
    lines = [json.dumps(header, sort_keys=True),
             json.dumps({"kind": "patients", **_traj_record(ds.patients_union)})]
    for uid, tr, label in zip(ds.user_ids, ds.users, ds.ground_truth):
        lines.append(json.dumps({"kind": "user", "id": uid, **_traj_record(tr),
                                 "contact": bool(label)}))
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_dataset(path) -> Dataset:
    """Read a dataset file and re-check every label against the oracle."""
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: not a version-{FORMAT_VERSION} dataset file")
        pat = json.loads(fh.readline())
        ids, users, labels = [], [], []
        for line in fh:
            rec = json.loads(line)
            ids.append(rec["id"])
            users.append(Trajectory(np.array(rec["xy"]).reshape(-1, 2), rec["t"]))
            labels.append(rec["contact"])
    ds = Dataset(ids, users, Trajectory(np.array(pat["xy"]).reshape(-1, 2), pat["t"]),
                 np.array(labels, dtype=bool), params_from_dict(header["params"]),
                 tuple(header["region"]), header.get("provenance", {}))
    ds.verify()
    return ds
