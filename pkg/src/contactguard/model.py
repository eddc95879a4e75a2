"""Domain types, the plaintext contact oracle, and effectiveness metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class TemporalMode(str, Enum):
    """How the time constraint between a patient and a user visit is read.

    ``PATIENT_EARLIER`` requires the patient to visit first (``0 <= t_u - t_p``);
    ``ABSOLUTE`` accepts either order.
    """

    PATIENT_EARLIER = "patient-earlier"
    ABSOLUTE = "absolute"


@dataclass(frozen=True)
class Location:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite location ({self.x}, {self.y})")


@dataclass(frozen=True)
class TimestampedLocation:
    loc: Location
    t: int

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"negative timestamp {self.t}")


class Trajectory:
    """An ordered sequence of timed visits, stored column-wise.

    ``xy`` is an ``(n, 2)`` float array and ``t`` an ``(n,)`` int64 array of
    seconds since the epoch. The length of a trajectory is public information.
    """

    __slots__ = ("xy", "t")

    def __init__(self, xy=None, t=None):
        xy = np.zeros((0, 2)) if xy is None else np.asarray(xy, dtype=np.float64)
        t = np.zeros(0, dtype=np.int64) if t is None else np.asarray(t, dtype=np.int64)
        xy = xy.reshape(-1, 2)
        if xy.shape[0] != t.shape[0]:
            raise ValueError(f"{xy.shape[0]} locations but {t.shape[0]} timestamps")
        if not np.all(np.isfinite(xy)):
            raise ValueError("trajectory contains non-finite coordinates")
        if t.size and t.min() < 0:
            raise ValueError("trajectory contains negative timestamps")
        xy.setflags(write=False)
        t.setflags(write=False)
        self.xy = xy
        self.t = t

    @classmethod
    def from_visits(cls, visits: Iterable[TimestampedLocation]) -> "Trajectory":
        visits = list(visits)
        xy = [(v.loc.x, v.loc.y) for v in visits]
        return cls(np.array(xy, dtype=np.float64).reshape(-1, 2), [v.t for v in visits])

    @classmethod
    def concat(cls, trajectories: Iterable["Trajectory"]) -> "Trajectory":
        trajectories = list(trajectories)
        if not trajectories:
            return cls()
        return cls(np.concatenate([tr.xy for tr in trajectories]),
                   np.concatenate([tr.t for tr in trajectories]))

    @property
    def visits(self) -> list[TimestampedLocation]:
        return [TimestampedLocation(Location(float(x), float(y)), int(t))
                for (x, y), t in zip(self.xy, self.t)]

    def __len__(self) -> int:
        return self.t.shape[0]

    def __getitem__(self, i) -> TimestampedLocation:
        x, y = self.xy[i]
        return TimestampedLocation(Location(float(x), float(y)), int(self.t[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return np.array_equal(self.xy, other.xy) and np.array_equal(self.t, other.t)

    def __repr__(self) -> str:
        return f"Trajectory(n={len(self)})"


@dataclass(frozen=True)
class ContactParams:
    """Thresholds and privacy budgets shared by every method.

    ``r_prime=None`` selects the per-user default high-risk radius
    ``r + 4 * |L_u| / eps_user`` (true radius plus twice the mean planar
    Laplace displacement at the per-location budget).
    """

    r: float = 5.0
    delta: int = 172_800
    r_prime: float | None = None
    eps_user: float = 4.0
    eps_patients: float = 4.0
    temporal_mode: TemporalMode = TemporalMode.PATIENT_EARLIER
    geoi_radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "temporal_mode", TemporalMode(self.temporal_mode))
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.r_prime is not None and not self.r_prime >= self.r:
            raise ValueError(f"r_prime ({self.r_prime}) must be >= r ({self.r})")
        if self.geoi_radius is not None and not self.geoi_radius > 0:
            raise ValueError(f"geoi_radius must be positive, got {self.geoi_radius}")
        for name in ("eps_user", "eps_patients"):
            v = getattr(self, name)
            if not (v > 0):
                raise ValueError(f"{name} must be positive, got {v}")

    def high_risk_radius(self, n_visits: int) -> float:
        if self.r_prime is not None:
            return self.r_prime
        return self.r + 2.0 * (2.0 * max(n_visits, 1) / self.eps_user)

    def baseline_radius(self) -> float:
        """Decision radius of the Geo-I baseline."""
        return self.r if self.geoi_radius is None else self.geoi_radius


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    recall: float = field(init=False)
    precision: float = field(init=False)
    f1: float = field(init=False)
    accuracy: float = field(init=False)

    def __post_init__(self):
        tp, fp, tn, fn = self.tp, self.fp, self.tn, self.fn
        if min(tp, fp, tn, fn) < 0:
            raise ValueError("confusion counts must be non-negative")
        recall = tp / (tp + fn) if tp + fn else 0.0
        precision = tp / (tp + fp) if tp + fp else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        total = tp + fp + tn + fn
        accuracy = (tp + tn) / total if total else 0.0
        object.__setattr__(self, "recall", recall)
        object.__setattr__(self, "precision", precision)
        object.__setattr__(self, "f1", f1)
        object.__setattr__(self, "accuracy", accuracy)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def euclidean_distance(a: Location, b: Location) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def time_difference(t_p: int, t_u: int,
                    mode: TemporalMode = TemporalMode.PATIENT_EARLIER) -> int | None:
    """Seconds from the patient visit to the user visit.

    Returns ``None`` when ``mode`` is patient-earlier and the user visited first;
    no lag can satisfy the time constraint in that case.
    """
    mode = TemporalMode(mode)
    if mode is TemporalMode.ABSOLUTE:
        return abs(t_u - t_p)
    if t_u < t_p:
        return None
    return t_u - t_p


def contact_matrix(L_u: Trajectory, L_P: Trajectory, params: ContactParams) -> np.ndarray:
    """Boolean ``(|L_u|, |L_P|)`` matrix of visit pairs satisfying both constraints."""
    if len(L_u) == 0 or len(L_P) == 0:
        return np.zeros((len(L_u), len(L_P)), dtype=bool)
    diff = L_u.xy[:, None, :] - L_P.xy[None, :, :]
    close = np.hypot(diff[..., 0], diff[..., 1]) <= params.r
    lag = L_u.t[:, None] - L_P.t[None, :]
    if params.temporal_mode is TemporalMode.ABSOLUTE:
        recent = np.abs(lag) <= params.delta
    else:
        recent = (lag >= 0) & (lag <= params.delta)
    return close & recent


def is_contact_exact(L_u: Trajectory, L_P: Trajectory, params: ContactParams) -> bool:
    """Ground truth: does some user visit fall within ``r`` and ``delta`` of a patient visit?"""
    return bool(contact_matrix(L_u, L_P, params).any())


def confusion_metrics(predicted: Sequence[bool], truth: Sequence[bool]) -> Metrics:
    predicted = np.asarray(predicted, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {predicted.shape[0]} predictions "
                         f"for {truth.shape[0]} labels")
    tp = int(np.sum(predicted & truth))
    fp = int(np.sum(predicted & ~truth))
    fn = int(np.sum(~predicted & truth))
    tn = int(np.sum(~predicted & ~truth))
    return Metrics(tp=tp, fp=fp, tn=tn, fn=fn)
