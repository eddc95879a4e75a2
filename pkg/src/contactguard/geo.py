"""Geo-indistinguishability primitives.

Planar Laplace sampling through the lower Lambert W branch, per-location
budget splitting for a visit set, randomized response on bits, and a few
helpers used by the statistical tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Location, Trajectory, euclidean_distance

INV_E = math.exp(-1.0)
_P_CLAMP = 1e-12
_RESIDUAL_TOL = 1e-10
_MAX_ITER = 100


def _check_eps(eps: float, name: str = "eps") -> float:
    eps = float(eps)
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError(f"{name} must be positive and finite, got {eps}")
    return eps


def lambert_w_minus1(x):
    """Lower real branch ``W_{-1}`` of the inverse of ``w * exp(w)``.

    Accepts a scalar or an array with every element in ``[-1/e, 0)``. The result
    satisfies ``|w * exp(w) - x| <= 1e-10`` and ``w <= -1``.

    >>> float(lambert_w_minus1(-math.exp(-1)))
    -1.0
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    # the branch point is compared with a little slack for rounding of -1/e
    if np.any(~np.isfinite(x)) or np.any(x >= 0) or np.any(x < -INV_E - 1e-15):
        raise ValueError("lambert_w_minus1 is defined on [-1/e, 0)")

    w = np.empty_like(x)
    at_branch = x <= -INV_E
    near = ~at_branch & (x <= -INV_E + 1e-6)
    far = ~at_branch & ~near

    w[at_branch] = -1.0
    # series about the branch point: w = -1 - p - p^2/3 - 11 p^3/72
    p = np.sqrt(2.0 * (1.0 + math.e * x[near]))
    w[near] = -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p ** 3
    lx = np.log(-x[far])
    w[far] = lx - np.log(-lx)

    active = ~at_branch
    for _ in range(_MAX_ITER):
        if not active.any():
            break
        wa = w[active]
        ew = np.exp(wa)
        f = wa * ew - x[active]
        wp1 = wa + 1.0
        denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
        step = np.where(denom != 0, f / denom, 0.0)
        wa = np.minimum(wa - step, -1.0)
        w[active] = wa
        # relative for tiny |x|, where the absolute bound alone says nothing
        tol = _RESIDUAL_TOL * np.minimum(1.0, -x[active])
        done = np.abs(wa * np.exp(wa) - x[active]) <= tol
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    if active.any():
        raise ArithmeticError("Halley iteration for W_-1 did not converge")
    return float(w[0]) if scalar else w


def laplace_radius(eps: float, p):
    """Inverse radial CDF of the planar Laplace distribution at probability ``p``."""
    eps = _check_eps(eps)
    p = np.minimum(np.asarray(p, dtype=np.float64), 1.0 - _P_CLAMP)
    d = -(lambert_w_minus1((p - 1.0) / math.e) + 1.0) / eps
    # W_-1 <= -1 guarantees d >= 0 up to rounding
    return np.maximum(d, 0.0)


def radial_cdf(eps: float, d):
    """``P(radius <= d) = 1 - (1 + eps*d) exp(-eps*d)``."""
    eps = _check_eps(eps)
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("radial_cdf needs d >= 0")
    out = -np.expm1(-eps * d) - eps * d * np.exp(-eps * d)
    return float(out) if out.ndim == 0 else out


def planar_laplace_noise(eps: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``(n, 2)`` displacement vectors drawn from the planar Laplace distribution."""
    eps = _check_eps(eps)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
    p = rng.random(size=n)
    d = laplace_radius(eps, p) if n else np.zeros(0)
    return np.column_stack((d * np.cos(theta), d * np.sin(theta)))


def planar_laplace_sample(eps: float, center: Location, rng: np.random.Generator) -> Location:
    dx, dy = planar_laplace_noise(eps, 1, rng)[0]
    return Location(center.x + float(dx), center.y + float(dy))


@dataclass(frozen=True)
class PerturbedSet:
    """Perturbed locations of one user, in visit order, without timestamps."""

    points: np.ndarray
    source_len: int
    per_loc_eps: float

    def __post_init__(self):
        if self.points.shape != (self.source_len, 2):
            raise ValueError(f"expected {self.source_len} points, got {self.points.shape}")

    def __len__(self) -> int:
        return self.source_len

    @property
    def locations(self) -> list[Location]:
        return [Location(float(x), float(y)) for x, y in self.points]


def perturb_location_set(eps: float, L_u: Trajectory, rng: np.random.Generator) -> PerturbedSet:
    """Split ``eps`` evenly over the visits and perturb each location independently."""
    eps = _check_eps(eps)
    n = len(L_u)
    if n == 0:
        raise ValueError("cannot perturb an empty trajectory")
    per_loc = eps / n
    points = L_u.xy + planar_laplace_noise(per_loc, n, rng)
    points.setflags(write=False)
    return PerturbedSet(points=points, source_len=n, per_loc_eps=per_loc)


def keep_probability(eps_P: float) -> float:
    eps_P = _check_eps(eps_P, "eps_P")
    # 1 / (1 + e^-eps) avoids overflow for large budgets
    return 1.0 / (1.0 + math.exp(-eps_P))


def randomized_response(bits, eps_P: float, rng: np.random.Generator) -> np.ndarray:
    """Keep each bit with probability ``e^eps/(e^eps + 1)``, flip it otherwise."""
    bits = np.asarray(bits, dtype=np.uint8)
    if np.any(bits > 1):
        raise ValueError("randomized_response expects 0/1 values")
    keep = rng.random(size=bits.shape) < keep_probability(eps_P)
    return np.where(keep, bits, 1 - bits).astype(np.uint8)


def randomized_response_bit(bit: int, eps_P: float, rng: np.random.Generator) -> int:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return int(randomized_response(np.array([bit]), eps_P, rng)[0])


def max_pairwise_distance(A: Sequence[Location], B: Sequence[Location]) -> float:
    """Largest distance between positionally matched locations of two tuples."""
    if len(A) != len(B):
        raise ValueError(f"length mismatch: {len(A)} vs {len(B)}")
    if not A:
        raise ValueError("location tuples must be non-empty")
    return max(euclidean_distance(a, b) for a, b in zip(A, B))
