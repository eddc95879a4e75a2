import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special, stats

from contactguard.geo import (keep_probability, lambert_w_minus1, laplace_radius,
                              max_pairwise_distance, perturb_location_set, planar_laplace_noise,
                              planar_laplace_sample, radial_cdf, randomized_response,
                              randomized_response_bit)
from contactguard.model import Location, Trajectory, euclidean_distance


def w_bisect(x, lo=-50.0, hi=-1.0):
    """Independent oracle: w*e^w is decreasing on [-50, -1], so bisect for the root."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) > x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cdf_bisect(eps, p, hi=1e4):
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if radial_cdf(eps, mid) < p:
            lo = mid
        else:
            hi = mid
    return lo


def test_lambert_examples():
    assert lambert_w_minus1(-math.exp(-1)) == -1.0
    for x, approx in ((-0.1, -3.5772), (-0.3, -1.7813)):
        w = lambert_w_minus1(x)
        assert abs(w * math.exp(w) - x) <= 1e-10
        assert w == pytest.approx(approx, abs=1e-4)
        assert w == pytest.approx(w_bisect(x), abs=1e-9)


@given(st.floats(-math.exp(-1), -1e-300, exclude_max=False))
def test_lambert_residual_and_branch(x):
    w = lambert_w_minus1(x)
    assert w <= -1
    assert abs(w * math.exp(w) - x) <= 1e-10


def test_lambert_against_bisection_and_scipy():
    xs = -np.geomspace(1e-12, math.exp(-1) - 1e-9, 400)
    ws = lambert_w_minus1(xs)
    oracle = np.array([w_bisect(x, lo=-80.0) for x in xs])
    assert np.allclose(ws, oracle, atol=1e-8)
    # scipy loses accuracy right next to the branch point, so it only cross-checks the rest
    away = xs > -math.exp(-1) + 1e-4
    assert np.allclose(ws[away], special.lambertw(xs[away], -1).real, rtol=1e-10)


@pytest.mark.parametrize("x", [0.0, 0.1, -0.4, math.nan])
def test_lambert_domain(x):
    with pytest.raises(ValueError):
        lambert_w_minus1(x)


def test_radius_examples():
    assert laplace_radius(1.0, 0.0) == 0.0
    d = laplace_radius(0.5, 0.5)
    assert d == pytest.approx(3.3566, abs=1e-4)
    assert d == pytest.approx(cdf_bisect(0.5, 0.5), abs=1e-8)
    assert radial_cdf(0.5, 3.3566) == pytest.approx(0.5, abs=1e-4)
    assert radial_cdf(1.0, 0.0) == 0.0
    assert radial_cdf(1.0, 1e6) == 1.0
    # p within 1e-12 of 1 is clamped, so the radius stays finite
    assert np.isfinite(laplace_radius(1.0, 1.0))


@given(st.floats(0.05, 20), st.floats(0, 0.999999))
def test_radius_inverts_cdf(eps, p):
    assert radial_cdf(eps, laplace_radius(eps, p)) == pytest.approx(p, abs=1e-9)


def test_radial_cdf_monotone():
    d = np.linspace(0, 50, 2000)
    c = radial_cdf(1.3, d)
    assert np.all(np.diff(c) >= 0) and c[0] == 0 and c[-1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        radial_cdf(1.0, -1.0)


def test_mean_radius_monte_carlo():
    noise = planar_laplace_noise(1.0, 100_000, np.random.default_rng(3))
    assert np.hypot(*noise.T).mean() == pytest.approx(2.0, rel=0.03)


def test_sample_deterministic_per_seed():
    c = Location(10.0, -4.0)
    a = planar_laplace_sample(2.0, c, np.random.default_rng(9))
    b = planar_laplace_sample(2.0, c, np.random.default_rng(9))
    assert a == b and a != c


def test_perturb_location_set():
    L = Trajectory([[0, 0], [1, 1], [2, 2], [3, 3]], [0, 1, 2, 3])
    ps = perturb_location_set(4.0, L, np.random.default_rng(0))
    assert ps.per_loc_eps == 1.0 and ps.source_len == 4 and ps.points.shape == (4, 2)
    again = perturb_location_set(4.0, L, np.random.default_rng(0))
    assert np.array_equal(ps.points, again.points)
    with pytest.raises(ValueError):
        perturb_location_set(4.0, Trajectory(), np.random.default_rng(0))
    with pytest.raises(ValueError):
        perturb_location_set(0.0, L, np.random.default_rng(0))


@given(st.floats(0.01, 100), st.integers(1, 50))
def test_budget_accounting(eps, n):
    L = Trajectory(np.zeros((n, 2)), np.zeros(n, dtype=int))
    ps = perturb_location_set(eps, L, np.random.default_rng(1))
    assert ps.per_loc_eps * ps.source_len == pytest.approx(eps, rel=1e-15, abs=0)


def test_single_location_matches_sampler():
    L = Trajectory([[5.0, 5.0]], [0])
    ps = perturb_location_set(2.0, L, np.random.default_rng(7))
    off = np.array([perturb_location_set(2.0, L, np.random.default_rng(s)).points[0] - 5.0
                    for s in range(2000)])
    d = np.hypot(off[:, 0], off[:, 1])
    assert ps.per_loc_eps == 2.0
    assert stats.kstest(d, lambda v: radial_cdf(2.0, v)).pvalue > 0.01


def test_composition_marginals():
    # a two-visit trajectory under total budget 3 perturbs each visit at 1.5
    rng = np.random.default_rng(11)
    L = Trajectory([[0.0, 0.0], [100.0, 0.0]], [0, 1])
    pts = np.array([perturb_location_set(3.0, L, rng).points for _ in range(5000)])
    for i, centre in enumerate(([0.0, 0.0], [100.0, 0.0])):
        d = np.hypot(*(pts[:, i] - centre).T)
        assert stats.kstest(d, lambda v: radial_cdf(1.5, v)).pvalue > 0.01


@pytest.mark.slow
def test_density_ratio_bound():
    rng = np.random.default_rng(2024)
    n, eps = 1_000_000, 1.0
    a = planar_laplace_noise(eps, n, rng)
    b = planar_laplace_noise(eps, n, rng) + (1.0, 0.0)
    edges = np.linspace(-5, 5, 21)
    ha, _, _ = np.histogram2d(a[:, 0], a[:, 1], bins=(edges, edges))
    hb, _, _ = np.histogram2d(b[:, 0], b[:, 1], bins=(edges, edges))
    ok = (ha >= 500) & (hb >= 500)
    assert ok.sum() > 50
    ratio = np.maximum(ha[ok] / hb[ok], hb[ok] / ha[ok])
    assert ratio.max() <= math.exp(eps * 1.0) * 1.25


def test_keep_probability_and_rr():
    assert keep_probability(4.0) == pytest.approx(0.98201, abs=1e-5)
    rng = np.random.default_rng(5)
    out = [randomized_response_bit(1, 50.0, rng) for _ in range(10_000)]
    assert np.mean(out) >= 0.9999
    flips = randomized_response(np.zeros(100_000, dtype=np.uint8), 2.0, rng)
    assert flips.mean() == pytest.approx(1 / (math.e ** 2 + 1), abs=0.01)
    with pytest.raises(ValueError):
        randomized_response_bit(2, 1.0, rng)
    with pytest.raises(ValueError):
        keep_probability(0.0)


def test_rr_positions_independent():
    rng = np.random.default_rng(8)
    for fill in (0, 1):
        bits = np.full((100_000, 2), fill, dtype=np.uint8)
        out = randomized_response(bits, 1.0, rng).astype(float)
        rho = np.corrcoef(out[:, 0], out[:, 1])[0, 1]
        assert abs(rho) < 0.02


def test_max_pairwise_distance():
    A = [Location(0, 0), Location(0, 0)]
    assert max_pairwise_distance(A, A) == 0
    assert max_pairwise_distance(A, [Location(3, 4), Location(6, 8)]) == 10
    a, b = Location(1, 2), Location(-3, 7)
    assert max_pairwise_distance([a], [b]) == euclidean_distance(a, b)
    with pytest.raises(ValueError):
        max_pairwise_distance(A, [a])
