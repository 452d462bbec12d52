import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvruin.distributions import Degenerate, Exponential, Gamma, Normal, Pareto, Uniform
from mvruin.processes import (BrownianDrift, Deterministic, JumpDiffusion, RenewalModel,
                              check_assumption_3_1, check_assumption_4_1, laplace_exponent,
                              renewal_function, renewal_grid, sample_return_batch,
                              simulate_arrival_batch, simulate_arrivals, simulate_return_path)

POISSON = RenewalModel(Exponential(1.0))
GAMMA = RenewalModel(Gamma(2.0, 2.0))


def gamma22_renewal(t):
    # closed form for Gamma(2, 2) interarrivals (mean 1)
    return t - 0.25 + 0.25 * math.exp(-4 * t)


# arrivals -------------------------------------------------------------------


def test_poisson_mean_count():
    counts, _ = simulate_arrival_batch(POISSON, 10, np.random.default_rng(1), 100_000)
    assert abs(counts.mean() - 10) <= 3 * math.sqrt(10 / 100_000)


def test_gamma_mean_count_matches_renewal_function():
    counts, _ = simulate_arrival_batch(GAMMA, 10, np.random.default_rng(2), 100_000)
    assert abs(counts.mean() / renewal_function(GAMMA, 10) - 1) <= 0.05


def test_tiny_horizon_is_empty():
    rng = np.random.default_rng(3)
    assert sum(simulate_arrivals(POISSON, 1e-9, rng).size for _ in range(1000)) == 0


@pytest.mark.parametrize("model", [POISSON, GAMMA, RenewalModel(Uniform(0.2, 0.4))])
def test_arrivals_strictly_increasing_within_horizon(model):
    counts, times = simulate_arrival_batch(model, 5, np.random.default_rng(4), 2000)
    starts = np.cumsum(counts) - counts
    for s, c in zip(starts, counts):
        t = times[s:s + c]
        assert np.all(np.diff(t) > 0)
        assert t.size == 0 or (t[0] > 0 and t[-1] <= 5)


def test_deterministic_arrivals():
    t = simulate_arrivals(RenewalModel(Degenerate(0.5)), 2.0, np.random.default_rng(0))
    assert np.allclose(t, [0.5, 1.0, 1.5, 2.0])


def test_zero_gap_rejected():
    with pytest.raises(ValueError):
        RenewalModel(Degenerate(0.0))
    with pytest.raises(ValueError):
        RenewalModel(Normal(1, 1))


# renewal function -------------------------------------------------------------


def test_renewal_poisson_exact():
    assert renewal_function(RenewalModel(Exponential(2)), 5) == 10
    assert renewal_function(GAMMA, 0) == 0


def test_renewal_gamma_closed_form():
    for t in (0.5, 2.0, 10.0, 200.0):
        assert renewal_function(GAMMA, t) == pytest.approx(gamma22_renewal(t), rel=2e-3, abs=1e-3)


def test_elementary_renewal_theorem():
    assert abs(renewal_function(GAMMA, 200) / 200 - 1) <= 0.02


def test_renewal_equation_residual():
    grid, lam = renewal_grid(GAMMA, 5.0, 2048)
    F = Gamma(2, 2).cdf(grid)
    h = grid[1]
    # lambda(t) = F(t) + int_0^t lambda(t - s) dF(s), midpoint Stieltjes sum on the grid
    dF = np.diff(F)
    for k in (256, 1024, 2048):
        conv = np.sum(0.5 * (lam[k - 1::-1][:k] + lam[k::-1][:k]) * dF[:k])
        assert abs(lam[k] - F[k] - conv) <= 10 * h


def test_renewal_nondecreasing():
    _, lam = renewal_grid(GAMMA, 20.0)
    assert np.all(np.diff(lam) >= -1e-12)


# return processes ---------------------------------------------------------------


def test_deterministic_return_path():
    assert np.allclose(simulate_return_path(Deterministic(0.03), [1, 2], np.random.default_rng(0)), [0.03, 0.06])


def test_brownian_variance():
    rng = np.random.default_rng(5)
    n = 100_000
    xi = sample_return_batch(BrownianDrift(0.05, 0.2), np.ones(n, int), np.full(n, 4.0), rng)
    var = xi.var()
    se = 0.16 * math.sqrt(2 / (n - 1))
    assert abs(var - 0.16) <= 3 * se


def test_compound_poisson_mean():
    rng = np.random.default_rng(6)
    n = 100_000
    xi = sample_return_batch(JumpDiffusion(0, 0, 1, Degenerate(1.0)), np.ones(n, int), np.full(n, 3.0), rng)
    assert abs(xi.mean() - 3) <= 3 * math.sqrt(3 / n)


def test_paths_start_at_zero_and_are_reproducible():
    times = np.linspace(0, 2, 11)
    proc = JumpDiffusion(0.1, 0.3, 2.0, Normal(0, 0.1))
    a = simulate_return_path(proc, times, np.random.default_rng(7))
    b = simulate_return_path(proc, times, np.random.default_rng(7))
    assert a[0] == 0.0
    assert np.array_equal(a, b)


def test_batch_paths_are_independent_segments():
    rng = np.random.default_rng(8)
    n = 50_000
    times = np.tile([1.0, 2.0], n)
    xi = sample_return_batch(BrownianDrift(0, 1), np.full(n, 2), times, rng).reshape(n, 2)
    inc = xi[:, 1] - xi[:, 0]
    assert abs(np.corrcoef(xi[:, 0], inc)[0, 1]) <= 4 / math.sqrt(n)
    assert abs(xi[:, 1].var() - 2) <= 4 * 2 * math.sqrt(2 / n)


# Laplace exponent -------------------------------------------------------------------


def test_laplace_exponent_examples():
    assert laplace_exponent(Deterministic(0.03), 2) == pytest.approx(-0.06)
    assert laplace_exponent(BrownianDrift(0.05, 0.2), 1) == pytest.approx(-0.03)
    assert math.isinf(laplace_exponent(JumpDiffusion(0, 0, 1, Pareto(2)), -1))


def test_laplace_exponent_monte_carlo():
    rng = np.random.default_rng(9)
    n = 10**6
    xi = sample_return_batch(BrownianDrift(0.05, 0.2), np.ones(n, int), np.full(n, 2.0), rng)
    w = np.exp(-xi)
    est = math.log(w.mean()) / 2
    se = w.std() / (w.mean() * math.sqrt(n)) / 2
    assert abs(est + 0.03) <= 3 * se


PROCS = [Deterministic(0.03), Deterministic(-0.02), BrownianDrift(0.05, 0.2),
         JumpDiffusion(0.05, 0.1, 0.5, Normal(-0.1, 0.2)), JumpDiffusion(0.02, 0.0, 1.0, Uniform(0, 0.3))]


@pytest.mark.parametrize("proc", PROCS, ids=repr)
def test_laplace_exponent_convex_and_zero_at_origin(proc):
    assert laplace_exponent(proc, 0.0) == 0.0
    grid = [-1, -0.5, 0, 0.5, 1, 2]
    for z1 in grid:
        for z2 in grid:
            mid = laplace_exponent(proc, (z1 + z2) / 2)
            assert mid <= (laplace_exponent(proc, z1) + laplace_exponent(proc, z2)) / 2 + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.2, 0.2), st.floats(0, 0.5), st.floats(-3, 3), st.floats(-3, 3))
def test_brownian_exponent_convex_property(mu, sigma, z1, z2):
    p = BrownianDrift(mu, sigma)
    assert laplace_exponent(p, (z1 + z2) / 2) <= (laplace_exponent(p, z1) + laplace_exponent(p, z2)) / 2 + 1e-12


# assumption checks ----------------------------------------------------------------------


def test_path_bounds_deterministic():
    b = check_assumption_3_1(Deterministic(0.03), 10)
    assert (b.c1, b.c2, b.exact) == (0.0, pytest.approx(0.3), True)
    b = check_assumption_3_1(Deterministic(-0.02), 10)
    assert (b.c1, b.c2) == (pytest.approx(0.2), pytest.approx(0.2))


def test_path_bounds_brownian_empirical():
    b = check_assumption_3_1(BrownianDrift(0.05, 0.2), 10, n_paths=20_000, rng=np.random.default_rng(10))
    assert not b.exact and b.note == "empirical, not almost-sure"
    assert 0 < b.c1 <= b.c2
    # sup of a driftless BM over [0, 10] at level 1e-4 is about 0.2*sqrt(10)*3.9
    assert 1.0 < b.c2 < 5.0


def test_moment_check_geometric_certificate():
    c = check_assumption_4_1(Deterministic(0.03), POISSON, 2.0, (1.0, 3.0))
    assert c.verdict
    q = [1 / (1 + 0.03 * k) for k in (1.0, 3.0)]
    assert c.ratios == pytest.approx(tuple(qi ** (1 / k) for qi, k in zip(q, (1.0, 3.0))))
    r = max(c.ratios)
    assert c.partial_sums[9] == pytest.approx(r * (1 - r**10) / (1 - r), rel=1e-12)


def test_moment_check_fails_without_interest():
    assert not check_assumption_4_1(Deterministic(0.0), POISSON, 2.0).verdict


def test_moment_check_small_alpha():
    c = check_assumption_4_1(Deterministic(0.05), POISSON, 0.5, (0.3, 0.7))
    assert c.verdict
    assert c.ratios[0] == pytest.approx(1 / (1 + 0.05 * 0.3))


def test_moment_check_ordering():
    with pytest.raises(ValueError):
        check_assumption_4_1(Deterministic(0.03), POISSON, 2.0, (3.0, 1.0))
    with pytest.raises(ValueError):
        check_assumption_4_1(Deterministic(0.03), POISSON, 0.5, (0.3, 1.2))
