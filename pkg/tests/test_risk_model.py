import math

import numpy as np
import pytest

from mvruin.claim_vectors import IID, GaussianRadialCoupling, SpectralClaims, SpectralMeasure
from mvruin.distributions import Degenerate, Exponential, Gamma, Pareto
from mvruin.processes import BrownianDrift, Deterministic, JumpDiffusion, RenewalModel
from mvruin.rare_sets import (AnyLineNegative, CapitalAllocation, Halfspace, OrSet, TotalNegative,
                              ruin_to_rare)
from mvruin.risk_model import (PremiumPlan, PremiumSchedule, RiskModelSpec, RiskStreams,
                               entrance_indicator, path_statistics, ruin_indicator, simulate_path)

S = 1 / math.sqrt(2)
THREE = SpectralClaims(Pareto(2, 1), SpectralMeasure(((1, 0), (0, 1), (S, S)), (1 / 3, 1 / 3, 1 / 3)))
ALLOC = CapitalAllocation(1.0, (0.5, 0.5))
HALF = Halfspace((0.5, 0.5), 1)


def make_spec(claims=THREE, renewal=RenewalModel(Exponential(1.0)), returns=Deterministic(0.03),
              premiums=(0.01, 0.01), alloc=ALLOC, coupling=IID()):
    return RiskModelSpec(claims, renewal, returns, PremiumPlan(premiums), alloc, coupling)


def test_zero_claims_surplus_is_capital_plus_premiums():
    zero = SpectralClaims(Degenerate(0.0), SpectralMeasure(((1, 0), (0, 1)), (0.5, 0.5)))
    spec = make_spec(claims=zero, alloc=CapitalAllocation(10.0, (0.5, 0.5)))
    grid = [1.0, 2.0, 5.0]
    for seed in range(20):
        p = simulate_path(spec, grid, RiskStreams.from_seed(seed))
        expected = 10 * np.array([0.5, 0.5]) + spec.premiums.discounted_deterministic(0.03, np.array(grid))
        assert np.allclose(p.U, expected, rtol=1e-12)


def test_wald_identity_for_discount_free_claims():
    spec = make_spec(returns=Deterministic(0.0), claims=SpectralClaims(
        Pareto(3, 1), SpectralMeasure(((1, 0), (0, 1), (S, S)), (1 / 3, 1 / 3, 1 / 3))))
    n, t = 100_000, 4.0
    rng = RiskStreams.from_seed(1)
    d = np.array([simulate_path(spec, [t], RiskStreams(rng.claims, rng.arrivals, rng.returns, rng.premiums)).D[0]
                  for _ in range(n)])
    mean_x = 1.5 * (1 + S) / 3  # E[R] * E[Theta_j]
    se = d[:, 0].std() / math.sqrt(n)
    assert abs(d[:, 0].mean() - t * mean_x) <= 3 * se


def test_single_arrival_direct_sum():
    spec = make_spec(renewal=RenewalModel(Degenerate(0.6)))
    p = simulate_path(spec, [1.0], RiskStreams.from_seed(2))
    assert p.arrival_times.size == 1
    assert np.array_equal(p.D[0], p.claims[0] * math.exp(-0.03 * 0.6))


def test_surplus_identity_and_monotone_aggregate():
    spec = make_spec(returns=BrownianDrift(0.03, 0.2))
    grid = np.linspace(0.5, 10, 20)
    for seed in range(10):
        p = simulate_path(spec, grid, RiskStreams.from_seed(seed))
        assert np.all(np.diff(p.D, axis=0) >= 0)
        resid = p.U - (p.capital + p.premiums - p.D)
        assert np.all(np.abs(resid) <= 1e-10 * np.maximum(1, np.abs(p.U)))


def test_entrance_indicator_examples():
    spec = make_spec()
    p = simulate_path(spec, [1.0], RiskStreams.from_seed(3))
    p.D[0] = (2.0, 2.0)
    assert entrance_indicator(p, HALF, 1.0, 1.0)
    assert not entrance_indicator(p, HALF, 5.0, 1.0)
    p.D[0] = (0.0, 0.0)
    assert not entrance_indicator(p, OrSet((1, 1)), 0.1, 1.0)
    with pytest.raises(ValueError):
        entrance_indicator(p, HALF, 1.0, 0.7)


def test_ruin_indicator_examples():
    spec = make_spec()
    p = simulate_path(spec, [1.0, 2.0], RiskStreams.from_seed(4))
    big = CapitalAllocation(1e9, (0.5, 0.5))
    assert not ruin_indicator(p, AnyLineNegative(2), big, 2.0)
    p.D[:] = 0.0
    p.D_at_arrivals[:] = 0.0
    p.premiums[:] = 0.0
    p.D[1] = (0.6, -10.0)
    assert ruin_indicator(p, AnyLineNegative(2), ALLOC, 2.0)
    p.D[1] = (1.5, -1.5)  # U = (-1, 2)
    assert not ruin_indicator(p, TotalNegative(2), ALLOC, 2.0)


def test_ruin_monotone_in_time():
    spec = make_spec(premiums=(0.0, 0.0))
    grid = [1.0, 2.0, 5.0, 10.0]
    alloc = CapitalAllocation(3.0, (0.5, 0.5))
    for seed in range(200):
        p = simulate_path(spec, grid, RiskStreams.from_seed(seed))
        flags = [ruin_indicator(p, AnyLineNegative(2), alloc, t) for t in grid]
        assert flags == sorted(flags)


def test_independence_wiring():
    spec = make_spec(returns=BrownianDrift(0.03, 0.2))
    a = simulate_path(spec, [5.0], RiskStreams.from_seeds(1, 2, 3))
    b = simulate_path(spec, [5.0], RiskStreams.from_seeds(99, 2, 3))
    assert np.array_equal(a.arrival_times, b.arrival_times)
    assert np.array_equal(a.discount, b.discount)
    assert not np.array_equal(a.claims, b.claims)


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        make_spec(premiums=(0.01, 0.01, 0.01))


def test_premium_schedule_bounds():
    PremiumPlan((0.02,), (PremiumSchedule((0.0, 1.0), (0.01, 0.02)),))
    with pytest.raises(ValueError):
        PremiumPlan((0.01,), (PremiumSchedule((0.0, 1.0), (0.01, 0.02)),))
    with pytest.raises(ValueError):
        PremiumPlan((-0.01,))


def test_discounted_premiums_closed_form():
    plan = PremiumPlan((0.02,), (PremiumSchedule((0.0, 1.0), (0.01, 0.02)),))
    r = 0.05
    val = plan.discounted_deterministic(r, np.array([3.0]))[0, 0]
    oracle = 0.01 * (1 - math.exp(-r)) / r + 0.02 * (math.exp(-r) - math.exp(-3 * r)) / r
    assert val == pytest.approx(oracle, rel=1e-13)


def _loop_statistics(spec, rare_set, t, x, n, seed, ruin_set=None):
    """Straightforward path-by-path oracle."""
    streams = RiskStreams.from_seed(seed)
    ent = ruin = 0
    alloc = CapitalAllocation(x, spec.allocation.weights)
    for _ in range(n):
        p = simulate_path(spec, [t], streams)
        ent += entrance_indicator(p, rare_set, x, t)
        if ruin_set is not None:
            ruin += ruin_indicator(p, ruin_set, alloc, t)
    return ent / n, ruin / n


@pytest.mark.parametrize("returns", [Deterministic(0.03), BrownianDrift(0.03, 0.2),
                                     JumpDiffusion(0.03, 0.1, 0.5, Degenerate(-0.1))], ids=repr)
def test_batch_statistics_match_path_oracle(returns):
    spec = make_spec(returns=returns)
    x, t, n = 4.0, 5.0, 20_000
    L = TotalNegative(2)
    pe, pr = _loop_statistics(spec, HALF, t, x, n, 5, L)
    m = 100_000
    parts = [path_statistics(spec, HALF, [t], m // 10, RiskStreams.from_seed(6, k), ruin_to_rare(L, ALLOC))
             for k in range(10)]
    qe = np.mean([np.mean(st.entrance[:, 0] > x) for st in parts])
    qr = np.mean([np.mean(st.ruin[:, 0] > x) for st in parts])
    for p, q in ((pe, qe), (pr, qr)):
        se = math.sqrt(p * (1 - p) / n + q * (1 - q) / m)
        assert abs(p - q) <= 3.5 * se


def test_batch_ruin_dominates_entrance_without_premiums():
    spec = make_spec(premiums=(0.0, 0.0))
    a = ruin_to_rare(TotalNegative(2), ALLOC)
    st = path_statistics(spec, a, [2.0, 10.0], 50_000, RiskStreams.from_seed(7), a)
    # paths without arrivals carry -inf as ruin statistic; events are "> x" for x > 0
    assert np.all(np.maximum(st.ruin, 0.0) >= st.entrance * (1 - 1e-12))


def test_batch_with_coupling_and_renewal():
    spec = make_spec(renewal=RenewalModel(Gamma(2.0, 2.0)), coupling=GaussianRadialCoupling(0.5))
    st = path_statistics(spec, HALF, [1.0, 5.0], 10_000, RiskStreams.from_seed(8))
    assert np.all(st.entrance[:, 1] >= st.entrance[:, 0])


def test_grid_refinement_stability():
    spec = make_spec()
    x = 4.0
    a = path_statistics(spec, HALF, [5.0], 100_000, RiskStreams.from_seed(9), ruin_to_rare(AnyLineNegative(2), ALLOC))
    b = path_statistics(spec, HALF, np.linspace(0.05, 5.0, 100), 100_000, RiskStreams.from_seed(9),
                        ruin_to_rare(AnyLineNegative(2), ALLOC))
    pa, pb = np.mean(a.ruin[:, 0] > x), np.mean(b.ruin[:, -1] > x)
    assert abs(pa - pb) <= math.sqrt(pa * (1 - pa) / 100_000)
