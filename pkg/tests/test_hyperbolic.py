import numpy as np
import pytest

from rpfcone.errors import NoHyperbolicTime
from rpfcone.hyperbolic import (OrbitExpansionTrace, first_hyperbolic_time_at_least,
                                hyperbolic_density, hyperbolic_times,
                                is_hyperbolic_time, pre_ball_check,
                                sigma_membership_proxy)


def brute_force_times(trace, sigma):
    """O(n^2) product-space oracle, straight from the defining inequality."""
    factors = np.exp(trace.logs)
    out = []
    for n in range(1, trace.horizon + 1):
        ok = True
        for k in range(1, n):
            if np.prod(factors[n - k:n]) > sigma ** (k / 2.0):
                ok = False
                break
        if ok:
            out.append(n)
    return np.array(out)


def test_doubling_all_times(doubling):
    trace = OrbitExpansionTrace.from_map(doubling, 0.3, 60)
    assert np.array_equal(hyperbolic_times(trace, 0.9), np.arange(1, 61))
    # each term -log 2 beats (1/2) log sigma whenever sigma > 1/4
    assert np.array_equal(hyperbolic_times(trace, 0.26), np.arange(1, 61))


def test_neutral_orbit_has_none(intermittent):
    trace = OrbitExpansionTrace.from_map(intermittent, 0.0, 60)
    assert list(hyperbolic_times(trace, 0.9)) == [1]
    for s in (0.3, 0.6, 0.99):
        assert not is_hyperbolic_time(trace, 2, s)


def test_detector_equals_bruteforce(intermittent, rng):
    for x0 in rng.random(5):
        trace = OrbitExpansionTrace.from_map(intermittent, float(x0), 200)
        fast = hyperbolic_times(trace, 0.9)
        assert np.array_equal(fast, brute_force_times(trace, 0.9))
        in_set = set(fast.tolist())
        assert all(is_hyperbolic_time(trace, n, 0.9) == (n in in_set)
                   for n in range(1, 201))


def test_sigma_monotonicity(intermittent, rng):
    for x0 in rng.random(3):
        trace = OrbitExpansionTrace.from_map(intermittent, float(x0), 300)
        small = set(hyperbolic_times(trace, 0.7).tolist())
        large = set(hyperbolic_times(trace, 0.95).tolist())
        assert small <= large


def test_first_hyperbolic_time(doubling, intermittent, rng):
    assert first_hyperbolic_time_at_least(doubling, 0.9, 4, [0.1, 0.37], 100) == 4
    # frozen fixture for the intermittent family (64-point seeded sample)
    sample = np.random.default_rng(0).random(64)
    assert first_hyperbolic_time_at_least(intermittent, 0.9, 4, sample, 10000) == 4
    with pytest.raises(NoHyperbolicTime):
        first_hyperbolic_time_at_least(intermittent, 0.9, 2, [0.0], 500)
    with pytest.raises(ValueError):
        first_hyperbolic_time_at_least(intermittent, 0.9, 2, [], 500)


def test_membership_proxy(doubling, intermittent):
    assert sigma_membership_proxy(OrbitExpansionTrace.from_map(doubling, 0.2, 1000), 0.8)
    assert not sigma_membership_proxy(
        OrbitExpansionTrace.from_map(intermittent, 0.0, 1000), 0.95)
    assert sigma_membership_proxy(
        OrbitExpansionTrace.from_map(intermittent, 0.3, 100000), 0.95)
    with pytest.raises(ValueError):
        sigma_membership_proxy(OrbitExpansionTrace.from_map(doubling, 0.2, 50), 0.8)


def test_pre_ball_contraction(doubling, intermittent, rng):
    for pmap in (doubling, intermittent):
        for x0 in rng.random(3):
            trace = OrbitExpansionTrace.from_map(pmap, float(x0), 40)
            for n in hyperbolic_times(trace, 0.9):
                if n < 2:
                    continue
                assert pre_ball_check(pmap, float(x0), int(n), 0.25, 0.9) <= 1e-9


def test_density(doubling):
    trace = OrbitExpansionTrace.from_map(doubling, 0.3, 100)
    assert hyperbolic_density(trace, 0.9) == 1.0
