import numpy as np
import pytest

from rpfcone.dynamics import (IntermittentMap, PerturbedExpandingMap,
                              PiecewiseLinearMap, PhaseSpace, map_from_config)
from rpfcone.errors import ConfigError, NotMixingWithinCap


def bisect_left_branch(im, target, iters=200):
    """Independent bisection oracle for the intermittent left-branch inverse."""
    lo, hi = 0.0, 0.5
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if float(im.evaluate(np.asarray(mid))) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_phase_space_metric():
    circ, itv = PhaseSpace("circle"), PhaseSpace("interval")
    assert circ.diameter == 0.5 and itv.diameter == 1.0
    assert circ.distance(0.1, 0.9) == pytest.approx(0.2)
    assert itv.distance(0.1, 0.9) == pytest.approx(0.8)
    xs = np.linspace(0, 0.999, 50)
    assert np.all(circ.distance(xs, xs) == 0)
    assert np.all(circ.distance(xs, np.roll(xs, 3)) <= 0.5 + 1e-15)


def test_evaluate_examples(doubling, intermittent):
    assert float(doubling.evaluate(0.3)) == pytest.approx(0.6, abs=1e-15)
    assert float(intermittent.evaluate(0.0)) == 0.0          # neutral fixed point
    assert float(intermittent.evaluate(0.75)) == pytest.approx(0.5, abs=1e-15)


def test_preimages_examples(doubling, intermittent):
    ys, branches = doubling.preimages(0.5)
    assert np.allclose(sorted(ys), [0.25, 0.75]) and list(branches) == [0, 1]
    ys, _ = intermittent.preimages(0.0)
    assert abs(ys[0]) < 1e-12 and ys[1] == 0.5
    ys, _ = intermittent.preimages(0.9)
    assert ys[1] == pytest.approx(0.95, abs=1e-15)
    oracle = bisect_left_branch(intermittent, 0.9)
    assert ys[0] == pytest.approx(oracle, abs=1e-12)
    assert abs(float(intermittent.evaluate(ys[0])) - 0.9) < 1e-12


def test_preimage_invariants(doubling, intermittent, rng):
    for pmap in (doubling, intermittent, PerturbedExpandingMap(0.05),
                 PiecewiseLinearMap([0.0, 0.5, 1.0], [1, -1], kind="interval")):
        xs = rng.random(64)
        pre = pmap.preimage_grid(xs)
        assert pre.shape == (pmap.degree, 64)
        resid = pmap.space.distance(pmap.evaluate(pre), xs[None, :])
        assert np.max(resid) < 1e-12


def test_log_inverse_derivative(doubling, intermittent):
    xs = np.linspace(0.01, 0.99, 37)
    assert np.allclose(doubling.log_inverse_derivative(xs), -np.log(2))
    right = np.linspace(0.51, 0.99, 9)
    assert np.allclose(intermittent.log_inverse_derivative(right), -np.log(2))
    assert float(intermittent.log_inverse_derivative(0.0)) == 0.0


def test_theta_consistency(doubling, intermittent, rng):
    for pmap in (doubling, intermittent, PerturbedExpandingMap(0.05)):
        xs = rng.random(512)
        inv_deriv = 1.0 / np.abs(pmap.derivative(xs))
        assert np.max(inv_deriv) <= pmap.theta + 1e-12
        assert pmap.theta * np.max(np.abs(pmap.derivative(xs))) >= 1.0


def test_mixing_time_doubling(doubling):
    assert doubling.mixing_time(0.25, n_centers=256) == 2
    assert doubling.mixing_time(0.5, n_centers=256) == 1


def test_mixing_time_intermittent(intermittent):
    # frozen fixture: worked interval-image example in the module notes
    assert intermittent.mixing_time(0.25, n_centers=256) == 2


def test_mixing_time_minimality(doubling, intermittent):
    # n_c is the per-center minimum, so some ball must fail one step earlier
    from rpfcone.dynamics import _Region
    for pmap, delta, n_mix in ((doubling, 0.25, 2), (intermittent, 0.25, 2)):
        found = False
        for c in (np.arange(64) + 0.5) / 64:
            region = _Region.from_open_ball(pmap.space, float(c), delta, 1e-12)
            for _ in range(n_mix - 1):
                region = region.image(pmap, 1e-12)
            if not region.covers_space(1e-12):
                found = True
                break
        assert found


def test_mixing_time_tent_interval():
    tent = PiecewiseLinearMap([0.0, 0.5, 1.0], [1, -1], kind="interval")
    assert tent.mixing_time(0.25, n_centers=128) == 2


def test_mixing_cap_error(intermittent):
    with pytest.raises(NotMixingWithinCap):
        intermittent.mixing_time(1e-5, n_centers=8, cap=8)


def test_config_roundtrip():
    configs = [
        {"family": "doubling"},
        {"family": "intermittent", "beta": 0.5},
        {"family": "perturbed_expanding", "eps": 0.05},
        {"family": "custom_piecewise_linear", "kind": "interval",
         "breakpoints": [0.0, 0.5, 1.0], "orientations": [1, -1]},
    ]
    for cfg in configs:
        assert map_from_config(cfg).to_config() == cfg


def test_config_errors():
    with pytest.raises(ConfigError):
        map_from_config({"family": "unknown"})
    with pytest.raises(ConfigError):
        map_from_config({})
    with pytest.raises(ConfigError):
        PiecewiseLinearMap([0.0, 0.6, 0.5, 1.0], [1, 1, 1])
    with pytest.raises(ConfigError):
        IntermittentMap(1.5)
    with pytest.raises(ConfigError):
        PerturbedExpandingMap(0.3)


def test_branches_view(intermittent):
    branches = intermittent.branches
    assert len(branches) == 2
    assert branches[0].domain == (0.0, 0.5) and branches[0].increasing
    y = float(branches[0].inverse(0.7))
    assert abs(float(intermittent.evaluate(y)) - 0.7) < 1e-12
    assert 0.0 <= y < 0.5
