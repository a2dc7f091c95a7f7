import numpy as np
import pytest

from rpfcone.dynamics import (DoublingMap, IntermittentMap, PerturbedExpandingMap,
                              PiecewiseLinearMap)
from rpfcone.kernels import _core, _ref
from rpfcone.potentials import GeometricPotential
from rpfcone.transfer import DiscretizedOperator, power_iterate

MAPS = [DoublingMap(), IntermittentMap(0.5), PerturbedExpandingMap(0.05),
        PiecewiseLinearMap([0.0, 0.4, 1.0], [1, 1])]


@pytest.fixture(scope="module")
def chain_setup():
    im = IntermittentMap(0.5)
    pot = GeometricPotential(im, 0.1)
    op = DiscretizedOperator(im, pot, 1024)
    data = power_iterate(op)
    weights = np.exp(pot(op.centers))
    return im, weights, np.ascontiguousarray(data.h.values), data


def test_traces_agree_across_backends():
    for pmap in MAPS:
        code, params = pmap.kernel_params()
        a = _ref.log_inv_deriv_trace(code, params, 0.3123, 300)
        b = _core.log_inv_deriv_trace(code, params, 0.3123, 300)
        assert np.array_equal(a, b)
        pa = _ref.orbit_positions(code, params, 0.3123, 300)
        pb = _core.orbit_positions(code, params, 0.3123, 300)
        assert np.array_equal(pa, pb)


def test_general_beta_short_horizon():
    # np.power vs libm pow may differ in the last ulp; chaos amplifies it, so
    # agreement is asserted on short horizons only (ledgered)
    pmap = IntermittentMap(0.7)
    code, params = pmap.kernel_params()
    a = _ref.orbit_positions(code, params, 0.3123, 25)
    b = _core.orbit_positions(code, params, 0.3123, 25)
    assert np.max(np.abs(a - b)) < 1e-9


def test_trace_matches_map(chain_setup):
    im, _, _, _ = chain_setup
    code, params = im.kernel_params()
    trace = _core.log_inv_deriv_trace(code, params, 0.47, 50)
    x = 0.47
    for j in range(50):
        assert trace[j] == pytest.approx(float(im.log_inverse_derivative(x)), abs=1e-12)
        x = float(im.evaluate(x))


def test_backward_kernels_bit_identical(chain_setup, rng):
    im, weights, h, _ = chain_setup
    code, params = im.kernel_params()
    anchors = rng.random(512)
    obs = np.cos(2 * np.pi * (np.arange(1024) + 0.5) / 1024)
    for fn in ("backward_positions", "backward_birkhoff_sums"):
        a = getattr(_ref, fn)(code, params, weights, h, anchors, 32,
                              64 if fn.endswith("sums") else 16, *
                              ((obs, 9) if fn.endswith("sums") else (9,)))
        b = getattr(_core, fn)(code, params, weights, h, anchors, 32,
                               64 if fn.endswith("sums") else 16, *
                               ((obs, 9) if fn.endswith("sums") else (9,)))
        assert np.array_equal(np.asarray(a), np.asarray(b))
    pa = _ref.backward_pair_products(code, params, weights, h, anchors, 32, 8,
                                     obs, obs, 9)
    pb = _core.backward_pair_products(code, params, weights, h, anchors, 32, 8,
                                      obs, obs, 9)
    for x, y in zip(pa, pb):
        assert np.allclose(x, y, rtol=1e-13, atol=0)


def test_backward_determinism(chain_setup, rng):
    im, weights, h, _ = chain_setup
    code, params = im.kernel_params()
    anchors = rng.random(128)
    obs = np.cos(2 * np.pi * (np.arange(1024) + 0.5) / 1024)
    a = _core.backward_birkhoff_sums(code, params, weights, h, anchors, 16, 32, obs, 5)
    b = _core.backward_birkhoff_sums(code, params, weights, h, anchors, 16, 32, obs, 5)
    c = _core.backward_birkhoff_sums(code, params, weights, h, anchors, 16, 32, obs, 6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_backward_segments_are_forward_orbits(chain_setup, rng):
    im, weights, h, _ = chain_setup
    code, params = im.kernel_params()
    segs = _core.backward_positions(code, params, weights, h, rng.random(256),
                                    16, 12, 3)
    for j in range(11):
        d = im.space.distance(im.evaluate(segs[:, j]), segs[:, j + 1])
        assert np.max(d) < 1e-9


def test_backward_chain_stationary(chain_setup, rng):
    im, weights, h, data = chain_setup
    code, params = im.kernel_params()
    segs = _core.backward_positions(code, params, weights, h, rng.random(30000),
                                    64, 10, 11)
    mu_cdf = np.cumsum(data.mu)
    for col in (0, 9):
        counts = np.bincount(np.minimum((segs[:, col] * 1024).astype(np.int64), 1023),
                             minlength=1024)
        assert np.max(np.abs(np.cumsum(counts) / 30000.0 - mu_cdf)) < 0.02


def test_interp_matches_numpy_oracle(rng):
    vals = rng.standard_normal(64)
    xs = rng.random(1000)
    centers = (np.arange(64) + 0.5) / 64
    ours = _ref._interp(vals, False, xs)
    oracle = np.interp(xs, centers, vals)
    assert np.max(np.abs(ours - oracle)) < 1e-12
    ours_c = _ref._interp(vals, True, xs)
    oracle_c = np.interp(xs, centers, vals, period=1.0)
    assert np.max(np.abs(ours_c - oracle_c)) < 1e-12
