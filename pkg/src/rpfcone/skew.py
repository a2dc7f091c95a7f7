"""Skew products F(x,y) = (f(x), g(x,y)) over expanding bases with uniformly
contracting fibers: induced base potential, push-forward identity for the
equilibrium state, and simulation-based decay/CLT checks.

Product-system statistics are Monte Carlo only: the fiber carries no
expansion, so orbit simulation is efficient and a 2-d operator grid would be
wasteful. Base x-trajectories are mu-stationary segments from the backward
preimage chain (see kernels._ref); the fiber runs forward along them after a
contraction burn-in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import ConfigError, DivergentSeries
from .grids import cell_centers
from .potentials import Potential
from .stats import _fit_decay, sample_from_mu, stationary_chain_args
from .transfer import DiscretizedOperator, power_iterate
from . import kernels


@dataclass
class SkewSystem:
    """Base map plus a fiber contraction g on [0,1] with an invariant fiber
    point: g(x, ybar) = ybar for all x."""

    base: object
    g: object = field(repr=False)          # (x, y) -> y'
    lam_fib: float = 0.5
    ybar: float = 0.5

    def __post_init__(self):
        xs = cell_centers(64)
        ys = np.linspace(0.0, 1.0, 17)
        fixed = np.max(np.abs(self.g(xs, np.full_like(xs, self.ybar)) - self.ybar))
        if fixed > 1e-12:
            raise ConfigError(f"g(x, ybar) != ybar (defect {fixed:.2e})")
        worst = 0.0
        for y1 in ys:
            for y2 in ys:
                if y1 == y2:
                    continue
                d = np.max(np.abs(self.g(xs, np.full_like(xs, y1))
                                  - self.g(xs, np.full_like(xs, y2))))
                worst = max(worst, d / abs(y1 - y2))
        if worst > self.lam_fib + 1e-9:
            raise ConfigError(
                f"fiber Lipschitz constant {worst:.4f} exceeds lam_fib {self.lam_fib}")

    def step(self, x, y):
        return self.base.evaluate(x), self.g(x, y)


def linear_sine_fiber(rho, eps=0.0, ybar=0.5):
    """g(x,y) = ybar + (y - ybar)(rho + eps sin(2 pi x)); contraction rate
    |rho| + |eps|."""
    if abs(rho) + abs(eps) >= 1.0:
        raise ConfigError("need |rho| + |eps| < 1 for a uniform fiber contraction")

    def g(x, y):
        return ybar + (y - ybar) * (rho + eps * np.sin(2.0 * np.pi * np.asarray(x)))

    return g, abs(rho) + abs(eps), ybar


def skew_from_config(base, cfg):
    g, lam_fib, ybar = linear_sine_fiber(cfg.get("rho", 0.5), cfg.get("eps", 0.0),
                                         cfg.get("ybar", 0.5))
    return SkewSystem(base=base, g=g, lam_fib=lam_fib, ybar=ybar)


def induce_potential(sys, phi_product, alpha=1.0, grid=(256, 65)):
    """Base potential phi(x) = Phi(x, ybar) along the invariant fiber line.

    Asserts Var(phi) <= Var(Phi) on the evaluation grid (a restriction can
    never increase the variation).
    """
    xs = cell_centers(grid[0])
    vals = np.array([phi_product(xs, np.full_like(xs, y))
                     for y in np.linspace(0.0, 1.0, grid[1])])
    var_product = float(np.max(vals) - np.min(vals))
    phi = Potential(lambda x: phi_product(np.asarray(x, dtype=float),
                                          np.full(np.shape(x), sys.ybar)), alpha)
    phi.family = "induced"
    line = phi(xs)
    var_base = float(np.max(line) - np.min(line))
    assert var_base <= var_product + 1e-12, "restriction increased the variation"
    return phi


def _skew_ensemble(sys, op, data, n_samples, fiber_burn, horizon, seed, collect,
                   chain_burn=64, chunk=20000):
    """Iterate the skew product over mu-stationary x-segments; y starts
    uniform and contracts for fiber_burn steps before collection. collect(j,
    x, y) receives each post-burn-in step j < horizon, possibly in sample
    chunks."""
    code, params, weights, h, circle = stationary_chain_args(op, data)
    rng = np.random.default_rng(seed)
    done = 0
    block = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        anchors = sample_from_mu(data, m, rng)
        segs = kernels.backward_positions(code, params, weights, h, anchors,
                                          chain_burn, fiber_burn + horizon,
                                          seed + 1 + block, circle)
        y = rng.random(m)
        for j in range(fiber_burn + horizon):
            x = segs[:, j]
            if j >= fiber_burn:
                collect(j - fiber_burn, x, y)
            y = sys.g(x, y)
        done += m
        block += 1


def pushforward_check(sys, phi_product, samples=10 ** 5, burn_in=100,
                      horizon=50, resolution=4096, seed=0, alpha=1.0):
    """sup-CDF distance between the empirical x-marginal of the skew orbit
    ensemble (started in mu_base x uniform) and the base equilibrium mu."""
    phi = induce_potential(sys, phi_product, alpha)
    op = DiscretizedOperator(sys.base, phi, resolution)
    data = power_iterate(op)
    counts = np.zeros(resolution)

    def collect(j, x, y):
        counts[:] += np.bincount(np.minimum((x * resolution).astype(np.int64),
                                            resolution - 1), minlength=resolution)

    _skew_ensemble(sys, op, data, samples, burn_in, horizon, seed, collect)
    emp_cdf = np.cumsum(counts) / counts.sum()
    mu_cdf = np.cumsum(data.mu)
    dist = float(np.max(np.abs(emp_cdf - mu_cdf)))
    return {"cdf_distance": dist, "samples": samples, "burn_in": burn_in,
            "horizon": horizon, "seed": seed, "base_data": data}


def skew_decay_and_clt(sys, phi_product, obs, n_max=24, n_samples=512,
                       orbit_len=4096, burn_in=100, resolution=4096, seed=0,
                       clt_samples=20000, clt_len=2000, alpha=1.0,
                       tail_tol=1e-10):
    """Autocorrelation decay rate, Green-Kubo variance and empirical CLT of a
    product observable, by long-orbit time averages after a mu-start."""
    phi = induce_potential(sys, phi_product, alpha)
    op = DiscretizedOperator(sys.base, phi, resolution)
    data = power_iterate(op)
    series = np.empty((orbit_len, n_samples))

    def collect(j, x, y):
        series[j] = obs(x, y)

    _skew_ensemble(sys, op, data, n_samples, burn_in, orbit_len, seed, collect,
                   chunk=n_samples)
    mean = series.mean()
    w = series - mean
    cors = np.empty(n_max + 1)
    for n in range(n_max + 1):
        cors[n] = np.mean(w[:orbit_len - n] * w[n:]) if n else np.mean(w * w)
    # Monte-Carlo noise floor estimated from the trailing lags: fitting into
    # the floor would flatten the slope and inflate tau
    noise = np.std(cors[-max(4, n_max // 4):])
    tau, k, r2 = _fit_decay(cors, floor=max(1e-12, 5.0 * noise))
    if tau >= 1.0:
        raise DivergentSeries(f"fitted skew decay rate {tau} >= 1")
    n_star = n_max
    if tau > 0.0:
        for n in range(1, n_max + 1):
            if k * tau ** n / (1.0 - tau) < tail_tol:
                n_star = n
                break
    sigma2 = float(cors[0] + 2.0 * np.sum(cors[1:n_star + 1]))
    ks = None
    if sigma2 > 1e-12:
        sums = np.zeros(clt_samples)

        def collect_clt(j, x, y):
            sums[:] += obs(x, y)

        _skew_ensemble(sys, op, data, clt_samples, burn_in, clt_len, seed + 10 ** 6,
                       collect_clt, chunk=clt_samples)
        z = np.sort((sums - clt_len * mean) / np.sqrt(clt_len))
        cdf = sps.norm.cdf(z / np.sqrt(sigma2))
        i = np.arange(1, clt_samples + 1)
        ks = float(np.max(np.maximum(i / clt_samples - cdf,
                                     cdf - (i - 1) / clt_samples)))
    return {"tau_F": float(tau), "sigma2_F": sigma2, "ks_F": ks,
            "correlations": cors, "fit_quality": r2, "mean": float(mean),
            "seed": seed, "base_data": data}
