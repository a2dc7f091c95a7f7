"""Statistical consequences of the spectral gap: correlation decay, CLT
variance and empirical CLT, the Gibbs property at hyperbolic times and the
entropy identity.

Correlations are computed spectrally, C_n = sum_i phi_i [(L/lam)^n (psi h)]_i nu_i
minus the product of means (exact on the discretized system); Monte-Carlo orbit
averages serve as the independent cross-check route.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import kernels
from .errors import DegenerateVariance, DivergentSeries
from .hyperbolic import OrbitExpansionTrace, hyperbolic_times, sigma_membership_proxy

NOISE_FLOOR = 1e-13


@dataclass
class CorrelationSeries:
    n_max: int
    values: np.ndarray = field(repr=False)   # C_0 .. C_{n_max}
    tau_hat: float
    k_hat: float
    fit_quality: float                        # R^2 of the log-linear fit

    @property
    def c0(self):
        return float(self.values[0])


def correlation(data, op, phi_obs, psi_obs, n_max):
    """Spectral correlation series of the observable pair under mu = h nu."""
    phi_v, psi_v = phi_obs.values, psi_obs.values
    mean_phi = data.integrate_mu(phi_v)
    mean_psi = data.integrate_mu(psi_v)
    m = op.matrix
    w = psi_v * data.h.values
    values = np.empty(n_max + 1)
    for n in range(n_max + 1):
        values[n] = float(np.dot(phi_v * data.nu, w)) - mean_phi * mean_psi
        w = (m @ w) / data.lam
    tau, k, r2 = _fit_decay(values)
    return CorrelationSeries(n_max=n_max, values=values, tau_hat=tau, k_hat=k,
                             fit_quality=r2)


def _fit_decay(values, floor=NOISE_FLOOR):
    """Least-squares fit of log|C_n| against n over the pre-noise-floor range."""
    n = np.arange(1, len(values))
    mask = np.abs(values[1:]) > floor
    if np.count_nonzero(mask) < 2:
        return 0.0, 0.0, 0.0
    x = n[mask].astype(float)
    y = np.log(np.abs(values[1:][mask]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - np.mean(y)) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(slope)), float(np.exp(intercept)), float(r2)


@dataclass
class CltReport:
    sigma2: float
    truncation: int
    tail_bound: float
    ks_distance: float | None = None
    sample_count: int = 0
    birkhoff_length: int = 0
    seed: int | None = None


def clt_variance(data, op, phi_obs, n_max=400, tail_tol=1e-10):
    """Green-Kubo variance of the centered observable, truncated where the
    fitted geometric tail drops below tail_tol."""
    centered = phi_obs.with_values(phi_obs.values - data.integrate_mu(phi_obs.values))
    series = correlation(data, op, centered, centered, n_max)
    tau, k = series.tau_hat, series.k_hat
    if tau >= 1.0:
        raise DivergentSeries(f"fitted decay rate {tau} >= 1: no usable gap")
    if tau == 0.0:
        n_star, tail = n_max, 0.0
    else:
        n_star = n_max
        for n in range(1, n_max + 1):
            if k * tau ** n / (1.0 - tau) < tail_tol:
                n_star = n
                break
        tail = 2.0 * k * tau ** (n_star + 1) / (1.0 - tau)
    sigma2 = float(series.values[0] + 2.0 * np.sum(series.values[1:n_star + 1]))
    if sigma2 < -tail:
        raise DivergentSeries(f"sigma^2 = {sigma2} below -tail_bound {-tail}")
    return CltReport(sigma2=sigma2, truncation=n_star, tail_bound=float(tail))


def sample_from_mu(data, n_samples, rng):
    """Inverse-CDF sampling of the cell weights with intra-cell uniform jitter."""
    mu = data.mu
    n = len(mu)
    cum = np.cumsum(mu)
    cum[-1] = 1.0
    u = rng.random(n_samples)
    cells = np.searchsorted(cum, u, side="left")
    prev = np.where(cells > 0, cum[cells - 1], 0.0)
    frac = np.clip((u - prev) / np.maximum(mu[cells], 1e-300), 0.0, 1.0)
    return (cells + frac) / n


def stationary_chain_args(op, data):
    """(code, params, weights, h, circle) for the mu-stationary backward-chain
    kernels: jump to a preimage with probability prop. to e^{phi} h."""
    code, params = op.map.kernel_params()
    weights = np.ascontiguousarray(np.exp(op.pot(op.centers)))
    h = np.ascontiguousarray(data.h.values)
    return code, params, weights, h, op.map.space.kind == "circle"


def clt_empirical(op, data, phi_obs, sigma2, samples=10 ** 5,
                  birkhoff_n=10 ** 4, seed=0, burn=64):
    """Kolmogorov-Smirnov distance between normalized Birkhoff sums over
    mu-stationary orbit segments and the centered normal with variance sigma2.

    Segments are drawn by the h-weighted backward preimage chain anchored at
    inverse-CDF mu samples; forward-iterated ensembles would drift to the
    physical a.c. measure instead of the (generally singular) equilibrium.
    """
    if sigma2 <= 1e-12:
        raise DegenerateVariance(f"sigma^2 = {sigma2}: empirical CLT refused")
    rng = np.random.default_rng(seed)
    mean = data.integrate_mu(phi_obs.values)
    obs = np.ascontiguousarray(phi_obs.values)
    code, params, weights, h, circle = stationary_chain_args(op, data)
    anchors = sample_from_mu(data, samples, rng)
    sums = kernels.backward_birkhoff_sums(code, params, weights, h, anchors,
                                          burn, birkhoff_n, obs, seed, circle)
    z = (sums - birkhoff_n * mean) / np.sqrt(birkhoff_n)
    z.sort()
    cdf = sps.norm.cdf(z / np.sqrt(sigma2))
    i = np.arange(1, samples + 1)
    ks = float(np.max(np.maximum(i / samples - cdf, cdf - (i - 1) / samples)))
    return CltReport(sigma2=float(sigma2), truncation=0, tail_bound=0.0,
                     ks_distance=ks, sample_count=samples,
                     birkhoff_length=birkhoff_n, seed=seed)


def mc_correlations(op, data, phi_obs, psi_obs, n_max, samples=10 ** 6,
                    seed=0, batches=16, burn=64):
    """Monte-Carlo C_n estimates with batch-mean standard errors (the
    independent cross-check for the spectral route)."""
    rng = np.random.default_rng(seed)
    phi = np.ascontiguousarray(phi_obs.values)
    psi = np.ascontiguousarray(psi_obs.values)
    code, params, weights, h, circle = stationary_chain_args(op, data)
    per = samples // batches
    ests = np.empty((batches, n_max + 1))
    for b in range(batches):
        anchors = sample_from_mu(data, per, rng)
        prod, phis, psi_sum = kernels.backward_pair_products(
            code, params, weights, h, anchors, burn, n_max, phi, psi,
            seed + 1 + b * per, circle)
        ests[b] = prod / per - (phis / per) * (psi_sum / per)
    mean = ests.mean(axis=0)
    se = ests.std(axis=0, ddof=1) / np.sqrt(batches)
    return mean, se


def nu_measure_of_arc(nu, lo, hi, circle=True):
    """nu-mass of the arc [lo, hi] with boundary cells prorated linearly."""
    if hi <= lo:
        return 0.0
    n = len(nu)
    if circle:
        lo_w, hi_w = lo % 1.0, hi % 1.0
        if hi - lo >= 1.0:
            return float(np.sum(nu))
        if hi_w < lo_w:  # wraps through 0
            return (nu_measure_of_arc(nu, lo_w, 1.0, False)
                    + nu_measure_of_arc(nu, 0.0, hi_w, False))
        lo, hi = lo_w, hi_w
    lo, hi = max(0.0, lo), min(1.0, hi)
    a, b = lo * n, hi * n
    i0, i1 = int(np.floor(a)), min(int(np.floor(b)), n - 1)
    if i0 == i1:
        return float(nu[i0] * (b - a))
    total = nu[i0] * (i0 + 1 - a) + nu[i1] * (b - i1)
    if i1 > i0 + 1:
        total += np.sum(nu[i0 + 1:i1])
    return float(total)


def _pullback_ball_offsets(pmap, orbit, n, eps):
    """Offsets (lo, hi) of the dynamical ball B_eps(x, n) around orbit[0],
    built by pulling the end ball back through the orbit's local inverse and
    intersecting with the eps-ball at every level."""
    lo_off, hi_off = -eps, eps
    for j in range(n - 1, -1, -1):
        pts = pmap.space.wrap(np.array([orbit[j + 1] + lo_off, orbit[j + 1] + hi_off]))
        cands = pmap.preimage_grid(pts)
        x_j = orbit[j]
        pre = [float(cands[np.argmin(pmap.space.distance(cands[:, i], x_j)), i])
               for i in range(2)]
        offs = sorted(_signed_offset(pmap.space, p, x_j) for p in pre)
        lo_off, hi_off = max(offs[0], -eps), min(offs[1], eps)
        if lo_off > hi_off:
            return None
    return lo_off, hi_off


def _signed_offset(space, point, center):
    d = point - center
    if space.kind == "circle":
        d = (d + 0.5) % 1.0 - 0.5
    return d


def gibbs_check(pmap, pot, data, x0s, epsilon, horizon, sigma,
                proxy_horizon=1000, proxy_slack=0.01, min_cells=4):
    """Gibbs ratios nu(B_eps(x, n)) / exp(S_n phi(x) - n log lam) over all
    detected hyperbolic times n <= horizon of the sampled orbits.

    Sampled points failing the non-uniform-expansion proxy are skipped (the
    Gibbs property is asserted at hyperbolic times of expanding points).
    Dynamical balls spanning fewer than min_cells grid cells are skipped too:
    cell proration cannot resolve the nu-mass below the grid scale, and the
    unresolved ratios are artifacts rather than Gibbs data.
    """
    code, params = pmap.kernel_params()
    ratios = []
    log_lam = np.log(data.lam)
    min_len = min_cells / len(data.nu)
    for x0 in np.atleast_1d(x0s):
        proxy_trace = OrbitExpansionTrace.from_map(pmap, x0, max(100, proxy_horizon))
        if not sigma_membership_proxy(proxy_trace, sigma, proxy_slack):
            continue
        trace = OrbitExpansionTrace.from_map(pmap, x0, horizon)
        orbit = kernels.orbit_positions(code, params, float(x0), horizon + 1)
        phis = pot(orbit)
        s_n = np.concatenate([[0.0], np.cumsum(phis)])
        for n in hyperbolic_times(trace, sigma):
            n = int(n)
            ball = _pullback_ball_offsets(pmap, orbit, n, epsilon)
            if ball is None or ball[1] - ball[0] < min_len:
                continue
            mass = nu_measure_of_arc(data.nu, orbit[0] + ball[0], orbit[0] + ball[1],
                                     pmap.space.kind == "circle")
            denom = np.exp(s_n[n] - n * log_lam)
            ratios.append((float(x0), n, mass / denom))
    if not ratios:
        raise ValueError("no usable (orbit, hyperbolic time) pairs")
    vals = np.array([r[2] for r in ratios])
    return {"min_ratio": float(np.min(vals)), "max_ratio": float(np.max(vals)),
            "ratios": ratios}


def entropy_identity(data, pot, op):
    """h_mu = log lam - integral phi dmu, with the tautological defect."""
    mean_phi = data.integrate_mu(pot(op.centers))
    entropy = data.pressure - mean_phi
    defect = abs(entropy + mean_phi - data.pressure)
    return {"entropy": float(entropy), "defect": float(defect)}
