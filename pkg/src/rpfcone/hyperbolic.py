"""Hyperbolic times: detection, density, the finite-horizon expansion proxy,
and the contraction constant gamma they feed into the cone machinery.

A time n is hyperbolic for x when every suffix window of the backward
derivative products contracts at rate sigma^{k/2}:
prod_{j=n-k}^{n-1} |f'(f^j x)|^{-1} <= sigma^{k/2} for all 1 <= k < n
(n = 1 holds vacuously).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NoHyperbolicTime, StarViolation


@dataclass
class OrbitExpansionTrace:
    """log ||Df(f^j x0)^{-1}|| along an orbit, with its prefix Birkhoff means."""

    x0: float
    horizon: int
    logs: np.ndarray = field(repr=False)

    @classmethod
    def from_map(cls, pmap, x0, horizon):
        code, params = pmap.kernel_params()
        logs = kernels.log_inv_deriv_trace(code, params, float(x0), int(horizon))
        return cls(x0=float(x0), horizon=int(horizon), logs=np.asarray(logs))

    @property
    def prefix_averages(self):
        n = np.arange(1, self.horizon + 1, dtype=float)
        return np.cumsum(self.logs) / n


def is_hyperbolic_time(trace, n, sigma):
    """Suffix-sum check of the defining inequality, O(n)."""
    if not 1 <= n <= trace.horizon:
        raise ValueError(f"n must lie in [1, horizon={trace.horizon}]")
    if not 0.0 < sigma < 1.0:
        raise ValueError("sigma must lie in (0,1)")
    half_log = 0.5 * np.log(sigma)
    s = 0.0
    for k in range(1, n):
        s += trace.logs[n - k]
        if s > k * half_log:
            return False
    return True


def hyperbolic_times(trace, sigma):
    """All hyperbolic times n in [1, horizon], via the prefix-min identity.

    With C the prefix sums of the logs and D[n] = C[n] - (n/2) log sigma, the
    suffix conditions collapse to D[n] <= min(D[1], ..., D[n-1]).
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError("sigma must lie in (0,1)")
    c = np.concatenate([[0.0], np.cumsum(trace.logs)])
    d = c - 0.5 * np.arange(len(c)) * np.log(sigma)
    running = np.minimum.accumulate(d[1:])
    ok = np.empty(trace.horizon, dtype=bool)
    ok[0] = True  # n = 1 is vacuous
    ok[1:] = d[2:] <= running[:-1]
    return np.where(ok)[0] + 1


def first_hyperbolic_time_at_least(pmap, sigma, lower_bound, sample, horizon):
    """Smallest hyperbolic time >= lower_bound over the sampled points (the
    constant n-tilde; lower_bound is 2 * mixing time)."""
    sample = np.atleast_1d(np.asarray(sample, dtype=float))
    if len(sample) == 0:
        raise ValueError("sample must be nonempty")
    best = None
    for x0 in sample:
        trace = OrbitExpansionTrace.from_map(pmap, x0, horizon)
        times = hyperbolic_times(trace, sigma)
        times = times[times >= lower_bound]
        if len(times):
            n = int(times[0])
            best = n if best is None else min(best, n)
            if best == lower_bound:
                break
    if best is None:
        raise NoHyperbolicTime(
            f"no sampled orbit has a hyperbolic time in [{lower_bound}, {horizon}] "
            f"for sigma={sigma}")
    return best


def sigma_membership_proxy(trace, sigma, slack=0.01):
    """Finite-horizon proxy for the non-uniform expansion limsup condition.

    True iff the largest prefix average over the trailing half of the horizon
    is <= log sigma + slack. This is a proxy, not a decision procedure: the
    limsup is undecidable from finite data.
    """
    if trace.horizon < 100:
        raise ValueError("proxy needs horizon >= 100")
    tail = trace.prefix_averages[trace.horizon // 2:]
    return bool(np.max(tail) <= np.log(sigma) + slack)


def gamma_constant(sigma, theta, n_tilde_mix, n_tilde_hyp):
    """gamma = sigma^{n~/2 - N~} (sigma theta)^{N~} from the pre-ball estimate.

    n_tilde_mix is the mixing time N~, n_tilde_hyp the first sampled
    hyperbolic time n~ >= 2 N~.
    """
    if sigma * theta >= 1.0:
        raise StarViolation(f"sigma*theta = {sigma * theta} >= 1")
    gamma = sigma ** (n_tilde_hyp / 2.0 - n_tilde_mix) * (sigma * theta) ** n_tilde_mix
    if n_tilde_hyp >= 2 * n_tilde_mix:
        assert gamma < 1.0, "gamma >= 1 despite n~ >= 2N~ and sigma*theta < 1"
    return gamma


def hyperbolic_density(trace, sigma):
    """Fraction of times in [1, horizon] that are hyperbolic (empirical only)."""
    return len(hyperbolic_times(trace, sigma)) / trace.horizon


def pre_ball_check(pmap, x0, n, delta, sigma, n_points=9):
    """Numerical check of the pre-ball contraction at a hyperbolic time n:
    pulls B(f^n x0, delta) back along the orbit's local inverse and verifies
    d(f^{n-k} y, f^{n-k} z) <= sigma^{k/2} d(f^n y, f^n z) on the sampled grid.

    Returns the worst signed violation (<= ~1e-9 when the inequality holds).
    """
    code, params = pmap.kernel_params()
    orbit = kernels.orbit_positions(code, params, float(x0), n + 1)
    mid = n_points // 2
    offsets = delta * np.linspace(-1.0, 1.0, n_points) * (1.0 - 1e-9)
    path = np.empty((n + 1, n_points))
    path[n] = pmap.space.wrap(orbit[n] + offsets)
    # the recorded pullback levels are the forward path of the pre-ball grid
    # (consecutive levels differ by one exact branch solve, so no Lyapunov
    # amplification enters the inequality check)
    for j in range(n - 1, -1, -1):
        path[j] = _local_inverse_sweep(pmap, path[j + 1], float(orbit[j]), mid)
    worst = -np.inf
    d_end = pmap.space.distance(path[n][:, None], path[n][None, :])
    for k in range(1, n):
        d_k = pmap.space.distance(path[n - k][:, None], path[n - k][None, :])
        viol = np.max(d_k - sigma ** (k / 2.0) * d_end)
        worst = max(worst, float(viol))
    return worst


def _local_inverse_sweep(pmap, targets, y_center, mid):
    """Continuous local inverse of an arc of targets around f(y_center).

    The center pulls back to y_center; neighbors continue outward, each picking
    the full-branch preimage closest to the previously pulled point, which
    tracks the diffeomorphic inverse across branch boundaries and the circle
    seam.
    """
    m = len(targets)
    cands = pmap.preimage_grid(targets)  # (degree, m)
    out = np.empty(m)
    out[mid] = y_center
    for i in range(mid + 1, m):
        out[i] = cands[np.argmin(pmap.space.distance(cands[:, i], out[i - 1])), i]
    for i in range(mid - 1, -1, -1):
        out[i] = cands[np.argmin(pmap.space.distance(cands[:, i], out[i + 1])), i]
    return out
