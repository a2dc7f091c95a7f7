"""Projective cone machinery on C_{k,delta}: membership, the explicit Theta_k
metric, empirical diameter, cone invariance under L^N and the contraction
certificate.

Theta_k(phi, psi) = log(B_k / A_k) with

    A_k = inf, B_k = sup over d(x,y) < delta, z of
        [k d(x,y)^a phi(z) - (phi(x) - phi(y))] / [k d(x,y)^a psi(z) - (psi(x) - psi(y))]

oriented so that A_k <= inf(phi/psi) <= sup(phi/psi) <= B_k; on a grid the
sandwich is exact provided the z-sweep contains the argmin/argmax of phi/psi,
which the implementation guarantees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryOfCone
from .grids import DEFAULT_SEMINORM_FLOOR, GridFunction, local_holder_seminorm
from .potentials import chain_count

THETA_OVERFLOW = 700.0  # log-scale guard: values above report +inf


@dataclass(frozen=True)
class ConeParams:
    k: float
    delta: float
    alpha: float

    def __post_init__(self):
        if self.k <= 0 or self.delta <= 0 or not 0 < self.alpha <= 1:
            raise ValueError("need k > 0, delta > 0, alpha in (0,1]")


def default_k(pmap, pot, n_steps, resolution=4096):
    """Heuristic 'k large enough' for the invariance propositions:
    10 * max(1, |phi|_alpha / e^{inf phi}) * deg^N."""
    from .potentials import holder_seminorm
    from .grids import cell_centers
    sem = holder_seminorm(pot, getattr(pot, "alpha", 1.0), pmap.space, resolution)
    inf_phi = float(np.min(pot(cell_centers(resolution))))
    return 10.0 * max(1.0, sem / np.exp(inf_phi)) * pmap.degree ** n_steps


def cone_membership(psi, params, floor=DEFAULT_SEMINORM_FLOOR):
    """member iff min psi > 0 and |psi|_{alpha,delta} / min psi <= k."""
    lo = float(np.min(psi.values))
    if lo <= 0.0:
        return {"member": False, "ratio": float("inf")}
    sem = local_holder_seminorm(psi.space, psi.values, params.alpha, params.delta, floor)
    ratio = sem / lo
    return {"member": bool(ratio <= params.k), "ratio": float(ratio)}


def _check_strict(psi, params, tol=1e-6):
    info = cone_membership(psi, params)
    if not info["member"] or info["ratio"] >= params.k * (1.0 - tol):
        raise BoundaryOfCone(
            f"ratio {info['ratio']:.4g} is not strictly inside the cone k={params.k}")
    return info


def _pair_arrays(space, n, stride, delta):
    """Decimated ordered pairs (i, j), i != j, with d(x_i, x_j) < delta."""
    idx = np.arange(0, n, stride)
    h = 1.0 / n
    pairs_i, pairs_j = [], []
    if space.kind == "circle":
        max_off = int(np.ceil(delta / h))
        for off in range(stride, max_off, stride):
            d = min(off * h, 1.0 - off * h)
            if 0.0 < d < delta:
                pairs_i.append(idx)
                pairs_j.append((idx + off) % n)
    else:
        max_off = int(np.ceil(delta / h))
        for off in range(stride, max_off, stride):
            keep = idx + off < n
            if off * h < delta and np.any(keep):
                pairs_i.append(idx[keep])
                pairs_j.append(idx[keep] + off)
    if not pairs_i:
        # fall back to nearest neighbours at the decimated stride
        pairs_i = [idx[:-1]]
        pairs_j = [idx[:-1] + min(stride, n - 1)]
    return np.concatenate(pairs_i), np.concatenate(pairs_j)


def _ratio_extrema(phi_v, psi_v, k, alpha, dist, i_idx, j_idx, z_idx):
    """(min, max, arg data) of the Theta_k triple ratio over given pairs x z."""
    dphi = phi_v[i_idx] - phi_v[j_idx]
    dpsi = psi_v[i_idx] - psi_v[j_idx]
    w = k * dist ** alpha
    num = w[:, None] * phi_v[z_idx][None, :]
    den = w[:, None] * psi_v[z_idx][None, :]
    best_min, best_max = np.inf, -np.inf
    arg_min = arg_max = (0, 0)
    for sgn in (1.0, -1.0):
        r = (num - sgn * dphi[:, None]) / (den - sgn * dpsi[:, None])
        pmin = np.unravel_index(np.argmin(r), r.shape)
        pmax = np.unravel_index(np.argmax(r), r.shape)
        if r[pmin] < best_min:
            best_min, arg_min = float(r[pmin]), (int(pmin[0]), int(pmin[1]))
        if r[pmax] > best_max:
            best_max, arg_max = float(r[pmax]), (int(pmax[0]), int(pmax[1]))
    return best_min, best_max, arg_min, arg_max


def theta_bounds(phi, psi, params, max_points=128, refine=True):
    """(A_k, B_k) of the explicit cone metric (the log of whose ratio is
    Theta_k), satisfying A_k <= inf phi/psi <= sup phi/psi <= B_k on the grid.

    Sweeps decimated grid pairs (both orientations) against a z-grid that
    always contains the full-grid argmin/argmax of phi/psi (making the
    sandwich exact), then re-sweeps at full resolution around the arg-extrema.
    """
    _check_strict(phi, params)
    _check_strict(psi, params)
    space = phi.space
    n = phi.resolution
    phi_v, psi_v = phi.values, psi.values
    stride = max(1, n // max_points)
    i_idx, j_idx = _pair_arrays(space, n, stride, params.delta)
    dist = space.distance(i_idx / n, j_idx / n)
    ratio_full = phi_v / psi_v
    z_idx = np.unique(np.concatenate([
        np.arange(0, n, stride),
        [int(np.argmin(ratio_full)), int(np.argmax(ratio_full))],
    ]))
    a, b, arg_a, arg_b = _ratio_extrema(phi_v, psi_v, params.k, params.alpha,
                                        dist, i_idx, j_idx, z_idx)
    if refine and stride > 1:
        for (pair_pos, z_pos) in (arg_a, arg_b):
            ii, jj = int(i_idx[pair_pos]), int(j_idx[pair_pos])
            zz = int(z_idx[z_pos])
            loc_i, loc_j, loc_z = (_window(ii, stride, n, space), _window(jj, stride, n, space),
                                   _window(zz, stride, n, space))
            li, lj = np.meshgrid(loc_i, loc_j, indexing="ij")
            li, lj = li.ravel(), lj.ravel()
            d = space.distance(li / n, lj / n)
            keep = (d > 0.0) & (d < params.delta)
            if not np.any(keep):
                continue
            a2, b2, _, _ = _ratio_extrema(phi_v, psi_v, params.k, params.alpha,
                                          d[keep], li[keep], lj[keep], loc_z)
            a, b = min(a, a2), max(b, b2)
    return a, b


def theta_distance(phi, psi, params, max_points=128, refine=True):
    """Projective distance Theta_k = log(B_k / A_k) between strict cone
    members (may be +inf)."""
    a, b = theta_bounds(phi, psi, params, max_points, refine)
    if a <= 0.0:
        return float("inf")
    theta = float(np.log(b / a))
    return theta if theta <= THETA_OVERFLOW else float("inf")


def _window(center, stride, n, space):
    lo, hi = center - stride, center + stride + 1
    if space.kind == "circle":
        return np.arange(lo, hi) % n
    return np.arange(max(0, lo), min(n, hi))


def _subsampled_ratio(space, values, params, n_offsets=48):
    """Membership ratio on a subset of pair offsets; used only to steer the
    scaling bisection in random_cone_member (always <= the full-sweep ratio)."""
    n = len(values)
    h = 1.0 / n
    max_off = n // 2 if space.kind == "circle" else n - 1
    max_off = min(max_off, int(np.ceil(params.delta / h)) - 1)
    if max_off < 1:
        max_off = 1
    offs = np.unique(np.geomspace(1, max_off, n_offsets).astype(int))
    best = 0.0
    for k in offs:
        d = k * h if space.kind != "circle" else min(k * h, 1.0 - k * h)
        if not 0.0 < d < params.delta:
            continue
        diff = (np.max(np.abs(values - np.roll(values, k))) if space.kind == "circle"
                else np.max(np.abs(values[k:] - values[:-k])))
        best = max(best, diff / d ** params.alpha)
    return best / np.min(values)


def random_cone_member(space, resolution, params, target_ratio, rng, modes=12):
    """exp of a band-limited random field, scaled so the membership ratio hits
    target_ratio (strict interior generation for the metric sweeps)."""
    x = (np.arange(resolution) + 0.5) / resolution
    g = np.zeros(resolution)
    for m in range(1, modes + 1):
        am, bm = rng.normal(size=2) / (1.0 + m) ** 1.5
        g += am * np.cos(2 * np.pi * m * x) + bm * np.sin(2 * np.pi * m * x)
    g /= max(1e-12, np.max(np.abs(g)))

    def ratio_of(scale):
        return _subsampled_ratio(space, np.exp(scale * g), params)

    lo_s, hi_s = 0.0, 1.0
    while ratio_of(hi_s) < target_ratio and hi_s < 1e4:
        hi_s *= 2.0
    for _ in range(48):
        mid = 0.5 * (lo_s + hi_s)
        if ratio_of(mid) < target_ratio:
            lo_s = mid
        else:
            hi_s = mid
    scale = 0.5 * (lo_s + hi_s)
    member = GridFunction(space, np.exp(scale * g))
    # the subsampled ratio under-counts; back off if the full sweep lands at k
    for _ in range(8):
        if cone_membership(member, params)["ratio"] < 0.95 * params.k:
            break
        scale *= 0.9
        member = GridFunction(space, np.exp(scale * g))
    return member


def cone_invariance_check(op, params, n_steps, trials=32, seed=0,
                          lambda_hat=None, slack=0.1):
    """Sample strict members, push through L^N, re-measure membership ratios.

    all_mapped is certified against lambda_hat * k * (1 + slack) when a
    lambda_hat is supplied, else against plain re-membership (ratio <= k).
    A failing certificate is returned as data, never raised.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        target = params.k * (0.1 + 0.8 * rng.random())
        member = random_cone_member(op.map.space, op.resolution, params, target, rng)
        image = op.apply_n(member, n_steps)
        worst = max(worst, cone_membership(image, params)["ratio"])
    bound = params.k if lambda_hat is None else lambda_hat * params.k * (1.0 + slack)
    return {"all_mapped": bool(worst <= bound), "worst_ratio": float(worst),
            "worst_ratio_over_k": float(worst / params.k),
            "lambda_hat_predicted": lambda_hat, "trials": trials}


def contraction_check(op, params, n_steps, pairs=64, seed=0, cross_pairs=64):
    """Empirical Birkhoff contraction: max Theta(L^N phi, L^N psi)/Theta(phi, psi)
    over random member pairs, plus the empirical image diameter (a lower bound
    on Delta within the sampled family)."""
    rng = np.random.default_rng(seed)
    factors = []
    images = []
    for _ in range(pairs):
        t1, t2 = params.k * (0.1 + 0.8 * rng.random(2))
        u = random_cone_member(op.map.space, op.resolution, params, t1, rng)
        v = random_cone_member(op.map.space, op.resolution, params, t2, rng)
        d0 = theta_distance(u, v, params)
        lu, lv = op.apply_n(u, n_steps), op.apply_n(v, n_steps)
        images.extend([lu, lv])
        d1 = theta_distance(lu, lv, params)
        factors.append(0.0 if d0 == 0.0 else d1 / d0)
    diam = 0.0
    for _ in range(cross_pairs):
        i, j = rng.integers(0, len(images), size=2)
        if i == j:
            continue
        diam = max(diam, theta_distance(images[i], images[j], params))
    diam = max(diam, 0.0)
    return {"max_observed_factor": float(np.max(factors)),
            "factors": np.asarray(factors), "delta_diam": float(diam)}


def sup_inf_bound_check(psi, params):
    """Lemma-style bound sup psi <= inf psi * 2 m d^alpha k for members."""
    m = chain_count(psi.space, params.delta)
    d = psi.space.diameter
    return bool(np.max(psi.values)
                <= np.min(psi.values) * 2.0 * m * d ** params.alpha * params.k)
