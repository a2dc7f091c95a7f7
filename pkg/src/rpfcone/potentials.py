"""Holder potentials and the smallness certificates gating the cone theory.

Three conditions are certified:

* star:            sigma * theta < 1;
* double star:     lambda_hat < 1 (the explicit cone-invariance constant);
* small variation: sup phi - inf phi < log deg(f) - log q, the sufficient
  condition for a potential to be hyperbolic (q = user-declared number of
  branches meeting the weak-expansion region).

lambda_hat follows the printed closed form

    (e^{N Var phi} [theta^N + 1] + 2 m d^a |e^{N phi}|_a / e^{N inf phi})
        * ((deg^N - 1) theta^{N a} + gamma^a) / deg^N

with m = ceil(d / delta) + 1 and |e^{N phi}|_a estimated on matched N-step
inverse-branch preimage pairs (the exact quantity the invariance proof
bounds). When theta^N < 2 the bracket improves to (theta^N - 1)^a + 1,
clamped at (max(theta^N - 1, 0))^a so it stays real below theta^N = 1; the
improved value is never larger and is the one certified.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import iter_pullback_histories
from .errors import ConfigError
from .grids import DEFAULT_SEMINORM_FLOOR, cell_centers, local_holder_seminorm
from .hyperbolic import first_hyperbolic_time_at_least, gamma_constant


class Potential:
    """Base: a bounded observable with a declared Holder exponent."""

    family = "custom"

    def __init__(self, fn, alpha=1.0):
        self._fn = fn
        self.alpha = float(alpha)

    def __call__(self, x):
        return np.asarray(self._fn(np.asarray(x, dtype=float)), dtype=float)

    def to_config(self):
        raise ConfigError(f"potential family {self.family!r} is not serializable")


class ConstantPotential(Potential):
    family = "constant"

    def __init__(self, c=0.0, alpha=1.0):
        self.c = float(c)
        super().__init__(lambda x: np.full(np.shape(x), self.c), alpha)

    def to_config(self):
        return {"family": "constant", "c": self.c, "alpha": self.alpha}


class GeometricPotential(Potential):
    """phi = -t log|f'|, evaluated through the map's branch derivative."""

    family = "geometric"

    def __init__(self, pmap, t, alpha=None):
        self.pmap = pmap
        self.t = float(t)
        if alpha is None:
            # log|f'| is beta-Holder for the intermittent family, Lipschitz otherwise
            alpha = getattr(pmap, "beta", 1.0)
        super().__init__(lambda x: -self.t * np.log(np.abs(pmap.derivative(x))), alpha)

    def to_config(self):
        return {"family": "geometric", "t": self.t, "alpha": self.alpha}


class GridPotential(Potential):
    """Interpolated grid samples (the custom family)."""

    family = "grid"

    def __init__(self, space, values, alpha):
        from .grids import GridFunction
        self.grid = GridFunction(space, values)
        super().__init__(self.grid, alpha)

    def to_config(self):
        return {"family": "grid", "values": [float(v) for v in self.grid.values],
                "alpha": self.alpha}


def potential_from_config(cfg, pmap):
    try:
        family = cfg["family"]
    except (KeyError, TypeError):
        raise ConfigError("potential config needs a 'family' key") from None
    if family == "constant":
        return ConstantPotential(cfg.get("c", 0.0), cfg.get("alpha", 1.0))
    if family == "geometric":
        return GeometricPotential(pmap, cfg.get("t", 0.0), cfg.get("alpha"))
    if family == "grid":
        try:
            return GridPotential(pmap.space, cfg["values"], cfg.get("alpha", 1.0))
        except KeyError as e:
            raise ConfigError(f"grid potential config missing {e}") from None
    raise ConfigError(f"unknown potential family {family!r}")


def variation(pot, resolution):
    """sup - inf of the potential over the uniform evaluation grid."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    v = pot(cell_centers(resolution))
    return float(np.max(v) - np.min(v))


def holder_seminorm(pot, alpha, space, resolution, radius=None,
                    floor=DEFAULT_SEMINORM_FLOOR):
    """Grid estimate of sup |phi(x)-phi(y)| / d(x,y)^alpha over pairs with
    floor <= d(x,y) < radius (radius=None means the global seminorm)."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0,1]")
    if radius is None:
        radius = np.inf
    elif not 0.0 < radius <= space.diameter:
        raise ValueError("radius must lie in (0, diameter]")
    values = pot(cell_centers(resolution))
    return local_holder_seminorm(space, values, alpha, radius, floor)


def chain_count(space, delta):
    """m of the local-to-global Holder lemma: a chain of <= ceil(d/delta)
    delta-steps joins any two points of a 1-d space."""
    return math.ceil(space.diameter / delta) + 1


def matched_preimage_seminorm(pmap, pot, n_steps, alpha, delta,
                              n_base=96, n_offsets=8, resolution=4096,
                              floor=DEFAULT_SEMINORM_FLOOR):
    """|e^{N phi}|_alpha estimated on matched preimage pairs under f^N.

    For grid pairs (x, y) with d(x, y) < delta and every inverse-branch
    history w, measures |e^{S_N phi(x_w)} - e^{S_N phi(y_w)}| / d(x_w, y_w)^alpha,
    which is the quantity the cone-invariance proof actually bounds. Pullback
    pairs closer than the fixed floor are skipped (same rationale as
    local_holder_seminorm).
    """
    h = 1.0 / resolution
    base = cell_centers(n_base)
    max_steps = max(1, int(delta / h) - 1)
    steps = np.unique(np.geomspace(1, max_steps, n_offsets).astype(int))
    best = 0.0
    for k in steps:
        xs = base
        ys = pmap.space.wrap(base + k * h)
        for (xw, sx), (yw, sy) in zip(
                iter_pullback_histories(pmap, xs, n_steps, pot),
                iter_pullback_histories(pmap, ys, n_steps, pot)):
            d = pmap.space.distance(xw, yw)
            num = np.abs(np.exp(sx) - np.exp(sy))
            mask = d >= floor
            if np.any(mask):
                best = max(best, float(np.max(num[mask] / d[mask] ** alpha)))
    return best


def lambda_hat_formula(var_phi, seminorm_exp, inf_phi, theta, deg, n_steps,
                       alpha, gamma, m, diam, improved=False):
    """Bare closed-form evaluation (no parameter validation)."""
    if improved:
        bracket = 1.0 + max(theta ** n_steps - 1.0, 0.0) ** alpha
    else:
        bracket = theta ** n_steps + 1.0
    first = (math.exp(n_steps * var_phi) * bracket
             + 2.0 * m * diam ** alpha * seminorm_exp / math.exp(n_steps * inf_phi))
    second = ((deg ** n_steps - 1.0) * theta ** (n_steps * alpha) + gamma ** alpha) / deg ** n_steps
    return first * second


def lambda_hat(pmap, pot, *, sigma, alpha, delta, n_steps, n_tilde_mix, n_tilde_hyp,
               m=None, resolution=4096, improved=None):
    """Cone-invariance constant lambda_hat for L^N with N = n_steps.

    improved=None applies the sharper bracket automatically when theta^N < 2;
    a value >= 1 is a valid failing certificate, not an error.
    """
    if n_steps < n_tilde_mix + n_tilde_hyp:
        raise ValueError("need N >= N~ + n~")
    theta = pmap.theta
    if improved is None:
        improved = theta ** n_steps < 2.0
    gamma = gamma_constant(sigma, theta, n_tilde_mix, n_tilde_hyp)
    if m is None:
        m = chain_count(pmap.space, delta)
    var_phi = variation(pot, resolution)
    inf_phi = float(np.min(pot(cell_centers(resolution))))
    sem = matched_preimage_seminorm(pmap, pot, n_steps, alpha, delta,
                                    resolution=resolution)
    return lambda_hat_formula(var_phi, sem, inf_phi, theta, pmap.degree,
                              n_steps, alpha, gamma, m, pmap.space.diameter,
                              improved=improved)


def small_variation_check(pmap, pot, q, resolution=4096):
    """Sufficient condition for sigma-hyperbolicity: Var phi < log deg - log q."""
    if not 1 <= q < pmap.degree:
        raise ValueError("need 1 <= q < degree")
    return variation(pot, resolution) < math.log(pmap.degree) - math.log(q)


@dataclass
class SmallnessReport:
    """Every constant of the certificate chain, named for audit."""

    map_family: str
    potential_family: str
    sigma: float
    theta: float
    alpha: float
    delta: float
    resolution: int
    var_phi: float
    holder_seminorm: float
    n_tilde_mix: int      # mixing time N~
    n_tilde_hyp: int      # first sampled hyperbolic time n~ >= 2 N~
    n_steps: int          # N = N~ + n~
    gamma: float
    m: int
    q: int
    lambda_hat: float        # certified value (improved bracket when theta^N < 2)
    lambda_hat_plain: float
    passes_star: bool
    passes_double_star: bool
    passes_small_variation: bool
    note: str = ("n~ is an infimum over the whole space approximated on a finite "
                 "sample; a larger sampled value makes gamma, hence lambda_hat, "
                 "conservative")

    def to_json(self, **kw):
        return json.dumps(asdict(self), **kw)


def certify(pmap, pot, *, sigma, alpha, delta, q=1, resolution=4096,
            sample=None, horizon=10000, mixing_centers=1024, seed=0):
    """Run the full smallness-certificate chain and report every constant."""
    theta = pmap.theta
    n_tilde_mix = pmap.mixing_time(delta, n_centers=mixing_centers)
    if sample is None:
        sample = np.random.default_rng(seed).random(64)
    n_tilde_hyp = first_hyperbolic_time_at_least(
        pmap, sigma, 2 * n_tilde_mix, sample, horizon)
    n_steps = n_tilde_mix + n_tilde_hyp
    gamma = gamma_constant(sigma, theta, n_tilde_mix, n_tilde_hyp)
    m = chain_count(pmap.space, delta)
    var_phi = variation(pot, resolution)
    sem_phi = holder_seminorm(pot, alpha, pmap.space, resolution)
    lam_plain = lambda_hat(pmap, pot, sigma=sigma, alpha=alpha, delta=delta,
                           n_steps=n_steps, n_tilde_mix=n_tilde_mix,
                           n_tilde_hyp=n_tilde_hyp, m=m, resolution=resolution,
                           improved=False)
    if theta ** n_steps < 2.0:
        lam_cert = lambda_hat(pmap, pot, sigma=sigma, alpha=alpha, delta=delta,
                              n_steps=n_steps, n_tilde_mix=n_tilde_mix,
                              n_tilde_hyp=n_tilde_hyp, m=m, resolution=resolution,
                              improved=True)
    else:
        lam_cert = lam_plain
    return SmallnessReport(
        map_family=pmap.family, potential_family=pot.family,
        sigma=float(sigma), theta=float(theta), alpha=float(alpha),
        delta=float(delta), resolution=int(resolution),
        var_phi=var_phi, holder_seminorm=sem_phi,
        n_tilde_mix=int(n_tilde_mix), n_tilde_hyp=int(n_tilde_hyp),
        n_steps=int(n_steps), gamma=float(gamma), m=int(m), q=int(q),
        lambda_hat=float(lam_cert), lambda_hat_plain=float(lam_plain),
        passes_star=bool(sigma * theta < 1.0),
        passes_double_star=bool(lam_cert < 1.0),
        passes_small_variation=small_variation_check(pmap, pot, q, resolution),
    )
