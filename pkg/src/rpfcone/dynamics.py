"""Phase spaces and piecewise-monotone expanding-on-average maps.

Every built-in family is a degree-d map of the circle [0,1) or interval [0,1]
whose branches are monotone and full (each branch surjects onto the space), so
preimage counting is unambiguous and branch inverses are well defined.

Branch domains are half-open [a, b) with the last branch closed; boundary
points resolve to the half-open owner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotMixingWithinCap, SolverDivergence

SQRT2 = math.sqrt(2.0)

# kernel family codes (shared with rpfcone.kernels)
FAMILY_DOUBLING = 0
FAMILY_INTERMITTENT = 1
FAMILY_PERTURBED = 2
FAMILY_PIECEWISE_LINEAR = 3


@dataclass(frozen=True)
class PhaseSpace:
    """Circle [0,1) with wrap metric or interval [0,1]."""

    kind: str  # "circle" | "interval"

    def __post_init__(self):
        if self.kind not in ("circle", "interval"):
            raise ConfigError(f"unknown phase space kind {self.kind!r}")

    @property
    def diameter(self):
        return 0.5 if self.kind == "circle" else 1.0

    def wrap(self, x):
        if self.kind == "circle":
            return np.mod(x, 1.0)
        return x

    def distance(self, x, y):
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        if self.kind == "circle":
            d = np.minimum(d, 1.0 - d)
        return d


@dataclass(frozen=True)
class Branch:
    """One monotone full branch: domain [lo, hi), forward map and exact inverse."""

    lo: float
    hi: float
    increasing: bool
    forward: object = field(repr=False)   # callable, wrapped into the space
    derivative: object = field(repr=False)
    inverse: object = field(repr=False)   # y in [0,1) -> preimage in [lo, hi)
    image_coord: object = field(repr=False)  # monotone chart of the branch image onto [0,1]

    @property
    def domain(self):
        return (self.lo, self.hi)


def _bracketed_newton(func, dfunc, lo, hi, targets, tol=1e-12, max_iter=200):
    """Solve func(y) = t elementwise for increasing func on [lo, hi].

    Newton steps falling outside the maintained bracket are replaced by
    bisection, so monotonicity guarantees convergence.
    """
    t = np.asarray(targets, dtype=float)
    a = np.full(t.shape, lo)
    b = np.full(t.shape, hi)
    y = 0.5 * (a + b)
    r = func(y) - t
    for _ in range(max_iter):
        conv = np.abs(r) <= tol
        if np.all(conv):
            break
        a = np.where(r <= 0, y, a)
        b = np.where(r > 0, y, b)
        d = dfunc(y)
        step = np.divide(r, d, out=np.zeros_like(r), where=d != 0)
        y_new = y - step
        outside = ~((y_new > a) & (y_new < b))
        y_new = np.where(outside, 0.5 * (a + b), y_new)
        y = np.where(conv, y, y_new)
        r = np.where(conv, r, func(y) - t)
    if np.any(np.abs(r) > tol):
        worst = float(np.max(np.abs(r)))
        raise SolverDivergence(f"branch inverse residual {worst:.3e} > {tol:.1e}")
    return y


class PiecewiseMap:
    """Base class: subclasses fill in branch data and vectorized family maps."""

    space: PhaseSpace
    degree: int
    theta: float
    family: str
    family_code: int

    # --- family-specific, vectorized over numpy arrays -------------------
    def _branch_index(self, x):
        raise NotImplementedError

    def _forward(self, x):
        raise NotImplementedError

    def _derivative(self, x):
        raise NotImplementedError

    def _branch_inverse(self, j, y):
        raise NotImplementedError

    def _branch_lift01(self, j, x):
        """Monotone chart of branch j onto [0,1] (its normalized image coordinate)."""
        raise NotImplementedError

    def _branch_bounds(self):
        raise NotImplementedError

    # --- shared operations ------------------------------------------------
    def evaluate(self, x):
        """f(x); circle maps reduce mod 1."""
        x = self.space.wrap(np.asarray(x, dtype=float))
        return self.space.wrap(self._forward(x))

    def derivative(self, x):
        return self._derivative(np.asarray(x, dtype=float))

    def log_inverse_derivative(self, x):
        """log(1/|f'(x)|) through the branch derivative."""
        return -np.log(np.abs(self.derivative(x)))

    def preimages(self, x, tol=1e-12):
        """All points y with f(y) = x, one per full branch, tagged by branch id."""
        x = float(self.space.wrap(np.asarray(x, dtype=float)))
        ys = np.array([float(self._branch_inverse(j, np.asarray(x))) for j in range(self.degree)])
        res = self.space.distance(self.evaluate(ys), x)
        if np.any(res > tol):
            raise SolverDivergence(f"preimage residual {float(np.max(res)):.3e} > {tol:.1e}")
        return ys, np.arange(self.degree)

    def preimage_grid(self, xs):
        """Vectorized preimages: array of shape (degree, len(xs))."""
        xs = self.space.wrap(np.asarray(xs, dtype=float))
        return np.stack([self._branch_inverse(j, xs) for j in range(self.degree)])

    @property
    def branches(self):
        bounds = self._branch_bounds()
        out = []
        for j in range(self.degree):
            lo, hi = bounds[j], bounds[j + 1]
            inc = bool(self._branch_lift01(j, np.asarray(lo + 1e-9)) < self._branch_lift01(j, np.asarray(hi - 1e-9)))
            out.append(Branch(
                lo=float(lo), hi=float(hi), increasing=inc,
                forward=self.evaluate, derivative=self.derivative,
                inverse=(lambda y, j=j: self._branch_inverse(j, np.asarray(y, dtype=float))),
                image_coord=(lambda x, j=j: self._branch_lift01(j, np.asarray(x, dtype=float))),
            ))
        return out

    def mixing_time(self, delta, n_centers=1024, cap=64, tol=1e-12):
        """Smallest n with f^n(B(x, delta)) = M for every tested open ball.

        Ball centers sit on a uniform test grid; images are tracked by exact
        monotone-branch interval arithmetic (closed intervals minus a finite
        puncture set), so this is a covering certificate at the tested
        resolution, not a proof.
        """
        if delta <= 0 or delta > self.space.diameter:
            raise ConfigError("delta must lie in (0, diameter]")
        centers = (np.arange(n_centers) + 0.5) / n_centers
        worst = 0
        for c in centers:
            region = _Region.from_open_ball(self.space, float(c), delta, tol)
            n = 0
            while not region.covers_space(tol):
                region = region.image(self, tol)
                n += 1
                if n > cap:
                    raise NotMixingWithinCap(
                        f"ball at {c:.4f} not covering after {cap} iterates (delta={delta})")
            worst = max(worst, n)
        return worst

    # --- config -------------------------------------------------------------
    def to_config(self):
        raise NotImplementedError

    def kernel_params(self):
        """(family_code, float64 parameter vector) consumed by the orbit kernels."""
        raise NotImplementedError


class DoublingMap(PiecewiseMap):
    """x -> 2x mod 1 on the circle."""

    family = "doubling"
    family_code = FAMILY_DOUBLING

    def __init__(self):
        self.space = PhaseSpace("circle")
        self.degree = 2
        self.theta = 0.5

    def _branch_bounds(self):
        return [0.0, 0.5, 1.0]

    def _branch_index(self, x):
        return (np.asarray(x) >= 0.5).astype(np.int64)

    def _forward(self, x):
        return 2.0 * x

    def _derivative(self, x):
        return np.full(np.shape(x), 2.0)

    def _branch_inverse(self, j, y):
        return (np.asarray(y, dtype=float) + j) / 2.0

    def _branch_lift01(self, j, x):
        return 2.0 * np.asarray(x, dtype=float) - j

    def to_config(self):
        return {"family": "doubling"}

    def kernel_params(self):
        return FAMILY_DOUBLING, np.zeros(1)


class IntermittentMap(PiecewiseMap):
    """Neutral-fixed-point circle map: x(1 + 2^b x^b) on [0,1/2), 2x-1 on [1/2,1)."""

    family = "intermittent"
    family_code = FAMILY_INTERMITTENT

    def __init__(self, beta):
        if not 0.0 < beta < 1.0:
            raise ConfigError("beta must lie in (0,1)")
        self.space = PhaseSpace("circle")
        self.degree = 2
        self.beta = float(beta)
        self.theta = 1.0  # |f'(0)| = 1 at the neutral fixed point
        self._c = 2.0 ** self.beta

    def _left(self, x):
        if self.beta == 0.5:
            return x * (1.0 + SQRT2 * np.sqrt(x))
        return x * (1.0 + self._c * np.power(x, self.beta))

    def _left_deriv(self, x):
        if self.beta == 0.5:
            return 1.0 + SQRT2 * 1.5 * np.sqrt(x)
        return 1.0 + self._c * (1.0 + self.beta) * np.power(x, self.beta)

    def _branch_bounds(self):
        return [0.0, 0.5, 1.0]

    def _branch_index(self, x):
        return (np.asarray(x) >= 0.5).astype(np.int64)

    def _forward(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.5, self._left(np.minimum(x, 0.5)), 2.0 * x - 1.0)

    def _derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.5, self._left_deriv(np.minimum(x, 0.5)), 2.0)

    def _branch_inverse(self, j, y):
        y = np.asarray(y, dtype=float)
        if j == 1:
            return (y + 1.0) / 2.0
        return _bracketed_newton(self._left, self._left_deriv, 0.0, 0.5, y)

    def _branch_lift01(self, j, x):
        x = np.asarray(x, dtype=float)
        if j == 0:
            return self._left(x)
        return 2.0 * x - 1.0

    def to_config(self):
        return {"family": "intermittent", "beta": self.beta}

    def kernel_params(self):
        return FAMILY_INTERMITTENT, np.array([self.beta])


class PerturbedExpandingMap(PiecewiseMap):
    """Uniformly expanding degree-2 perturbation 2x + eps*sin(2 pi x) mod 1."""

    family = "perturbed_expanding"
    family_code = FAMILY_PERTURBED

    def __init__(self, eps=0.05):
        if not 0.0 <= eps < 1.0 / (2.0 * math.pi):
            raise ConfigError("eps must lie in [0, 1/(2 pi)) to keep |f'| > 1")
        self.space = PhaseSpace("circle")
        self.degree = 2
        self.eps = float(eps)
        self.theta = 1.0 / (2.0 - 2.0 * math.pi * self.eps)

    def _lift(self, x):
        return 2.0 * x + self.eps * np.sin(2.0 * math.pi * x)

    def _branch_bounds(self):
        return [0.0, 0.5, 1.0]

    def _branch_index(self, x):
        return (np.asarray(x) >= 0.5).astype(np.int64)

    def _forward(self, x):
        return self._lift(np.asarray(x, dtype=float))

    def _derivative(self, x):
        return 2.0 + 2.0 * math.pi * self.eps * np.cos(2.0 * math.pi * np.asarray(x, dtype=float))

    def _branch_inverse(self, j, y):
        y = np.asarray(y, dtype=float)
        lo, hi = (0.0, 0.5) if j == 0 else (0.5, 1.0)
        return _bracketed_newton(lambda u: self._lift(u) - j, self._derivative, lo, hi, y)

    def _branch_lift01(self, j, x):
        return self._lift(np.asarray(x, dtype=float)) - j

    def to_config(self):
        return {"family": "perturbed_expanding", "eps": self.eps}

    def kernel_params(self):
        return FAMILY_PERTURBED, np.array([self.eps])


class PiecewiseLinearMap(PiecewiseMap):
    """Full linear branches between user breakpoints, each onto the whole space."""

    family = "custom_piecewise_linear"
    family_code = FAMILY_PIECEWISE_LINEAR

    def __init__(self, breakpoints, orientations, kind="circle"):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or len(bp) < 2 or bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise ConfigError("breakpoints must increase strictly from 0.0 to 1.0")
        orient = [int(s) for s in orientations]
        if len(orient) != len(bp) - 1 or any(s not in (1, -1) for s in orient):
            raise ConfigError("orientations must be +1/-1, one per branch")
        self.space = PhaseSpace(kind)
        self.breakpoints = bp
        self.orientations = orient
        self.degree = len(orient)
        self.widths = np.diff(bp)
        self.theta = float(np.max(self.widths))  # |f'| = 1/width on each branch

    def _branch_bounds(self):
        return list(self.breakpoints)

    def _branch_index(self, x):
        j = np.searchsorted(self.breakpoints, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(j, 0, self.degree - 1)

    def _branch_lift01(self, j, x):
        x = np.asarray(x, dtype=float)
        a, w = self.breakpoints[j], self.widths[j]
        u = (x - a) / w
        return u if self.orientations[j] == 1 else 1.0 - u

    def _forward(self, x):
        x = np.asarray(x, dtype=float)
        j = self._branch_index(x)
        a = self.breakpoints[j]
        w = self.widths[j]
        u = (x - a) / w
        sgn = np.asarray(self.orientations)[j]
        return np.where(sgn == 1, u, 1.0 - u)

    def _derivative(self, x):
        x = np.asarray(x, dtype=float)
        j = self._branch_index(x)
        sgn = np.asarray(self.orientations)[j]
        return sgn / self.widths[j]

    def _branch_inverse(self, j, y):
        y = np.asarray(y, dtype=float)
        a, w = self.breakpoints[j], self.widths[j]
        u = y if self.orientations[j] == 1 else 1.0 - y
        return a + u * w

    def to_config(self):
        return {"family": "custom_piecewise_linear", "kind": self.space.kind,
                "breakpoints": list(map(float, self.breakpoints)),
                "orientations": list(self.orientations)}

    def kernel_params(self):
        m = self.degree
        params = np.concatenate([[m], self.breakpoints, np.asarray(self.orientations, dtype=float)])
        return FAMILY_PIECEWISE_LINEAR, params


def iter_pullback_histories(pmap, xs, n, accumulate=None):
    """Yield (y_w, S_w) over all deg^n inverse-branch histories w of length n.

    y_w are the pullbacks of xs and S_w the Birkhoff sums of `accumulate`
    along the forward orbit y_w -> xs (zeros when accumulate is None).
    Depth-first, so memory stays O(n * len(xs)).
    """
    xs = np.asarray(xs, dtype=float)
    stack = [(xs, np.zeros_like(xs), 0)]
    while stack:
        pts, sums, depth = stack.pop()
        if depth == n:
            yield pts, sums
            continue
        for j in range(pmap.degree):
            ys = pmap._branch_inverse(j, pts)
            s = sums if accumulate is None else sums + accumulate(ys)
            stack.append((ys, s, depth + 1))


def map_from_config(cfg):
    """Build a map from its config dict; round-trips losslessly with to_config()."""
    try:
        family = cfg["family"]
    except (KeyError, TypeError):
        raise ConfigError("map config needs a 'family' key") from None
    if family == "doubling":
        return DoublingMap()
    if family == "intermittent":
        return IntermittentMap(cfg.get("beta", 0.5))
    if family == "perturbed_expanding":
        return PerturbedExpandingMap(cfg.get("eps", 0.05))
    if family == "custom_piecewise_linear":
        try:
            return PiecewiseLinearMap(cfg["breakpoints"], cfg["orientations"],
                                      cfg.get("kind", "circle"))
        except KeyError as e:
            raise ConfigError(f"custom_piecewise_linear config missing {e}") from None
    raise ConfigError(f"unknown map family {family!r}")


# --------------------------------------------------------------------------
# Exact set arithmetic for mixing-time certificates: a region is a finite
# union of closed intervals in [0,1] minus a finite set of punctured points
# (the open-ball endpoints and their surviving images).
# --------------------------------------------------------------------------

class _Region:
    __slots__ = ("space", "intervals", "punctures")

    def __init__(self, space, intervals, punctures):
        self.space = space
        self.intervals = intervals
        self.punctures = punctures

    @classmethod
    def from_open_ball(cls, space, center, radius, tol):
        ends = []
        if space.kind == "circle":
            lo, hi = center - radius, center + radius
            if hi - lo >= 1.0 - tol:
                ivs = [(0.0, 1.0)]
            elif lo < 0.0:
                ivs = [(0.0, hi), (lo + 1.0, 1.0)]
            elif hi > 1.0:
                ivs = [(0.0, hi - 1.0), (lo, 1.0)]
            else:
                ivs = [(lo, hi)]
            ends = [float(np.mod(lo, 1.0)), float(np.mod(hi, 1.0))]
        else:
            lo, hi = max(0.0, center - radius), min(1.0, center + radius)
            ivs = [(lo, hi)]
            if center - radius > 0.0:
                ends.append(lo)
            if center + radius < 1.0:
                ends.append(hi)
        punct = []
        for e in ends:
            if not any(abs(e - p) <= tol for p in punct):
                punct.append(e)
        return cls(space, _merge_intervals(ivs, tol), punct)

    def contains(self, x, tol):
        circle = self.space.kind == "circle"
        for p in self.punctures:
            d = abs(x - p)
            if circle:
                d = min(d, 1.0 - d)
            if d <= tol:
                return False
        reps = [x, x - 1.0, x + 1.0] if circle else [x]
        return any(a - tol <= r <= b + tol for r in reps for a, b in self.intervals)

    def covers_space(self, tol):
        if self.punctures:
            return False
        merged = _merge_intervals(self.intervals, tol)
        return len(merged) == 1 and merged[0][0] <= tol and merged[0][1] >= 1.0 - tol

    def image(self, pmap, tol):
        bounds = pmap._branch_bounds()
        pieces = []
        edge_values = []
        for a, b in self.intervals:
            for j in range(pmap.degree):
                lo, hi = bounds[j], bounds[j + 1]
                u, v = max(a, lo), min(b, hi)
                if u > v + tol:
                    continue
                v = max(u, v)
                p = float(pmap._branch_lift01(j, np.asarray(u)))
                q = float(pmap._branch_lift01(j, np.asarray(v)))
                p, q = (p, q) if p <= q else (q, p)
                pieces.append((max(0.0, p), min(1.0, q)))
                edge_values.append(float(pmap.space.wrap(pmap._branch_lift01(j, np.asarray(hi)))))
        merged = _merge_intervals(pieces, tol)
        candidates = [float(pmap.evaluate(p)) for p in self.punctures] + edge_values
        survivors = []
        for q in candidates:
            attained = False
            for j in range(pmap.degree):
                y = float(pmap._branch_inverse(j, np.asarray(q)))
                if float(pmap.space.distance(pmap.evaluate(y), q)) <= 1e-9 and self.contains(y, tol):
                    attained = True
                    break
            if attained:
                continue
            if not _point_in_intervals(q, merged, tol, self.space.kind == "circle"):
                continue  # already outside the closed union, no puncture needed
            if not any(abs(q - s) <= tol for s in survivors):
                survivors.append(q)
        return _Region(self.space, merged, survivors)


def _merge_intervals(ivs, tol):
    if not ivs:
        return []
    ivs = sorted(ivs)
    out = [list(ivs[0])]
    for a, b in ivs[1:]:
        if a <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def _point_in_intervals(x, ivs, tol, circle):
    for a, b in ivs:
        if a - tol <= x <= b + tol:
            return True
        if circle and (abs(x) <= tol or abs(x - 1.0) <= tol):
            if a <= tol or b >= 1.0 - tol:
                return True
    return False
