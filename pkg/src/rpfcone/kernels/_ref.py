"""Pure-numpy reference kernels (fallback when the compiled core is absent).

Semantics contract shared with kernels._core:

* map families are addressed by (family_code, params) from
  PiecewiseMap.kernel_params();
* grid observables live at cell centers (i + 0.5)/n, linearly interpolated,
  periodic on the circle and clamped on the interval;
* mu-stationary orbit statistics run on the h-weighted backward preimage
  chain (jump from x to a preimage y with probability e^{phi(y)} h(y) /
  (lambda h(x)), the time reversal of (f, mu)). Forward-iterated ensembles
  are useless here: they drift to the physical a.c. measure rather than the
  (generally singular) equilibrium state, and forward float orbits of the
  dyadic doubling map collapse to 0 within 52 steps. The backward chain fixes
  both: it samples mu and contracts rounding error;
* a segment of `n` consecutive backward points is a forward orbit segment
  read right to left, so Birkhoff sums accumulate without reordering;
* per-orbit randomness comes from scrambled splitmix64 streams.
"""

import numpy as np

SQRT2 = np.sqrt(2.0)

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_64 = 2.0 ** -64


def _scramble(z):
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= _SM_M1
    z ^= z >> np.uint64(27)
    z *= _SM_M2
    z ^= z >> np.uint64(31)
    return z


def _splitmix64(state):
    """Advance splitmix64 states in place; returns the output words."""
    state += _SPLITMIX_GAMMA
    return _scramble(state)


def _stream_states(seed, count):
    """Decorrelated per-orbit stream states: a linear ramp would make streams
    time-shifted copies of each other, so the start points are scrambled."""
    raw = (np.arange(count, dtype=np.uint64) + np.uint64(seed)) * _SPLITMIX_GAMMA
    return _scramble(raw)


def _step(code, params, x):
    """One forward map step, vectorized; x assumed in [0, 1)."""
    if code == 0:
        y = 2.0 * x
        return y - np.floor(y)
    if code == 1:
        beta = params[0]
        if beta == 0.5:
            left = x * (1.0 + SQRT2 * np.sqrt(x))
        else:
            left = x * (1.0 + (2.0 ** beta) * np.power(x, beta))
        y = np.where(x < 0.5, left, 2.0 * x - 1.0)
        return y - np.floor(y)
    if code == 2:
        eps = params[0]
        y = 2.0 * x + eps * np.sin(2.0 * np.pi * x)
        return y - np.floor(y)
    if code == 3:
        m = int(params[0])
        breaks = params[1:m + 2]
        orient = params[m + 2:2 * m + 2]
        j = np.clip(np.searchsorted(breaks, x, side="right") - 1, 0, m - 1)
        u = (x - breaks[j]) / (breaks[j + 1] - breaks[j])
        y = np.where(orient[j] > 0, u, 1.0 - u)
        return y - np.floor(y)
    raise ValueError(f"unknown family code {code}")


def _degree(code, params):
    return int(params[0]) if code == 3 else 2


def _branch_inverse(code, params, b, x):
    """Preimage of x in branch b, vectorized; mirrors the dynamics module."""
    x = np.asarray(x, dtype=float)
    if code == 0:
        return (x + b) / 2.0
    if code == 1:
        if b == 1:
            return (x + 1.0) / 2.0
        beta = params[0]
        if beta == 0.5:
            f = lambda y: y * (1.0 + SQRT2 * np.sqrt(y))
            df = lambda y: 1.0 + SQRT2 * 1.5 * np.sqrt(y)
        else:
            c = 2.0 ** beta
            f = lambda y: y * (1.0 + c * np.power(y, beta))
            df = lambda y: 1.0 + c * (1.0 + beta) * np.power(y, beta)
        return _newton(f, df, 0.0, 0.5, x)
    if code == 2:
        eps = params[0]
        lo, hi = (0.0, 0.5) if b == 0 else (0.5, 1.0)
        f = lambda y: 2.0 * y + eps * np.sin(2.0 * np.pi * y) - b
        df = lambda y: 2.0 + 2.0 * np.pi * eps * np.cos(2.0 * np.pi * y)
        return _newton(f, df, lo, hi, x)
    m = int(params[0])
    breaks = params[1:m + 2]
    orient = params[m + 2:2 * m + 2]
    u = x if orient[b] > 0 else 1.0 - x
    return breaks[b] + u * (breaks[b + 1] - breaks[b])


def _newton(f, df, lo, hi, targets, tol=1e-12, max_iter=200):
    """Bracketed Newton, identical logic to dynamics._bracketed_newton.

    Converged lanes freeze (exactly the per-element stopping rule of the
    compiled scalar loop, keeping the backends bit-identical)."""
    t = np.asarray(targets, dtype=float)
    a = np.full(t.shape, lo)
    b = np.full(t.shape, hi)
    y = 0.5 * (a + b)
    r = f(y) - t
    for _ in range(max_iter):
        conv = np.abs(r) <= tol
        if np.all(conv):
            break
        a = np.where(r <= 0, y, a)
        b = np.where(r > 0, y, b)
        d = df(y)
        step = np.divide(r, d, out=np.zeros_like(r), where=d != 0)
        y_new = y - step
        outside = ~((y_new > a) & (y_new < b))
        y_new = np.where(outside, 0.5 * (a + b), y_new)
        y = np.where(conv, y, y_new)
        r = np.where(conv, r, f(y) - t)
    return y


def _interp(values, circle, x):
    """Linear interpolation of cell-center samples; identical formula to _core."""
    n = len(values)
    pos = x * n - 0.5
    j = np.floor(pos)
    w = pos - j
    j = j.astype(np.int64)
    if circle:
        j0 = np.mod(j, n)
        j1 = np.mod(j + 1, n)
        return (1.0 - w) * values[j0] + w * values[j1]
    out = (1.0 - w) * values[np.clip(j, 0, n - 1)] + w * values[np.clip(j + 1, 0, n - 1)]
    out = np.where(pos <= 0.0, values[0], out)
    out = np.where(pos >= n - 1.0, values[n - 1], out)
    return out


def orbit_positions(code, params, x0, n):
    """Single forward float orbit x_0 .. x_{n-1} (traces, itineraries)."""
    out = np.empty(n)
    x = np.asarray(float(x0) % 1.0)
    for j in range(n):
        out[j] = x
        x = _step(code, params, x)
    return out


def log_inv_deriv_trace(code, params, x0, n):
    """logs[j] = log 1/|f'(x_j)| along the forward orbit of x0."""
    xs = orbit_positions(code, params, x0, n)
    if code == 0:
        return np.full(n, -np.log(2.0))
    if code == 1:
        beta = params[0]
        if beta == 0.5:
            d = np.where(xs < 0.5, 1.0 + SQRT2 * 1.5 * np.sqrt(xs), 2.0)
        else:
            d = np.where(xs < 0.5, 1.0 + (2.0 ** beta) * (1.0 + beta) * np.power(xs, beta), 2.0)
        return -np.log(d)
    if code == 2:
        eps = params[0]
        return -np.log(2.0 + 2.0 * np.pi * eps * np.cos(2.0 * np.pi * xs))
    if code == 3:
        m = int(params[0])
        breaks = params[1:m + 2]
        j = np.clip(np.searchsorted(breaks, xs, side="right") - 1, 0, m - 1)
        return np.log(breaks[j + 1] - breaks[j])
    raise ValueError(f"unknown family code {code}")


def _backward_step(code, params, x, state, weight_vals, h_vals, circle):
    """One h-weighted backward jump for the whole ensemble; weight_vals are
    the pre-exponentiated e^phi samples (keeps the loop transcendental-free)."""
    deg = _degree(code, params)
    pre = np.stack([_branch_inverse(code, params, b, x) for b in range(deg)])
    w = _interp(weight_vals, circle, pre) * _interp(h_vals, circle, pre)
    cum = np.cumsum(w, axis=0)
    u = (_splitmix64(state) >> np.uint64(11)) * (2.0 ** -53) * cum[-1]
    choice = np.sum(cum[:-1] <= u[None, :], axis=0)
    return pre[choice, np.arange(x.shape[0])]


def backward_birkhoff_sums(code, params, weight_vals, h_vals, anchors, burn, n,
                           obs_vals, seed, circle=True):
    """Per-orbit Birkhoff sums of obs over mu-stationary forward segments of
    length n (generated as backward chains; order is irrelevant for sums)."""
    x = np.mod(np.asarray(anchors, dtype=float), 1.0)
    state = _stream_states(seed, len(x))
    weight_vals = np.asarray(weight_vals, dtype=float)
    h_vals = np.asarray(h_vals, dtype=float)
    obs_vals = np.asarray(obs_vals, dtype=float)
    s = np.zeros(len(x))
    for j in range(burn + n):
        x = _backward_step(code, params, x, state, weight_vals, h_vals, circle)
        if j >= burn:
            s += _interp(obs_vals, circle, x)
    return s


def backward_pair_products(code, params, weight_vals, h_vals, anchors, burn, nmax,
                           phi_obs, psi_obs, seed, circle=True):
    """Sums over orbits of psi(X_0) phi(X_n), phi(X_n) (n = 0..nmax) and
    psi(X_0) for stationary forward pairs (X_0, X_n)."""
    x = np.mod(np.asarray(anchors, dtype=float), 1.0)
    state = _stream_states(seed, len(x))
    weight_vals = np.asarray(weight_vals, dtype=float)
    h_vals = np.asarray(h_vals, dtype=float)
    phi_obs = np.asarray(phi_obs, dtype=float)
    psi_obs = np.asarray(psi_obs, dtype=float)
    for j in range(burn):
        x = _backward_step(code, params, x, state, weight_vals, h_vals, circle)
    ring = np.empty((nmax + 1, len(x)))
    for j in range(nmax + 1):
        x = _backward_step(code, params, x, state, weight_vals, h_vals, circle)
        ring[j] = x
    # forward order: X_k = ring[nmax - k]
    psi0 = _interp(psi_obs, circle, ring[nmax])
    prod = np.empty(nmax + 1)
    phis = np.empty(nmax + 1)
    for k in range(nmax + 1):
        ph = _interp(phi_obs, circle, ring[nmax - k])
        prod[k] = np.dot(psi0, ph)
        phis[k] = np.sum(ph)
    return prod, phis, float(np.sum(psi0))


def backward_positions(code, params, weight_vals, h_vals, anchors, burn, keep,
                       seed, circle=True):
    """mu-stationary forward segments (keep steps) as a (samples, keep) array."""
    x = np.mod(np.asarray(anchors, dtype=float), 1.0)
    state = _stream_states(seed, len(x))
    weight_vals = np.asarray(weight_vals, dtype=float)
    h_vals = np.asarray(h_vals, dtype=float)
    out = np.empty((len(x), keep))
    for j in range(burn + keep):
        x = _backward_step(code, params, x, state, weight_vals, h_vals, circle)
        if j >= burn:
            out[:, burn + keep - 1 - j] = x
    return out
