"""Discretized Ruelle-Perron-Frobenius operator.

Collocation at cell centers with piecewise-linear interpolation: the matrix
mode materializes the identical linear action (two interpolation weights per
branch per row), so the two modes agree to rounding and positivity is kept.
The conformal weights nu are recovered as the dominant left eigenvector of
the same matrix, the density h as the dominant right eigenvector; mu = h nu.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BranchExplosion, NoConvergence
from .dynamics import iter_pullback_histories
from .grids import GridFunction, cell_centers

HISTORY_BUDGET = 2 ** 20


class DiscretizedOperator:
    """L_phi psi (x) = sum over preimages y of e^{phi(y)} psi(y), on a grid."""

    def __init__(self, pmap, pot, resolution=4096, mode="collocation"):
        if mode not in ("collocation", "matrix"):
            raise ValueError("mode must be 'collocation' or 'matrix'")
        self.map = pmap
        self.pot = pot
        self.resolution = int(resolution)
        self.mode = mode
        self.centers = cell_centers(self.resolution)
        # one preimage array and weight row per branch, shared by both modes
        self._pre = pmap.preimage_grid(self.centers)            # (deg, n)
        self._weights = np.exp(np.stack([pot(self._pre[b]) for b in range(pmap.degree)]))
        self._matrix = None

    # --- matrix mode -------------------------------------------------------
    @property
    def matrix(self):
        """Sparse nonnegative matrix M with (L psi)(x_i) = sum_j M_ij psi_j."""
        if self._matrix is None:
            n = self.resolution
            circle = self.map.space.kind == "circle"
            rows, cols, data = [], [], []
            idx = np.arange(n)
            for b in range(self.map.degree):
                pos = self._pre[b] * n - 0.5
                j = np.floor(pos)
                w = pos - j
                j = j.astype(np.int64)
                if circle:
                    j0, j1 = np.mod(j, n), np.mod(j + 1, n)
                    w0, w1 = 1.0 - w, w
                else:
                    j0 = np.clip(j, 0, n - 1)
                    j1 = np.clip(j + 1, 0, n - 1)
                    w0, w1 = 1.0 - w, w.copy()
                    low, high = pos <= 0.0, pos >= n - 1.0
                    w0[low], w1[low] = 1.0, 0.0
                    w0[high], w1[high] = 0.0, 1.0
                    j0[low] = 0
                    j1[high] = n - 1
                rows.extend([idx, idx])
                cols.extend([j0, j1])
                data.extend([self._weights[b] * w0, self._weights[b] * w1])
            m = sp.coo_matrix(
                (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n, n))
            self._matrix = m.tocsr()
        return self._matrix

    # --- application -------------------------------------------------------
    def apply(self, psi, mode=None):
        """One application of L to a GridFunction."""
        if psi.resolution != self.resolution:
            raise ValueError("resolution mismatch")
        if (mode or self.mode) == "matrix":
            return psi.with_values(self.matrix @ psi.values)
        out = np.zeros(self.resolution)
        for b in range(self.map.degree):
            out += self._weights[b] * psi(self._pre[b])
        return psi.with_values(out)

    def apply_values(self, values):
        return self.matrix @ values

    def apply_n(self, psi, n, history_cap=4096):
        """n-fold application; enumerates the deg^n inverse-branch histories
        (exact Birkhoff weights, a single interpolation at the leaves) while
        deg^n <= history_cap, then falls back to iterated application."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.map.degree ** n <= history_cap:
            out = np.zeros(self.resolution)
            for ys, s in iter_pullback_histories(self.map, self.centers, n, self.pot):
                out += np.exp(s) * psi(ys)
            return psi.with_values(out)
        cur = psi
        for _ in range(n):
            cur = self.apply(cur)
        return cur

    def grid_function(self, fn_or_values):
        if callable(fn_or_values):
            return GridFunction.from_callable(self.map.space, fn_or_values, self.resolution)
        return GridFunction(self.map.space, fn_or_values)

    def ones(self):
        return GridFunction.constant(self.map.space, 1.0, self.resolution)


@dataclass
class SpectralData:
    """Dominant spectral data of the discretized operator.

    nu and mu are probability weights per cell; h is normalized so that
    sum h_i nu_i = 1, and mu_i = h_i nu_i.
    """

    lam: float
    h: GridFunction
    nu: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    gap_ratio: float
    iterations: int
    residuals: dict

    @property
    def pressure(self):
        return float(np.log(self.lam))

    def integrate_nu(self, values):
        return float(np.dot(np.asarray(values, dtype=float), self.nu))

    def integrate_mu(self, values):
        return float(np.dot(np.asarray(values, dtype=float), self.mu))


def power_iterate(op, tol=1e-12, max_iter=5000, n_subdominant=4,
                  psi0=None, nu0=None, compute_gap=True):
    """Dominant eigendata by simultaneous right/left power iteration.

    psi is sup-norm normalized each step; lambda is the Rayleigh-style ratio
    through the current left vector. The subdominant modulus (gap ratio) comes
    from a small Arnoldi run on the same matrix. psi0/nu0 warm-start the
    iteration (continuation along parameter sweeps).
    """
    m = op.matrix
    n = op.resolution
    psi = np.ones(n) if psi0 is None else np.asarray(psi0, dtype=float).copy()
    nu = np.full(n, 1.0 / n) if nu0 is None else np.asarray(nu0, dtype=float).copy()
    nu = nu / np.sum(nu)
    mt = m.T.tocsr()
    lam = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        lpsi = m @ psi
        lam_new = float(np.dot(lpsi, nu) / np.dot(psi, nu))
        psi_new = lpsi / np.max(np.abs(lpsi))
        nu_new = mt @ nu
        nu_new = nu_new / np.sum(nu_new)
        dpsi = float(np.max(np.abs(psi_new - psi)))
        dnu = float(np.max(np.abs(nu_new - nu)))
        dlam = np.inf if lam is None else abs(lam_new - lam)
        psi, nu, lam = psi_new, nu_new, lam_new
        if dpsi < tol and dlam < tol and dnu < tol:
            break
    else:
        iterations = max_iter
    eigen_h = float(np.max(np.abs(m @ psi - lam * psi)) / np.max(np.abs(psi)))
    eigen_nu = float(np.sum(np.abs(mt @ nu - lam * nu)))
    if eigen_h > 100 * tol * max(1.0, lam) or not np.isfinite(lam):
        raise NoConvergence(
            f"power iteration stalled after {iterations} iterations "
            f"(eigen_h={eigen_h:.3e}, eigen_nu={eigen_nu:.3e})",
            residuals={"eigen_h": eigen_h, "eigen_nu": eigen_nu})
    # normalize: sum h nu = 1, mu = h nu
    h_vals = psi / np.dot(psi, nu)
    mu = h_vals * nu
    gap = _gap_ratio(m, lam, k=n_subdominant) if compute_gap else float("nan")
    h = GridFunction(op.map.space, h_vals)
    return SpectralData(lam=lam, h=h, nu=nu, mu=mu, gap_ratio=gap,
                        iterations=iterations,
                        residuals={"eigen_h": eigen_h, "eigen_nu": eigen_nu})


def _gap_ratio(m, lam, k=4):
    """|second eigenvalue| / lambda via ARPACK on the operator matrix.

    The start vector is fixed (ARPACK's default random v0 would make both the
    value and the runtime irreproducible); non-convergence falls back to a
    deterministic deflated power iteration.
    """
    n = m.shape[0]
    v0 = np.random.default_rng(1234567).standard_normal(n)
    try:
        vals = spla.eigs(m, k=max(2, k), which="LM", return_eigenvectors=False,
                         maxiter=300, tol=1e-10, v0=v0)
        mods = np.sort(np.abs(vals))[::-1]
        sub = mods[1] if abs(mods[0] - lam) < 1e-6 * lam else mods[0]
        return float(sub / lam)
    except (spla.ArpackNoConvergence, RuntimeError):
        return _deflated_subdominant(m, lam)


def _deflated_subdominant(m, lam, steps=200, seed=1234567):
    """|lambda_2|/lambda by power iteration with the dominant pair deflated."""
    n = m.shape[0]
    rng = np.random.default_rng(seed)
    mt = m.T.tocsr()
    h = np.ones(n)
    nu = np.full(n, 1.0 / n)
    for _ in range(200):
        h = m @ h
        h /= np.max(np.abs(h))
        nu = mt @ nu
        nu /= np.sum(nu)
    h /= np.dot(h, nu)
    w = rng.standard_normal(n)
    w -= np.dot(w, nu) * h
    growth = []
    for _ in range(steps):
        w = (m @ w) / lam
        w -= np.dot(w, nu) * h
        norm = np.linalg.norm(w)
        if norm < 1e-280:
            return 0.0
        growth.append(norm)
        w /= norm
    tail = growth[-40:]
    return float(np.exp(np.mean(np.log(tail))))


def eigen_residuals(op, data):
    """Defects of the eigen-equations L h = lam h and M^T nu = lam nu."""
    m = op.matrix
    eigen_h = float(np.max(np.abs(m @ data.h.values - data.lam * data.h.values))
                    / np.max(np.abs(data.h.values)))
    eigen_nu = float(np.sum(np.abs(m.T @ data.nu - data.lam * data.nu)))
    return {"eigen_h": eigen_h, "eigen_nu": eigen_nu}


def pullback_points(pmap, x0, n, budget=HISTORY_BUDGET):
    """All deg^n n-step inverse-branch pullbacks of a single point, with their
    Birkhoff sums of a potential left to the caller (see spectral.pressure)."""
    if pmap.degree ** n > budget:
        raise BranchExplosion(f"deg^n = {pmap.degree ** n} exceeds budget {budget}")
    return iter_pullback_histories(pmap, np.array([float(x0)]), n, None)
