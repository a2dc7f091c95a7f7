"""Smoothness probes along one-parameter potential families.

Analyticity cannot be certified from finite data: these operations certify
smoothness-compatibility at the tested orders and resolutions, with a built-in
kinked negative control, and exercise the resolvent Neumann-series mechanism
behind the eigenprojection's parameter dependence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence
from .grids import GridFunction
from .potentials import Potential
from .spectral import _Resolvent, eigenprojection_contour
from .transfer import DiscretizedOperator, power_iterate


@dataclass
class ParameterSweep:
    t_grid: np.ndarray
    lam: np.ndarray
    pressure: np.ndarray
    gap_ratio: np.ndarray
    converged: np.ndarray
    data: list = field(repr=False)           # per-t SpectralData (None if failed)
    h_step_sup: np.ndarray = field(repr=False)
    nu_step_tv: np.ndarray = field(repr=False)
    mu_step_tv: np.ndarray = field(repr=False)

    @property
    def dt(self):
        return float(self.t_grid[1] - self.t_grid[0]) if len(self.t_grid) > 1 else 0.0


def sweep(pmap, family, t_min, t_max, steps, resolution=4096, tol=1e-12,
          warm_start=True):
    """Run power iteration along t in [t_min, t_max]; warm starts use the
    previous h and nu as continuation. Per-t failures are recorded and the
    sweep continues.
    """
    ts = np.linspace(t_min, t_max, steps) if steps > 1 else np.array([t_min])
    lam = np.full(len(ts), np.nan)
    gap = np.full(len(ts), np.nan)
    conv = np.zeros(len(ts), dtype=bool)
    datas = [None] * len(ts)
    prev = None
    for i, t in enumerate(ts):
        op = DiscretizedOperator(pmap, family(t), resolution)
        kw = {}
        if warm_start and prev is not None:
            kw = {"psi0": prev.h.values, "nu0": prev.nu}
        try:
            d = power_iterate(op, tol=tol, **kw)
        except NoConvergence:
            continue
        lam[i], gap[i], conv[i], datas[i] = d.lam, d.gap_ratio, True, d
        prev = d
    h_step = np.full(max(len(ts) - 1, 0), np.nan)
    nu_tv = np.full(max(len(ts) - 1, 0), np.nan)
    mu_tv = np.full(max(len(ts) - 1, 0), np.nan)
    for i in range(len(ts) - 1):
        if datas[i] is not None and datas[i + 1] is not None:
            h_step[i] = np.max(np.abs(datas[i + 1].h.values - datas[i].h.values))
            nu_tv[i] = 0.5 * np.sum(np.abs(datas[i + 1].nu - datas[i].nu))
            mu_tv[i] = 0.5 * np.sum(np.abs(datas[i + 1].mu - datas[i].mu))
    return ParameterSweep(t_grid=ts, lam=lam, pressure=np.log(lam),
                          gap_ratio=gap, converged=conv, data=datas,
                          h_step_sup=h_step, nu_step_tv=nu_tv, mu_step_tv=mu_tv)


def derivative_check(sw, dphi_dt_values):
    """max over interior t of |centered-difference dP/dt - integral of
    d(phi_t)/dt against mu_t| (first-order consistency of the pressure curve)."""
    if len(sw.t_grid) < 3:
        raise ValueError("need at least 3 sweep points")
    dt = sw.dt
    worst = 0.0
    for i in range(1, len(sw.t_grid) - 1):
        if not (sw.converged[i - 1] and sw.converged[i] and sw.converged[i + 1]):
            continue
        fd = (sw.pressure[i + 1] - sw.pressure[i - 1]) / (2.0 * dt)
        formula = float(np.dot(dphi_dt_values, sw.data[i].mu))
        worst = max(worst, abs(fd - formula))
    return {"max_defect": float(worst)}


def smoothness_certificate(t_grid, pressure, max_order=4, raw_floor=1e-10,
                           ratio_band=(0.6, 1.67)):
    """Divided differences of orders 1..max_order at spacing dt and 2 dt.

    A smooth curve has both divided differences near the same derivative value
    (Richardson ratio near 1); a kink makes the order-(r>=2) divided difference
    scale like 1/dt, halving the ratio. Orders whose raw differences sit at the
    numerical noise floor pass as 'at_floor'. This certifies compatibility with
    smoothness at the tested resolution, never analyticity itself.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    p = np.asarray(pressure, dtype=float)
    if len(p) < 2 * max_order + 1:
        raise ValueError("need at least 2*max_order + 1 sweep points")
    dt = t_grid[1] - t_grid[0]
    orders = {}
    for r in range(1, max_order + 1):
        raw1 = np.diff(p, r)
        raw2 = np.diff(p[::2], r)
        m1 = float(np.max(np.abs(raw1)) / dt ** r)
        m2 = float(np.max(np.abs(raw2)) / (2.0 * dt) ** r)
        at_floor = (np.max(np.abs(raw1)) < raw_floor
                    and np.max(np.abs(raw2)) < raw_floor)
        if at_floor:
            ok = True
        elif m1 == 0.0:
            ok = m2 == 0.0
        else:
            ok = ratio_band[0] <= m2 / m1 <= ratio_band[1]
        orders[r] = {"divided_dt": m1, "divided_2dt": m2,
                     "at_floor": bool(at_floor), "consistent": bool(ok)}
    return {"orders": orders,
            "passes": all(v["consistent"] for v in orders.values())}


def kinked_control_curve(t_grid, kink_at=None, slope_break=0.1):
    """Deliberately non-smooth pressure curve (negative control): a corner of
    size slope_break at an interior grid point."""
    t_grid = np.asarray(t_grid, dtype=float)
    if kink_at is None:
        kink_at = t_grid[len(t_grid) // 2]
    return 0.3 * t_grid + slope_break * np.abs(t_grid - kink_at)


def _norm2_estimate(matvec, rmatvec, n, iters=20, seed=0):
    """Largest singular value by power iteration on A^H A."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    v /= np.linalg.norm(v)
    s = 0.0
    for _ in range(iters):
        w = rmatvec(matvec(v))
        s = np.linalg.norm(w) ** 0.5
        v = w / max(np.linalg.norm(w), 1e-300)
    return float(s)


def resolvent_series_check(op0, data0, direction, radii, z=None, orders=12,
                           seed=0):
    """Truncated Neumann series for R(z, phi0 + s psi) against a direct solve.

    For each s the table records the truncation errors, the measured dominant
    modulus of K = (L_s - L_0) R(z, phi0) (the asymptotic per-order error
    ratio), and the norm precondition ||L_s - L_0|| < 1 / ||R(z, phi0)||;
    values of s violating it are flagged and skipped.
    """
    lam = data0.lam
    if z is None:
        z = complex(lam, (1.0 - data0.gap_ratio) * lam / 2.0)
    m0 = op0.matrix
    n = op0.resolution
    solver = _Resolvent(m0, z)
    rng = np.random.default_rng(seed)
    test = rng.normal(size=n)
    norm_r = _norm2_estimate(lambda v: solver.solve(v),
                             lambda v: solver._lu.solve(v, trans="H"), n)
    out = {}
    for s in radii:
        pot_s = Potential(lambda x, s=s: op0.pot(x) + s * direction(x),
                          alpha=getattr(op0.pot, "alpha", 1.0))
        ms = DiscretizedOperator(op0.map, pot_s, n).matrix
        dm = (ms - m0).tocsr()
        if s == 0.0:
            direct = solver.solve(test)
            out[s] = {"errors": np.array([0.0]), "measured_rho": 0.0,
                      "norm_ok": True, "skipped": False}
            continue
        norm_dm = _norm2_estimate(lambda v: dm @ v, lambda v: dm.conj().T @ v, n)
        norm_ok = norm_dm < 1.0 / norm_r
        if not norm_ok:
            out[s] = {"errors": None, "measured_rho": None, "norm_ok": False,
                      "skipped": True}
            continue
        direct = _Resolvent(ms.tocsc() if hasattr(ms, 'tocsc') else ms, z).solve(test)
        scale = np.max(np.abs(direct))
        w = test.astype(complex)
        acc = w.copy()
        errors = []
        for _ in range(1, orders + 1):
            w = dm @ solver.solve(w)
            acc += w
            approx = solver.solve(acc)
            errors.append(float(np.max(np.abs(approx - direct)) / scale))
        # dominant modulus of K = dm R0 (asymptotic per-order ratio)
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        rho = 0.0
        for _ in range(40):
            v = dm @ solver.solve(v)
            rho = np.linalg.norm(v)
            v /= max(rho, 1e-300)
        out[s] = {"errors": np.asarray(errors), "measured_rho": float(rho),
                  "norm_ok": True, "skipped": False}
    return out


def projector_identities(op, data, quad_points=64):
    """Contour-projector identities: the lambda quotient through a fixed
    positive functional, h = E(1), and nu(psi) = E(psi)/E(1) elementwise."""
    proj = eigenprojection_contour(op, data, quad_points)
    ones = op.ones()
    e1 = proj.apply(ones)
    eta = lambda vals: float(np.mean(vals))
    lam_quotient = eta(op.matrix @ e1.values) / eta(e1.values)
    lam_defect = abs(lam_quotient - data.lam) / data.lam
    h_defect = float(np.max(np.abs(e1.values - data.h.values))
                     / np.max(np.abs(data.h.values)))
    nu_defect = 0.0
    x = op.centers
    for fn in (lambda u: np.cos(2 * np.pi * u), lambda u: 0.5 + u * (1 - u)):
        g = GridFunction(op.map.space, fn(x))
        ratio = proj.apply(g).values / e1.values
        nu_defect = max(nu_defect, float(np.max(np.abs(ratio - data.integrate_nu(g.values)))))
    return {"lambda_quotient_defect": float(lam_defect), "h_defect": h_defect,
            "nu_defect": nu_defect, "projector": proj}
