"""Spectral-gap diagnostics: the E0/E1 splitting, contraction on E0, the
contour eigenprojection via resolvent quadrature, and the separated-set
pressure cross-check against log lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dynamics import iter_pullback_histories
from .errors import BranchExplosion, ResolventSingular
from .grids import GridFunction
from .transfer import HISTORY_BUDGET


def split(data, psi):
    """psi = psi0 + psi1 with psi1 = (integral psi dnu) h and psi0 in E0."""
    mean = data.integrate_nu(psi.values)
    psi1 = psi.with_values(mean * data.h.values)
    psi0 = psi.with_values(psi.values - psi1.values)
    return {"psi0": psi0, "psi1": psi1}


def e0_contraction(data, op, trials=8, n=24, seed=0, floor=1e-13):
    """Fitted per-step sup-norm factor of (L/lam)^n on random E0 elements.

    The factor is the geometric mean rate up to the step where the iterate
    hits the relative rounding floor (operators that annihilate E0 elements in
    finitely many steps, like the dyadic doubling matrix, would otherwise
    report floor noise), or up to n when the floor is never reached.
    """
    rng = np.random.default_rng(seed)
    m = op.matrix
    lam = data.lam
    x = op.centers
    worst = 0.0
    per_trial = []
    for _ in range(trials):
        g = np.zeros(op.resolution)
        for k in range(1, 9):
            a, b = rng.normal(size=2) / k
            g += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
        g -= np.dot(g, data.nu) * data.h.values
        norm0 = np.max(np.abs(g))
        if norm0 == 0.0:
            per_trial.append(0.0)
            continue
        w = g.copy()
        factor = None
        for j in range(1, n + 1):
            w = (m @ w) / lam
            rel = np.max(np.abs(w)) / norm0
            if rel <= floor:
                factor = rel ** (1.0 / j)
                break
        if factor is None:
            factor = rel ** (1.0 / n)
        per_trial.append(float(factor))
        worst = max(worst, float(factor))
    return {"max_step_factor": worst, "per_trial": per_trial, "n": n}


class _Resolvent:
    """One factorized (zI - M) solve with a residual guard."""

    def __init__(self, matrix, z, tol=1e-6):
        self.z = z
        self.tol = tol
        n = matrix.shape[0]
        a = (sp.identity(n, format="csc", dtype=complex) * z - matrix.astype(complex)).tocsc()
        try:
            self._lu = spla.splu(a)
        except RuntimeError as e:
            raise ResolventSingular(f"LU failed at z={z}: {e}") from None
        self._a = a

    def solve(self, vec):
        u = self._lu.solve(np.asarray(vec, dtype=complex))
        res = np.max(np.abs(self._a @ u - vec)) / max(1e-300, np.max(np.abs(vec)))
        if res > self.tol:
            raise ResolventSingular(f"solve residual {res:.3e} at z={self.z}")
        return u


@dataclass
class EigenprojectionResult:
    method: str
    quad_points: int
    center: float
    radius: float
    idempotency_defect: float
    agreement_defect: float
    apply: object = field(repr=False)  # GridFunction -> GridFunction


def _test_functions(op, data):
    x = op.centers
    return [np.ones_like(x), np.cos(2 * np.pi * x), np.sin(2 * np.pi * x),
            0.5 + x * (1 - x), data.h.values.copy()]


def eigenprojection_contour(op, data, quad_points=64, retry=True):
    """Trapezoid quadrature of (2 pi i)^{-1} contour integral of (zI - L)^{-1}
    on the circle centered at lambda with radius (1 - gap_ratio) lambda / 2.

    Nodes come in conjugate pairs, so only the upper half-circle is solved.
    Defects are measured against the rank-one projector psi -> (int psi dnu) h.
    """
    if not data.gap_ratio < 1.0:
        raise ResolventSingular(f"gap_ratio = {data.gap_ratio} is not < 1")
    lam = data.lam
    radius = (1.0 - data.gap_ratio) * lam / 2.0
    m = op.matrix
    try:
        halves = quad_points // 2
        thetas = 2.0 * np.pi * (np.arange(halves) + 0.5) / quad_points
        solvers = [_Resolvent(m, lam + radius * np.exp(1j * t)) for t in thetas]

        def project(values):
            acc = np.zeros(len(values), dtype=complex)
            for t, s in zip(thetas, solvers):
                acc += np.exp(1j * t) * s.solve(values)
            return (2.0 * radius / quad_points) * acc.real

        # probe the defects on the standard test set
        idem, agree = 0.0, 0.0
        for v in _test_functions(op, data):
            ev = project(v)
            scale = max(np.max(np.abs(v)), 1e-300)
            idem = max(idem, np.max(np.abs(project(ev) - ev)) / scale)
            direct = np.dot(v, data.nu) * data.h.values
            agree = max(agree, np.max(np.abs(ev - direct)) / scale)
    except ResolventSingular:
        if retry:
            shrunk = SpectralDataView(data, gap_ratio=1.0 - (1.0 - data.gap_ratio) / 2.0)
            return eigenprojection_contour(op, shrunk, quad_points, retry=False)
        raise

    def apply(psi):
        return psi.with_values(project(psi.values))

    return EigenprojectionResult(method="contour", quad_points=quad_points,
                                 center=lam, radius=radius,
                                 idempotency_defect=float(idem),
                                 agreement_defect=float(agree), apply=apply)


class SpectralDataView:
    """Shallow override wrapper (used by the contour retry with halved radius)."""

    def __init__(self, data, **overrides):
        self._data = data
        self._overrides = overrides

    def __getattr__(self, name):
        if name in self._overrides:
            return self._overrides[name]
        return getattr(self._data, name)


def direct_eigenprojection(data):
    """The rank-one E1 projector psi -> (integral psi dnu) h."""

    def apply(psi):
        return psi.with_values(data.integrate_nu(psi.values) * data.h.values)

    return EigenprojectionResult(method="direct", quad_points=0, center=data.lam,
                                 radius=0.0, idempotency_defect=0.0,
                                 agreement_defect=0.0, apply=apply)


def commutation_defect(op, data, projector):
    """sup-norm defect of L E = E L on the standard test functions."""
    m = op.matrix
    worst = 0.0
    for v in _test_functions(op, data):
        le = m @ projector.apply(GridFunction(op.map.space, v)).values
        el = projector.apply(GridFunction(op.map.space, m @ v)).values
        worst = max(worst, float(np.max(np.abs(le - el)) / max(np.max(np.abs(v)), 1e-300)))
    return worst


def pressure_via_separated_sets(pmap, pot, n, delta, base_point=0.5,
                                budget=HISTORY_BUDGET):
    """(1/n) log sum over the deg^n pullbacks of a base point of e^{S_n phi}.

    The pullbacks form an (n, delta)-separated/spanning family for full
    expanding branches; the value cross-checks log lambda downstream. delta
    only tags the family (the construction is by branch histories).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if pmap.degree ** n > budget:
        raise BranchExplosion(f"deg^n = {pmap.degree ** n} exceeds budget {budget}")
    total = 0.0
    for ys, s in iter_pullback_histories(pmap, np.array([float(base_point)]), n, pot):
        total += float(np.exp(s)[0])
    return float(np.log(total) / n)
