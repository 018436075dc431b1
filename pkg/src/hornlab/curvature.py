"""Ricci and weighted N-Ricci curvature of warped products over round spheres."""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import CertificationError, DomainError
from .profiles import (ConeWarping, ConstantWeight, HornWarping, LogWeight, Regime,
                       SineWarping, build_warping, build_weight)

__all__ = [
    "HornMetric", "horn_metric", "pure_horn_metric", "flat_metric", "cone_metric",
    "sphere_metric", "ric_warped", "ric_N_weighted", "ric4_horn_closed_form",
    "RicciEval", "RicciReport", "certification_grid", "certify_lower_bound",
    "HopfEigenvalues", "hopf_ricci",
]


@dataclass(frozen=True)
class HornMetric:
    """Weighted warped product ``(dr^2 + phi^2 g_S^(n-1), e^-chi dvol)``."""

    phi: object
    chi: object
    n: int = 3
    N: float = 4.0
    r_domain: tuple = (0.0, np.inf)
    params: object = None
    eta: float = None
    label: str = ""

    def __post_init__(self):
        if not self.N > self.n:
            raise DomainError("N must exceed n")

    @property
    def r_min(self):
        return self.r_domain[0]

    @property
    def r_max(self):
        return self.r_domain[1]


def horn_metric(params, r_min=None):
    """The glued horn space of ``params``."""
    phi = build_warping(params)
    chi = build_weight(params)
    if r_min is None:
        r_min = 1e-6 * params.rho
    return HornMetric(phi, chi, r_domain=(r_min, phi.r_max), params=params,
                      eta=params.eta, label=params.regime.value)


def pure_horn_metric(epsilon, eta, r_max=np.inf):
    """``phi = r^(1+eps)/2`` with ``chi = -(1-eta) log r`` everywhere."""
    return HornMetric(HornWarping(epsilon), LogWeight(1 - eta), r_domain=(0.0, r_max),
                      eta=eta, label="pure-horn")


def flat_metric():
    return HornMetric(ConeWarping(1.0), ConstantWeight(0.0), label="flat")


def cone_metric(slope):
    return HornMetric(ConeWarping(slope), ConstantWeight(0.0), label="cone")


def sphere_metric():
    sw = SineWarping(1.0)
    return HornMetric(sw, ConstantWeight(0.0), r_domain=(0.0, sw.r_max), label="sphere")


def _ric_terms(f, f1, f2, n):
    rr = -(n - 1) * f2 / f
    sph = (n - 2) * (1 - f1**2) - f2 * f
    return rr, sph


def ric_warped(phi, n, r):
    """Ricci coefficients of ``dr^2 + phi^2 g_S^(n-1)``.

    Returns ``(rr, sphere)``: the coefficient of ``dr (x) dr`` and the
    coefficient of ``g_S^(n-1)`` (not divided by ``phi^2``).
    """
    f, f1, f2 = phi.derivatives(r, 2)
    if not np.all(np.asarray(f) > 0):
        raise DomainError("warping function must be positive (r inside its domain)")
    return _ric_terms(f, f1, f2, n)


def ric_N_weighted(metric, r):
    """Bakry-Emery N-Ricci coefficients ``Ric + Hess chi - dchi^2/(N-n)``."""
    f, f1, f2 = metric.phi.derivatives(r, 2)
    if not np.all(np.asarray(f) > 0):
        raise DomainError("warping function must be positive (r inside its domain)")
    _, c1, c2 = metric.chi.derivatives(r, 2)
    rr, sph = _ric_terms(f, f1, f2, metric.n)
    rr = rr + c2 - c1**2 / (metric.N - metric.n)
    sph = sph + f * f1 * c1
    return rr, sph


def ric4_horn_closed_form(epsilon, eta, r):
    """Closed-form ``Ric_4`` of the pure horn with ``N = n + 1 = 4``."""
    r = np.asarray(r, dtype=float)
    rr = (eta * (1 - eta) - 2 * epsilon * (1 + epsilon)) / r**2
    sph = 1 - (1 + epsilon) * (2 + 2 * epsilon - eta) / 4 * r ** (2 * epsilon)
    return rr, sph


class RicciEval(NamedTuple):
    r: float
    rr_component: float
    sphere_component: float
    min_eigen_gap: float


@dataclass
class RicciReport:
    r: np.ndarray
    rr: np.ndarray
    sphere: np.ndarray          # frame eigenvalue: tensor coefficient / phi^2
    K: float
    tol: float
    params: dict = field(default_factory=dict)

    @property
    def gap(self):
        return np.minimum(self.rr - self.K, self.sphere - self.K)

    @property
    def grid(self):
        return [RicciEval(*row) for row in zip(self.r, self.rr, self.sphere, self.gap)]

    @property
    def worst_index(self):
        return int(np.argmin(self.gap))

    @property
    def worst_point(self):
        i = self.worst_index
        return float(self.r[i]), float(self.gap[i])

    @property
    def worst_direction(self):
        i = self.worst_index
        return "rr" if self.rr[i] <= self.sphere[i] else "sphere"

    @property
    def passed(self):
        return bool(self.gap.min() >= -self.tol)

    @property
    def verdict(self):
        return "PASS" if self.passed else "FAIL"

    def summary(self):
        r, g = self.worst_point
        return {"verdict": self.verdict, "worst_point": {"r": r, "gap": g},
                "worst_direction": self.worst_direction, "K": self.K,
                "tolerance": self.tol, "n_points": int(self.r.size), "params": self.params}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "rr", "sphere", "gap"])
            for row in zip(self.r, self.rr, self.sphere, self.gap):
                w.writerow([repr(float(v)) for v in row])

    def to_json(self, path=None):
        text = json.dumps(self.summary(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def certification_grid(metric, n_points=4000, r_min=None):
    """Radii for :func:`certify_lower_bound`.

    Log-spaced from ``r_min`` to the end of the weight band, uniform beyond,
    with extra points inside each gluing band so that narrow transitions are
    sampled.
    """
    lo = metric.r_min if r_min is None else r_min
    hi = metric.r_max
    p = metric.params
    if p is None:
        if not np.isfinite(hi):
            return np.geomspace(lo if lo > 0 else 1e-5, 10.0, n_points)
        # a finite end closes smoothly (phi = 0, |phi'| = 1) and 1 - phi'^2 cancels
        # near both poles, so keep a relative distance of 1e-3 from them
        lo = lo if lo > 0 else 1e-3 * hi
        return np.geomspace(lo, hi * (1 - 1e-3), n_points)
    bands = [(p.rho, p.rho + p.zeta), (p.rho + p.zeta, p.rho + p.zeta + p.kappa),
             (p.rho + p.zeta + p.kappa, p.rho + p.zeta + 3 * p.kappa)]
    split = bands[-1][1]
    n_band = n_points // 10
    # the cap closes at r_max where phi = 0; stop just short of it
    top = hi - 1e-4 * (hi - split) if p.regime is Regime.POSITIVE_K else hi
    n_log = (n_points - 3 * n_band) * 2 // 3
    n_uni = n_points - 3 * n_band - n_log
    parts = [np.geomspace(lo, split, n_log), np.linspace(split, top, n_uni + 1)[1:]]
    parts += [np.linspace(a, b, n_band) for a, b in bands]
    r = np.unique(np.concatenate(parts))
    # shared endpoints collapse; refill the widest log gaps to keep n_points
    while r.size < n_points:
        i = int(np.argmax(np.diff(np.log(r))))
        r = np.insert(r, i + 1, math.sqrt(r[i] * r[i + 1]))
    return r


def certify_lower_bound(metric, K, grid=None, n_points=4000, strict=True):
    """Evaluate ``Ric_N - K g`` on a grid and certify ``Ric_N >= K g``.

    PASS iff the smallest frame eigenvalue gap is at least
    ``-1e-8 max(1, |K|)``. With ``strict`` a failing report raises
    :class:`CertificationError` (the report is attached).
    """
    r = certification_grid(metric, n_points) if grid is None else np.asarray(grid, float)
    rr, sph = ric_N_weighted(metric, r)
    phi = metric.phi(r)
    params = metric.params.to_dict() if metric.params is not None else {"label": metric.label}
    rep = RicciReport(r, rr, sph / phi**2, float(K), 1e-8 * max(1.0, abs(K)), params)
    if strict and not rep.passed:
        rw, g = rep.worst_point
        raise CertificationError(
            f"Ric_N - K g has eigenvalue gap {g:.4g} at r = {rw:.6g} "
            f"({rep.worst_direction} direction)", rep)
    return rep


class HopfEigenvalues(NamedTuple):
    e_r: float
    e_fiber: float
    e_base: float
    fiber_unbounded_below: bool


def hopf_ricci(epsilon, eta, chi_scale=1.0, r=1.0):
    """Ricci eigenvalues of ``dr^2 + (c r^(1-eta))^2 k1 + (r^(1+eps)/2)^2 k2``.

    ``k1`` is the Hopf fibre part of the round ``S^3`` metric and ``k2`` the
    pulled-back ``g_S2 / 4``. The printed closed forms do not involve the
    fibre scale ``c`` (``chi_scale``), which is accepted for bookkeeping only.
    ``fiber_unbounded_below`` is set when the fibre eigenvalue is negative,
    which makes it behave like ``-C/r^2`` at the vertex.
    """
    del chi_scale
    e, h = epsilon, eta
    r = np.asarray(r, dtype=float)
    e_r = (h * (1 - h) + 2 * e * (1 + e)) / r**2
    e_fib = (h * (1 - h) - 2 * (1 - h) * (1 + e)) / r**2
    e_base = (2 * e * (1 + e) / r**2 + (4 - (1 + e) ** 2 * r ** (2 * e)) / r ** (2 + 2 * e)
              - (1 - h) * (1 + e) / r**2)
    return HopfEigenvalues(e_r, e_fib, e_base, bool(np.all(e_fib < 0)))
