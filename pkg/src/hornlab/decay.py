"""Vanishing order of harmonic fields at the vertex.

Sphere maxima ``q(r) = sup_{|x| = r} |u|`` and ball integrals are tracked as
logarithms: near a horn vertex they drop below the smallest double long
before the grids used here end.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, FitError
from .harmonic import fibonacci_sphere, log_ball_integral, mean_square

__all__ = [
    "log_boundary_sup", "boundary_sup", "Verdict", "QuasiPolyFit", "DecayReport",
    "decay_report", "recursion_check", "quasipoly_fit", "VioTable", "vio_table",
    "Certificate", "decay_certificate", "default_ball_radius", "write_svg",
]


def default_ball_radius(metric):
    """End of the gluing bands for glued horns, 1 otherwise."""
    p = metric.params
    if p is None:
        return 1.0
    return p.rho + p.zeta + 3 * p.kappa


def _unit(polar, az):
    return np.array([math.sin(polar) * math.cos(az), math.sin(polar) * math.sin(az),
                     math.cos(polar)])


def log_boundary_sup(field_, r, n_min=2000, rtol=1e-4, polish=True, max_nodes=64000):
    """``log q(r)``: lattice maximum of ``log|u|`` refined by doubling, then polished."""
    n = n_min
    pts = fibonacci_sphere(n)
    vals = field_.log_abs_values(r, pts)
    best = float(np.max(vals))
    while n < max_nodes:
        n *= 2
        pts = fibonacci_sphere(n)
        vals = field_.log_abs_values(r, pts)
        new = float(np.max(vals))
        done = abs(new - best) <= rtol
        best = max(best, new)
        if done:
            break
    if not np.isfinite(best) or not polish:
        return best
    start = pts[int(np.argmax(vals))]
    x0 = [math.acos(np.clip(start[2], -1, 1)), math.atan2(start[1], start[0])]

    def neg(a):
        return -float(field_.log_abs_values(r, _unit(*a)[None, :])[0])

    res = minimize(neg, x0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
    return max(best, -float(res.fun))


def boundary_sup(field_, r, **kw):
    """``q(r) = sup_{|x| = r} |u|`` (may underflow to 0; see :func:`log_boundary_sup`)."""
    return math.exp(log_boundary_sup(field_, r, **kw))


@dataclass(frozen=True)
class Verdict:
    kind: str                    # "InfiniteOrder" | "FiniteOrder" | "Inconclusive"
    order: float = None

    def __str__(self):
        if self.kind != "FiniteOrder":
            return self.kind
        m = self.order
        text = str(int(round(m))) if abs(m - round(m)) < 1e-6 else f"{m:.6g}"
        return f"FiniteOrder({text})"


@dataclass
class QuasiPolyFit:
    A: float
    B: float
    c: float
    r_squared: float
    verdict: Verdict

    def as_tuple(self):
        return self.A, self.B, self.c


@dataclass
class DecayReport:
    r_grid: np.ndarray
    log_q: np.ndarray
    log_M: np.ndarray
    epsilon: float = None
    ball_radius: float = None
    fitted_model: QuasiPolyFit = None
    extra: dict = field(default_factory=dict)

    @property
    def q_values(self):
        return np.exp(self.log_q)

    @property
    def M_values(self):
        return np.exp(self.log_M)

    @property
    def annulus_sup(self):
        """``D = sup q`` over ``[r0/2, r0]`` with ``r0`` the largest grid radius."""
        r0 = self.r_grid[-1]
        sel = self.r_grid >= r0 / 2 * (1 - 1e-12)
        return float(np.exp(np.max(self.log_q[sel])))

    @property
    def effective_order(self):
        """``d log q / d log r`` by centered differences on the grid."""
        return np.gradient(self.log_q, np.log(self.r_grid))

    @property
    def verdict(self):
        if self.fitted_model is None:
            self.fitted_model = quasipoly_fit(self)
        return self.fitted_model.verdict

    def summary(self):
        fit = self.fitted_model or quasipoly_fit(self)
        return {"verdict": str(fit.verdict), "A": fit.A, "B": fit.B, "c": fit.c,
                "r_squared": fit.r_squared, "annulus_sup": self.annulus_sup,
                "r_min": float(self.r_grid[0]), "r_max": float(self.r_grid[-1]),
                "n_points": int(self.r_grid.size), "epsilon": self.epsilon,
                "ball_radius": self.ball_radius, **self.extra}

    def to_csv(self, path):
        eff = self.effective_order
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "q", "M", "effective_order", "log10_q", "log10_M"])
            for r, lq, lm, e in zip(self.r_grid, self.log_q, self.log_M, eff):
                w.writerow([repr(float(r)), repr(math.exp(lq)), repr(math.exp(lm)),
                            repr(float(e)), repr(lq / math.log(10)), repr(lm / math.log(10))])

    def to_json(self, path=None):
        text = json.dumps(self.summary(), indent=2, sort_keys=True, default=str)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def decay_report(field_, r_grid=None, r_min_factor=1e-5, n=60, epsilon=None):
    """Sample ``q`` and ``M`` on a log grid ``[r_min_factor s, s/2]``."""
    s = field_.ball_radius
    if r_grid is None:
        r_grid = np.geomspace(r_min_factor * s, s / 2, n)
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(r_grid > s * (1 + 1e-12)):
        raise DomainError("grid exceeds the ball of the field")
    log_q = np.array([log_boundary_sup(field_, r) for r in r_grid])
    log_M = np.array([mean_square(field_, r, log=True) for r in r_grid])
    if epsilon is None:
        eps = getattr(field_.metric.phi, "epsilon", None)
        if eps is None and field_.metric.params is not None:
            eps = field_.metric.params.epsilon
        epsilon = eps
    return DecayReport(r_grid, log_q, log_M, epsilon, s)


def recursion_check(report, epsilon):
    """Best constant in ``q(r) <= C r^eps q(2r)`` over grid radii with ``2r`` on the grid range.

    ``uniform`` is False when the ratio keeps growing toward the smallest
    radius (as for pure powers), i.e. the constant is an artefact of the
    truncated grid.
    """
    lr = np.log(report.r_grid)
    if lr[-1] - lr[0] < 3 * math.log(2):
        raise DomainError("grid must span at least three octaves")
    if not np.any(np.isfinite(report.log_q)):
        return {"C_fit": 0.0, "residuals": np.zeros(0), "uniform": True}
    sel = lr + math.log(2) <= lr[-1] + 1e-12
    l2 = np.interp(lr[sel] + math.log(2), lr, report.log_q)
    log_ratio = report.log_q[sel] - epsilon * lr[sel] - l2
    C = float(np.exp(np.max(log_ratio)))
    half = log_ratio.size // 2
    uniform = bool(np.max(log_ratio[:max(1, half // 2)]) <= np.max(log_ratio[half:]) + 1e-9)
    return {"C_fit": C, "residuals": log_ratio, "uniform": uniform,
            "r": report.r_grid[sel]}


def quasipoly_fit(report, c_threshold=-1e-3, r2_min=0.99, order_threshold=20.0):
    """Least squares ``log q = A + B log r + c (log r)^2`` and the vanishing verdict."""
    lr = np.log(report.r_grid)
    lq = np.asarray(report.log_q, dtype=float)
    ok = np.isfinite(lq)
    if ok.sum() < 12 or lr[ok][-1] - lr[ok][0] < 3 * math.log(10):
        raise FitError("need at least 12 finite samples over three decades")
    X = np.stack([np.ones(ok.sum()), lr[ok], lr[ok] ** 2], axis=1)
    if np.linalg.matrix_rank(X) < 3:
        raise FitError("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(X, lq[ok], rcond=None)
    A, B, c = map(float, coef)
    resid = lq[ok] - X @ coef
    ss = float(np.sum((lq[ok] - lq[ok].mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    eff = np.gradient(lq[ok], lr[ok])
    smallest = lr[ok] <= lr[ok][0] + math.log(10)
    low_order = float(np.mean(eff[smallest]))
    if (c <= c_threshold and r2 >= r2_min) or low_order > order_threshold:
        verdict = Verdict("InfiniteOrder")
    elif abs(c) < abs(c_threshold) and np.ptp(eff) <= 0.05 * max(1.0, abs(B)):
        verdict = Verdict("FiniteOrder", B)
    else:
        verdict = Verdict("Inconclusive")
    fit = QuasiPolyFit(A, B, c, r2, verdict)
    report.fitted_model = fit
    return fit


@dataclass
class VioTable:
    r_grid: np.ndarray
    m_values: np.ndarray
    log10_ratio: np.ndarray         # rows m, columns r
    tail_slope: np.ndarray          # d log ratio / d log r over the smallest decade
    trends: list                    # "->0", "const", "diverges" per row
    verdict: Verdict

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "trend", "tail_slope"] + [repr(float(r)) for r in self.r_grid])
            for m, t, s, row in zip(self.m_values, self.trends, self.tail_slope,
                                    self.log10_ratio):
                w.writerow([int(m), t, repr(float(s))] + [repr(float(v)) for v in row])


def vio_table(field_, r_grid, m_max=30, flat_tol=0.05):
    """``log10(int_{B_r} u^2 dmu / r^m)`` for ``m = 0..m_max``.

    A row tends to 0 when its slope in ``log r`` over the smallest decade of
    the grid is positive (the ratio shrinks as ``r`` decreases), is constant
    when the slope is within ``flat_tol`` of 0, and diverges otherwise.
    """
    if m_max > 30:
        raise DomainError("m_max must be at most 30")
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    lr = np.log(r_grid)
    li = np.array([log_ball_integral(field_, r) for r in r_grid])
    ms = np.arange(m_max + 1)
    if not np.any(np.isfinite(li)):
        zeros = np.full((ms.size, r_grid.size), -np.inf)
        return VioTable(r_grid, ms, zeros, np.full(ms.size, np.inf), ["->0"] * ms.size,
                        Verdict("InfiniteOrder"))
    rows = (li[None, :] - ms[:, None] * lr[None, :]) / math.log(10)
    tail = lr <= lr[0] + math.log(10)
    if tail.sum() < 2:
        tail[:2] = True
    slope_I = np.polyfit(lr[tail], li[tail], 1)[0]
    slopes = slope_I - ms
    trends = ["->0" if s > flat_tol else "const" if s >= -flat_tol else "diverges"
              for s in slopes]
    if all(t == "->0" for t in trends):
        verdict = Verdict("InfiniteOrder")
    else:
        # the order carried here is the exponent of the ball integral itself
        verdict = Verdict("FiniteOrder", float(slope_I))
    return VioTable(r_grid, ms, rows, slopes, trends, verdict)


@dataclass
class Certificate:
    holds: bool
    C: float
    exponent: float
    worst_margin: float
    worst_r: float


def decay_certificate(report, epsilon, factor=0.25, lo=1e-5, hi=0.5):
    """Check ``q(r) <= C exp(-factor eps (log r)^2)`` on ``[lo s, hi s]``.

    ``C`` is fixed by the outer octave ``[hi s / 2, hi s]`` and the bound is
    then tested inward; ``worst_margin`` is the largest value of
    ``log q - log C + factor eps (log r)^2`` (nonpositive when it holds).
    """
    s = report.ball_radius or report.r_grid[-1] / hi
    r = report.r_grid
    lr = np.log(r)
    expo = factor * epsilon
    g = report.log_q + expo * lr**2
    outer = (r >= hi * s / 2 * (1 - 1e-12)) & (r <= hi * s * (1 + 1e-12))
    if not np.any(outer):
        raise DomainError("grid does not cover the outer octave")
    logC = float(np.max(g[outer]))
    sel = (r >= lo * s * (1 - 1e-12)) & (r <= hi * s * (1 + 1e-12))
    margin = g[sel] - logC
    i = int(np.argmax(margin))
    return Certificate(bool(margin[i] <= 1e-9), math.exp(logC), expo, float(margin[i]),
                       float(r[sel][i]))


def write_svg(report, path, width=640, height=420):
    """Log-log plot of ``q`` with the fitted quasi-polynomial overlay (plain SVG)."""
    fit = report.fitted_model or quasipoly_fit(report)
    x = np.log10(report.r_grid)
    y = report.log_q / math.log(10)
    lr = np.log(report.r_grid)
    yf = (fit.A + fit.B * lr + fit.c * lr**2) / math.log(10)
    ok = np.isfinite(y)
    lo, hi = float(min(y[ok].min(), yf.min())), float(max(y[ok].max(), yf.max()))
    pad = 50

    def sx(v):
        return pad + (v - x[0]) / (x[-1] - x[0]) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - lo) / (hi - lo or 1.0) * (height - 2 * pad)

    def line(ys, style):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, ys) if np.isfinite(b))
        return f'<polyline fill="none" {style} points="{pts}"/>'

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="#888"/>',
        line(y, 'stroke="#1f77b4" stroke-width="2"'),
        line(yf, 'stroke="#d62728" stroke-dasharray="6,4"'),
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">log10 r</text>',
        f'<text x="14" y="{height / 2}" transform="rotate(-90 14 {height / 2})" '
        'text-anchor="middle">log10 q</text>',
        f'<text x="{pad}" y="{pad - 10}">{fit.verdict}</text>',
        "</svg>",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
