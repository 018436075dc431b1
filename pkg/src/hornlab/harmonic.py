"""Harmonic functions of the weighted Laplacian by spherical-harmonic separation.

A field ``u = sum c_km R_k(r) Y_km(theta)`` is harmonic for
``Delta u - <grad chi, grad u>`` iff each radial factor solves

    R'' + p R' + q R = 0,   p = (n-1) phi'/phi - chi',   q = -k(k+1)/phi^2.

Near a horn vertex the vertex-regular solution decays like
``exp(-c r^-eps)``, far below double precision, so radial factors are
carried as ``log R`` together with the logarithmic derivative
``W = d log R / d log r``, which obeys the Riccati equation

    dW/dx = W - W^2 - r p W - r^2 q,     x = log r.
"""

import csv
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.special import sph_harm_y

from .errors import (AsymptoticMismatchError, ComplexRootsError, DegenerateNormalization,
                     DomainError, QuadratureError, StiffnessError)

__all__ = [
    "sphere_eigendata", "radial_ode_coefficients", "indicial_exponents",
    "stated_exponent_relation", "cone_exponent", "RadialMode", "solve_radial",
    "real_sph_harm", "real_sph_harm_grad", "fibonacci_sphere", "HarmonicField",
    "dirichlet_solve", "mean_square", "log_ball_integral", "three_circle_check",
    "three_circle_sweep",
    "cheng_yau_check", "weak_residual", "GlobalConstruction", "global_harmonic_construct",
]


def _workers():
    try:
        return max(1, int(os.environ.get("HORNLAB_THREADS", "1")))
    except ValueError:
        return 1


def sphere_eigendata(k):
    """Eigenvalue ``k(k+1)`` of ``-Delta_S2`` on degree-``k`` harmonics and its multiplicity."""
    if k < 0:
        raise DomainError("degree must be nonnegative")
    return k * (k + 1), 2 * k + 1


def radial_ode_coefficients(metric, k):
    """Functions ``p(r), q(r)`` of the radial equation for degree ``k``."""
    lam = k * (k + 1)
    n = metric.n

    def p(r):
        f, f1 = metric.phi.derivatives(r, 1)
        _, c1 = metric.chi.derivatives(r, 1)
        return (n - 1) * f1 / f - c1

    def q(r):
        return -lam / metric.phi(r) ** 2

    return p, q


def indicial_exponents(p_leading, q_leading):
    """Roots of ``a(a-1) + c a + d = 0`` for ``p ~ c/r``, ``q ~ d/r^2``, largest first."""
    b = p_leading - 1
    disc = b * b - 4 * q_leading
    if disc < 0:
        raise ComplexRootsError(f"indicial discriminant {disc:.6g} is negative")
    s = math.sqrt(disc)
    return (-b + s) / 2, (-b - s) / 2


def stated_exponent_relation(eta, lam=2.0):
    """Roots of ``a(a + 1 - eta) = lam``."""
    return indicial_exponents(2 - eta, -lam)


def cone_exponent(slope, k, weight_slope=0.0):
    """Growth exponent of degree ``k`` on the cone ``phi = slope r`` with
    ``chi = -weight_slope log r``: ``a(a+1+weight_slope) = k(k+1)/slope^2``."""
    lam = k * (k + 1)
    return indicial_exponents(2 + weight_slope, -lam / slope**2)[0]


def _quasi_static(rp, r2q):
    # positive root of W^2 + (rp - 1) W + r^2 q = 0 (exact for Euler equations)
    b = rp - 1
    disc = b * b - 4 * r2q
    return (-b + np.sqrt(disc)) / 2


@dataclass
class RadialMode:
    """Vertex-regular radial factor, normalized to ``R(r_out) = 1``.

    ``x`` are the sample abscissae ``log r``, ``log_R`` and ``W`` the
    stored solution. Below ``r_start`` the factor is continued as the power
    ``(r / r_start)^W(r_start)``, an upper bound for horn modes and exact on
    cones.
    """

    k: int
    lam: float
    x: np.ndarray
    log_R: np.ndarray
    W: np.ndarray
    dW: np.ndarray
    p_coeff: object = None
    q_coeff: object = None
    small_r_asymptotic: dict = field(default_factory=dict)
    indicial_at_infinity: tuple = None

    def __post_init__(self):
        self._logR = CubicHermiteSpline(self.x, self.log_R, self.W)
        self._W = CubicHermiteSpline(self.x, self.W, self.dW)

    @property
    def r(self):
        return np.exp(self.x)

    @property
    def r_start(self):
        return float(np.exp(self.x[0]))

    @property
    def r_out(self):
        return float(np.exp(self.x[-1]))

    def log_value(self, r):
        """``log R(r)``."""
        x = np.log(np.asarray(r, dtype=float))
        if np.any(x > self.x[-1] + 1e-12):
            raise DomainError("radius beyond the solved range")
        lo = x < self.x[0]
        out = self._logR(np.clip(x, self.x[0], self.x[-1]))
        return np.where(lo, self.log_R[0] + self.W[0] * (x - self.x[0]), out)

    def log_derivative(self, r):
        """``W = d log R / d log r``."""
        x = np.log(np.asarray(r, dtype=float))
        return np.where(x < self.x[0], self.W[0], self._W(np.clip(x, self.x[0], self.x[-1])))

    def __call__(self, r):
        return np.exp(self.log_value(r))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return self(r) * self.log_derivative(r) / r

    @property
    def samples(self):
        r = self.r
        R = np.exp(self.log_R)
        return r, R, R * self.W / r

    def residual(self):
        """Relative residual of ``R'' + p R' + q R`` at the interior samples.

        ``R''`` comes from a cubic spline through the sampled ``W`` (not from
        the integrator's right-hand side). Returns the largest value.
        """
        if self.p_coeff is None:
            return 0.0
        r = self.r[1:-1]
        sp = CubicSpline(self.x, self.W)
        W = self.W[1:-1]
        dW = sp(self.x[1:-1], 1)
        # R'/R = W/r, R''/R = (dW - W + W^2)/r^2
        t1 = (dW - W + W * W) / r**2
        t2 = self.p_coeff(r) * W / r
        t3 = self.q_coeff(r)
        den = np.abs(t1) + np.abs(t2) + np.abs(t3) + 1e-300
        return float(np.max(np.abs(t1 + t2 + t3) / den))

    def to_csv(self, path):
        r, R, dR = self.samples
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "log_R", "W", "R", "dR"])
            for row in zip(r, self.log_R, self.W, R, dR):
                w.writerow([repr(float(v)) for v in row])

    def to_dict(self):
        return {"k": self.k, "lambda": self.lam,
                "radial_samples": {"r": self.r.tolist(), "log_R": self.log_R.tolist(),
                                   "W": self.W.tolist()},
                "small_r_asymptotic": self.small_r_asymptotic,
                "indicial_at_infinity": self.indicial_at_infinity}


def _horn_exponent(metric):
    phi = metric.phi
    if getattr(phi, "epsilon", None) is not None:
        return phi.epsilon
    if metric.params is not None:
        return metric.params.epsilon
    return None


def _sample_grid(metric, x0, x1, n):
    """Uniform grid in ``log r`` refined inside gluing bands narrower than its step."""
    # log-uniform near the vertex, r-uniform where phi varies on the scale of r
    xs = [np.linspace(x0, x1, n), np.log(np.linspace(math.exp(x0), math.exp(x1), n))]
    step = (x1 - x0) / (n - 1)
    edges = set()
    for fn in (metric.phi, metric.chi):
        edges.update(float(b) for b in getattr(fn, "features", ()) if 0 < b < np.inf)
    edges = sorted(edges)
    for a, b in zip(edges, edges[1:]):
        xa, xb = max(math.log(a), x0), min(math.log(b), x1)
        if xa < xb and math.log(b) - math.log(a) < 20 * step:
            xs.append(np.linspace(xa, xb, 161))
    edges = [e for e in edges if x0 < math.log(e) < x1]
    for e in edges:
        # resolve the transition layers on both sides of each breakpoint
        xs.append(math.log(e) + np.linspace(-step, step, 21))
    # the launch transient relaxes onto the slow branch within a few steps
    xs.append(x0 + np.linspace(0, 4 * step, 41))
    xs.append(x1 - np.linspace(0, 2 * step, 21))
    out = np.unique(np.clip(np.concatenate(xs), x0, x1))
    return out[np.concatenate([[True], np.diff(out) > 1e-13])]


def solve_radial(metric, k, r_span=None, normalization="outer", n_samples=1500, rtol=1e-11, max_step=2,
                 check_launch=True):
    """Vertex-regular solution of the degree-``k`` radial equation.

    Integrates the Riccati form outward in ``x = log r`` with an implicit
    Radau scheme, launched from the positive quasi-static root of
    ``W^2 + (rp-1) W + r^2 q = 0`` at ``r_start``. On cones this root is the
    exact exponent; near a horn vertex it agrees with the WKB asymptotic
    ``W ~ 2 sqrt(lam) r^-eps``. ``normalization="outer"`` sets
    ``R(r_out) = 1``; ``"start"`` sets ``R(r_start) = 1``.
    """
    if k < 0:
        raise DomainError("degree must be nonnegative")
    lam = sphere_eigendata(k)[0]
    if r_span is None:
        raise DomainError("r_span is required")
    r0, r1 = map(float, r_span)
    if not 0 < r0 < r1:
        raise DomainError("need 0 < r_start < r_out")
    p, q = radial_ode_coefficients(metric, k)
    x0, x1 = math.log(r0), math.log(r1)
    xs = _sample_grid(metric, x0, x1, n_samples)
    if k == 0:
        z = np.zeros_like(xs)
        return RadialMode(0, 0.0, xs, z, z, z, p, q, {}, (0.0, None))

    def rhs(x, y):
        r = math.exp(x)
        W = y[0]
        rp = r * float(p(np.array([r]))[0])
        r2q = r * r * float(q(np.array([r]))[0])
        return [W - W * W - rp * W - r2q, W]

    def jac(x, y):
        r = math.exp(x)
        rp = r * float(p(np.array([r]))[0])
        return [[1 - 2 * y[0] - rp, 0.0], [1.0, 0.0]]

    def w_static(x):
        r = np.exp(np.asarray(x, dtype=float))
        return _quasi_static(r * p(r), r * r * q(r))

    # first-order slow-manifold correction: F'(W) delta = dW_static/dx
    h = 1e-4
    ws = w_static(np.array([x0 - h, x0, x0 + h]))
    W0 = float(ws[1])
    slope = (ws[2] - ws[0]) / (2 * h)
    W0 += slope / (1 - 2 * W0 - r0 * float(p(np.array([r0]))[0]))
    sol = solve_ivp(rhs, (x0, x1), [W0, 0.0], method="Radau", jac=jac, t_eval=xs,
                    rtol=rtol, atol=1e-12, max_step=max_step * (x1 - x0) / n_samples)
    if not sol.success:
        raise StiffnessError(f"radial integration failed: {sol.message}")
    W, logR = sol.y
    if check_launch:
        x2 = x0 + math.log(2)
        if x2 < x1:
            r2 = 2 * r0
            pred = float(_quasi_static(r2 * p(np.array([r2]))[0], r2 * r2 * q(np.array([r2]))[0]))
            got = float(np.interp(x2, xs, W))
            if abs(got - pred) > 0.05 * abs(pred):
                raise AsymptoticMismatchError(
                    f"log-derivative {got:.6g} at 2 r_start deviates from {pred:.6g}")
    rr = np.exp(xs)
    dW = W - W * W - rr * p(rr) * W - rr * rr * q(rr)
    logR = logR - (logR[-1] if normalization == "outer" else 0.0)
    asym = {}
    eps = _horn_exponent(metric)
    if eps:
        asym = {"wkb_constant": 2 * math.sqrt(lam) / eps, "epsilon": eps}
    inf_exp = None
    try:
        rb = r1 if not np.isfinite(metric.r_max) else None
        if rb is not None:
            inf_exp = indicial_exponents(float(rb * p(np.array([rb]))[0]),
                                         float(rb * rb * q(np.array([rb]))[0]))
    except ComplexRootsError:
        inf_exp = None
    return RadialMode(k, float(lam), xs, logR, W, dW, p, q, asym, inf_exp)


# -- real spherical harmonics ------------------------------------------------

def _angles(points):
    pts = np.asarray(points, dtype=float)
    polar = np.arccos(np.clip(pts[..., 2], -1, 1))
    az = np.arctan2(pts[..., 1], pts[..., 0])
    return polar, az


def real_sph_harm(k, m, points):
    """Orthonormal real spherical harmonic ``Y_km`` at unit vectors ``points``.

    ``m > 0`` uses the cosine part and ``m < 0`` the sine part, so that
    ``(Y_1,1, Y_1,-1, Y_1,0)`` is ``sqrt(3/4pi) (x, y, z)``.
    """
    polar, az = _angles(points)
    y = sph_harm_y(k, abs(m), polar, az)
    if m == 0:
        return y.real
    sign = (-1) ** m
    return math.sqrt(2) * sign * (y.real if m > 0 else y.imag)


def real_sph_harm_grad(k, m, points):
    """``(Y, d Y/d polar, (1/sin polar) d Y/d azimuth)`` at ``points``."""
    polar, az = _angles(points)
    y, g = sph_harm_y(k, abs(m), polar, az, diff_n=1)
    sin = np.sin(polar)
    part = (lambda z: z.real) if m >= 0 else (lambda z: z.imag)
    scale = 1.0 if m == 0 else math.sqrt(2) * (-1) ** m
    with np.errstate(invalid="ignore", divide="ignore"):
        d_az = np.where(sin > 0, scale * part(g[..., 1]) / sin, 0.0)
    return scale * part(y), scale * part(g[..., 0]), d_az


def fibonacci_sphere(n):
    """``n`` nearly uniform unit vectors (Fibonacci lattice)."""
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    az = math.pi * (1 + math.sqrt(5)) * i
    s = np.sqrt(1 - z * z)
    return np.stack([s * np.cos(az), s * np.sin(az), z], axis=-1)


# -- fields --------------------------------------------------------------------

@dataclass
class HarmonicField:
    """``u = sum coeff R_k(r)/R_k(s) Y_km`` on the ball of radius ``ball_radius``.

    ``modes`` holds ``(k, m, coeff, RadialMode)`` with ``None`` for ``k = 0``.
    """

    metric: object
    modes: list
    ball_radius: float
    truncated: dict = field(default_factory=dict)

    @property
    def vertex_value(self):
        return sum(c for k, m, c, _ in self.modes if k == 0) * real_sph_harm(0, 0, [0, 0, 1])

    def _log_radial(self, r):
        # rows: modes, columns: radii; log |R_k(r)/R_k(s)|
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros((len(self.modes), r.size))
        for i, (k, m, c, mode) in enumerate(self.modes):
            if mode is not None:
                out[i] = mode.log_value(r) - mode.log_value(self.ball_radius)
        return out

    def _scaled(self, r, points):
        # (log scale, values / exp(scale)) so that tiny fields do not underflow
        lr = self._log_radial(r)[:, 0]
        top = float(lr.max()) if lr.size else 0.0
        val = np.zeros(len(points))
        for (k, m, c, _), l in zip(self.modes, lr):
            val += c * math.exp(l - top) * real_sph_harm(k, m, points)
        return top, val

    def log_abs_values(self, r, points):
        """``log|u|`` on the sphere of radius ``r`` (scalar) at ``points``."""
        top, val = self._scaled(r, points)
        with np.errstate(divide="ignore"):
            return top + np.log(np.abs(val))

    def __call__(self, r, points):
        """Field values on the sphere of radius ``r`` (scalar) at unit vectors."""
        top, val = self._scaled(r, points)
        return val * math.exp(top)

    def gradient_norm(self, r, points):
        """``|grad u|`` on the sphere of radius ``r`` at ``points``."""
        phi = float(self.metric.phi(np.array([r]))[0])
        g_r = np.zeros(len(points))
        g_a = np.zeros(len(points))
        g_b = np.zeros(len(points))
        for k, m, c, mode in self.modes:
            if mode is None:
                continue
            scale = 1.0 / float(mode(self.ball_radius))
            R, dR = float(mode(r)) * scale, float(mode.derivative(r)) * scale
            y, ya, yb = real_sph_harm_grad(k, m, points)
            g_r += c * dR * y
            g_a += c * R * ya / phi
            g_b += c * R * yb / phi
        return np.sqrt(g_r**2 + g_a**2 + g_b**2)

    def coefficient_table(self):
        return [(k, m, c) for k, m, c, _ in self.modes]

    def to_dict(self):
        params = self.metric.params.to_dict() if self.metric.params is not None else \
            {"label": self.metric.label}
        return {"params": params, "s": self.ball_radius,
                "modes": [{"k": k, "m": m, "coeff": c,
                           "radial_samples": None if mode is None else
                           mode.to_dict()["radial_samples"]}
                          for k, m, c, mode in self.modes],
                "truncated": {str(k): v for k, v in self.truncated.items()}}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def dirichlet_solve(metric, s, boundary_coeffs, k_max=8, r_start=None, n_samples=1500):
    """Solve ``Delta_chi u = 0`` in ``B_s`` with ``u = sum c_km Y_km`` on ``dB_s``.

    ``boundary_coeffs`` maps ``k -> {m: coefficient}``. Degrees above
    ``k_max`` are dropped and listed in ``field.truncated``.
    """
    if k_max > 32:
        raise DomainError("k_max must be at most 32")
    r_start = 1e-6 * s if r_start is None else r_start
    wanted, dropped = [], {}
    for k, row in sorted(boundary_coeffs.items()):
        k = int(k)
        for m, c in sorted(row.items()):
            m = int(m)
            if abs(m) > k:
                raise DomainError(f"order {m} invalid for degree {k}")
            if c == 0:
                continue
            if k > k_max:
                dropped.setdefault(k, {})[m] = c
            else:
                wanted.append((k, m, float(c)))
    degrees = sorted({k for k, _, _ in wanted if k > 0})
    with ThreadPoolExecutor(_workers()) as ex:
        solved = dict(zip(degrees, ex.map(
            lambda k: solve_radial(metric, k, (r_start, s), n_samples=n_samples), degrees)))
    modes = [(k, m, c, solved.get(k)) for k, m, c in wanted]
    return HarmonicField(metric, modes, float(s), dropped)


# -- mean values -----------------------------------------------------------------

_GL = np.polynomial.legendre.leggauss(16)


def _log_integral(logf, a, b, panels, breaks=()):
    """``log int_a^b exp(logf(x)) dx`` by composite Gauss-Legendre.

    Panels are graded geometrically toward ``b``, where integrands that
    vanish fast at the vertex concentrate.
    """
    edges = [b - (b - a) * np.concatenate([[0.0], np.geomspace(1e-8, 1.0, panels)])[::-1]]
    # panel edges on the profile features, subdivided inside narrow bands
    breaks = sorted(breaks)
    for u, v in zip(breaks, breaks[1:]):
        u, v = max(u, a), min(v, b)
        if u < v:
            edges.append(np.linspace(u, v, 9))
    edges = np.unique(np.concatenate(edges))
    lo, hi = edges[:-1, None], edges[1:, None]
    x = (lo + (hi - lo) * (_GL[0] + 1) / 2).ravel()
    w = ((hi - lo) / 2 * _GL[1]).ravel()
    lf = logf(x)
    top = np.max(lf)
    if not np.isfinite(top):
        return -np.inf
    return top + math.log(np.sum(w * np.exp(lf - top)))


def _log_measure_density(metric, rho):
    return 2 * np.log(metric.phi(rho)) - metric.chi(rho)


def _features(metric):
    out = set()
    for fn in (metric.phi, metric.chi):
        out.update(float(b) for b in getattr(fn, "features", ()) if 0 < b < np.inf)
    return [math.log(b) for b in sorted(out)]


def log_ball_integral(field_or_metric, r, depth=60.0, panels=200):
    """``log int_{B_r} u^2 dmu`` (or ``log mu(B_r)`` when given a metric).

    Quadrature in ``x = log rho`` over ``[log r - depth, log r]``; the
    omitted inner ball is below ``exp(-depth)`` relative to the integrand's
    scale. Refinement is checked against half the panels.
    """
    if hasattr(field_or_metric, "modes"):
        field_ = field_or_metric
        metric = field_.metric
        modes = field_.modes
    else:
        metric = field_or_metric
        modes = None
    a, b = math.log(r) - depth, math.log(r)

    def logf(x):
        rho = np.exp(x)
        base = _log_measure_density(metric, rho) + x
        if modes is None:
            return base + math.log(4 * math.pi)
        terms = []
        for k, m, c, mode in modes:
            lr = 0.0 if mode is None else mode.log_value(rho) - mode.log_value(field_.ball_radius)
            terms.append(2 * np.log(abs(c)) + 2 * lr if c != 0 else np.full_like(rho, -np.inf))
        if not terms:
            return np.full_like(rho, -np.inf)
        return base + np.logaddexp.reduce(np.array(terms), axis=0)

    breaks = _features(metric)
    fine = _log_integral(logf, a, b, panels, breaks)
    coarse = _log_integral(logf, a, b, panels // 2, breaks)
    if np.isfinite(fine) and abs(fine - coarse) > 1e-9 * max(1.0, abs(fine)):
        raise QuadratureError(f"ball integral not converged ({fine} vs {coarse})")
    return fine


def mean_square(field_, r, log=False, **kw):
    """``M(r) = mu(B_r)^-1 int_{B_r} u^2 dmu`` (its logarithm with ``log=True``)."""
    if r > field_.ball_radius * (1 + 1e-12):
        raise DomainError("radius exceeds the ball of the field")
    val = log_ball_integral(field_, r, **kw) - log_ball_integral(field_.metric, r, **kw)
    return val if log else math.exp(val)


def three_circle_check(field_, r, s_exponent, eta=None):
    """Does ``M(r) <= 4^s M(r/2)`` imply ``M(r/2) <= 4^s M(r/4)`` at this ``r``?"""
    eta = field_.metric.eta if eta is None else eta
    admissible = True
    if eta is not None:
        val = s_exponent * (s_exponent + 1 - eta)
        ks = np.arange(0, 64)
        if np.any(np.isclose(val, ks * (ks + 1), rtol=0, atol=1e-9)):
            admissible = False
            warnings.warn(f"s = {s_exponent} hits the resonance s(s+1-eta) = k(k+1)")
    m1, m2, m4 = (mean_square(field_, r / d, log=True) for d in (1, 2, 4))
    bound = 2 * s_exponent * math.log(2)
    premise = bool(m1 - m2 <= bound)
    conclusion = bool(m2 - m4 <= bound)
    return {"r": r, "s": s_exponent, "premise": premise, "conclusion": conclusion,
            "implication_holds": (not premise) or conclusion, "admissible": admissible,
            "log2_ratio_outer": (m1 - m2) / math.log(2) / 2,
            "log2_ratio_inner": (m2 - m4) / math.log(2) / 2}


def three_circle_sweep(field_, radii, s_exponent, eta=None):
    """:func:`three_circle_check` over ``radii``; ``k0`` is the smallest tested
    radius from which the implication holds at every larger tested radius."""
    rows = [three_circle_check(field_, float(r), s_exponent, eta) for r in sorted(radii)]
    k0 = None
    for row in reversed(rows):
        if not row["implication_holds"]:
            break
        k0 = row["r"]
    return {"rows": rows, "k0": k0, "all_hold": all(r["implication_holds"] for r in rows)}


def cheng_yau_check(field_, r, C_budget, n_points=2000, n_radii=24):
    """Sample ``sup_{B_r}|grad u|`` and compare ``r sup|grad u| / sup_{B_2r}|u|`` with ``C_budget``."""
    if 2 * r > field_.ball_radius * (1 + 1e-12):
        raise DomainError("2r must lie in the ball of the field")
    pts = fibonacci_sphere(n_points)
    radii = np.geomspace(r * 1e-3, r, n_radii)
    grad = max(float(np.max(field_.gradient_norm(t, pts))) for t in radii)
    sup_u = max(float(np.max(np.abs(field_(t, pts)))) for t in np.linspace(r / 4, 2 * r, n_radii))
    if grad == 0:
        return {"ratio": 0.0, "scaled": 0.0, "pass": True}
    scaled = grad * r / sup_u
    return {"ratio": grad, "scaled": scaled, "pass": bool(scaled <= C_budget)}


def weak_residual(field_, n_tests=50, seed=0, nodes=64):
    """Integration-by-parts residual against test functions ``psi(r) Y_km``.

    ``psi`` is a random polynomial times ``(r-a)^2 (b-r)^2`` on a random
    ``[a, b]`` inside the ball. For each retained mode the weak form
    ``int (R' psi' + lam R psi / phi^2) phi^2 e^-chi dr`` must vanish; the
    largest value relative to the sum of absolute contributions is returned.
    """
    rng = np.random.default_rng(seed)
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    s = field_.ball_radius
    worst = 0.0
    active = [(k, m, c, mode) for k, m, c, mode in field_.modes if mode is not None]
    if not active:
        return 0.0
    for _ in range(n_tests):
        k, m, c, mode = active[rng.integers(len(active))]
        a, b = np.sort(rng.uniform(0.05 * s, s, 2))
        if b - a < 1e-3 * s:
            b = min(s, a + 0.1 * s)
        coef = rng.normal(size=4)
        r = a + (b - a) * (gx + 1) / 2
        w = (b - a) / 2 * gw
        bump = (r - a) ** 2 * (b - r) ** 2
        dbump = 2 * (r - a) * (b - r) ** 2 - 2 * (r - a) ** 2 * (b - r)
        poly = np.polynomial.polynomial.polyval(r, coef)
        dpoly = np.polynomial.polynomial.polyval(r, np.polynomial.polynomial.polyder(coef))
        psi, dpsi = bump * poly, dbump * poly + bump * dpoly
        # rescale by R(b) so very small R near the vertex stays representable
        lscale = float(mode.log_value(b))
        R = np.exp(mode.log_value(r) - lscale)
        dR = R * mode.log_derivative(r) / r
        f = field_.metric.phi(r)
        dens = f**2 * np.exp(-field_.metric.chi(r))
        t1 = dR * dpsi * dens
        t2 = mode.lam * R * psi / f**2 * dens
        den = np.sum(w * (np.abs(t1) + np.abs(t2)))
        if den > 0:
            worst = max(worst, abs(np.sum(w * (t1 + t2))) / den)
    return worst


# -- global construction -----------------------------------------------------------

@dataclass
class GlobalConstruction:
    radii: list
    fields: list
    normalizers: list
    differences: list          # sup over B_k0 of consecutive normalized differences
    exponents: dict
    converged: bool
    monotone: bool


def global_harmonic_construct(metric, R_sequence, k0, boundary=None, r_start=1e-6,
                              n_points=400, n_radii=40):
    """Normalized harmonic fields on growing balls ``B_R``.

    Boundary data on ``dB_R`` is ``sum_k c_k R^(a_k) Y_k,0`` with ``a_k`` the
    growth exponent of degree ``k`` on the conical end and ``boundary``
    mapping ``k -> c_k`` (default ``{1: 1}``). Each field is divided by
    ``sqrt(M(k0/2))``; the sup-norm differences of consecutive normalized
    fields are taken over ``B_k0``.
    """
    if boundary is None:
        boundary = {1: 1.0}
    R_sequence = [float(v) for v in R_sequence]
    if any(b <= a for a, b in zip(R_sequence, R_sequence[1:])):
        raise DomainError("R_sequence must increase")
    big = 10 * R_sequence[-1]
    p1 = radial_ode_coefficients(metric, 1)[0]
    c_inf = float(big * p1(np.array([big]))[0])
    slope = float(metric.phi(np.array([big]), 1)[0])
    exps = {}
    for k in boundary:
        lam = k * (k + 1)
        exps[k] = indicial_exponents(c_inf, -lam / slope**2)[0] if lam else 0.0
    fields, norms = [], []
    for R in R_sequence:
        coeffs = {k: {0: c * R ** exps[k]} for k, c in boundary.items()}
        fld = dirichlet_solve(metric, R, coeffs, r_start=r_start)
        M = mean_square(fld, k0 / 2) if fld.modes else 0.0
        if not M > 0:
            raise DegenerateNormalization("field has zero mean square on B_{k0/2}")
        norm = math.sqrt(M)
        fields.append(fld)
        norms.append(norm)
    pts = fibonacci_sphere(n_points)
    radii = np.geomspace(k0 * 1e-3, k0, n_radii)
    diffs = []
    for (f1, n1), (f2, n2) in zip(zip(fields, norms), zip(fields[1:], norms[1:])):
        worst = 0.0
        for t in radii:
            worst = max(worst, float(np.max(np.abs(f1(t, pts) / n1 - f2(t, pts) / n2))))
        diffs.append(worst)
    monotone = all(b < a for a, b in zip(diffs, diffs[1:]))
    return GlobalConstruction(R_sequence, fields, norms, diffs, exps,
                              bool(diffs and diffs[-1] < 1e-4), monotone)
