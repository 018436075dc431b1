"""Glued warping and weight profiles of the metric horn.

The horn ``dr^2 + (r^(1+eps)/2)^2 g_S2`` with measure ``r^(1-eta) dvol`` is
glued, for ``K > 0``, to a round cap ``sin(a r)/a`` and, for ``K <= 0``, to a
cone ``a r``. The weight ``chi`` (measure ``e^-chi dvol``) is bent from
``-(1-eta) log r`` to a constant on ``[rho+zeta+kappa, rho+zeta+3 kappa]``.

Every profile exposes :meth:`RadialFunction.jet`, which returns exact
derivatives (up to rounding) of each closed-form piece.
"""

import enum
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import jets
from .errors import CertificationError, ConfigError, DomainError
from .jets import Jet
from .smoothing import smooth_step_jet, smooth_step_up_jet

__all__ = [
    "Regime", "GluingParams", "DerivedConstants", "derive_gluing_constants",
    "RadialFunction", "ConeWarping", "HornWarping", "SineWarping",
    "LogWeight", "ConstantWeight", "WarpingProfile", "WeightProfile",
    "l_profile", "build_warping", "build_weight", "SmoothnessReport",
    "junction_report", "PRESETS", "preset",
]


class Regime(str, enum.Enum):
    POSITIVE_K = "positive-k"
    NONPOSITIVE_K = "nonpositive-k"


@dataclass(frozen=True)
class GluingParams:
    """Scalar parameters of one horn space.

    ``mollifier_eps`` is the width of the smooth steps bending ``chi_rr``;
    it is unrelated to the horn exponent ``epsilon``.
    """

    epsilon: float = 0.1
    eta: float = 0.5
    rho: float = 0.05
    zeta: float = 5e-7
    kappa: float = 0.01
    curvature_bound: float = 0.01
    mollifier_eps: float = 1e-4
    regime: Regime = None
    r_max: float = None

    def __post_init__(self):
        if self.regime is None:
            reg = Regime.POSITIVE_K if self.curvature_bound > 0 else Regime.NONPOSITIVE_K
            object.__setattr__(self, "regime", reg)
        else:
            object.__setattr__(self, "regime", Regime(self.regime))
        self.validate()

    def validate(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not 0 < self.eta < 1:
            raise ConfigError("eta must lie in (0, 1)")
        for name in ("rho", "zeta", "kappa", "mollifier_eps"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.kappa > 0.01 or self.zeta > 0.01:
            raise ConfigError("zeta and kappa must not exceed 1/100")
        if self.zeta > self.kappa**2 / 100 * (1 + 1e-12):
            raise ConfigError("zeta must satisfy zeta <= kappa^2/100")
        if self.mollifier_eps > self.kappa / 100 * (1 + 1e-12):
            raise ConfigError("mollifier_eps must satisfy mollifier_eps <= kappa/100")

    @property
    def K(self):
        return self.curvature_bound

    def to_dict(self):
        d = {
            "regime": self.regime.value,
            "epsilon": self.epsilon,
            "eta": self.eta,
            "rho": self.rho,
            "zeta": self.zeta,
            "kappa": self.kappa,
            "K": self.curvature_bound,
            "mollifier_eps": self.mollifier_eps,
            "r_max": self.r_max,
        }
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "K" in d:
            d["curvature_bound"] = d.pop("K")
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def replace(self, **changes):
        return replace(self, **changes)


PRESETS = {
    "positive-k": dict(epsilon=0.1, eta=0.5, rho=0.05, kappa=0.01, zeta=0.01**2 / 200,
                       curvature_bound=0.01, mollifier_eps=1e-4, regime="positive-k"),
    "nonpositive-k": dict(epsilon=0.1, eta=0.5, rho=0.05, kappa=0.01, zeta=0.01**2 / 200,
                          curvature_bound=0.0, mollifier_eps=1e-4, regime="nonpositive-k"),
}


def preset(name, **overrides):
    """Return the named :class:`GluingParams` preset."""
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}") from None
    base.update(overrides)
    return GluingParams(**base)


@dataclass(frozen=True)
class DerivedConstants:
    a: float
    xi: float


def derive_gluing_constants(params):
    """Constants ``(a, xi)`` matching the horn's value and slope at ``rho``.

    For ``K > 0`` they solve ``sin(a xi)/a = rho^(1+eps)/2`` and
    ``cos(a xi) = (1+eps) rho^eps / 2``; for ``K <= 0`` the linear analogue
    ``a xi = rho^(1+eps)/2``, ``a = (1+eps) rho^eps / 2``.
    """
    eps, rho = params.epsilon, params.rho
    slope = (1 + eps) / 2 * rho**eps
    if params.regime is Regime.POSITIVE_K:
        if 2 * slope >= 2:
            raise DomainError(
                f"(1+eps) rho^eps = {2 * slope:g} >= 2: no round cap matches the horn slope")
        a = math.sqrt(4 - (1 + eps) ** 2 * rho ** (2 * eps)) / rho ** (1 + eps)
        xi = math.acos(slope) / a
    else:
        a = slope
        xi = rho / (1 + eps)
    return DerivedConstants(a=a, xi=xi)


class RadialFunction:
    """A function of ``r`` given as closed-form pieces on consecutive intervals.

    ``pieces`` is a list of ``(lo, hi, fn)``; ``fn(r, order)`` returns a
    :class:`~hornlab.jets.Jet` of that piece at the points ``r``. A point on a
    breakpoint is evaluated with the piece on its left.
    """

    pieces = ()

    @property
    def breakpoints(self):
        return [p[0] for p in self.pieces] + [self.pieces[-1][1]]

    @property
    def features(self):
        """Radii where the function changes character (breakpoints and inner layers)."""
        return self.breakpoints

    def jet(self, r, order=4):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        flat = r.ravel()
        out = np.full((order + 1, flat.size), np.nan)
        assigned = np.zeros(flat.size, dtype=bool)
        for i, (lo, hi, fn) in enumerate(self.pieces):
            if i == 0:
                mask = flat <= hi
            elif i == len(self.pieces) - 1:
                mask = flat > lo
            else:
                mask = (flat > lo) & (flat <= hi)
            mask &= ~assigned
            if np.any(mask):
                out[:, mask] = fn(flat[mask], order).c
                assigned |= mask
        return Jet(out.reshape((order + 1,) + r.shape))

    def derivatives(self, r, order=4):
        """Array of ``f^(k)(r)`` for ``k = 0..order`` along axis 0."""
        scalar = np.ndim(r) == 0
        d = self.jet(r, order).derivatives()
        return d[:, 0] if scalar else d

    def __call__(self, r, nu=0):
        return self.derivatives(r, nu)[nu]

    def piece_jet(self, index, r, order=4):
        """Evaluate piece ``index`` at ``r`` regardless of its interval."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return self.pieces[index][2](r, order)


def _simple(fn):
    def piece(r, order):
        return fn(Jet.variable(r, order))
    return piece


class ConeWarping(RadialFunction):
    """``phi = slope * r`` (``slope = 1`` is flat space)."""

    def __init__(self, slope=1.0, r_max=np.inf):
        self.slope = float(slope)
        self.r_max = r_max
        self.pieces = [(0.0, r_max, _simple(lambda x: self.slope * x))]


class HornWarping(RadialFunction):
    """``phi = scale * r^(1+eps)``."""

    def __init__(self, epsilon, scale=0.5, r_max=np.inf):
        self.epsilon = float(epsilon)
        self.scale = float(scale)
        self.r_max = r_max
        self.pieces = [(0.0, r_max, _simple(lambda x: self.scale * x ** (1 + self.epsilon)))]


class SineWarping(RadialFunction):
    """``phi = sin(a r) / a``: the round sphere of radius ``1/a``."""

    def __init__(self, a=1.0):
        self.a = float(a)
        self.r_max = math.pi / self.a
        self.pieces = [(0.0, self.r_max, _simple(lambda x: jets.sin(self.a * x) / self.a))]


class LogWeight(RadialFunction):
    """``chi = -coef * log r``."""

    def __init__(self, coef, r_max=np.inf):
        self.coef = float(coef)
        self.r_max = r_max
        self.pieces = [(0.0, r_max, _simple(lambda x: -self.coef * jets.log(x)))]


class ConstantWeight(RadialFunction):
    def __init__(self, value=0.0, r_max=np.inf):
        self.value = float(value)
        self.r_max = r_max
        self.pieces = [(0.0, r_max, lambda r, order: Jet.constant(self.value, order, r.shape))]


class _CumulativeQuadrature:
    """Cached panel quadrature of ``F1(r) = int_lo^r f`` and
    ``F2(r) = int_lo^r (r - t) f(t) dt`` for a vectorized ``f``."""

    def __init__(self, f, edges, nodes=20):
        self.f = f
        self.edges = np.asarray(edges, dtype=float)
        self.lo = self.edges[0]
        self.x, self.w = np.polynomial.legendre.leggauss(nodes)
        i0, i1 = self._panel_integrals(self.edges[:-1], self.edges[1:])
        self.c0 = np.concatenate([[0.0], np.cumsum(i0)])
        self.c1 = np.concatenate([[0.0], np.cumsum(i1)])

    def _panel_integrals(self, a, b):
        a = np.asarray(a, dtype=float)[:, None]
        b = np.asarray(b, dtype=float)[:, None]
        half = (b - a) / 2
        t = a + half * (self.x + 1)
        ft = self.f(t.ravel()).reshape(t.shape) * half * self.w
        return ft.sum(axis=1), (ft * (t - self.lo)).sum(axis=1)

    def __call__(self, r):
        """Return ``(F1(r), F2(r))``."""
        r = np.asarray(r, dtype=float)
        flat = np.clip(r.ravel(), self.lo, self.edges[-1])
        j = np.clip(np.searchsorted(self.edges, flat, side="right") - 1, 0, len(self.edges) - 2)
        i0, i1 = self._panel_integrals(self.edges[j], flat)
        m0 = self.c0[j] + i0
        m1 = self.c1[j] + i1
        f2 = (flat - self.lo) * m0 - m1
        return m0.reshape(r.shape), f2.reshape(r.shape)

    @property
    def total(self):
        return self.c0[-1], (self.edges[-1] - self.lo) * self.c0[-1] - self.c1[-1]


def l_profile(t, params, constants=None, order=0):
    """Second derivative of the warping function on the first gluing band.

    Blends ``eps(1+eps)/2 t^(eps-1)`` (the horn's ``phi''``) into
    ``-a sin(a (t - rho - zeta + xi))`` (the cap's ``phi''``; absent for
    ``K <= 0``) with a smooth step across ``[rho, rho+zeta]``. Returns the
    derivatives of orders ``0..order`` stacked on axis 0 when ``order > 0``.
    """
    if constants is None:
        constants = derive_gluing_constants(params)
    scalar = np.ndim(t) == 0
    tj = Jet.variable(np.atleast_1d(np.asarray(t, dtype=float)), order)
    out = _l_jet(tj, params, constants).derivatives()
    if scalar:
        out = out[:, 0]
    return out[0] if order == 0 else out


def _l_jet(tj, params, constants):
    eps, rho, zeta = params.epsilon, params.rho, params.zeta
    psi = smooth_step_up_jet((tj - rho) / zeta)
    horn = eps * (1 + eps) / 2 * jets.power(tj, eps - 1)
    out = (1.0 - psi) * horn
    if params.regime is Regime.POSITIVE_K:
        a, xi = constants.a, constants.xi
        out = out - psi * (a * jets.sin(a * (tj - rho - zeta + xi)))
    return out


class WarpingProfile(RadialFunction):
    """Glued warping function ``phi`` on ``[0, r_max]``."""

    def __init__(self, params, panels=64):
        self.params = params
        self.constants = c = derive_gluing_constants(params)
        eps, rho, zeta, kappa = params.epsilon, params.rho, params.zeta, params.kappa
        r1, r2, r3 = rho, rho + zeta, rho + zeta + kappa
        positive = params.regime is Regime.POSITIVE_K
        if params.r_max is not None:
            r_max = float(params.r_max)
        elif positive:
            r_max = rho + zeta - c.xi + math.pi / c.a
        else:
            r_max = 100.0
        if positive:
            r_max = min(r_max, rho + zeta - c.xi + math.pi / c.a)
        self.r_max = r_max
        bps = [0.0, r1, r2, r3, r_max]
        if not all(x < y for x, y in zip(bps, bps[1:])):
            raise ConfigError(f"breakpoints not strictly increasing: {bps}")
        self.value0 = rho ** (1 + eps) / 2
        self.slope0 = (1 + eps) / 2 * rho**eps
        self._l = lambda t: _l_jet(Jet.variable(t, 0), params, c).value
        self._quad = _CumulativeQuadrature(self._l, np.linspace(r1, r2, panels + 1))
        self.l1_end, self.l2_end = self._quad.total

        def horn(r, order):
            x = Jet.variable(r, order)
            return 0.5 * jets.power(x, 1 + eps)

        def first_band(r, order):
            l1, l2 = self._quad(r)
            out = np.zeros((order + 1,) + r.shape)
            out[0] = self.value0 + (r - r1) * self.slope0 + l2
            if order >= 1:
                out[1] = self.slope0 + l1
            if order >= 2:
                ld = _l_jet(Jet.variable(r, order - 2), params, c).derivatives()
                for k in range(2, order + 1):
                    out[k] = ld[k - 2]
            return Jet(_normalize(out))

        def outer(x):
            if positive:
                return jets.sin(c.a * (x - rho - zeta + c.xi)) / c.a
            return c.a * (x - rho - zeta + c.xi)

        def second_band(r, order):
            x = Jet.variable(r, order)
            offset = self.l2_end + self.l1_end * (x - r2) + zeta * self.slope0
            keep = 1.0 - smooth_step_up_jet((x - r2) / kappa)
            return outer(x) + keep * offset

        def cap(r, order):
            return outer(Jet.variable(r, order))

        self.pieces = [(0.0, r1, horn), (r1, r2, first_band), (r2, r3, second_band),
                       (r3, r_max, cap)]


def _normalize(derivs):
    fact = np.array([math.factorial(k) for k in range(derivs.shape[0])], dtype=float)
    return derivs / fact.reshape((-1,) + (1,) * (derivs.ndim - 1))


class WeightProfile(RadialFunction):
    """Glued weight ``chi``: ``-(1-eta) log r`` below ``rho+zeta+kappa``,
    constant beyond ``rho+zeta+3 kappa``."""

    def __init__(self, params, panels=400):
        self.params = params
        eta = params.eta
        me = params.mollifier_eps
        A = params.rho + params.zeta + params.kappa
        B = params.rho + params.zeta + 3 * params.kappa
        self.band = (A, B)
        coef = 1 - eta

        def f0(t):
            x = Jet.variable(t, 0)
            return (smooth_step_jet(x, A, A + me) * (coef / (x * x))).value

        def f1(t):
            x = Jet.variable(t, 0)
            return ((1.0 - smooth_step_jet(x, A, A + me)) * smooth_step_jet(x, B - me, B)).value

        # dense panels where the steps live, coarse on the plateau
        edges = np.unique(np.concatenate([
            np.linspace(A, A + me, panels // 4 + 1),
            np.linspace(A + me, B - me, panels // 2 + 1),
            np.linspace(B - me, B, panels // 4 + 1),
        ]))
        self._q0 = _CumulativeQuadrature(f0, edges)
        self._q1 = _CumulativeQuadrature(f1, edges)
        i0, _ = self._q0.total
        i1, _ = self._q1.total
        # chi_r(B) = -coef/A + i0 + K i1 is linear in the plateau slope K
        self.plateau_slope = (coef / A - i0) / i1
        self.chi_A = -coef * math.log(A)
        self.chir_A = -coef / A
        self.plateau_value = self._band_values(np.array([B]))[0][0]
        self.r_max = params.r_max if params.r_max is not None else np.inf

        def chi_rr_jet(x):
            s1 = smooth_step_jet(x, A, A + me)
            s2 = smooth_step_jet(x, B - me, B)
            return s1 * (coef / (x * x)) + (1.0 - s1) * s2 * self.plateau_slope

        self._chi_rr_jet = chi_rr_jet

        def log_piece(r, order):
            return -coef * jets.log(Jet.variable(r, order))

        def band(r, order):
            chi, chir = self._band_values(r)
            out = np.zeros((order + 1,) + r.shape)
            out[0] = chi
            if order >= 1:
                out[1] = chir
            if order >= 2:
                d = chi_rr_jet(Jet.variable(r, order - 2)).derivatives()
                for k in range(2, order + 1):
                    out[k] = d[k - 2]
            return Jet(_normalize(out))

        def plateau(r, order):
            return Jet.constant(self.plateau_value, order, r.shape)

        self.pieces = [(0.0, A, log_piece), (A, B, band), (B, np.inf, plateau)]

    @property
    def features(self):
        A, B = self.band
        me = self.params.mollifier_eps
        return sorted(self.breakpoints + [A + me, B - me])

    def _band_values(self, r):
        A = self.band[0]
        a0, b0 = self._q0(r)
        a1, b1 = self._q1(r)
        chir = self.chir_A + a0 + self.plateau_slope * a1
        chi = self.chi_A + self.chir_A * (r - A) + b0 + self.plateau_slope * b1
        return chi, chir

    def certify(self, n=2000, tol=1e-10):
        """Check ``chi_rr - chi_r^2 >= -tol`` on the bending band."""
        r = np.linspace(*self.band, n)
        d = self.derivatives(r, 2)
        gap = d[2] - d[1] ** 2
        if gap.min() < -tol:
            i = int(np.argmin(gap))
            raise CertificationError(
                f"chi_rr - chi_r^2 = {gap[i]:.3e} < 0 at r = {r[i]:.6g}")
        return float(gap.min())


def build_warping(params, **kwargs):
    """Build and return the glued :class:`WarpingProfile`."""
    return WarpingProfile(params, **kwargs)


def build_weight(params, certify=True, n=2000):
    """Build the glued :class:`WeightProfile` and certify its convexity."""
    w = WeightProfile(params)
    if certify:
        w.certify(n=n)
    return w


@dataclass
class SmoothnessReport:
    breakpoints: list
    max_order: int
    mismatch: np.ndarray   # (n_breakpoints, max_order+1), relative
    left: np.ndarray
    right: np.ndarray
    tol: float

    @property
    def passed(self):
        return bool(np.all(self.mismatch <= self.tol))

    @property
    def verdict(self):
        return "PASS" if self.passed else "FAIL"

    def to_dict(self):
        return {"verdict": self.verdict, "tol": self.tol,
                "breakpoints": [float(b) for b in self.breakpoints],
                "mismatch": self.mismatch.tolist()}


def junction_report(profile, max_order=4, tol=1e-8):
    """Compare derivatives of adjacent closed-form pieces at each interior
    breakpoint.

    Each piece is evaluated at the shared breakpoint through its own formula;
    the mismatch of order ``k`` is ``|left - right| / max(1, |left|, |right|)``.
    """
    if max_order > 4:
        raise ValueError("max_order must be <= 4")
    pieces = profile.pieces
    bps, left, right = [], [], []
    for i in range(len(pieces) - 1):
        bp = pieces[i][1]
        if not np.isfinite(bp):
            continue
        x = np.array([bp])
        left.append(pieces[i][2](x, max_order).derivatives()[:, 0])
        right.append(pieces[i + 1][2](x, max_order).derivatives()[:, 0])
        bps.append(bp)
    left = np.array(left)
    right = np.array(right)
    scale = np.maximum(1.0, np.maximum(np.abs(left), np.abs(right)))
    mism = np.abs(left - right) / scale
    return SmoothnessReport(bps, max_order, mism, left, right, tol)
