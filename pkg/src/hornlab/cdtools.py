"""Distortion coefficients of the curvature-dimension condition.

Functions broadcast over numpy arrays and return ``+inf`` beyond the
diameter cutoff ``D_{K,N} = pi / sqrt(K/N)``.
"""

import json
from dataclasses import dataclass

import numpy as np

__all__ = ["DistortionQuery", "cutoff", "sigma", "tau", "DensitySamplePath",
           "DensityReport", "density_convexity_check"]

_SERIES_CUTOFF = 1e-4


def cutoff(K, N):
    """``D_{K,N}``: ``pi/sqrt(K/N)`` for ``K > 0`` and finite ``N``, else inf."""
    K = np.asarray(K, dtype=float)
    N = np.asarray(N, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.pi / np.sqrt(K / N)
    return np.where((K > 0) & np.isfinite(N), d, np.inf)


def _sin_ratio(t, x):
    # sin(t x)/sin(x); series below the cutoff keeps relative accuracy
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = np.sin(t * x) / np.sin(x)
    x2 = x * x
    series = t * (1 + (1 - t * t) * x2 / 6 + (1 - t * t) * (7 - 3 * t * t) * x2 * x2 / 360)
    return np.where(np.abs(x) < _SERIES_CUTOFF, series, direct)


def _sinh_ratio(t, x):
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        # exp form avoids overflow of sinh for large x
        direct = np.exp((t - 1) * x) * np.expm1(-2 * t * x) / np.expm1(-2 * x)
    x2 = x * x
    series = t * (1 - (1 - t * t) * x2 / 6 + (1 - t * t) * (7 - 3 * t * t) * x2 * x2 / 360)
    return np.where(np.abs(x) < _SERIES_CUTOFF, series, direct)


def sigma(t, theta, K, N):
    """``sigma^(t)_{K,N}(theta)``.

    ``t`` when ``K = 0``, ``N = inf`` or ``theta = 0``; also ``t`` for
    ``K < 0`` with ``N = 1`` (the one-dimensional density table). Otherwise the
    sin- or sinh-ratio, and ``+inf`` for ``theta >= D_{K,N}``.
    """
    t, theta, K, N = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, theta, K, N)))
    finite = np.isfinite(N)
    with np.errstate(invalid="ignore", divide="ignore"):
        x = theta * np.sqrt(np.abs(K) / np.where(finite, N, 1.0))
    out = np.array(t, dtype=float, copy=True)
    pos = (K > 0) & finite
    neg = (K < 0) & finite & (N != 1)
    if np.any(pos):
        out = np.where(pos, _sin_ratio(t, x), out)
    if np.any(neg):
        out = np.where(neg, _sinh_ratio(t, x), out)
    out = np.where(theta == 0, t, out)
    out = np.where(theta >= cutoff(K, N), np.inf, out)
    return out if out.ndim else float(out)


def tau(t, theta, K, N):
    """``tau^(t)_{K,N}(theta) = t^(1/N) sigma^(t)_{K,N-1}(theta)^(1-1/N)``.

    For ``N = 1``: ``t`` if ``K <= 0`` and ``+inf`` if ``K > 0``.
    """
    t, theta, K, N = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, theta, K, N)))
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.asarray(sigma(t, theta, K, np.where(N > 1, N - 1, 1.0)))
        out = t ** (1 / N) * s ** (1 - 1 / N)
    # sigma = t makes tau = t exactly; skip the rounding of the two powers
    out = np.where((K == 0) | (theta == 0) | ~np.isfinite(N), t, out)
    one = N == 1
    out = np.where(one & (K <= 0), t, out)
    out = np.where(one & (K > 0), np.inf, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DistortionQuery:
    t: float
    theta: float
    K: float
    N: float

    def sigma(self):
        return sigma(self.t, self.theta, self.K, self.N)

    def tau(self):
        return tau(self.t, self.theta, self.K, self.N)


@dataclass
class DensitySamplePath:
    """A positive density ``h`` on ``[x0, x1]``, either a callable or samples."""

    x0: float
    x1: float
    h: object
    k: float = 0.0

    def evaluate(self, x):
        if callable(self.h):
            return np.asarray(self.h(np.asarray(x, dtype=float)), dtype=float)
        xs, hs = self.h
        return np.interp(x, xs, hs)


@dataclass
class DensityReport:
    verdict: str
    worst_violation: float
    worst_at: tuple          # (x0, x1, t)
    slope_bounds: dict

    def to_json(self):
        return json.dumps({"verdict": self.verdict, "worst_violation": self.worst_violation,
                           "worst_at": list(self.worst_at), "slope_bounds": self.slope_bounds},
                          indent=2)


def density_convexity_check(path, t_samples=33, n_pairs=200, seed=0):
    """Check the one-dimensional CD(k,2) density inequality

    ``h((1-t) x0 + t x1) >= sigma^(1-t)_{k,1}(|x1-x0|) h(x0) + sigma^(t)_{k,1}(|x1-x0|) h(x1)``

    at ``t_samples`` interior values of ``t``, for the full pair and for
    ``n_pairs`` random sub-pairs. PASS iff the smallest residual is at least
    ``-1e-10 max h``.
    """
    if t_samples < 3:
        raise ValueError("t_samples must be >= 3")
    rng = np.random.default_rng(seed)
    ts = np.linspace(0, 1, t_samples + 2)[1:-1]
    ends = rng.uniform(path.x0, path.x1, size=(n_pairs, 2))
    pairs = np.vstack([[path.x0, path.x1], ends])
    a = pairs[:, :1]
    b = pairs[:, 1:]
    theta = np.abs(b - a)
    xt = (1 - ts) * a + ts * b
    lhs = path.evaluate(xt)
    ha = path.evaluate(a)
    hb = path.evaluate(b)
    s_rev = sigma(1 - ts, theta, path.k, 1.0)
    s_fwd = sigma(ts, theta, path.k, 1.0)
    with np.errstate(invalid="ignore"):
        res = lhs - (s_rev * ha + s_fwd * hb)
    res = np.where(np.isnan(res), np.inf, res)
    hmax = float(np.max(path.evaluate(np.linspace(path.x0, path.x1, 257))))
    i, j = np.unravel_index(np.argmin(res), res.shape)
    worst = float(res[i, j])
    verdict = "PASS" if worst >= -1e-10 * hmax else "FAIL"
    # one-sided difference-quotient bounds implied at the two ends (smallest t)
    th = float(theta[0, 0])
    t0 = ts[0]
    sr, sf = sigma(1 - t0, th, path.k, 1.0), sigma(t0, th, path.k, 1.0)
    h0, h1 = float(ha[0, 0]), float(hb[0, 0])
    bounds = {
        "right_slope_at_x0_lower": ((sr - 1) * h0 + sf * h1) / (t0 * th) if th > 0 else None,
        "left_slope_at_x1_upper": (-sf * h0 + (1 - sr) * h1) / (t0 * th) if th > 0 else None,
    }
    return DensityReport(verdict, worst, (float(a[i, 0]), float(b[i, 0]), float(ts[j])), bounds)
