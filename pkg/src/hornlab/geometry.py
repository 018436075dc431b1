"""Distances and geodesics on warped products over the round sphere.

Geodesics of ``dr^2 + phi(r)^2 g_S2`` stay in the totally geodesic surface
``dr^2 + phi(r)^2 d alpha^2`` spanned by the great circle through the two
angular positions, so distances reduce to a surface of revolution. There the
Clairaut integral ``phi(r)^2 alpha' = c`` turns the two-point problem into a
scalar root find for ``c``.
"""

import csv
import heapq
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError
from .profiles import HornWarping

__all__ = [
    "HornPoint", "angle_between", "upper_bound", "distance_upper_bound",
    "vertex_avoidance_check", "AvoidanceResult", "random_ball_pairs", "avoidance_sweep",
    "largest_avoidance_radius", "GeodesicProbe", "geodesic_distance",
    "fast_marching_distance", "write_probe_csv",
]


@dataclass(frozen=True)
class HornPoint:
    """A point ``(r, theta)``; ``r = 0`` is the vertex whatever ``theta`` is."""

    r: float
    theta: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.r < 0:
            raise DomainError("radius must be nonnegative")
        v = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", tuple(v / np.linalg.norm(v)))

    @property
    def is_vertex(self):
        return self.r == 0

    @classmethod
    def from_angles(cls, r, polar, azimuth=0.0):
        return cls(r, (math.sin(polar) * math.cos(azimuth),
                       math.sin(polar) * math.sin(azimuth), math.cos(polar)))


def angle_between(u, v):
    """Great-circle angle between unit vectors (last axis), robust near 0 and pi."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    return np.arctan2(cross, np.sum(u * v, axis=-1))


def upper_bound(r1, r2, angle, epsilon):
    """Length of the path that runs radially to ``min(r1, r2)`` and then along
    the sphere of that radius on the horn ``phi = r^(1+eps)/2``."""
    r1, r2, angle = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r1, r2, angle)))
    m = np.minimum(r1, r2)
    return np.abs(r1 - r2) + angle * m ** (1 + epsilon) / 2


def distance_upper_bound(x, y, epsilon):
    ang = 0.0 if x.is_vertex or y.is_vertex else angle_between(x.theta, y.theta)
    return float(upper_bound(x.r, y.r, ang, epsilon))


class AvoidanceResult(NamedTuple):
    avoids: bool
    margin: float


def vertex_avoidance_check(x, y, epsilon):
    """Compare the comparison path with any curve through the vertex.

    A curve from ``x`` to ``y`` through the vertex is at least
    ``r(x) + r(y)`` long, so the vertex is not interior to a minimizing
    geodesic whenever the comparison path is strictly shorter.
    """
    if x.is_vertex or y.is_vertex:
        raise DomainError("points must differ from the vertex")
    bound = distance_upper_bound(x, y, epsilon)
    margin = x.r + y.r - bound
    return AvoidanceResult(bool(margin > 0), float(margin))


def random_ball_pairs(radius, n_pairs, seed=0):
    """Uniformly distributed radii in ``(0, radius)`` and directions on S^2."""
    rng = np.random.default_rng(seed)
    r = rng.uniform(0, radius, size=(n_pairs, 2))
    r = np.where(r == 0, radius * 1e-12, r)
    v = rng.normal(size=(n_pairs, 2, 3))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return r[:, 0], r[:, 1], angle_between(v[:, 0], v[:, 1])


def avoidance_sweep(epsilon, radius, n_pairs=10_000, seed=0):
    """Vectorized vertex-avoidance check on random pairs in ``B_radius(V)``.

    Returns a dict of arrays ``r1, r2, angle, direct, through_vertex, margin``.
    """
    r1, r2, ang = random_ball_pairs(radius, n_pairs, seed)
    direct = upper_bound(r1, r2, ang, epsilon)
    through = r1 + r2
    return {"r1": r1, "r2": r2, "angle": ang, "direct": direct,
            "through_vertex": through, "margin": through - direct}


def largest_avoidance_radius(epsilon, radii=None, n_pairs=2000, seed=0):
    """Largest ball radius in ``radii`` whose sampled pairs all avoid the vertex."""
    if radii is None:
        radii = np.geomspace(1e-3, 10.0, 41)
    best = 0.0
    for rad in sorted(radii):
        if np.all(avoidance_sweep(epsilon, rad, n_pairs, seed)["margin"] > 0):
            best = float(rad)
        else:
            break
    return best


def write_probe_csv(path, sweep):
    cols = ["r1", "r2", "angle", "direct", "through_vertex", "margin"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*(sweep[c] for c in cols)):
            w.writerow([repr(float(v)) for v in row])


@dataclass
class GeodesicProbe:
    x: HornPoint
    y: HornPoint
    direct_upper: float
    through_vertex: float
    clairaut_estimate: float = None


# Graded composite Gauss-Legendre rule on [0, 1] for integrands with a
# near-singular layer at 0 (after the r = a + s^2 substitution).
def _graded_rule(levels=36, ratio=0.5, nodes=12):
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.concatenate([[0.0], ratio ** np.arange(levels)[::-1]])
    a, b = edges[:-1, None], edges[1:, None]
    pts = (a + (b - a) * (x + 1) / 2).ravel()
    wts = ((b - a) / 2 * w).ravel()
    return pts, wts


_RULE = _graded_rule()


class _Surface:
    """Clairaut integrals on ``dr^2 + phi(r)^2 d alpha^2``."""

    def __init__(self, phi):
        self.phi = phi

    def f(self, r):
        return self.phi(np.asarray(r, dtype=float))

    def integrals(self, a, b, c, turning, width=None):
        """Swept angle and length of the geodesic arc from ``r=a`` to ``r=b``.

        ``turning`` marks ``phi(a) = c`` exactly. Uses ``r = a + s^2``.
        ``width`` overrides ``b - a`` when the caller knows it more accurately
        than the rounded difference (turning points very close to ``b``).
        """
        width = b - a if width is None else width
        if width <= 0:
            return 0.0, 0.0
        S = math.sqrt(width)
        s = S * _RULE[0]
        w = S * _RULE[1]
        u = s * s
        if turning:
            d = self.phi.derivatives(np.array([a]), 4)[:, 0]
            c = d[0]
            # Taylor form of phi(r) - phi(a) where the subtraction cancels
            taylor = d[1] * u + d[2] * u**2 / 2 + d[3] * u**3 / 6 + d[4] * u**4 / 24
            if width < 1e-4 * a:
                diff = taylor
                f = c + diff
            else:
                f = self.f(a + u)
                diff = np.where(u < 1e-3 * width, taylor, f - c)
        else:
            f = self.f(a + u)
            diff = f - c
        root = np.sqrt(np.maximum(diff, 0.0) * (f + c))
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(root > 0, 2 * s / root, 0.0)
            if turning:
                g = np.where(s == 0, 2 / math.sqrt(2 * c * d[1]), g)
        ang = float(np.sum(w * g * c / f))
        length = float(np.sum(w * g * f))
        return ang, length


def geodesic_distance(metric, x, y, n_scan=120, return_probe=False):
    """Distance between two points of a rotationally symmetric space.

    ``metric`` is a :class:`~hornlab.curvature.HornMetric` or a warping
    profile. The warping function must increase on ``(0, max(r(x), r(y))]``.
    Candidates are the Clairaut geodesics sweeping the angle between the
    points (monotone in ``r`` or with one inner turning point) and the
    broken path through the vertex; the shortest is returned.
    """
    phi = getattr(metric, "phi", metric)
    r1, r2 = float(x.r), float(y.r)
    through = r1 + r2
    if x.is_vertex or y.is_vertex:
        dist = max(r1, r2)
        return _probe(x, y, dist, metric) if return_probe else dist
    alpha = float(angle_between(x.theta, y.theta))
    lo, hi = min(r1, r2), max(r1, r2)
    if alpha == 0.0:
        dist = hi - lo
        return _probe(x, y, dist, metric) if return_probe else dist
    check = np.geomspace(lo * 1e-6, hi, 200)
    if np.any(phi(check, 1) <= 0):
        raise DomainError("geodesic_distance needs a warping function increasing below max(r)")
    surf = _Surface(phi)
    f_lo = float(phi(lo))

    def mono(u):
        c = u * f_lo
        return surf.integrals(lo, hi, c, turning=(u == 1.0))

    def turn(v):
        # turning point lo * e^-v, with the gap to lo kept exact for tiny v
        gap = -lo * math.expm1(-v)
        rs = lo * math.exp(-v)
        c = float(phi(rs))
        a1, l1 = surf.integrals(rs, lo, c, turning=True, width=gap)
        a2, l2 = surf.integrals(rs, hi, c, turning=True, width=(hi - lo) + gap)
        return a1 + a2, l1 + l2

    candidates = [through]
    branches = []
    if hi > lo * (1 + 1e-14):
        u = 1 - np.geomspace(1, 1e-12, n_scan // 2)
        # u = 0 is the radial segment (zero swept angle)
        u = np.unique(np.concatenate([[0.0], np.geomspace(1e-12, 1e-9, 8), u, [1.0]]))
        branches.append((mono, u))
    v = np.concatenate([[0.0], np.geomspace(1e-10, 60, n_scan)])
    branches.append((turn, v))

    for fn, grid in branches:
        vals = np.array([fn(g)[0] for g in grid]) - alpha
        for k in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
            a, b = grid[k], grid[k + 1]
            if vals[k] == 0:
                root = a
            else:
                try:
                    root = brentq(lambda g: fn(g)[0] - alpha, a, b, xtol=1e-16, rtol=1e-15,
                                  maxiter=200)
                except (ValueError, RuntimeError) as exc:
                    raise ConvergenceError(f"Clairaut shooting failed: {exc}") from exc
            candidates.append(fn(root)[1])
    dist = float(min(candidates))
    return _probe(x, y, dist, metric) if return_probe else dist


def _probe(x, y, dist, metric):
    eps = getattr(getattr(metric, "phi", metric), "epsilon", None)
    upper = distance_upper_bound(x, y, eps) if eps is not None else float("nan")
    return GeodesicProbe(x, y, upper, x.r + y.r, dist)


def fast_marching_distance(phi, r1, r2, angle, r_lo=None, r_hi=None, n_x=400, n_a=None):
    """Distance on ``dr^2 + phi^2 d alpha^2`` by fast marching on a grid.

    Solves ``T_x^2 / r^2 + T_alpha^2 / phi^2 = 1`` on a uniform grid in
    ``(x = log r, alpha)`` (alpha periodic) with first/second-order upwind
    updates, starting from ``(r1, 0)``, and interpolates ``T`` at
    ``(r2, angle)``. Independent of the Clairaut integrals; used as an oracle.
    The default radial window is the set of radii a curve no longer than the
    comparison path can reach.
    """
    # a minimizing curve stays within half the length of the comparison
    # path (radial leg, then an arc at the smaller radius) of both endpoints
    lo, hi = min(r1, r2), max(r1, r2)
    reach = (hi - lo + angle * float(phi(lo))) / 2
    if r_lo is None:
        r_lo = 0.9 * (lo - reach) if lo - reach > 0.05 * lo else 0.05 * lo
    if r_hi is None:
        r_hi = 1.1 * (hi + reach)
    x = np.linspace(math.log(r_lo), math.log(r_hi), n_x)
    dx = x[1] - x[0]
    r = np.exp(x)
    f = phi(r)
    if n_a is None:
        # balance the two effective spacings at the source radius
        i1 = np.argmin(np.abs(r - r1))
        n_a = max(int(2 * math.pi * f[i1] / (r[i1] * dx)), n_x // 2)
        n_a += n_a % 2
    da = 2 * math.pi / n_a
    hx = r * dx                      # metric spacing across x at each row
    ha = f * da                      # metric spacing across alpha
    T = np.full((n_x, n_a), np.inf)
    state = np.zeros((n_x, n_a), dtype=np.int8)   # 0 far, 1 trial, 2 known
    heap = []
    xs, as_ = math.log(r1), 0.0
    # exact-to-second-order seeding in a small neighbourhood of the source
    i0 = (xs - x[0]) / dx
    for i in range(max(0, int(i0) - 2), min(n_x, int(i0) + 4)):
        for j in range(-3, 4):
            jj = j % n_a
            rm = math.sqrt(r[i] * r1)
            fm = float(phi(rm))
            d = math.hypot(r[i] - r1, fm * j * da)
            T[i, jj] = d
            state[i, jj] = 1
            heapq.heappush(heap, (d, i, jj))

    def solve(i, j):
        def best(axis):
            cands = []
            if axis == 0:
                for s in (-1, 1):
                    i1 = i + s
                    if 0 <= i1 < n_x and state[i1, j] == 2:
                        i2 = i + 2 * s
                        if 0 <= i2 < n_x and state[i2, j] == 2 and T[i2, j] <= T[i1, j]:
                            cands.append(((4 * T[i1, j] - T[i2, j]) / 3, hx[i] * 2 / 3))
                        else:
                            cands.append((T[i1, j], hx[i]))
            else:
                for s in (-1, 1):
                    j1 = (j + s) % n_a
                    if state[i, j1] == 2:
                        j2 = (j + 2 * s) % n_a
                        if state[i, j2] == 2 and T[i, j2] <= T[i, j1]:
                            cands.append(((4 * T[i, j1] - T[i, j2]) / 3, ha[i] * 2 / 3))
                        else:
                            cands.append((T[i, j1], ha[i]))
            return min(cands) if cands else None

        bx, ba = best(0), best(1)
        if bx is None and ba is None:
            return math.inf
        if bx is None or ba is None:
            t0, h = bx or ba
            return t0 + h
        (t1, h1), (t2, h2) = bx, ba
        # solve ((T-t1)/h1)^2 + ((T-t2)/h2)^2 = 1
        A = 1 / h1**2 + 1 / h2**2
        B = -2 * (t1 / h1**2 + t2 / h2**2)
        C = t1**2 / h1**2 + t2**2 / h2**2 - 1
        disc = B * B - 4 * A * C
        if disc < 0:
            return min(t1 + h1, t2 + h2)
        t = (-B + math.sqrt(disc)) / (2 * A)
        if t < max(t1, t2):
            return min(t1 + h1, t2 + h2)
        return t

    while heap:
        t, i, j = heapq.heappop(heap)
        if state[i, j] == 2 or t > T[i, j]:
            continue
        state[i, j] = 2
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ii, jj = i + di, (j + dj) % n_a
            if not 0 <= ii < n_x or state[ii, jj] == 2:
                continue
            tn = solve(ii, jj)
            if tn < T[ii, jj]:
                T[ii, jj] = tn
                state[ii, jj] = 1
                heapq.heappush(heap, (tn, ii, jj))

    # bilinear interpolation at the target
    fi = (math.log(r2) - x[0]) / dx
    fj = angle / da
    i = min(int(fi), n_x - 2)
    j = int(fj)
    ti, tj = fi - i, fj - j
    j1 = (j + 1) % n_a
    return float((1 - ti) * (1 - tj) * T[i, j % n_a] + ti * (1 - tj) * T[i + 1, j % n_a]
                 + (1 - ti) * tj * T[i, j1] + ti * tj * T[i + 1, j1])
