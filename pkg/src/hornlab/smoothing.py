"""Smooth step functions built from ``exp(-1/x^2)`` factors."""

import numpy as np

from . import jets
from .jets import Jet

__all__ = ["smooth_step", "smooth_step_up", "smooth_step_jet", "smooth_step_up_jet"]

# beyond this |log-ratio| the step equals its plateau to double precision
_PLATEAU_EXPONENT = 700.0


def _log_ratio(y):
    # log(phi_left / phi_right) in the unit-interval variable y in (0, 1);
    # subnormal y gives an infinite ratio, which the callers map to the plateau
    with np.errstate(divide="ignore", over="ignore"):
        return 1.0 / (1.0 - y) ** 2 - 1.0 / y**2


def smooth_step(x, a, b):
    """Smooth cut-off equal to 1 for ``x <= a`` and 0 for ``x >= b``.

    Evaluates ``phi_r / (phi_l + phi_r)`` with ``phi_l = exp(-1/y^2)`` and
    ``phi_r = exp(-1/(y-1)^2)`` in the rescaled variable
    ``y = (x - a) / (b - a)``, written as a logistic function of the
    log-ratio so that neither factor underflows.
    """
    if not a < b:
        raise ValueError("smooth_step needs a < b")
    x = np.asarray(x, dtype=float)
    y = (x - a) / (b - a)
    out = np.where(y <= 0.0, 1.0, 0.0)
    inside = (y > 0.0) & (y < 1.0)
    if np.any(inside):
        w = _log_ratio(y[inside])
        # 1 / (1 + e^w) evaluated without overflow
        small = np.exp(-np.abs(w))
        out[inside] = np.where(w > 0, small / (1.0 + small), 1.0 / (1.0 + small))
    return out if out.ndim else float(out)


def smooth_step_up(x, a=0.0, b=1.0):
    """Complementary orientation: 0 for ``x <= a``, 1 for ``x >= b``."""
    return 1.0 - smooth_step(x, a, b)


def smooth_step_jet(xj, a, b):
    """Jet version of :func:`smooth_step` (derivatives to ``xj.order``)."""
    y = (xj - a) / (b - a)
    y0 = y.value
    out = np.zeros_like(y.c)
    out[0] = np.where(y0 <= 0.0, 1.0, 0.0)
    inside = (y0 > 0.0) & (y0 < 1.0)
    if np.any(inside):
        ys = Jet(y.c[:, inside])
        w = 1.0 / ((1.0 - ys) * (1.0 - ys)) - 1.0 / (ys * ys)
        w0 = w.value
        sub = np.zeros_like(ys.c)
        pos = w0 > 0
        mid = np.abs(w0) <= _PLATEAU_EXPONENT
        if np.any(pos & mid):
            f = jets.exp(-Jet(w.c[:, pos & mid]))
            sub[:, pos & mid] = (f / (1.0 + f)).c
        if np.any(~pos & mid):
            e = jets.exp(Jet(w.c[:, ~pos & mid]))
            sub[:, ~pos & mid] = (1.0 / (1.0 + e)).c
        sub[0, ~mid] = np.where(w0[~mid] > 0, 0.0, 1.0)
        out[:, inside] = sub
    return Jet(out)


def smooth_step_up_jet(xj, a=0.0, b=1.0):
    return 1.0 - smooth_step_jet(xj, a, b)
