"""Derivative-free 1-D search used by the likelihood and contrast fitters."""

from __future__ import annotations

import math

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # 1/phi^2


def golden_section(f, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 200):
    """Minimize a unimodal f on [lo, hi] by golden-section search.

    Returns (x_min, f(x_min), n_evals).
    """
    a, b = float(lo), float(hi)
    if not b > a:
        raise ValueError("need hi > lo")
    h = b - a
    c = a + _INVPHI2 * h
    d = a + _INVPHI * h
    fc, fd = f(c), f(d)
    evals = 2
    while h > tol and evals < max_iter:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + _INVPHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INVPHI * h
            fd = f(d)
        evals += 1
    if fc < fd:
        return c, fc, evals
    return d, fd, evals
