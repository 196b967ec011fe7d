"""Modified Bessel function of the second kind, implemented in-repo.

Small arguments (x <= 2) use Temme's series for the order reduced to
mu in [-1/2, 1/2]; large arguments use Steed's continued fraction.  The
target order is then reached by upward recurrence, which is stable for K.
A power-of-two exponent is carried through the recurrence so that large
orders at small arguments do not overflow before the caller combines
K_nu with its usual normalizing factors; `log_bessel_k` exposes that
scaled result directly.
"""

from __future__ import annotations

import math

import numpy as np

_EULER_GAMMA = 0.5772156649015328606
_EPS = 1.0e-16
_MAXIT = 400
# renormalization threshold for the scaled recurrence
_BIG = 2.0**512
_BIG_EXP = 512


def _reciprocal_gamma_pair(mu):
    """(1/Gamma(1+mu), 1/Gamma(1-mu)) elementwise via the stdlib gamma."""
    flat = np.atleast_1d(mu).ravel()
    rp = np.empty(flat.shape)
    rm = np.empty(flat.shape)
    for i, m in enumerate(flat):
        rp[i] = 1.0 / math.gamma(1.0 + m)
        rm[i] = 1.0 / math.gamma(1.0 - m)
    return rp.reshape(np.shape(mu)), rm.reshape(np.shape(mu))


def _temme_pair(mu, x):
    """(K_mu(x), K_{mu+1}(x)) for |mu| <= 1/2 and 0 < x <= 2 (Temme's series)."""
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    mu2 = mu * mu

    half_x = 0.5 * x
    pimu = math.pi * mu
    fact = np.where(np.abs(pimu) < 1e-30, 1.0, pimu / np.sin(np.where(pimu == 0, 1.0, pimu)))
    d_log = -np.log(half_x)
    e = mu * d_log
    fact2 = np.where(np.abs(e) < 1e-30, 1.0, np.sinh(e) / np.where(e == 0, 1.0, e))

    rgp, rgm = _reciprocal_gamma_pair(mu)
    # gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu); limit -EulerGamma as mu -> 0
    small = np.abs(mu) < 1e-7
    denom = np.where(small, 1.0, 2.0 * mu)
    gam1 = np.where(small, -_EULER_GAMMA, (rgm - rgp) / denom)
    gam2 = 0.5 * (rgm + rgp)

    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d_log)
    ksum = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / rgp  # = Gamma(1+mu) e^e / 2
    q = 0.5 / (ee * rgm)
    c = np.ones_like(ff)
    d = half_x * half_x
    ksum1 = p.copy()

    active = np.ones(ff.shape, dtype=bool)
    for i in range(1, _MAXIT + 1):
        ff = (i * ff + p + q) / (i * i - mu2)
        c = c * d / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        ksum = np.where(active, ksum + delta, ksum)
        delta1 = c * (p - i * ff)
        ksum1 = np.where(active, ksum1 + delta1, ksum1)
        active = active & (np.abs(delta) > np.abs(ksum) * _EPS)
        if not active.any():
            break

    k0 = ksum
    k1 = ksum1 * (2.0 / x)
    return k0, k1


def _steed_pair(mu, x):
    """(e^x K_mu(x), e^x K_{mu+1}(x)) for |mu| <= 1/2 and x > 2 (Steed's CF2)."""
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    mu2 = mu * mu

    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(b)
    q2 = np.ones_like(b)
    a1 = 0.25 - mu2
    q = a1.copy()
    c = a1.copy()
    a = -a1.copy()
    s = 1.0 + q * delh

    active = np.ones(np.broadcast(mu, x).shape, dtype=bool)
    for i in range(2, _MAXIT + 1):
        a = a - 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = np.where(active, h + delh, h)
        dels = q * delh
        s = np.where(active, s + dels, s)
        active = active & (np.abs(dels) > np.abs(s) * _EPS)
        if not active.any():
            break

    h = a1 * h
    # scaled by e^x to dodge underflow at large x
    k0 = np.sqrt(np.pi / (2.0 * x)) / s
    k1 = k0 * (mu + x + 0.5 - h) / x
    return k0, k1


def _k_pair_scaled(mu, x):
    """(K_mu, K_{mu+1}, log_scale) with true value = pair * exp(log_scale)."""
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    shape = np.broadcast(mu, x).shape
    mu, x = np.broadcast_to(mu, shape).copy(), np.broadcast_to(x, shape).copy()
    k0 = np.empty(shape)
    k1 = np.empty(shape)
    scale = np.zeros(shape)

    lo = x <= 2.0
    if lo.any():
        a, b = _temme_pair(mu[lo], x[lo])
        k0[lo] = a
        k1[lo] = b
    if (~lo).any():
        a, b = _steed_pair(mu[~lo], x[~lo])
        k0[~lo] = a
        k1[~lo] = b
        scale[~lo] = -x[~lo]
    return k0, k1, scale


def _k_recur_scaled(nu, x):
    """(K_nu(x) mantissa, exponent e) with K_nu = mantissa * 2**e_2 * exp(e_ln).

    Returns (mantissa, pow2_exponent, log_scale).
    """
    nu = np.abs(np.asarray(nu, dtype=float))
    x = np.asarray(x, dtype=float)
    shape = np.broadcast(nu, x).shape
    nu = np.broadcast_to(nu, shape).astype(float).copy()
    x = np.broadcast_to(x, shape).astype(float).copy()

    n = np.floor(nu + 0.5).astype(int)
    mu = nu - n  # in [-1/2, 1/2)
    kmu, kmu1, log_scale = _k_pair_scaled(mu, x)

    pow2 = np.zeros(shape)
    steps = int(n.max()) if n.size else 0
    order = mu.copy()
    for j in range(steps):
        todo = n > j
        if not todo.any():
            break
        knext = np.where(todo, kmu + 2.0 * (order + 1.0) / x * kmu1, kmu1)
        kmu = np.where(todo, kmu1, kmu)
        kmu1 = knext
        order = np.where(todo, order + 1.0, order)
        big = todo & (np.abs(kmu1) > _BIG)
        if big.any():
            kmu = np.where(big, kmu / _BIG, kmu)
            kmu1 = np.where(big, kmu1 / _BIG, kmu1)
            pow2 = np.where(big, pow2 + _BIG_EXP, pow2)
    return kmu, pow2, log_scale


def bessel_k(nu, x):
    """Modified Bessel function of the second kind K_nu(x).

    Vectorized over both arguments; raises ValueError for x <= 0.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0) or np.any(~np.isfinite(x_arr)):
        raise ValueError("bessel_k requires x > 0")
    mant, pow2, log_scale = _k_recur_scaled(nu, x_arr)
    with np.errstate(over="ignore"):  # true overflow of K itself -> inf
        out = mant * np.exp(log_scale + pow2 * math.log(2.0))
    if np.isscalar(x) and np.isscalar(nu):
        return float(out)
    return out


def log_bessel_k(nu, x):
    """log K_nu(x), overflow-safe for large orders at small arguments."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0):
        raise ValueError("log_bessel_k requires x > 0")
    mant, pow2, log_scale = _k_recur_scaled(nu, x_arr)
    out = np.log(mant) + log_scale + pow2 * math.log(2.0)
    if np.isscalar(x) and np.isscalar(nu):
        return float(out)
    return out


def matern_correlation(nu, t):
    """Normalized Matern correlation 2^(1-nu) t^nu K_nu(t) / Gamma(nu), R(0)=1.

    Evaluated in log space so large orders (e.g. nu = 200) stay finite.
    """
    t = np.asarray(t, dtype=float)
    out = np.ones(t.shape if t.shape else (1,))
    pos = t > 0.0
    if pos.any():
        tp = t[pos]
        logval = (
            (1.0 - nu) * math.log(2.0)
            - math.lgamma(nu)
            + nu * np.log(tp)
            + log_bessel_k(nu, tp)
        )
        out[pos] = np.exp(logval)
    if t.shape == ():
        return float(out[0])
    return out
