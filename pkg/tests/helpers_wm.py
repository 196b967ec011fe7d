"""Shared oracles for the Whittle-Matern Fourier approximation error."""

import math

import numpy as np
from scipy import integrate

from dppstat import models as M


def measured_wm_error_1d(rho, alpha, n_terms=300):
    """Parseval form of int_S |C0 - C_app,0|^2 for nu = 1/2, d = 1.

    phi(k) - a_k = 2 int_{1/2}^inf C0(t) cos(2 pi k t) dt, computed by
    oscillatory-weight quadrature so the oracle does not reuse the closed
    form being verified.  Coefficients decay like k^-2, squares like k^-4.
    """
    upper = 0.5 + 80.0 * alpha

    def coeff(k):
        if k == 0:
            val, _ = integrate.quad(lambda t: rho * math.exp(-t / alpha), 0.5, upper)
        else:
            val, _ = integrate.quad(
                lambda t: rho * math.exp(-t / alpha),
                0.5, upper, weight="cos", wvar=2.0 * math.pi * k, limit=600,
            )
        return 2.0 * val

    total = coeff(0) ** 2
    for k in range(1, n_terms):
        total += 2.0 * coeff(k) ** 2
    return total


def measured_wm_error_2d(rho, nu, alpha, m=2048, kmax=512):
    """Parseval: sum over k of (phi(k) - a_k)^2 with a_k from an FFT of C0 samples."""
    model = M.whittle_matern_model(rho, alpha, nu)
    ax = (np.arange(m) + 0.5) / m - 0.5
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    C = M.kernel_value_radial(model, np.hypot(X, Y))
    F = np.fft.fft2(C) / (m * m)
    # sample offset x_j = -1/2 + (j + 1/2)/m contributes e^{i pi k (1 - 1/m)} per axis
    freqs = np.fft.fftfreq(m, d=1.0 / m)
    shift = np.exp(1j * np.pi * freqs * (1.0 - 1.0 / m))
    a = (F * shift[:, None] * shift[None, :]).real
    ks = freqs.astype(int)
    keep = np.abs(ks) <= kmax
    kk = ks[keep]
    radii = np.hypot(kk[:, None], kk[None, :])
    phi = M.spectral_density_radial(model, radii)
    diff = phi - a[np.ix_(keep, keep)]
    return float(np.sum(diff * diff))
