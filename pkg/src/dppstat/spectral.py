"""Fourier-lattice machinery: truncated spectral sums, the periodic kernel
approximation, FFT grid evaluation of C-tilde, and the Whittle-Matern
approximation error bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft as sfft

from .errors import GridTooCoarse, InvalidModel, NonStrictEigenvalue
from .geometry import AffineBoxMap, Window
from .models import KernelModel, spectral_density_radial, validate

# radius grids reused across repeated builds with the same shape/scale
_RADIUS_CACHE: dict = {}
_RADIUS_CACHE_MAX = 8


def _stable_sum(a) -> float:
    """Order-insensitive lattice sum (extended-precision accumulation)."""
    return float(np.sum(a, dtype=np.longdouble))


def _k_radii(N: int, dim: int, scale: tuple) -> np.ndarray:
    key = (N, dim, scale)
    hit = _RADIUS_CACHE.get(key)
    if hit is not None:
        return hit
    k = np.arange(-N, N + 1, dtype=float)
    if dim == 1:
        r = np.abs(k * scale[0])
    else:
        r = np.sqrt((k * scale[0])[:, None] ** 2 + (k * scale[1])[None, :] ** 2)
    if len(_RADIUS_CACHE) >= _RADIUS_CACHE_MAX:
        _RADIUS_CACHE.pop(next(iter(_RADIUS_CACHE)))
    _RADIUS_CACHE[key] = r
    return r


@dataclass
class SpectralLattice:
    """Truncated grid of spectral-density values phi_Y(k), k in Z_N^d.

    Immutable after construction (cached derived quantities assume so).
    phi_Y(x) = phi(A^T x) where T(x) = A(x - b) maps the window onto
    S = [-1/2,1/2]^d (periodic method) or S/2 (border method).
    """

    model: KernelModel
    window: Window
    N: int
    mode: str  # "simulate" | "likelihood"
    method: str  # "periodic" | "border"
    phi: np.ndarray = field(repr=False)
    box_map: AffineBoxMap = field(repr=False)

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def k_axis(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    @property
    def origin_value(self) -> float:
        idx = (self.N,) * self.dim
        return float(self.phi[idx])

    @cached_property
    def phi_tilde(self) -> np.ndarray:
        if self.phi.max() >= 1.0:
            raise NonStrictEigenvalue(
                "some phi(k) = 1; the transformed kernel needs phi < 1 strictly"
            )
        return self.phi / (1.0 - self.phi)

    @cached_property
    def mass(self) -> float:
        return _stable_sum(self.phi)

    @cached_property
    def log_normalizer(self) -> float:
        if self.phi.max() >= 1.0:
            raise NonStrictEigenvalue(
                "some phi(k) = 1; D_N requires phi < 1 strictly"
            )
        return -_stable_sum(np.log1p(-self.phi))

    @cached_property
    def ctilde_origin(self) -> float:
        return _stable_sum(self.phi_tilde)

    @cached_property
    def bernoulli_tables(self) -> tuple:
        """(k_sorted, lam_sorted, cumulative law of M) for the inversion method.

        Eigenvalues sorted decreasingly (ties broken lexicographically by k);
        a sentinel lambda_0 = 1 occupies slot 0 so the count variable M of the
        inversion method is always well defined.
        """
        lam = self.phi.ravel()
        if self.dim == 1:
            kvecs = self.k_axis.reshape(-1, 1)
        else:
            k1, k2 = np.meshgrid(self.k_axis, self.k_axis, indexing="ij")
            kvecs = np.column_stack([k1.ravel(), k2.ravel()])
        keys = [kvecs[:, j] for j in range(kvecs.shape[1] - 1, -1, -1)]
        order = np.lexsort(keys + [-lam])
        lam_sorted = lam[order]
        k_sorted = kvecs[order]

        lam_ext = np.concatenate([[1.0], lam_sorted])
        with np.errstate(divide="ignore"):
            log1m = np.log1p(-lam_ext)  # -inf where lambda = 1
            suffix = np.concatenate([np.cumsum(log1m[::-1])[::-1][1:], [0.0]])
            logp = np.log(lam_ext) + suffix
        with np.errstate(invalid="ignore"):
            p = np.exp(logp)
        p[~np.isfinite(p)] = 0.0
        q = np.cumsum(p)
        if q[-1] > 0:
            q = q / q[-1]  # normalize tiny accumulation slack
        return k_sorted, lam_sorted, q

    def dump_csv(self, path) -> None:
        with open(path, "w") as fh:
            cols = ",".join(f"k{j+1}" for j in range(self.dim))
            fh.write(cols + ",phi\n")
            axis = self.k_axis
            if self.dim == 1:
                for k, v in zip(axis, self.phi):
                    fh.write(f"{k},{float(v)!r}\n")
            else:
                for i, k1 in enumerate(axis):
                    for j, k2 in enumerate(axis):
                        fh.write(f"{k1},{k2},{float(self.phi[i, j])!r}\n")


def build_lattice(
    model: KernelModel,
    window: Window,
    N: int,
    mode: str = "simulate",
    method: str = "periodic",
) -> SpectralLattice:
    """Evaluate phi_Y on Z_N^d for the window rescaled to S (or S/2 for border)."""
    if mode not in ("simulate", "likelihood"):
        raise ValueError("mode must be 'simulate' or 'likelihood'")
    if method not in ("periodic", "border"):
        raise ValueError("method must be 'periodic' or 'border'")
    if N < 0:
        raise ValueError("N must be >= 0")
    report = validate(model, strict=(mode == "likelihood"))
    if not report.ok:
        for v in report.violations:
            if v.name == "rho" and "strictly" in v.message:
                raise NonStrictEigenvalue(v.message)
        raise InvalidModel("; ".join(v.message for v in report.violations))
    if window.dim != model.dim:
        raise InvalidModel("window dimension does not match model dimension")

    box_map = window.to_box(half=(method == "border"))
    scale = tuple(float(s) for s in box_map.scale)
    radii = _k_radii(N, window.dim, scale)
    phi = spectral_density_radial(model, radii)
    # clip float noise; genuine violations were caught by validate above
    phi = np.clip(phi, 0.0, None)
    top = phi.max(initial=0.0)
    if mode == "likelihood" and top >= 1.0:
        raise NonStrictEigenvalue(f"max phi(k) = {top} >= 1")
    if top > 1.0:
        if top > 1.0 + 1e-9:
            raise InvalidModel(f"spectral density exceeds 1 (max {top})")
        phi = np.minimum(phi, 1.0)
    return SpectralLattice(
        model=model, window=window, N=N, mode=mode, method=method,
        phi=phi, box_map=box_map,
    )


def truncated_mass(lattice: SpectralLattice) -> float:
    """S_N = sum of phi over Z_N^d; tends to the rescaled intensity from below."""
    return lattice.mass


def log_det_normalizer(lattice: SpectralLattice) -> float:
    """D_N = sum log(1 + phi_tilde(k)) = -sum log(1 - phi(k)) >= 0."""
    return lattice.log_normalizer


def _lattice_quadform(values: np.ndarray, u: np.ndarray, k_axis: np.ndarray) -> float:
    """sum_k values[k] e^{2 pi i k.u}, real by evenness (cosine reduction)."""
    two_pi = 2.0 * math.pi
    if values.ndim == 1:
        return float(values @ np.cos(two_pi * k_axis * u[0]))
    a1 = two_pi * k_axis * u[0]
    a2 = two_pi * k_axis * u[1]
    c1, s1 = np.cos(a1), np.sin(a1)
    c2, s2 = np.cos(a2), np.sin(a2)
    vc2 = values @ c2
    vs2 = values @ s2
    return float(c1 @ vc2 - s1 @ vs2)


def c_tilde_direct(lattice: SpectralLattice, u) -> float:
    """C~_N(u) = sum phi_tilde(k) e^{2 pi i k.u}, via the even-symmetry reduction."""
    u = np.asarray(u, dtype=float).reshape(lattice.dim)
    return _lattice_quadform(lattice.phi_tilde, u, lattice.k_axis.astype(float))


def periodic_kernel(lattice: SpectralLattice, x, y) -> float:
    """Truncated periodic kernel C^per_app(x, y) = sum phi(k) e^{2 pi i k.(x-y)}."""
    x = np.asarray(x, dtype=float).reshape(lattice.dim)
    y = np.asarray(y, dtype=float).reshape(lattice.dim)
    return _lattice_quadform(lattice.phi, x - y, lattice.k_axis.astype(float))


@dataclass
class CtildeGrid:
    """C~_N evaluated on the regular m^d grid j/m, with nearest-node lookup."""

    values: np.ndarray
    m: int
    N: int

    def lookup(self, u) -> np.ndarray:
        """C~_N at the grid node nearest to each u (u in box coordinates)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        idx = np.rint(u * self.m).astype(np.int64) % self.m
        if self.values.ndim == 1:
            return self.values[idx[:, 0]]
        return self.values[idx[:, 0], idx[:, 1]]


def c_tilde_grid(lattice: SpectralLattice, m: int | None = None) -> CtildeGrid:
    """FFT evaluation of C~_N on the m^d lattice {j/m}; needs m >= 2N+1."""
    side = 2 * lattice.N + 1
    if m is None:
        m = side
    if m < side:
        raise GridTooCoarse(f"m = {m} < 2N+1 = {side}")
    vals = _fourier_grid_sum(lattice.phi_tilde, lattice.k_axis, m)
    return CtildeGrid(values=vals, m=m, N=lattice.N)


def _fourier_grid_sum(coeffs: np.ndarray, k_axis: np.ndarray, m: int) -> np.ndarray:
    """G[j] = sum_k coeffs[k] e^{2 pi i k.j/m} for real even coeffs.

    The output is real and even, so a real FFT over the last axis suffices;
    the missing half is restored by mirroring.
    """
    idx = np.asarray(k_axis) % m
    if coeffs.ndim == 1:
        work = np.zeros(m)
        work[idx] = coeffs
        half = sfft.rfft(work).real
        out = np.empty(m)
        out[: len(half)] = half
        out[len(half):] = half[1: m - len(half) + 1][::-1]
        return out
    work = np.zeros((m, m))
    work[np.ix_(idx, idx)] = coeffs
    half = sfft.rfft2(work, workers=-1).real  # (m, m//2+1)
    out = np.empty((m, m))
    h = half.shape[1]
    out[:, :h] = half
    # G[j1, j2] = G[(m-j1) % m, m-j2] for the mirrored right half
    rows = (-np.arange(m)) % m
    out[:, h:] = half[rows][:, 1: m - h + 1][:, ::-1]
    return out


def wm_error_bound(rho: float, nu: float, alpha: float, d: int) -> float:
    """Integrated-squared-error bound for the Whittle-Matern Fourier approximation.

    Bound c(rho,nu,alpha,d) * eps(nu,alpha,d) on
    int_S |C0 - C_app,0|^2; an equality for d = 1, nu = 1/2.
    """
    if d not in (1, 2):
        raise ValueError("d must be 1 or 2")
    if not (rho >= 0 and nu > 0 and alpha > 0):
        raise ValueError("need rho >= 0, nu > 0, alpha > 0")
    gam = math.gamma(1.0 + 2.0 * nu) ** (1.0 / (2.0 * nu))
    beta = 1.0 / (alpha * math.sqrt(d) * max(gam, 1.0))
    if nu <= 0.5:
        c = (4.0 * alpha) ** (1.0 - 2.0 * nu) * rho**2 * math.pi * d / math.gamma(nu) ** 2
    else:
        c = 4.0 * nu**2 * rho**2 * d
    eb = math.exp(-beta)
    if d == 1:
        eps = eb / beta + (2.0 * eb / (1.0 - eb)) * (eb / beta + 1.0 / (1.0 - eb) - 1.0)
    else:
        first = eb * (1.0 / beta + 2.0 / (1.0 - eb) ** 2 - 0.5)
        second = 1.0 / beta + (2.0 * eb / (1.0 - eb)) * (1.0 / beta + 1.0 / (1.0 - eb))
        eps = first * second ** (d - 1)
    return c * eps
