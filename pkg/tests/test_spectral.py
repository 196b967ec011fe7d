"""Spectral lattice machinery: sums, FFT grids, periodic kernel, error bound."""

import math

import numpy as np
import pytest
from scipy import integrate

from dppstat import models as M
from dppstat import spectral as S
from dppstat.errors import GridTooCoarse, InvalidModel, NonStrictEigenvalue
from dppstat.geometry import Window

W2 = Window.unit(2)
GAUSS = M.gaussian_model(100.0, 0.05)


def build(model=GAUSS, N=64, mode="simulate", method="periodic", window=W2):
    return S.build_lattice(model, window, N, mode, method)


# ---------------------------------------------------------------------------
# construction

def test_zero_intensity_all_zero():
    lat = build(GAUSS.with_(rho=0.0))
    assert lat.phi.max() == 0.0
    assert S.truncated_mass(lat) == 0.0
    assert S.log_det_normalizer(lat) == 0.0


def test_unit_square_periodic_is_identity_map():
    lat = build(N=8)
    k = lat.k_axis
    want = M.spectral_density_radial(GAUSS, np.hypot(k[:, None], k[None, :]))
    assert np.allclose(lat.phi, want, rtol=1e-14)
    assert lat.origin_value == pytest.approx(M.spectral_density(GAUSS, [0.0, 0.0]))


def test_border_map_scales():
    lat = build(method="border", N=8)
    assert np.allclose(lat.box_map.scale, [0.5, 0.5])
    k = lat.k_axis
    want = M.spectral_density_radial(GAUSS, 0.5 * np.hypot(k[:, None], k[None, :]))
    assert np.allclose(lat.phi, want, rtol=1e-14)


def test_rectangle_rescaling_mass():
    win = Window(((0.0, 2.0), (0.0, 0.5)))
    lat = S.build_lattice(GAUSS, win, 128, "simulate", "periodic")
    # S_N tends to rho |R| from below
    assert S.truncated_mass(lat) <= GAUSS.rho * win.volume * (1 + 1e-9)
    assert S.truncated_mass(lat) >= 0.99 * GAUSS.rho * win.volume


def test_invalid_model_rejected():
    with pytest.raises(InvalidModel):
        build(M.gaussian_model(200.0, 0.05))


def test_likelihood_mode_needs_strict_bound():
    at_max = M.gaussian_model(M.rho_max(GAUSS), 0.05)
    build(at_max, mode="simulate")  # fine: phi = 1 allowed for simulation
    with pytest.raises(NonStrictEigenvalue):
        build(at_max, mode="likelihood")


# ---------------------------------------------------------------------------
# sums

def test_truncated_mass_examples():
    lat0 = build(N=0)
    assert S.truncated_mass(lat0) == pytest.approx(M.spectral_density(GAUSS, [0.0, 0.0]))
    assert S.truncated_mass(build(N=32)) <= S.truncated_mass(build(N=64)) + 1e-12
    lat = build(N=64)
    assert abs(S.truncated_mass(lat) - GAUSS.rho) < 0.01 * GAUSS.rho
    lat128 = build(N=128)
    assert S.truncated_mass(lat128) >= 0.999 * GAUSS.rho


def test_log_normalizer_single_eigenvalue():
    lat = build(N=1)
    phi = np.zeros((3, 3))
    phi[1, 1] = 0.5
    custom = S.SpectralLattice(
        model=GAUSS, window=W2, N=1, mode="likelihood", method="periodic",
        phi=phi, box_map=lat.box_map,
    )
    assert S.log_det_normalizer(custom) == pytest.approx(math.log(2.0), abs=1e-15)
    assert custom.ctilde_origin == pytest.approx(1.0)


def test_log_normalizer_vs_quadrature():
    lat = build(N=128, mode="likelihood")
    def f(r):
        p = M.spectral_density_radial(GAUSS, np.array([r]))[0]
        return 2.0 * math.pi * r * math.log1p(p / (1.0 - p))
    want, _ = integrate.quad(f, 0.0, np.inf, limit=400)
    assert S.log_det_normalizer(lat) == pytest.approx(want, rel=1e-6)


def test_normalizer_requires_strict():
    at_max = M.gaussian_model(M.rho_max(GAUSS), 0.05)
    lat = build(at_max, mode="simulate")
    with pytest.raises(NonStrictEigenvalue):
        S.log_det_normalizer(lat)


def test_sum_order_independence():
    lat = build(N=128, mode="likelihood")
    base = S.log_det_normalizer(lat)
    flat = lat.phi.ravel().copy()
    gen = np.random.default_rng(5)
    for _ in range(3):
        gen.shuffle(flat)
        shuffled = -float(np.sum(np.log1p(-flat), dtype=np.longdouble))
        assert abs(shuffled - base) < 1e-12


# ---------------------------------------------------------------------------
# C-tilde evaluations

def test_ctilde_direct_against_naive_complex_sum(rng):
    lat = build(N=8, mode="likelihood")
    k = lat.k_axis
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    for _ in range(20):
        u = rng.uniform(-0.5, 0.5, 2)
        naive = np.sum(lat.phi_tilde * np.exp(2j * np.pi * (K1 * u[0] + K2 * u[1])))
        assert abs(naive.imag) < 1e-10
        assert S.c_tilde_direct(lat, u) == pytest.approx(naive.real, abs=1e-10)


def test_ctilde_symmetry_and_origin(rng):
    lat = build(N=16, mode="likelihood")
    assert S.c_tilde_direct(lat, [0.0, 0.0]) == pytest.approx(lat.ctilde_origin, rel=1e-12)
    for _ in range(10):
        u = rng.uniform(-0.5, 0.5, 2)
        assert S.c_tilde_direct(lat, u) == pytest.approx(S.c_tilde_direct(lat, -u), abs=1e-12)


def test_ctilde_grid_matches_direct(rng):
    lat = build(N=8, mode="likelihood")
    m = 2 * 8 + 1
    grid = S.c_tilde_grid(lat, m)
    for _ in range(100):
        j = rng.integers(0, m, 2)
        u = j / m
        assert grid.lookup(u)[0] == pytest.approx(S.c_tilde_direct(lat, u), abs=1e-10)
    assert grid.values[0, 0] == pytest.approx(lat.ctilde_origin, rel=1e-12)


def test_ctilde_grid_zero_lattice_and_coarse_error():
    latz = build(GAUSS.with_(rho=0.0), N=8, mode="likelihood")
    assert np.all(S.c_tilde_grid(latz, 17).values == 0.0)
    with pytest.raises(GridTooCoarse):
        S.c_tilde_grid(build(N=8, mode="likelihood"), 16)


def test_ctilde_grid_one_dimensional():
    g1 = M.gaussian_model(5.0, 0.05, dim=1)
    lat = S.build_lattice(g1, Window(((0.0, 1.0),)), 16, "likelihood", "periodic")
    grid = S.c_tilde_grid(lat, 40)
    for j in range(40):
        assert grid.lookup(np.array([[j / 40]]))[0] == pytest.approx(
            S.c_tilde_direct(lat, [j / 40]), abs=1e-10
        )


# ---------------------------------------------------------------------------
# periodic kernel

def test_periodic_kernel_diagonal_and_periodicity(rng):
    lat = build(N=32)
    x = rng.uniform(-0.5, 0.5, 2)
    assert S.periodic_kernel(lat, x, x) == pytest.approx(S.truncated_mass(lat), rel=1e-12)
    y = rng.uniform(-0.5, 0.5, 2)
    shifted = S.periodic_kernel(lat, x + np.array([1.0, 0.0]), y)
    assert shifted == pytest.approx(S.periodic_kernel(lat, x, y), abs=1e-12)


def test_periodic_kernel_circular_exactness():
    """Finite-range circular kernel: the series is exact; at N=256 the
    truncated tail still leaves ~5e-5 relative error away from the diagonal
    (phi decays like |k|^-3, so the spec's 1e-6 needs astronomically large N)."""
    circ = M.circular_model(130.0, 0.09)
    lat = S.build_lattice(circ, W2, 256, "simulate", "border")
    gen = np.random.default_rng(4)
    scale = 4.0 * circ.rho  # C_Y(0) = |det A|^-1 rho = 4 rho
    worst = 0.0
    for _ in range(40):
        x = gen.uniform(-0.25, 0.25, 2)
        y = gen.uniform(-0.25, 0.25, 2)
        exact = 4.0 * M.kernel_value(circ, 2.0 * (x - y))
        worst = max(worst, abs(S.periodic_kernel(lat, x, y) - exact) / scale)
    assert worst < 1e-4
    # diagonal error equals the truncated tail mass
    tail = 4.0 * circ.rho - S.truncated_mass(lat)
    diag_err = abs(S.periodic_kernel(lat, np.zeros(2), np.zeros(2)) - 4.0 * circ.rho)
    assert diag_err == pytest.approx(tail, rel=1e-9)


def test_lattice_pcf_close_to_closed_form():
    # range-of-correlation 0.05 configurations; approximate pcf from the lattice
    configs = [
        M.gaussian_model(100.0, 0.05 / math.sqrt(math.log(10.0))),
        M.whittle_matern_model(100.0, 0.05 / math.sqrt(8.0 * 0.5), 0.5),
        M.cauchy_model(100.0, 0.05 / math.sqrt(0.1 ** (-1.0 / 2.0) - 1.0), 1.0),
    ]
    # r = 0 excluded: there the lattice ratio reads the truncated-mass deficit
    # 1 - (S_N/rho)^2 while the true curve hits its g(x,x) = 0 convention point
    r = np.linspace(0.0, 0.2, 81)[1:]
    for m in configs:
        assert M.validate(m).ok
        lat = S.build_lattice(m, W2, 128, "simulate", "periodic")
        approx = np.array(
            [1.0 - (S.periodic_kernel(lat, np.array([rr, 0.0]), np.zeros(2)) / m.rho) ** 2
             for rr in r]
        )
        exact = M.pcf(m, r)
        assert np.abs(approx - exact).max() < 0.01


def test_lattice_dump(tmp_path):
    lat = build(N=2)
    path = tmp_path / "lat.csv"
    lat.dump_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "k1,k2,phi"
    assert len(rows) == 1 + 25
    k1, k2, phi = rows[1].split(",")
    assert (int(k1), int(k2)) == (-2, -2)
    assert float(phi) == pytest.approx(lat.phi[0, 0])


# ---------------------------------------------------------------------------
# Whittle-Matern error bound

def test_wm_error_bound_equality_case_d1():
    from helpers_wm import measured_wm_error_1d

    rho, alpha = 2.0, 0.2
    assert rho <= M.rho_max(M.whittle_matern_model(rho, alpha, 0.5, dim=1))
    bound = S.wm_error_bound(rho, 0.5, alpha, 1)
    measured = measured_wm_error_1d(rho, alpha)
    assert measured == pytest.approx(bound, rel=0.01)


def test_wm_error_bound_vanishes_with_alpha():
    vals = [S.wm_error_bound(50.0, 1.0, a, 2) for a in (0.05, 0.02, 0.008, 0.003)]
    assert all(v >= 0 for v in vals)
    assert vals[0] > vals[1] > vals[2] > vals[3]
    assert vals[-1] < 1e-40


def test_wm_error_bound_dominates_measured_d2():
    from helpers_wm import measured_wm_error_2d

    # light version of the acceptance sweep: 3 configurations
    for rho_frac, nu, alpha in ((0.8, 0.5, 0.05), (0.5, 1.0, 0.04), (0.9, 0.3, 0.06)):
        rho = rho_frac * M.rho_max(M.whittle_matern_model(1.0, alpha, nu))
        measured = measured_wm_error_2d(rho, nu, alpha)
        assert measured <= S.wm_error_bound(rho, nu, alpha, 2) * (1.0 + 1e-6)


