"""Separable inhomogeneity: bin the intensity, transform, fit a stationary DPP.

Builds a synthetic membrane-style dataset whose intensity decays along the
vertical axis, estimates a piecewise-constant marginal intensity on nine
bins, maps the window onto the square [0, sqrt(n)]^2 with the per-axis
cumulative-intensity transformation, and fits a stationary Gaussian DPP on
the transformed scale.  The composed kernel is then inhomogeneous with a
non-translation-invariant pair correlation.

    python demos/05_inhomogeneous_separable.py
"""

import warnings

import numpy as np

import dppstat as dpp

warnings.simplefilter("ignore")

window = dpp.Window(((0.0, 1.0), (0.0, 0.81)))
rho0 = 900.0
base = dpp.gaussian_model(rho0, 0.85 * dpp.alpha_max("gaussian", rho0))
parent = dpp.simulate(base, window, rng=11, N=96)
gen = np.random.default_rng(4)
data = dpp.thin(parent, lambda p: np.clip(1.15 - 1.1 * p[:, 1], 0.15, 1.0), gen)
print(f"synthetic inhomogeneous pattern: n = {data.n} in a 1.0 x 0.81 window")

fit = dpp.fit_inhomogeneous_separable(
    data, n_bins=9, family="gaussian", homogeneous_axis=0,
    fit_options={"N_start": 256, "auto_N": False},
)
counts = np.round(fit.bin_intensity * np.diff(fit.bin_edges) * np.sqrt(data.n)).astype(int)
print("per-bin counts along the vertical axis:", ", ".join(map(str, counts)))
print(f"fixed horizontal factor rho_1 = sqrt(n)/A = {fit.rho_const:.2f}")
print(f"stationary fit on the transformed square: alpha = "
      f"{fit.stationary_fit.model.alpha:.4f} (intensity one by construction)\n")

x = np.array([0.5, 0.15])
y = np.array([0.5, 0.17])
print(f"composed kernel    C(x, x) = {fit.kernel(x, x):8.2f} = fitted intensity at x")
print(f"pair correlation   g(x, y) = {fit.pair_correlation(x, y):.4f} for |x-y| = 0.02 low in the window")
x2 = np.array([0.5, 0.70])
y2 = np.array([0.5, 0.72])
print(f"                   g(x2,y2) = {fit.pair_correlation(x2, y2):.4f} same offset, sparse region")
print("repulsion reaches farther where the intensity is lower: the pcf is")
print("not a function of y - x alone.")
