"""Exact simulation on a rectangle: periodic vs border method.

Simulates a moderately repulsive Gaussian DPP, the most repulsive
(jinc-like) DPP at the same intensity, and a Poisson reference, then
compares empirical L(r) - r curves against theory.

    python demos/02_simulate_patterns.py
"""

import math
import time
from pathlib import Path

import numpy as np

import dppstat as dpp

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

window = dpp.Window.unit(2)
rho = 100.0
gauss = dpp.gaussian_model(rho, 0.05)
jinc = dpp.most_repulsive_model(rho)

print("one realization each (seed 7):")
for name, model in [("poisson", dpp.PoissonModel(rho)), ("gaussian", gauss), ("jinc-like", jinc)]:
    pat = dpp.simulate(model, window, rng=7)
    pat.to_csv(OUT / f"pattern_{name.replace('-', '_')}.csv")
    nn = np.inf
    if pat.n > 1:
        from scipy.spatial import cKDTree

        nn = cKDTree(pat.points).query(pat.points, k=2)[0][:, 1].min()
    print(f"  {name:<10} n = {pat.n:>4}   min nearest-neighbour distance = {nn:.4f}")

print("\nthe jinc-like pattern is visibly regular: repulsion pushes the")
print("minimum spacing up at fixed intensity.\n")

# periodic and border methods agree in distribution
grid = np.linspace(0.01, 0.24, 40)
theory = dpp.L_function(gauss, grid) - grid
n_sim = 200
t0 = time.time()
curves = {}
for method in ("periodic", "border"):
    lat = dpp.build_lattice(gauss, window, 64 if method == "periodic" else 128,
                            "simulate", method)
    rows = []
    for child in dpp.sampler.spawn_rngs(11, n_sim):
        pat = dpp.sample_pattern(lat, child)
        rows.append(np.sqrt(dpp.estimate_K(pat, grid).value / math.pi) - grid)
    curves[method] = np.vstack(rows)
    mean = curves[method].mean(axis=0)
    print(f"{method:<9} mean L-r at r=0.1: {mean[np.argmin(abs(grid-0.1))]:+.5f} "
          f"(theory {theory[np.argmin(abs(grid-0.1))]:+.5f})")
print(f"{2 * n_sim} simulations in {time.time() - t0:.1f}s")

gap = np.abs(curves["periodic"].mean(axis=0) - curves["border"].mean(axis=0))
print(f"max gap between the two methods' mean curves: {gap.max():.5f}")
print("(they simulate nearly the same process; periodic costs 1/4 the points)")
