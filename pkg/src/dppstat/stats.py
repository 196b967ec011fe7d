"""Nonparametric summaries, minimum-contrast fitting, envelopes, and
simulation-based tests for rectangular-window point patterns."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from ._optimize import golden_section
from .errors import EmptyBin, InvalidModel, MixedMethods, TooFewPoints, UnsupportedFamily
from .geometry import PointPattern, Window, transform_pattern
from .likelihood import FitResult, fit_mle
from .models import (
    CAUCHY,
    GAUSSIAN,
    WHITTLE_MATERN,
    KernelModel,
    K_function,
    alpha_max,
    canonical_family,
    pcf,
    validate,
)
from .sampler import PoissonModel, as_rng, simulate, spawn_rngs, thin_split

DEFAULT_R_POINTS = 512


@dataclass(frozen=True)
class SummaryCurve:
    """A summary statistic tabulated on an ascending grid of distances."""

    r: np.ndarray
    value: np.ndarray
    kind: str  # pcf | K | L | F | G | J

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.value, dtype=float)
        if len(r) != len(v):
            raise ValueError("r and value must align")
        if len(r) and (np.any(np.diff(r) <= 0) or r[0] < 0):
            raise ValueError("r must be strictly increasing and nonnegative")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class EnvelopeBand:
    """Pointwise simulation band: 2.5% / 97.5% quantiles plus the mean."""

    r: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    mean: np.ndarray
    n_sim: int
    kind: str = ""

    def __post_init__(self):
        if np.any(self.lower > self.mean + 1e-12) or np.any(self.mean > self.upper + 1e-12):
            raise ValueError("band must satisfy lower <= mean <= upper")

    def covers(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        return (v >= self.lower) & (v <= self.upper)


def default_r_grid(window: Window, n: int = DEFAULT_R_POINTS) -> np.ndarray:
    """r from 0 to a quarter of the minimal window side (excluding 0)."""
    return np.linspace(0.0, window.min_side / 4.0, n + 1)[1:]


def _translation_weights(diffs: np.ndarray, window: Window) -> np.ndarray:
    """|W intersect W_shifted| / |W| for each pairwise difference."""
    sides = window.sides
    overlap = np.clip(sides - np.abs(diffs), 0.0, None)
    return overlap.prod(axis=-1) / window.volume


def _pair_data(pattern: PointPattern, r_max: float):
    pts = pattern.points
    n = len(pts)
    tree = cKDTree(pts)
    pairs = tree.query_pairs(r_max, output_type="ndarray")
    if len(pairs) == 0:
        return np.empty(0), np.empty(0)
    diffs = pts[pairs[:, 0]] - pts[pairs[:, 1]]
    dists = np.linalg.norm(diffs, axis=1)
    weights = _translation_weights(diffs, pattern.window)
    return dists, weights


def estimate_K(pattern: PointPattern, r_grid=None) -> SummaryCurve:
    """Translation-corrected empirical K function.

    K(r) = (|W| / (n(n-1))) sum_{x != y} 1[|x-y| <= r] / w(x, y) with the
    translation edge-correction weight w.
    """
    if pattern.n < 2:
        raise TooFewPoints("K estimation needs at least 2 points")
    if r_grid is None:
        r_grid = default_r_grid(pattern.window)
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid.max() > pattern.window.min_side / 2.0 + 1e-9:
        raise ValueError("r_max must not exceed half the minimal window side")
    n = pattern.n
    dists, weights = _pair_data(pattern, float(r_grid.max()))
    if len(dists) == 0:
        return SummaryCurve(r_grid, np.zeros_like(r_grid), "K")
    order = np.argsort(dists)
    d_sorted = dists[order]
    # each unordered pair contributes twice to the sum over x != y
    cum = np.concatenate([[0.0], np.cumsum(2.0 / weights[order])])
    idx = np.searchsorted(d_sorted, r_grid, side="right")
    vals = pattern.window.volume / (n * (n - 1)) * cum[idx]
    return SummaryCurve(r_grid, vals, "K")


def estimate_L(pattern: PointPattern, r_grid=None) -> SummaryCurve:
    K = estimate_K(pattern, r_grid)
    return SummaryCurve(K.r, np.sqrt(K.value / math.pi), "L")


def estimate_pcf(pattern: PointPattern, r_grid=None, bandwidth: float | None = None) -> SummaryCurve:
    """Kernel-smoothed translation-corrected pair correlation estimate.

    Epanechnikov kernel; default bandwidth 0.15 / sqrt(rho_hat).  Values near
    r = 0 (within one bandwidth) carry large smoothing bias.
    """
    if pattern.n < 2:
        raise TooFewPoints("pcf estimation needs at least 2 points")
    if r_grid is None:
        r_grid = default_r_grid(pattern.window)
    r_grid = np.asarray(r_grid, dtype=float)
    if bandwidth is None:
        bandwidth = 0.15 / math.sqrt(pattern.intensity)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    n = pattern.n
    d = pattern.dim
    dists, weights = _pair_data(pattern, float(r_grid.max()) + bandwidth)
    vals = np.zeros_like(r_grid)
    if len(dists):
        u = (r_grid[:, None] - dists[None, :]) / bandwidth
        kern = np.clip(0.75 * (1.0 - u * u) / bandwidth, 0.0, None)
        contrib = kern * (2.0 / weights)[None, :]
        sphere = 2.0 * math.pi * r_grid if d == 2 else np.full_like(r_grid, 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = pattern.window.volume / (n * (n - 1)) * contrib.sum(axis=1) / sphere
        vals = np.where(r_grid > 0, vals, 0.0)
    return SummaryCurve(r_grid, vals, "pcf")


def _fg_grid(window: Window, per_axis: int) -> np.ndarray:
    axes = [
        lo + (np.arange(per_axis) + 0.5) * (hi - lo) / per_axis
        for lo, hi in window.bounds
    ]
    if window.dim == 1:
        return axes[0][:, None]
    g1, g2 = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


def estimate_FGJ(pattern: PointPattern, r_grid=None, grid_per_axis: int = 100):
    """Border-corrected empty-space F, nearest-neighbour G, and J = (1-G)/(1-F).

    J is reported where F < 1 and NaN beyond; repulsive patterns show J >= 1
    at small r.
    """
    if pattern.n < 1:
        raise TooFewPoints("F/G estimation needs at least 1 point")
    if pattern.n < 2:
        raise TooFewPoints("G needs at least 2 points (nearest neighbours degenerate)")
    window = pattern.window
    if r_grid is None:
        r_grid = default_r_grid(window)
    r_grid = np.asarray(r_grid, dtype=float)
    tree = cKDTree(pattern.points)

    probes = _fg_grid(window, grid_per_axis)
    d_probe, _ = tree.query(probes, k=1)
    b_probe = window.boundary_distance(probes)
    F = _border_corrected_cdf(d_probe, b_probe, r_grid)

    d_nn, _ = tree.query(pattern.points, k=2)
    d_nn = d_nn[:, 1]
    b_pts = window.boundary_distance(pattern.points)
    G = _border_corrected_cdf(d_nn, b_pts, r_grid)

    with np.errstate(divide="ignore", invalid="ignore"):
        J = np.where(F < 1.0, (1.0 - G) / (1.0 - F), np.nan)
    return (
        SummaryCurve(r_grid, F, "F"),
        SummaryCurve(r_grid, G, "G"),
        SummaryCurve(r_grid, J, "J"),
    )


def _border_corrected_cdf(dist, border, r_grid):
    out = np.empty(len(r_grid))
    for i, r in enumerate(r_grid):
        eligible = border > r
        if not eligible.any():
            out[i] = np.nan
            continue
        out[i] = np.mean(dist[eligible] <= r)
    # reduced-sample estimator can be non-monotone; leave values as computed
    return out


# ---------------------------------------------------------------------------
# minimum contrast

def fit_minimum_contrast(
    family,
    pattern: PointPattern,
    statistic: str = "K",
    q: float = 0.5,
    p: float = 2.0,
    r_l: float | None = None,
    r_u: float | None = None,
    nu: float | None = None,
    gamma: float | None = None,
    bandwidth: float | None = None,
    r_points: int = DEFAULT_R_POINTS,
    empirical_curve=None,
) -> FitResult:
    """Minimum contrast estimate: minimize int_{r_l}^{r_u} |s_hat^q - s(.;theta)^q|^p dr.

    statistic "K" (r_l = 0) or "g" (r_l = 1% of the minimal side); r_u
    defaults to a quarter of the minimal side; trapezoid integration on the
    estimation grid; same derivative-free searches as fit_mle.
    `empirical_curve` (callable on the r grid) substitutes for the
    nonparametric estimate, e.g. to feed a known theoretical curve.
    """
    family = canonical_family(family)
    if pattern.n < 2:
        raise TooFewPoints("minimum contrast needs at least 2 points")
    if statistic not in ("K", "g"):
        raise ValueError("statistic must be 'K' or 'g'")
    closed = {GAUSSIAN, WHITTLE_MATERN, CAUCHY, "circular"}
    if family not in closed - {"circular"}:
        raise UnsupportedFamily(
            f"no closed-form summary curve for {family}; use gaussian/whittlematern/cauchy"
        )
    min_side = pattern.window.min_side
    if r_u is None:
        r_u = min_side / 4.0
    if r_l is None:
        r_l = 0.0 if statistic == "K" else 0.01 * min_side
    rho_hat = pattern.intensity
    grid = np.linspace(0.0, r_u, r_points + 1)[1:]
    grid = grid[grid >= r_l - 1e-12]
    if empirical_curve is not None:
        emp = np.asarray(empirical_curve(grid), dtype=float)
    elif statistic == "K":
        emp = estimate_K(pattern, grid).value
    else:
        emp = estimate_pcf(pattern, grid, bandwidth=bandwidth).value
    emp_q = np.maximum(emp, 0.0) ** q

    nu_free = nu == "free"
    if family == GAUSSIAN:
        nu_val = None
    elif nu_free:
        nu_val = 1.0
    elif nu is None:
        raise ValueError(f"{family} needs nu (a value, or 'free')")
    else:
        nu_val = float(nu)

    evals = 0

    def theoretical(alpha, nu_cur):
        kw = {"alpha": alpha, "dim": pattern.window.dim}
        if family != GAUSSIAN:
            kw["nu"] = nu_cur
        model = KernelModel(family, rho_hat, **kw)
        if statistic == "K":
            return K_function(model, grid, quad_tol=1e-8), model
        return pcf(model, grid), model

    def contrast(log_alpha, log_nu=None):
        nonlocal evals
        evals += 1
        alpha = math.exp(log_alpha)
        nu_cur = math.exp(log_nu) if log_nu is not None else nu_val
        a_cap = alpha_max(family, rho_hat, nu=nu_cur, dim=pattern.window.dim)
        if alpha >= a_cap:
            return 1e12 * (1.0 + alpha / a_cap)
        theo, _ = theoretical(alpha, nu_cur)
        return float(np.trapezoid(np.abs(emp_q - theo**q) ** p, grid))

    a_cap0 = alpha_max(family, rho_hat, nu=nu_val, dim=pattern.window.dim)
    hi = math.log(a_cap0 * 0.999)
    lo = hi - 3.0 * math.log(10.0)
    if not nu_free:
        x, fx, _ = golden_section(contrast, lo, hi, tol=5e-4)
        alpha_hat, nu_hat = math.exp(x), nu_val
        obj, ok = fx, True
    else:
        res = minimize(
            lambda v: contrast(v[0], v[1]),
            np.array([0.5 * (lo + hi), 0.0]),
            method="Nelder-Mead",
            options={"maxiter": 200, "xatol": 5e-4, "fatol": 1e-10},
        )
        alpha_hat, nu_hat = math.exp(res.x[0]), math.exp(res.x[1])
        obj, ok = float(res.fun), bool(res.success)

    kw = {"alpha": alpha_hat, "dim": pattern.window.dim}
    if family != GAUSSIAN:
        kw["nu"] = nu_hat
    model = KernelModel(family, rho_hat, **kw)
    return FitResult(
        model=model,
        objective=obj,
        method=f"mce_{statistic}",
        N_used=None,
        iterations=evals,
        converged=ok,
        rho_source="empirical",
        n_free=1 + int(nu_free),
        pattern=pattern,
    )


# ---------------------------------------------------------------------------
# envelopes and simulation tests

_STAT_FUNS = {
    "K": lambda pat, grid: estimate_K(pat, grid).value,
    "L": lambda pat, grid: np.sqrt(estimate_K(pat, grid).value / math.pi),
    "L-r": lambda pat, grid: np.sqrt(estimate_K(pat, grid).value / math.pi) - grid,
    "pcf": lambda pat, grid: estimate_pcf(pat, grid).value,
    "F": lambda pat, grid: estimate_FGJ(pat, grid)[0].value,
    "G": lambda pat, grid: estimate_FGJ(pat, grid)[1].value,
    "J": lambda pat, grid: estimate_FGJ(pat, grid)[2].value,
}


def envelopes(
    model,
    kind: str,
    window: Window,
    rng,
    n_sim: int = 400,
    r_grid=None,
    method: str = "periodic",
    N: int = 64,
    min_points: int = 2,
) -> EnvelopeBand:
    """Pointwise 2.5%/97.5% simulation envelopes of a summary statistic.

    Deterministic given the seed; replicates with too few points for the
    estimator are resimulated with fresh child streams (counted, warned
    beyond 5%).
    """
    if kind not in _STAT_FUNS:
        raise ValueError(f"kind must be one of {sorted(_STAT_FUNS)}")
    if n_sim < 2:
        raise ValueError("n_sim must be >= 2")
    if not isinstance(model, PoissonModel):
        validate(model).raise_if_invalid()
    if r_grid is None:
        r_grid = default_r_grid(window, 128)
    r_grid = np.asarray(r_grid, dtype=float)
    fun = _STAT_FUNS[kind]
    rngs = spawn_rngs(rng, 2 * n_sim)  # spares for degenerate replicates
    rows = []
    dropped = 0
    idx = 0
    while len(rows) < n_sim and idx < len(rngs):
        pat = simulate(model, window, rngs[idx], method=method, N=N)
        idx += 1
        if pat.n < min_points:
            dropped += 1
            continue
        rows.append(fun(pat, r_grid))
    if len(rows) < n_sim:
        raise InvalidModel("too many degenerate replicates to build envelopes")
    if dropped > 0.05 * n_sim:
        warnings.warn(f"{dropped} degenerate replicates resimulated", UserWarning)
    mat = np.vstack(rows)
    return EnvelopeBand(
        r=r_grid,
        lower=np.nanquantile(mat, 0.025, axis=0),
        upper=np.nanquantile(mat, 0.975, axis=0),
        mean=np.nanmean(mat, axis=0),
        n_sim=n_sim,
        kind=kind,
    )


@dataclass
class TestResult:
    statistic: str
    observed: float
    p_value: float
    n_sim: int
    n_dropped: int
    seed: object

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "observed": self.observed,
            "p_value": self.p_value,
            "n_sim": self.n_sim,
            "n_dropped": self.n_dropped,
            "seed": self.seed if isinstance(self.seed, (int, str, type(None))) else str(self.seed),
        }


def lr_test(
    null_family,
    alt_family,
    pattern: PointPattern,
    rng,
    n_sim: int = 400,
    fit_options: dict | None = None,
    null_options: dict | None = None,
    alt_options: dict | None = None,
    sim_N: int = 64,
) -> TestResult:
    """Simulation-based likelihood-ratio test of a nested null family.

    D = -2 log Q = 2 (l_alt - l_null); the null is fitted to the data, n_sim
    patterns are simulated from the fitted null, both models are refitted per
    replicate, and p is the proportion of simulated D >= observed D.
    """
    if n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    base = dict(fit_options or {})
    n_opts = {**base, **(null_options or {})}
    a_opts = {**base, **(alt_options or {})}
    null_fit = fit_mle(null_family, pattern, **n_opts)
    alt_fit = fit_mle(alt_family, pattern, **a_opts)
    d_obs = 2.0 * (alt_fit.objective - null_fit.objective)

    rngs = spawn_rngs(rng, n_sim)
    d_sim = []
    dropped = 0
    for child in rngs:
        try:
            sim_pat = simulate(null_fit.model, pattern.window, child, N=sim_N)
            if sim_pat.n < 2:
                raise TooFewPoints("degenerate replicate")
            nf = fit_mle(null_family, sim_pat, **n_opts)
            af = fit_mle(alt_family, sim_pat, **a_opts)
            d_sim.append(2.0 * (af.objective - nf.objective))
        except Exception:
            dropped += 1
    if dropped > 0.05 * n_sim:
        warnings.warn(f"{dropped}/{n_sim} replicates dropped in lr_test", UserWarning)
    if not d_sim:
        raise InvalidModel("all lr_test replicates failed")
    p = float(np.mean(np.asarray(d_sim) >= d_obs))
    return TestResult("lr", float(d_obs), p, len(d_sim), dropped, _seed_of(rng))


def random_labelling_test(
    pattern: PointPattern,
    family,
    rng,
    n_sim: int = 400,
    fit_options: dict | None = None,
    sim_N: int = 64,
) -> TestResult:
    """Thinning-characterization test of random labelling for a 2-mark pattern.

    Pi = |a_hat - a_hat_1| * |a_hat - a_hat_2| compared against its simulated
    null distribution: simulate the fitted full model, thin with retention
    rho1/rho, refit all three scales.
    """
    if pattern.marks is None:
        raise ValueError("random labelling test needs a marked pattern")
    groups = pattern.split_by_mark()
    if len(groups) != 2:
        raise ValueError("exactly two mark levels required")
    sub1, sub2 = groups.values()
    if min(sub1.n, sub2.n) < 10:
        raise TooFewPoints("each mark class needs at least 10 points")
    opts = dict(fit_options or {})

    unmarked = PointPattern(pattern.points, pattern.window, check=False)
    full = fit_mle(family, unmarked, **opts)
    f1 = fit_mle(family, sub1, **opts)
    f2 = fit_mle(family, sub2, **opts)
    observed = abs(full.model.alpha - f1.model.alpha) * abs(full.model.alpha - f2.model.alpha)
    retention = sub1.n / pattern.n

    rngs = spawn_rngs(rng, n_sim)
    pis = []
    dropped = 0
    for child in rngs:
        try:
            sim_pat = simulate(full.model, pattern.window, child, N=sim_N)
            kept, removed = thin_split(sim_pat, retention, child)
            if min(kept.n, removed.n) < 10:
                raise TooFewPoints("degenerate thinning")
            a = fit_mle(family, sim_pat, **opts).model.alpha
            a1 = fit_mle(family, kept, **opts).model.alpha
            a2 = fit_mle(family, removed, **opts).model.alpha
            pis.append(abs(a - a1) * abs(a - a2))
        except Exception:
            dropped += 1
    if dropped > 0.05 * n_sim:
        warnings.warn(f"{dropped}/{n_sim} replicates dropped", UserWarning)
    if not pis:
        raise InvalidModel("all random-labelling replicates failed")
    p = float(np.mean(np.asarray(pis) >= observed))
    return TestResult("random_labelling", float(observed), p, len(pis), dropped, _seed_of(rng))


def _seed_of(rng):
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    seed = getattr(rng, "seed", None)
    return seed if isinstance(seed, (int, np.integer)) else None


# ---------------------------------------------------------------------------
# separable inhomogeneous workflow

@dataclass
class SeparableFit:
    """Separable-intensity fit: bin intensities, transformed-scale fit, kernel."""

    bin_edges: np.ndarray
    bin_intensity: np.ndarray
    rho_const: float
    homogeneous_axis: int
    transformed: PointPattern
    stationary_fit: FitResult
    pattern: PointPattern = field(repr=False, default=None)

    def intensity(self, points) -> np.ndarray:
        """Fitted separable intensity rho(x) = rho_1 * rho_2(x_inhom)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        other = 1 - self.homogeneous_axis
        idx = np.clip(
            np.searchsorted(self.bin_edges, pts[:, other], side="right") - 1,
            0,
            len(self.bin_intensity) - 1,
        )
        return self.rho_const * self.bin_intensity[idx]

    def forward_map(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty_like(pts)
        hom = self.homogeneous_axis
        other = 1 - hom
        lo_h = self.pattern.window.bounds[hom][0]
        out[:, hom] = self.rho_const * (pts[:, hom] - lo_h)
        edges = self.bin_edges
        cum = np.concatenate([[0.0], np.cumsum(self.bin_intensity * np.diff(edges))])
        idx = np.clip(np.searchsorted(edges, pts[:, other], side="right") - 1,
                      0, len(self.bin_intensity) - 1)
        out[:, other] = cum[idx] + self.bin_intensity[idx] * (pts[:, other] - edges[idx])
        return out

    def kernel(self, x, y) -> float:
        """Composed inhomogeneous kernel sqrt(rho(x)) C_Y0(T(y)-T(x)) sqrt(rho(y))."""
        from .models import kernel_value

        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        model = self.stationary_fit.model
        corr = kernel_value(model, self.forward_map(y[None])[0] - self.forward_map(x[None])[0])
        corr = corr / model.rho
        lam = self.intensity(np.vstack([x, y]))
        return float(math.sqrt(lam[0] * lam[1]) * corr)

    def pair_correlation(self, x, y) -> float:
        """Non-translation-invariant pcf g(x,y) = 1 - |C_Y0(T(y)-T(x))/rho|^2."""
        from .models import kernel_value

        model = self.stationary_fit.model
        corr = kernel_value(
            model, self.forward_map(np.asarray(y)[None])[0] - self.forward_map(np.asarray(x)[None])[0]
        ) / model.rho
        return float(1.0 - corr * corr)


def fit_inhomogeneous_separable(
    pattern: PointPattern,
    n_bins: int,
    family,
    homogeneous_axis: int = 0,
    fit_options: dict | None = None,
) -> SeparableFit:
    """Fit a separable-intensity DPP: piecewise-constant marginal intensity,
    per-axis monotone transformation to [0, sqrt(n)]^2, then a stationary fit.

    The constant factor is fixed at rho_1 = sqrt(n) / A so the transformed
    window is the square [0, sqrt(n)]^2.
    """
    if pattern.window.dim != 2:
        raise UnsupportedFamily("separable workflow is for planar patterns")
    if pattern.n < 2:
        raise TooFewPoints("need at least 2 points")
    n = pattern.n
    hom = homogeneous_axis
    other = 1 - hom
    lo_h, hi_h = pattern.window.bounds[hom]
    lo_o, hi_o = pattern.window.bounds[other]
    side_h = hi_h - lo_h
    side_o = hi_o - lo_o
    root_n = math.sqrt(n)

    rho_const = root_n / side_h
    edges = lo_o + np.arange(n_bins + 1) * (side_o / n_bins)
    counts, _ = np.histogram(pattern.points[:, other], bins=edges)
    width = side_o / n_bins
    intens = counts / (width * root_n)
    if np.any(counts == 0):
        warnings.warn(f"{np.sum(counts == 0)} empty bin(s); intensity floored", EmptyBin)
        intens = np.maximum(intens, 1e-9)

    fit = SeparableFit(
        bin_edges=edges,
        bin_intensity=intens,
        rho_const=rho_const,
        homogeneous_axis=hom,
        transformed=None,
        stationary_fit=None,
        pattern=pattern,
    )
    total = float(np.sum(intens * width))  # = sqrt(n) when no empty bins
    new_window = Window(((0.0, root_n), (0.0, total)) if hom == 0 else ((0.0, total), (0.0, root_n)))
    transformed = transform_pattern(pattern, fit.forward_map, new_window)
    opts = dict(fit_options or {})
    stationary = fit_mle(family, transformed, **opts)
    fit.transformed = transformed
    fit.stationary_fit = stationary
    return fit
