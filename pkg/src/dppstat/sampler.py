"""Exact-in-distribution simulation of stationary DPPs on rectangles.

Two-stage sampling: eigenvalue Bernoulli thinning via the inversion method
for M = max{k : B_k != 0}, then the sequential projection sampler with
Gram-Schmidt updates.  Proposals are uniform with the provable envelope
sup p_i <= n/i (every p_i is bounded by n/i because ||v(x)||^2 = n), so
draws are exact; `rejection_draw` additionally offers the grid-estimated
envelope and the product-basis piecewise bound as alternatives.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EnvelopeViolation, InvalidModel, NumericalBreakdown
from .geometry import PointPattern, Window, transform_pattern
from .models import KernelModel
from .spectral import SpectralLattice, build_lattice

_GS_TOL = 1e-12


@dataclass
class RngStream:
    """Reproducible random stream: identical seed + call sequence => identical output."""

    seed: int

    def __post_init__(self):
        self.generator = np.random.default_rng(self.seed)

    def spawn(self, n: int) -> list:
        """Independent child streams, deterministic in the parent seed."""
        seqs = np.random.SeedSequence(self.seed).spawn(n)
        return [np.random.default_rng(s) for s in seqs]


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def spawn_rngs(rng, n: int) -> list:
    """n independent generators, deterministic given an integer seed or RngStream."""
    if isinstance(rng, RngStream):
        return rng.spawn(n)
    if isinstance(rng, (int, np.integer)):
        return [np.random.default_rng(s) for s in np.random.SeedSequence(int(rng)).spawn(n)]
    gen = as_rng(rng)
    seeds = gen.integers(0, 2**63 - 1, size=n)
    return [np.random.default_rng(int(s)) for s in seeds]


@dataclass(frozen=True)
class ProjectionBasis:
    """Active Fourier indices k selected by the Bernoulli draws."""

    indices: np.ndarray  # (n, d) integer wave vectors

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def dim(self) -> int:
        return self.indices.shape[1]


@dataclass(frozen=True)
class PoissonModel:
    """No-interaction reference process (for envelopes and estimator oracles)."""

    rho: float
    dim: int = 2


def sample_bernoulli_set(lattice: SpectralLattice, rng) -> ProjectionBasis:
    """Draw {k : B_k = 1} with P(B_k = 1) = phi(k), via the inversion method for M.

    Eigenvalues are sorted decreasingly; M is drawn from its exact law
    p_m = lambda_m * prod_{i>m}(1 - lambda_i), then the B_k below M are
    independent Bernoullis and B_M = 1.
    """
    gen = as_rng(rng)
    k_sorted, lam_sorted, q = lattice.bernoulli_tables
    u = 1.0 - gen.random()  # in (0, 1]
    m = int(np.searchsorted(q, u, side="left"))
    if m == 0:
        return ProjectionBasis(np.empty((0, lattice.dim), dtype=np.int64))
    below = gen.random(m - 1) < lam_sorted[: m - 1]
    positions = np.append(np.flatnonzero(below), m - 1)
    return ProjectionBasis(np.ascontiguousarray(k_sorted[positions]))


def _phases(indices: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Fourier eigenfunction values v(x)^T row-wise: (B, n) complex."""
    return np.exp(2j * math.pi * (points @ indices.T.astype(float)))


class _PhaseTable:
    """Factored evaluation of v(x): exponentials only at unique per-axis k."""

    def __init__(self, indices: np.ndarray):
        self.indices = indices
        self.axes = []
        for q in range(indices.shape[1]):
            uniq, inv = np.unique(indices[:, q], return_inverse=True)
            self.axes.append((2.0 * math.pi * uniq.astype(float), inv))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        freq0, inv0 = self.axes[0]
        out = np.exp(1j * points[:, [0]] * freq0[None, :])[:, inv0]
        for q in range(1, len(self.axes)):
            freq, inv = self.axes[q]
            out = out * np.exp(1j * points[:, [q]] * freq[None, :])[:, inv]
        return out


def sample_projection(
    basis: ProjectionBasis,
    rng,
    envelope: str = "exact",
    max_batch: int = 8192,
    return_basis: bool = False,
):
    """Simulate the determinantal projection process on S = [-1/2,1/2]^d.

    Returns exactly n = basis.n points.  `envelope` selects the proposal
    bound for the uniform rejection step: "exact" (n/i, provable), "grid"
    or "lemma" (see rejection_draw).  With return_basis=True the final
    Gram-Schmidt matrix (columns e_j) is returned alongside the points.
    """
    gen = as_rng(rng)
    n, d = basis.n, basis.dim
    if n == 0:
        empty = np.empty((0, d))
        return (empty, np.empty((0, 0), complex)) if return_basis else empty
    idx = basis.indices
    phases = _PhaseTable(idx)
    points = np.empty((n, d))
    E = np.empty((n, n), dtype=complex)  # Gram-Schmidt vectors, filled columnwise
    Ec = np.empty((n, n), dtype=complex)  # conjugate copy (avoids per-batch .conj())

    x = gen.uniform(-0.5, 0.5, d)  # p_n(x) = ||v(x)||^2 / n = 1: uniform
    points[0] = x
    v = phases(x[None, :])[0]
    E[:, 0] = v / math.sqrt(n)
    Ec[:, 0] = np.conj(E[:, 0])

    for step, i in enumerate(range(n - 1, 0, -1), start=1):
        j = n - i  # Gram-Schmidt vectors built so far
        Ej, Ecj = E[:, :j], Ec[:, :j]
        for attempt in range(2):
            if envelope == "exact":
                x, v, coef = _draw_exact(gen, phases, Ecj, n, i, max_batch)
            else:
                x, v, coef = _draw_via_rejection(
                    gen, idx, Ecj, n, i, envelope, points[:step]
                )
            w = v - Ej @ coef
            # one re-orthogonalization pass keeps |e_i* e_j| at roundoff
            w = w - Ej @ (Ecj.T @ w)
            norm = np.linalg.norm(w)
            if norm >= _GS_TOL:
                break
        else:
            raise NumericalBreakdown(
                f"Gram-Schmidt norm {norm:.3g} below {_GS_TOL} at step {step}"
            )
        points[step] = x
        E[:, j] = w / norm
        Ec[:, j] = np.conj(E[:, j])
    if return_basis:
        return points, E
    return points


def _draw_exact(gen, phases, Ecj, n, i, max_batch):
    """Uniform rejection with the provable envelope sup p_i <= n/i."""
    d = phases.indices.shape[1]
    n_over_i = n / max(i, 1)
    batch = int(min(max(int(1.3 * n_over_i), 1), max_batch))
    while True:
        props = gen.uniform(-0.5, 0.5, (batch, d))
        V = phases(props)
        T = V @ Ecj  # (B, j) inner products e_j^* v(x)
        s = n - np.einsum("bj,bj->b", T.real, T.real) - np.einsum(
            "bj,bj->b", T.imag, T.imag
        )
        u = gen.random(batch)
        hits = np.flatnonzero(u * n <= s)
        if hits.size:
            b = int(hits[0])
            return props[b], V[b], T[b]


def _draw_via_rejection(gen, idx, Ecj, n, i, mode, placed):
    d = idx.shape[1]

    def density(pts):
        pts = np.atleast_2d(pts)
        V = _phases(idx, pts)
        T = V @ Ecj
        s = n - np.sum(np.abs(T) ** 2, axis=1)
        return s / i

    x, _info = rejection_draw(
        density,
        rng=gen,
        bound_mode="uniform" if mode == "grid" else "lemma_bound",
        dim=d,
        basis_indices=idx,
        placed=placed,
        i=i,
    )
    xa = np.atleast_2d(x)
    V = _phases(idx, xa)
    T = V @ Ecj
    return xa[0], V[0], T[0]


def projection_density(basis: ProjectionBasis, placed_points: np.ndarray):
    """The conditional density p_i given previously placed points (vectorized).

    i = n - len(placed_points); intended for tests and for rejection_draw.
    """
    idx = basis.indices
    n = basis.n
    placed = np.atleast_2d(placed_points) if len(np.atleast_1d(placed_points)) else None
    if placed is None or placed.size == 0:
        def p_n(x):
            x = np.atleast_2d(x)
            return np.full(len(x), 1.0)
        return p_n, n
    Vp = _phases(idx, placed)
    # orthonormalize v(x_k) rows: QR on the (n, m) matrix of columns
    Q, _ = np.linalg.qr(Vp.T)
    i = n - placed.shape[0]

    def p_i(x):
        x = np.atleast_2d(x)
        V = _phases(idx, x)
        T = V @ Q.conj()
        return (n - np.sum(np.abs(T) ** 2, axis=1)) / i

    return p_i, i


def lemma_envelope(basis: ProjectionBasis, placed_points: np.ndarray):
    """Piecewise upper bound on p_i for a PRODUCT Fourier basis (d <= 2).

    Returns a vectorized callable b(x) >= p_i(x) built from the active index
    set's per-axis moments and the previously placed points.
    """
    idx = basis.indices
    n, d = basis.indices.shape[0], basis.dim
    axes = []
    count = 1
    for q in range(d):
        vals = np.unique(idx[:, q])
        axes.append(vals)
        count *= len(vals)
    if count != n or len(np.unique(idx, axis=0)) != n:
        raise ValueError("lemma bound requires a product index set J_1 x ... x J_d")
    full = {tuple(row) for row in idx.tolist()}
    from itertools import product as _prod

    if {tuple(c) for c in _prod(*[a.tolist() for a in axes])} != full:
        raise ValueError("lemma bound requires a product index set J_1 x ... x J_d")

    placed = np.atleast_2d(placed_points)
    i = n - placed.shape[0]
    if i <= 0:
        raise ValueError("need at least one point left to draw")
    coeff = []
    for q in range(d):
        nq = len(axes[q])
        s1 = float(np.sum(axes[q]))
        s2 = float(np.sum(axes[q].astype(float) ** 2))
        coeff.append((nq, 2.0 * math.pi / nq * math.sqrt(max(nq * s2 - s1 * s1, 0.0))))

    def bound(x):
        x = np.atleast_2d(x)
        best = np.zeros(len(x))
        for xk in placed:
            prod = np.ones(len(x))
            for q in range(d):
                nq, cq = coeff[q]
                prod = prod * np.clip(1.0 - cq * np.abs(x[:, q] - xk[q]), 0.0, None)
            best = np.maximum(best, prod)
        return (n / i) * (1.0 - best)

    return bound, i


def rejection_draw(
    density,
    rng,
    bound_mode: str = "uniform",
    dim: int = 2,
    safety: float = 1.2,
    grid_per_axis: int = 64,
    basis_indices=None,
    placed=None,
    i=None,
):
    """Exact draw from a density on S = [-1/2,1/2]^d by uniform rejection.

    "uniform": envelope = safety * (max of the density over a coarse regular
    grid); proposals that beat the envelope are logged as EnvelopeViolation,
    the envelope is refreshed, and the draw retried, so exactness is kept.
    "lemma_bound": for a product Fourier basis, pre-screens proposals with the
    piecewise bound before evaluating the density (exact envelope n/i).

    Returns (point, info dict with proposals / violations / envelope).
    """
    gen = as_rng(rng)
    info = {"proposals": 0, "violations": 0}

    if bound_mode == "lemma_bound":
        if basis_indices is None or placed is None or i is None:
            raise ValueError("lemma_bound needs basis_indices, placed, and i")
        bnd, _ = lemma_envelope(ProjectionBasis(np.asarray(basis_indices)), placed)
        n_over_i = len(np.asarray(basis_indices)) / i
        while True:
            x = gen.uniform(-0.5, 0.5, dim)
            u = gen.random()
            info["proposals"] += 1
            if u * n_over_i > bnd(x[None, :])[0]:
                continue  # cheap pre-rejection: bound dominates the density
            if u * n_over_i <= density(x[None, :])[0]:
                info["envelope"] = n_over_i
                return x, info

    # uniform instrumental density with grid-estimated sup
    grid_1d = (np.arange(grid_per_axis) + 0.5) / grid_per_axis - 0.5
    if dim == 1:
        grid = grid_1d[:, None]
    else:
        g1, g2 = np.meshgrid(grid_1d, grid_1d, indexing="ij")
        grid = np.column_stack([g1.ravel(), g2.ravel()])
    env = safety * float(np.max(density(grid)))
    if env <= 0.0:
        raise ValueError("density appears to vanish on the probe grid")
    while True:
        x = gen.uniform(-0.5, 0.5, dim)
        info["proposals"] += 1
        px = float(density(x[None, :])[0])
        if px > env:
            info["violations"] += 1
            warnings.warn(
                f"proposal density {px:.4g} exceeded envelope {env:.4g}; refreshed",
                EnvelopeViolation,
            )
            env = safety * px
            continue
        if gen.random() * env <= px:
            info["envelope"] = env
            return x, info


def sample_pattern(lattice: SpectralLattice, rng, envelope: str = "exact") -> PointPattern:
    """One realization from a prepared lattice (Bernoulli set + projection sampler)."""
    gen = as_rng(rng)
    basis = sample_bernoulli_set(lattice, gen)
    pts_box = sample_projection(basis, gen, envelope=envelope)
    if lattice.method == "border":
        keep = np.all(np.abs(pts_box) <= 0.25, axis=1) if len(pts_box) else np.array([], bool)
        pts_box = pts_box[keep]
    pts = lattice.box_map.inverse(pts_box) if len(pts_box) else pts_box.reshape(0, lattice.dim)
    return PointPattern(pts, lattice.window, check=False)


def simulate(
    model,
    window: Window,
    rng,
    method: str = "periodic",
    N: int = 64,
    envelope: str = "exact",
) -> PointPattern:
    """Simulate DPP(model) on a rectangular window.

    periodic: T(window) = S, sample on S, map back.
    border:   T(window) = S/2, sample on S, keep points in S/2, map back.
    Poisson reference models are passed through to `sample_poisson`.
    """
    if isinstance(model, PoissonModel):
        return sample_poisson(model.rho, window, rng)
    lattice = build_lattice(model, window, N, mode="simulate", method=method)
    return sample_pattern(lattice, rng, envelope=envelope)


def sample_poisson(rho: float, window: Window, rng) -> PointPattern:
    gen = as_rng(rng)
    n = gen.poisson(rho * window.volume)
    return PointPattern(window.uniform(n, gen), window, check=False)


def thin(pattern: PointPattern, retention, rng) -> PointPattern:
    """Independent thinning: keep each point with probability retention(x).

    The result of thinning DPP(C) is DPP(sqrt(p) C sqrt(p)).
    """
    kept, _ = thin_split(pattern, retention, rng)
    return kept


def thin_split(pattern: PointPattern, retention, rng):
    """(retained, removed) patterns from one independent thinning."""
    gen = as_rng(rng)
    n = pattern.n
    if callable(retention):
        probs = np.asarray(retention(pattern.points), dtype=float)
    else:
        probs = np.full(n, float(retention))
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("retention probabilities must lie in [0, 1]")
    keep = gen.random(n) < probs
    return pattern.subset(keep), pattern.subset(~keep)


def transform(pattern: PointPattern, forward, new_window: Window, inverse=None) -> PointPattern:
    """Pointwise image of the pattern under a bijection (see Prop. on transforms)."""
    return transform_pattern(pattern, forward, new_window, inverse=inverse)
