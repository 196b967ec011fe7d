"""Rectangular observation windows, point patterns, and affine box maps."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DuplicatePoints, NonInvertibleMap

DUPLICATE_TOL = 1e-12


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle in R^d (d = 1 or 2), stored as per-axis bounds."""

    bounds: tuple  # ((x0, x1), (y0, y1), ...)

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(b) not in (1, 2):
            raise ValueError("only d = 1 and d = 2 windows are supported")
        for lo, hi in b:
            if not hi > lo:
                raise ValueError("window must have positive volume")
        object.__setattr__(self, "bounds", b)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def sides(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.bounds])

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (lo + hi) for lo, hi in self.bounds])

    @property
    def min_side(self) -> float:
        return float(self.sides.min())

    def contains(self, points, rtol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        slack = rtol * self.sides
        return np.all((pts >= lo - slack) & (pts <= hi + slack), axis=1)

    def boundary_distance(self, points) -> np.ndarray:
        """Distance from each point to the window boundary."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.minimum(pts - lo, hi - pts).min(axis=1)

    def uniform(self, n: int, rng) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        return lo + rng.random((n, self.dim)) * self.sides

    def to_box(self, half: bool = False) -> "AffineBoxMap":
        """Affine T with T(window) = [-1/2,1/2]^d, or [-1/4,1/4]^d if half."""
        scale = 1.0 / self.sides
        if half:
            scale = scale / 2.0
        return AffineBoxMap(scale=scale, center=self.center)

    @classmethod
    def unit(cls, dim: int = 2) -> "Window":
        return cls(tuple((0.0, 1.0) for _ in range(dim)))

    @classmethod
    def parse(cls, text: str) -> "Window":
        """Parse 'x0,x1[,y0,y1]' as used on the command line."""
        vals = [float(v) for v in text.split(",")]
        if len(vals) not in (2, 4):
            raise ValueError("window must be 'x0,x1' or 'x0,x1,y0,y1'")
        pairs = tuple((vals[i], vals[i + 1]) for i in range(0, len(vals), 2))
        return cls(pairs)


@dataclass(frozen=True)
class AffineBoxMap:
    """Diagonal affine map T(x) = scale * (x - center); used by both window methods."""

    scale: np.ndarray
    center: np.ndarray

    def forward(self, points) -> np.ndarray:
        return (np.atleast_2d(np.asarray(points, dtype=float)) - self.center) * self.scale

    def inverse(self, points) -> np.ndarray:
        return np.atleast_2d(np.asarray(points, dtype=float)) / self.scale + self.center

    @property
    def jacobian(self) -> float:
        return float(np.prod(self.scale))


def _min_pairwise_distance(points: np.ndarray) -> float:
    n = len(points)
    if n < 2:
        return np.inf
    tree = cKDTree(points)
    d, _ = tree.query(points, k=2)
    return float(d[:, 1].min())


@dataclass
class PointPattern:
    """Finite point set inside a rectangular window, optional integer marks."""

    points: np.ndarray
    window: Window
    marks: np.ndarray | None = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, self.window.dim)
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.window.dim:
            raise ValueError(
                f"points have dimension {pts.shape[1]}, window has {self.window.dim}"
            )
        self.points = pts
        if self.marks is not None:
            self.marks = np.asarray(self.marks, dtype=int)
            if len(self.marks) != len(pts):
                raise ValueError("marks must align with points")
        if self.check:
            inside = self.window.contains(pts)
            if not inside.all():
                raise ValueError(f"{(~inside).sum()} point(s) fall outside the window")
            if _min_pairwise_distance(pts) < DUPLICATE_TOL:
                raise DuplicatePoints(
                    f"points closer than {DUPLICATE_TOL}; densities vanish there"
                )

    def __len__(self) -> int:
        return len(self.points)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def intensity(self) -> float:
        """Nonparametric estimate n / |W|."""
        return self.n / self.window.volume

    def subset(self, mask) -> "PointPattern":
        mask = np.asarray(mask)
        marks = self.marks[mask] if self.marks is not None else None
        return PointPattern(self.points[mask], self.window, marks, check=False)

    def split_by_mark(self) -> dict:
        if self.marks is None:
            raise ValueError("pattern has no marks")
        return {int(m): self.subset(self.marks == m) for m in np.unique(self.marks)}

    # -- CSV wire format: header x[,y][,mark], one point per row ------------

    def to_csv(self, path_or_buf) -> None:
        header = ["x", "y"][: self.dim]
        if self.marks is not None:
            header.append("mark")
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        handle = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            w = csv.writer(handle)
            w.writerow(header)
            for i, p in enumerate(self.points):
                row = [repr(float(v)) for v in p]
                if self.marks is not None:
                    row.append(str(int(self.marks[i])))
                w.writerow(row)
        finally:
            if own:
                handle.close()

    @classmethod
    def from_csv(cls, path_or_buf, window: Window, check: bool = True) -> "PointPattern":
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        handle = open(path_or_buf, "r", newline="") if own else path_or_buf
        try:
            reader = csv.reader(handle)
            header = next(reader)
            cols = [c.strip().lower() for c in header]
            if cols[: window.dim] != ["x", "y"][: window.dim]:
                raise ValueError(f"expected header x[,y][,mark], got {header!r}")
            has_mark = "mark" in cols
            pts, marks = [], []
            for row in reader:
                if not row:
                    continue
                pts.append([float(v) for v in row[: window.dim]])
                if has_mark:
                    marks.append(int(float(row[cols.index("mark")])))
            points = np.array(pts, dtype=float).reshape(len(pts), window.dim)
            return cls(points, window, np.array(marks) if has_mark else None, check=check)
        finally:
            if own:
                handle.close()

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def transform_pattern(pattern: PointPattern, forward, new_window: Window,
                      inverse=None, check_roundtrip: bool = True) -> PointPattern:
    """Pointwise image of a pattern under a bijective map between windows.

    `forward` maps an (n, d) array into the new window; when `inverse` is
    supplied the round trip is verified on the data (NonInvertibleMap otherwise).
    """
    pts = pattern.points
    image = np.atleast_2d(np.asarray(forward(pts), dtype=float)) if len(pts) else pts.copy()
    if len(pts) == 0:
        image = image.reshape(0, new_window.dim)
    if inverse is not None and check_roundtrip and len(pts):
        back = np.atleast_2d(np.asarray(inverse(image), dtype=float))
        scale = np.maximum(np.abs(pts).max(), 1.0)
        if not np.allclose(back, pts, atol=1e-9 * scale):
            raise NonInvertibleMap("inverse(forward(x)) does not return the input points")
    return PointPattern(image, new_window, pattern.marks, check=pattern.check)
