"""The Loomis-Whitney inequality on grid functions, and its ball-sum form.

For nonnegative f_j on R^{n-1} and the projections pi_j that forget the j-th
coordinate,

    int prod_j f_j(pi_j x)^(1/(n-1))  <=  prod_j ||f_j||_1^(1/(n-1)).

Grid functions are piecewise constant (nearest-cell lookup), which makes the
right-hand side exact for the stored representation; the left-hand side is a
midpoint-rule quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .evaluator import GridSpec
from .geometry import _frozen

#: relative roundoff floor folded into quadrature error estimates
ROUNDOFF_FLOOR = 8.0 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box: min corner plus positive side lengths."""

    min_corner: np.ndarray
    sides: np.ndarray

    def __post_init__(self):
        corner = _frozen(self.min_corner, lambda s: len(s) == 1)
        sides = _frozen(self.sides, lambda s: len(s) == 1)
        if sides.size != corner.size or np.any(sides <= 0.0):
            raise ValidationError("box sides must be positive and match the corner")
        object.__setattr__(self, "min_corner", corner)
        object.__setattr__(self, "sides", sides)

    @property
    def n(self) -> int:
        return self.min_corner.size

    @property
    def max_corner(self) -> np.ndarray:
        return self.min_corner + self.sides

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))


@dataclass(frozen=True, eq=False)
class ProjectionFunction:
    """Nonnegative piecewise-constant function on a box in R^{n-1}."""

    box: Box
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != self.box.n:
            raise ValidationError("value grid rank must equal the box dimension")
        if np.any(vals < 0.0):
            raise ValidationError("grid values must be nonnegative")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.box.n

    @property
    def cell_sides(self) -> np.ndarray:
        return self.box.sides / np.array(self.values.shape, dtype=float)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell_sides))

    def l1_norm(self) -> float:
        """Exact L1 norm of the stored piecewise-constant function."""
        return float(np.sum(self.values)) * self.cell_volume

    def lookup(self, points) -> np.ndarray:
        """Nearest-cell values at points (N, dim); raises outside the box."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tol = 1e-9 * np.max(self.box.sides)
        if np.any(pts < self.box.min_corner - tol) or np.any(
            pts > self.box.max_corner + tol
        ):
            raise ValidationError("projection falls outside the function's box")
        idx = np.floor((pts - self.box.min_corner) / self.cell_sides).astype(int)
        idx = np.clip(idx, 0, np.array(self.values.shape) - 1)
        return self.values[tuple(idx.T)]


@dataclass(frozen=True, eq=False)
class BallSum:
    """sum_a w_a * indicator(ball(y_a, radius)) in R^d."""

    centers: np.ndarray  # (A, d)
    weights: np.ndarray  # (A,)
    radius: float

    def __post_init__(self):
        centers = _frozen(np.atleast_2d(self.centers))
        weights = _frozen(np.atleast_1d(self.weights))
        if weights.size != centers.shape[0]:
            raise ValidationError("one weight per center required")
        if np.any(weights < 0.0):
            raise ValidationError("ball weights must be nonnegative")
        if not (self.radius > 0.0):
            raise ValidationError("ball radius must be positive")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True, eq=False)
class LwVerification:
    left: float
    right: float
    ratio: float
    error_estimate: float
    degenerate: bool

    def to_json(self) -> dict:
        return {
            "left": self.left,
            "right": self.right,
            "ratio": self.ratio,
            "error_estimate": self.error_estimate,
            "degenerate": self.degenerate,
        }


def project(point, j: int):
    """Forget the j-th coordinate of a point or point array."""
    pts = np.asarray(point, dtype=float)
    n = pts.shape[-1]
    if n < 2:
        raise ValidationError("projection requires ambient dimension >= 2")
    if not (0 <= j < n):
        raise ValidationError("projection axis out of range")
    return np.delete(pts, j, axis=-1)


def _check_setup(fs, box: Box) -> int:
    n = box.n
    if len(fs) != n:
        raise ValidationError("need one projection function per axis")
    for j, f in enumerate(fs):
        if f.dim != n - 1:
            raise ValidationError("projection functions must live in dimension n-1")
        lo = project(box.min_corner, j)
        hi = project(box.max_corner, j)
        tol = 1e-9 * float(np.max(f.box.sides))
        if np.any(lo < f.box.min_corner - tol) or np.any(hi > f.box.max_corner + tol):
            raise ValidationError(
                f"projection of the integration box escapes f_{j}'s box"
            )
    return n


def _left_midpoint(fs, box: Box, m: int) -> float:
    n = box.n
    p = 1.0 / (n - 1)
    h = box.sides / m
    total = m**n
    block = 1 << 16
    partials = []
    for start in range(0, total, block):
        flat = np.arange(start, min(start + block, total))
        idx = np.unravel_index(flat, (m,) * n)
        pts = np.stack(
            [box.min_corner[k] + (idx[k] + 0.5) * h[k] for k in range(n)], axis=1
        )
        vals = np.ones(pts.shape[0])
        for j in range(n):
            fj = fs[j].lookup(project(pts, j))
            vals *= fj if p == 1.0 else np.power(fj, p)
        partials.append(float(np.sum(vals)))
    return float(np.prod(h)) * math.fsum(partials)


def lw_left(fs, box: Box, grid: GridSpec) -> float:
    """Midpoint-rule value of int_box prod_j f_j(pi_j x)^(1/(n-1))."""
    _check_setup(fs, box)
    return _left_midpoint(fs, box, grid.cells_per_side)


def lw_right(fs) -> float:
    """prod_j ||f_j||_1^(1/(n-1)), exact for the grid representation."""
    if not fs:
        raise ValidationError("no projection functions given")
    p = 1.0 / (len(fs) - 1)
    return float(np.prod([f.l1_norm() ** p for f in fs]))


def verify_lw(fs, box: Box, grid: GridSpec) -> LwVerification:
    """Evaluate both sides; contract: ratio <= 1 + quadrature tolerance.

    The error estimate is the two-level (m vs m/2) difference normalized by
    the right side, plus an 8-eps roundoff floor; a 0/0 instance is reported
    as ratio 0 with the degenerate flag set.
    """
    n = _check_setup(fs, box)
    m = grid.cells_per_side
    left = _left_midpoint(fs, box, m)
    right = lw_right(fs)
    if right == 0.0:
        return LwVerification(left, right, 0.0, 0.0, degenerate=True)
    coarse = _left_midpoint(fs, box, max(1, m // 2))
    err = (abs(left - coarse) + ROUNDOFF_FLOOR * abs(left)) / right
    return LwVerification(left, right, left / right, err, degenerate=False)


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d (omega_d)."""
    if d < 0:
        raise ValidationError("dimension must be nonnegative")
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def ball_sum_l1(b: BallSum, ambient_dim: int) -> float:
    """Exact L1 norm omega_d * r^d * sum_a w_a of a ball sum in R^d."""
    if ambient_dim != b.centers.shape[1]:
        raise ValidationError("ambient dimension mismatch")
    return unit_ball_volume(ambient_dim) * b.radius**ambient_dim * float(
        np.sum(b.weights)
    )


def ball_sum_to_grid(b: BallSum, box: Box, cells_per_side: int) -> ProjectionFunction:
    """Rasterize a ball sum onto a grid (cell-center sampling)."""
    d = box.n
    h = box.sides / cells_per_side
    axes = [
        box.min_corner[k] + (np.arange(cells_per_side) + 0.5) * h[k] for k in range(d)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = np.zeros(pts.shape[0])
    for center, w in zip(b.centers, b.weights):
        diff = pts - center
        vals += w * (np.einsum("ij,ij->i", diff, diff) <= b.radius**2)
    return ProjectionFunction(box, vals.reshape((cells_per_side,) * d))
