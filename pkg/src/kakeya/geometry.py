"""Geometric primitives: lines, tubes, cubes, spherical caps, polyline graphs.

Everything here is immutable after construction (arrays are copied and marked
read-only), so values can be shared freely between threads.

Conventions:
  * axes are 0-based,
  * tube neighborhoods are closed (distance <= radius counts as inside),
  * line directions are unoriented; angle measurements normalize the sign.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

UNIT_NORM_TOL = 1e-12


def as_point(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d point, got shape {arr.shape}")
    return arr


def _frozen(values, shape_check=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape_check is not None and not shape_check(arr.shape):
        raise ValueError(f"unexpected array shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite coordinates")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Direction:
    """Unit vector in R^n (n >= 2), validated to |v| = 1 within 1e-12."""

    components: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.components, lambda s: len(s) == 1 and s[0] >= 2)
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"direction is not unit length: |v|-1 = {norm - 1.0:.3e}")
        object.__setattr__(self, "components", arr)

    @classmethod
    def normalized(cls, values) -> "Direction":
        arr = as_point(values)
        norm = np.linalg.norm(arr)
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(arr / norm)

    @classmethod
    def axis(cls, n: int, j: int) -> "Direction":
        e = np.zeros(n)
        e[j] = 1.0
        return cls(e)

    @property
    def n(self) -> int:
        return self.components.size


@dataclass(frozen=True, eq=False)
class Line:
    """Infinite line {anchor + t * direction, t in R}."""

    anchor: np.ndarray
    direction: Direction

    def __post_init__(self):
        anchor = _frozen(self.anchor, lambda s: len(s) == 1)
        if anchor.size != self.direction.n:
            raise ValueError("anchor and direction dimensions differ")
        object.__setattr__(self, "anchor", anchor)

    @property
    def n(self) -> int:
        return self.anchor.size


@dataclass(frozen=True, eq=False)
class Tube:
    """Closed radius-neighborhood of a line."""

    line: Line
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0):
            raise ValueError("tube radius must be positive")

    @property
    def n(self) -> int:
        return self.line.n


@dataclass(frozen=True, eq=False)
class LipschitzCurve:
    """Piecewise-linear graph over the x_axis coordinate.

    The curve is the interpolant of the points (t_i, values_i) in R^n with the
    t coordinate placed at position ``axis``.  The declared Lipschitz constant
    ``lip`` is validated against every segment on construction.
    """

    axis: int
    breakpoints: np.ndarray  # (K+1,), strictly increasing
    values: np.ndarray  # (K+1, n-1)
    lip: float

    def __post_init__(self):
        bps = _frozen(self.breakpoints, lambda s: len(s) == 1 and s[0] >= 2)
        vals = _frozen(self.values, lambda s: len(s) == 2 and s[0] >= 2)
        if vals.shape[0] != bps.size:
            raise ValueError("breakpoints and values lengths differ")
        if not (self.lip >= 0.0):
            raise ValueError("Lipschitz constant must be nonnegative")
        dt = np.diff(bps)
        if np.any(dt <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        dg = np.linalg.norm(np.diff(vals, axis=0), axis=1)
        bad = dg > self.lip * dt * (1.0 + 1e-12) + 1e-300
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValueError(
                f"segment {i} violates the declared Lipschitz constant: "
                f"|dg|/dt = {dg[i] / dt[i]:.6g} > {self.lip:.6g}"
            )
        n = vals.shape[1] + 1
        if not (0 <= self.axis < n):
            raise ValueError("curve axis out of range")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[1] + 1

    @property
    def span(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def vertices(self) -> np.ndarray:
        """Embedded polyline vertices, shape (K+1, n)."""
        out = np.empty((self.breakpoints.size, self.n))
        out[:, self.axis] = self.breakpoints
        out[:, [k for k in range(self.n) if k != self.axis]] = self.values
        return out

    def covers_interval(self, lo: float, hi: float) -> bool:
        return self.breakpoints[0] <= lo and hi <= self.breakpoints[-1]


@dataclass(frozen=True, eq=False)
class Cube:
    """Axis-aligned cube given by its minimal corner and side length."""

    min_corner: np.ndarray
    side: float

    def __post_init__(self):
        corner = _frozen(self.min_corner, lambda s: len(s) == 1)
        if not (self.side > 0.0):
            raise ValueError("cube side must be positive")
        object.__setattr__(self, "min_corner", corner)

    @property
    def n(self) -> int:
        return self.min_corner.size

    @property
    def max_corner(self) -> np.ndarray:
        return self.min_corner + self.side

    @property
    def center(self) -> np.ndarray:
        return self.min_corner + 0.5 * self.side

    @property
    def volume(self) -> float:
        return float(self.side**self.n)

    def corners(self) -> np.ndarray:
        """All 2^n vertices, shape (2^n, n)."""
        offs = np.array(list(itertools.product((0.0, 1.0), repeat=self.n)))
        return self.min_corner + self.side * offs

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = np.all(pts >= self.min_corner - tol, axis=1)
        ok &= np.all(pts <= self.max_corner + tol, axis=1)
        return ok

    @classmethod
    def centered(cls, center, side: float) -> "Cube":
        c = as_point(center)
        return cls(c - 0.5 * side, side)


@dataclass(frozen=True, eq=False)
class Cap:
    """Closed spherical cap {u on S^{n-1} : angle(u, center) <= ang_radius}."""

    center: Direction
    ang_radius: float

    def __post_init__(self):
        if not (0.0 < self.ang_radius <= math.pi):
            raise ValueError("cap angular radius must lie in (0, pi]")

    def contains_line_direction(self, direction: Direction, tol: float = 0.0) -> bool:
        """Membership for unoriented line directions (v and -v identified)."""
        return line_angle_between(direction, self.center) <= self.ang_radius + tol


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Invertible linear map with its length/volume distortion recorded.

    ``length_distortion`` holds (min, max) singular value and
    ``volume_distortion`` is |det|; both are computed from the matrix itself.
    """

    matrix: np.ndarray
    length_distortion: tuple[float, float] = None  # type: ignore[assignment]
    volume_distortion: float = None  # type: ignore[assignment]

    def __post_init__(self):
        mat = _frozen(self.matrix, lambda s: len(s) == 2 and s[0] == s[1])
        svals = np.linalg.svd(mat, compute_uv=False)
        det = abs(float(np.linalg.det(mat)))
        if det <= 0.0 or svals[-1] <= 0.0:
            raise ValueError("linear map must be invertible")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "length_distortion", (float(svals[-1]), float(svals[0])))
        object.__setattr__(self, "volume_distortion", det)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix.T

    def apply_direction(self, direction: Direction) -> Direction:
        return Direction.normalized(self.matrix @ direction.components)

    def inverse(self) -> "LinearMap":
        return LinearMap(np.linalg.inv(self.matrix))


# ---------------------------------------------------------------------------
# angles


def angle_between(u: Direction, v: Direction) -> float:
    dot = float(np.dot(u.components, v.components))
    return math.acos(min(1.0, max(-1.0, dot)))


def line_angle_between(u: Direction, v: Direction) -> float:
    """Angle between unoriented directions, in [0, pi/2]."""
    dot = abs(float(np.dot(u.components, v.components)))
    return math.acos(min(1.0, dot))


def angle_from_axis(direction: Direction, axis: int) -> float:
    """Angle between an unoriented direction and the coordinate axis.

    The direction is oriented so its axis component is >= 0 before measuring,
    so the result lies in [0, pi/2] and v, -v give the same answer.
    """
    comp = abs(float(direction.components[axis]))
    return math.acos(min(1.0, comp))


# ---------------------------------------------------------------------------
# distances


def point_line_distance(points, line: Line) -> np.ndarray:
    """Distance from each point (N, n) to an infinite line."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rel = pts - line.anchor
    t = rel @ line.direction.components
    d2 = np.einsum("ij,ij->i", rel, rel) - t * t
    return np.sqrt(np.maximum(d2, 0.0))


def point_polyline_distance(points, curve: LipschitzCurve) -> np.ndarray:
    """Distance from each point (N, n) to the embedded polyline graph."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    verts = curve.vertices()
    best = np.full(pts.shape[0], np.inf)
    for i in range(verts.shape[0] - 1):
        p0 = verts[i]
        seg = verts[i + 1] - p0
        seg2 = float(seg @ seg)
        rel = pts - p0
        t = np.clip((rel @ seg) / seg2, 0.0, 1.0)
        diff = rel - t[:, None] * seg
        d2 = np.einsum("ij,ij->i", diff, diff)
        np.minimum(best, d2, out=best)
    return np.sqrt(np.maximum(best, 0.0))


def _segment_box_distance_sq(anchor, direction, lo, hi, t_lo, t_hi):
    """Exact min of dist(anchor + t*direction, box)^2 over t in [t_lo, t_hi].

    ``lo``/``hi`` stack B boxes along axis 0; the result has shape (B,).
    The squared distance is convex piecewise quadratic in t, so its minimum is
    attained either at a slab-crossing breakpoint, at an interval's
    unconstrained quadratic minimizer, or at a clamped range endpoint; the
    exact function is evaluated at all such candidates.
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    a = np.asarray(anchor, dtype=float)
    d = np.asarray(direction, dtype=float)
    moving = d != 0.0
    dm = d[moving]
    breaks = np.concatenate(
        [(lo[:, moving] - a[moving]) / dm, (hi[:, moving] - a[moving]) / dm], axis=1
    )
    breaks.sort(axis=1)
    # probe each interval between consecutive breakpoints (plus both tails)
    probes = np.concatenate(
        [
            breaks[:, :1] - 1.0,
            0.5 * (breaks[:, :-1] + breaks[:, 1:]),
            breaks[:, -1:] + 1.0,
        ],
        axis=1,
    )
    # unconstrained minimizer of the quadratic piece active at each probe
    pos = a + probes[..., None] * d  # (B, P, n)
    below = pos < lo[:, None, :]
    above = pos > hi[:, None, :]
    d_sq = d * d
    quad_a = np.sum(np.where(below | above, d_sq, 0.0), axis=2)
    lin = np.sum(np.where(below, d * (a - lo[:, None, :]), 0.0), axis=2)
    lin += np.sum(np.where(above, d * (a - hi[:, None, :]), 0.0), axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(quad_a > 0.0, -lin / quad_a, probes)
    cands = [breaks, t_star]
    if math.isfinite(t_lo) or math.isfinite(t_hi):
        ends = []
        if math.isfinite(t_lo):
            ends.append(np.full((lo.shape[0], 1), t_lo))
        if math.isfinite(t_hi):
            ends.append(np.full((lo.shape[0], 1), t_hi))
        cands.extend(ends)
    t_cand = np.clip(np.concatenate(cands, axis=1), t_lo, t_hi)
    pos = a + t_cand[..., None] * d
    excess = np.maximum(np.maximum(lo[:, None, :] - pos, pos - hi[:, None, :]), 0.0)
    dist_sq = np.einsum("ijk,ijk->ij", excess, excess)
    return dist_sq.min(axis=1)


def line_box_distance(line: Line, lo, hi) -> np.ndarray:
    """Exact distance from an infinite line to axis-aligned boxes (B, n)."""
    d2 = _segment_box_distance_sq(
        line.anchor, line.direction.components, lo, hi, -math.inf, math.inf
    )
    return np.sqrt(np.maximum(d2, 0.0))


def polyline_box_distance(curve: LipschitzCurve, lo, hi) -> np.ndarray:
    """Exact distance from the embedded polyline to axis-aligned boxes."""
    verts = curve.vertices()
    lo2 = np.atleast_2d(np.asarray(lo, dtype=float))
    best = np.full(lo2.shape[0], np.inf)
    for i in range(verts.shape[0] - 1):
        d2 = _segment_box_distance_sq(
            verts[i], verts[i + 1] - verts[i], lo, hi, 0.0, 1.0
        )
        np.minimum(best, d2, out=best)
    return np.sqrt(np.maximum(best, 0.0))


def cube_line_max_distance(cube: Cube, line: Line) -> float:
    """Max distance from the cube to a line (attained at a vertex)."""
    return float(np.max(point_line_distance(cube.corners(), line)))


# ---------------------------------------------------------------------------
# indicators


def tube_indicator(tube: Tube, p) -> int:
    """1 iff p lies in the closed radius-neighborhood of the tube's axis."""
    d = point_line_distance(as_point(p)[None, :], tube.line)[0]
    return int(d <= tube.radius)


def curve_indicator(curve: LipschitzCurve, radius: float, p) -> int:
    """1 iff p lies within ``radius`` of the embedded polyline graph."""
    if not (radius > 0.0):
        raise ValueError("radius must be positive")
    d = point_polyline_distance(as_point(p)[None, :], curve)[0]
    return int(d <= radius)


def tube_intersects_cube(tube: Tube, cube: Cube) -> bool:
    """Exact predicate: does the closed tube meet the cube?"""
    lo = cube.min_corner[None, :]
    hi = cube.max_corner[None, :]
    return bool(line_box_distance(tube.line, lo, hi)[0] <= tube.radius)


# ---------------------------------------------------------------------------
# subdivision and fattening


def subdivision_counts(cube: Cube, delta: float, w: float) -> tuple[int, float]:
    """Per-side count and side of the admissible equal-subcube tiling.

    Subcube sides must lie in [W/(20n delta), W/(10n delta)].  The count is
    ceil(side / upper), decremented if float rounding pushed the subcube side
    below the lower bound.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if not (w > 0.0):
        raise ValueError("w must be positive")
    n = cube.n
    lower = w / (delta * 20.0 * n)
    upper = w / (delta * 10.0 * n)
    if cube.side < lower * (1.0 - 1e-12):
        raise ValueError(
            f"cube side {cube.side:.6g} is below the minimal subcube side {lower:.6g}"
        )
    k = math.ceil(cube.side / upper - 1e-12)
    if k >= 1 and cube.side / k < lower * (1.0 - 1e-12):
        k -= 1
    if k < 1 or cube.side / k > upper * (1.0 + 1e-12):
        raise ValueError("no admissible subdivision exists")
    return k, cube.side / k


def subcube_grid(cube: Cube, k: int) -> np.ndarray:
    """Min corners of the k^n equal subcubes, shape (k^n, n), C index order."""
    n = cube.n
    h = cube.side / k
    axes = [cube.min_corner[j] + h * np.arange(k) for j in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def subdivide_cube(cube: Cube, delta: float, w: float) -> list[Cube]:
    """Exact tiling of the cube by equal subcubes at the step scale."""
    k, sub_side = subdivision_counts(cube, delta, w)
    return [Cube(corner, sub_side) for corner in subcube_grid(cube, k)]


def fatten_axis_parallel(tube: Tube, axis: int, cube: Cube, delta: float) -> Tube:
    """Axis-parallel tube of doubled radius dominating ``tube`` on the cube.

    The surrogate axis passes through the point where the tube's axis line
    meets the hyperplane x_axis = cube-center component; requires the tube to
    make an angle <= delta with the axis and the cube to be small enough
    (side <= radius/(10 n delta)).
    """
    n = tube.n
    theta = angle_from_axis(tube.line.direction, axis)
    if theta > delta + 1e-9:
        raise ValueError(f"tube angle {theta:.3e} exceeds delta {delta:.3e}")
    if cube.side > tube.radius / (delta * 10.0 * n) * (1.0 + 1e-9):
        raise ValueError("cube too large for axis-parallel fattening")
    d = tube.line.direction.components
    if d[axis] < 0.0:
        d = -d
    t = (cube.center[axis] - tube.line.anchor[axis]) / d[axis]
    crossing = tube.line.anchor + t * d
    return Tube(Line(crossing, Direction.axis(n, axis)), 2.0 * tube.radius)


# ---------------------------------------------------------------------------
# spherical caps and frames


def tangent_basis(direction: Direction) -> np.ndarray:
    """Orthonormal basis of the tangent space at ``direction``, rows (n-1, n).

    Deterministic: QR factorization of [v | identity], dropping the first
    column and the dependent one.
    """
    n = direction.n
    cols = np.concatenate([direction.components[:, None], np.eye(n)], axis=1)
    q, r = np.linalg.qr(cols)
    # columns of q beyond the first span the tangent space
    basis = q[:, 1:n].T
    return basis


def _cap_point(center: Direction, basis: np.ndarray, v: np.ndarray) -> Direction:
    """Exponential-map image of a tangent vector v (length = angle)."""
    r = float(np.linalg.norm(v))
    if r == 0.0:
        return center
    r = min(r, math.pi)
    unit = (v / np.linalg.norm(v)) @ basis
    return Direction.normalized(math.cos(r) * center.components + math.sin(r) * unit)


def cap_cover_count_bound(n: int, ratio: float) -> float:
    """Documented bound on the net size: (sqrt(n-1)+2)^(n-1) * ratio^(n-1)."""
    return (math.sqrt(n - 1) + 2.0) ** (n - 1) * ratio ** (n - 1)


def cap_cover(cap: Cap, rho: float) -> list[Cap]:
    """Deterministic net of radius-``rho`` caps covering ``cap``.

    Tangent-grid construction: cover the radius-R ball in the tangent space by
    a cubic grid of spacing 2 rho / sqrt(n-1) with a cell centered at the
    origin (so the input center is always the first returned cap center), then
    push cell centers to the sphere with the exponential map, which does not
    increase distances.  The cap count is at most
    (sqrt(n-1)+2)^(n-1) (R/rho)^(n-1).
    """
    if not (0.0 < rho <= cap.ang_radius * (1.0 + 1e-12)):
        raise ValueError("rho must lie in (0, cap.ang_radius]")
    if rho >= cap.ang_radius * (1.0 - 1e-12):
        return [cap]
    n = cap.center.n
    m = n - 1
    big_r = cap.ang_radius
    h = 2.0 * rho / math.sqrt(m)
    basis = tangent_basis(cap.center)
    imax = int(math.floor(big_r / h + 0.5)) + 1
    cells = []
    for idx in itertools.product(range(-imax, imax + 1), repeat=m):
        center = h * np.array(idx, dtype=float)
        # keep cells whose closest point to the origin is inside the R-ball
        nearest = np.maximum(np.abs(center) - 0.5 * h, 0.0)
        if float(nearest @ nearest) <= big_r * big_r * (1.0 + 1e-12):
            cells.append((float(center @ center), idx, center))
    cells.sort(key=lambda item: (item[0], item[1]))
    return [Cap(_cap_point(cap.center, basis, c), rho) for _, _, c in cells]


def frame_map(centers: list[Direction]) -> LinearMap:
    """Linear map sending each frame vector v_j to the axis vector e_j.

    The map is the inverse of the matrix with columns v_j; distortion fields
    come from its singular values and determinant.  Singular frames
    (|det| < 1e-12) are rejected.
    """
    n = len(centers)
    if any(c.n != n for c in centers):
        raise ValueError("frame vectors must match the frame size")
    v = np.stack([c.components for c in centers], axis=1)
    det = float(np.linalg.det(v))
    if abs(det) < 1e-12:
        raise ValueError(f"frame is singular: |det| = {abs(det):.3e}")
    return LinearMap(np.linalg.inv(v))


def wedge_volume(directions: list[Direction]) -> float:
    """|v_1 ^ ... ^ v_n| = absolute determinant of the column matrix."""
    v = np.stack([d.components for d in directions], axis=1)
    return abs(float(np.linalg.det(v)))
