"""Multiscale bound certificates for tube-family overlap integrals.

The certified chain follows the small-angle multiscale argument: subdivide the
cube at scale steps W, delta^-1 W, ..., apply Loomis-Whitney on each subcube
via axis-parallel fattened surrogates, and terminate with the pointwise bound
f_j <= N_j.  Every constant is explicit:

    c_lw   = omega_{n-1}^{n/(n-1)} * 2^n
    c_step = c_lw * (20 n)^n

Derivation of c_lw: a tube of radius W crossing a step subcube Q is dominated
on Q by an axis-parallel tube of radius 2W, whose transverse cross-section has
volume omega_{n-1} (2W)^{n-1}.  Loomis-Whitney on the fattened sums gives

    int_Q prod_j f_{j,W}^{1/(n-1)} <= prod_j (omega_{n-1} (2W)^{n-1} N_j(Q))^{1/(n-1)}
                                    = c_lw W^n prod_j N_j(Q)^{1/(n-1)}.

Derivation of the (20n)^n factor: every tube of radius W meeting Q has its
radius delta^-1 W neighborhood identically 1 on Q, so the scale-delta^-1 W
integral over Q is at least |Q| prod_j N_j(Q)^{1/(n-1)}, and |Q| is at least
(delta^-1 W / 20n)^n.  Dividing yields c_step * delta^n per step.

The per-step argument needs diam(Q) + W <= delta^-1 W, which holds whenever
delta <= 0.9; chain operations reject larger delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .evaluator import (
    GridSpec,
    OverlapValue,
    TubeFamily,
    _check_curve_spans,
    check_families,
    evaluate_overlap,
)
from .geometry import (
    Cube,
    LipschitzCurve,
    Tube,
    angle_from_axis,
    cube_line_max_distance,
    line_box_distance,
    polyline_box_distance,
    subcube_grid,
    subdivision_counts,
)
from .loomis_whitney import unit_ball_volume

MAX_STEP_DELTA = 0.9
#: subcube-enumeration ceiling for optional per-step certificate detail
DEFAULT_DETAIL_BUDGET = 200_000


@dataclass(frozen=True)
class Constants:
    """Explicit per-step constants of the multiscale chain."""

    n: int
    c_lw: float
    c_step: float

    @classmethod
    def for_dimension(cls, n: int) -> "Constants":
        if n < 2:
            raise ValidationError("dimension must be >= 2")
        omega = unit_ball_volume(n - 1)
        c_lw = omega ** (n / (n - 1.0)) * 2.0**n
        return cls(n, c_lw, c_lw * (20.0 * n) ** n)


@dataclass(frozen=True, eq=False)
class StepBound:
    """Explicit subcube Loomis-Whitney bound at one scale."""

    w: float
    delta: float
    subcubes: tuple  # ((Cube, counts tuple), ...)
    numeric_bound: float

    def to_json(self) -> dict:
        return {
            "w": self.w,
            "delta": self.delta,
            "numeric_bound": self.numeric_bound,
            "subcube_count": len(self.subcubes),
        }


@dataclass(frozen=True, eq=False)
class StepVerification:
    lhs: float
    rhs: float
    bound: float
    ratio: float
    degenerate: bool

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "bound": self.bound,
            "ratio": self.ratio,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True, eq=False)
class StepDetail:
    """Audit record for one ladder rung (omitted above the detail budget)."""

    w: float
    subcube_side: float
    subcube_count: int
    count_histograms: tuple  # per axis: {count: multiplicity}
    numeric_bound: float

    def to_json(self) -> dict:
        return {
            "w": self.w,
            "subcube_side": self.subcube_side,
            "subcube_count": self.subcube_count,
            "count_histograms": [
                {str(k): v for k, v in sorted(h.items())} for h in self.count_histograms
            ],
            "numeric_bound": self.numeric_bound,
        }


@dataclass(frozen=True, eq=False)
class CubeCover:
    cubes: tuple
    multiplicity: int


@dataclass(frozen=True, eq=False)
class Certificate:
    """Machine-checkable upper bound for one configuration.

    final_bound = covering_multiplicity * c_step^M * prod_j N_j^(1/(n-1)),
    where M is the smallest integer with delta^-M >= S.
    """

    n: int
    delta: float
    m_steps: int
    ladder: tuple  # scales delta^-k for k = 0..M
    c_lw: float
    c_step: float
    counts: tuple  # per-axis total weights (plain counts for unit weights)
    covering_multiplicity: int
    final_bound: float
    epsilon_exponent: float
    step_details: tuple  # StepDetail | None per rung

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta,
            "m_steps": self.m_steps,
            "ladder": list(self.ladder),
            "c_lw": self.c_lw,
            "c_step": self.c_step,
            "counts": list(self.counts),
            "covering_multiplicity": self.covering_multiplicity,
            "final_bound": self.final_bound,
            "epsilon_exponent": self.epsilon_exponent,
            "step_details": [
                None if d is None else d.to_json() for d in self.step_details
            ],
        }


def _member_box_distances(family: TubeFamily, lo, hi) -> np.ndarray:
    """Distances from each member's axis line / polyline to boxes (B,)."""
    out = np.empty((len(family.members), np.atleast_2d(lo).shape[0]))
    for i, m in enumerate(family.members):
        if isinstance(m.geometry, Tube):
            out[i] = line_box_distance(m.geometry.line, lo, hi)
        else:
            out[i] = polyline_box_distance(m.geometry, lo, hi)
    return out


def count_intersections(family: TubeFamily, cube: Cube, w: float | None = None) -> int:
    """Number of members whose radius-w neighborhood meets the cube (exact)."""
    r = family.base_radius if w is None else w
    if not family.members:
        return 0
    d = _member_box_distances(family, cube.min_corner[None, :], cube.max_corner[None, :])
    return int(np.sum(d[:, 0] <= r))


def identically_one_check(tube: Tube, cube: Cube, delta: float, w: float) -> bool:
    """Exact check that the radius delta^-1 w neighborhood covers the cube.

    Max distance from the cube to the axis line is attained at a vertex
    (convexity), so the check is a finite corner computation.  Under the step
    preconditions (cube side <= delta^-1 w / 10n, tube meets the cube at
    radius w, delta <= 0.9) this always holds.
    """
    return cube_line_max_distance(cube, tube.line) <= w / delta


def _validate_small_angle(families, delta: float) -> None:
    for f in families:
        for m in f.members:
            g = m.geometry
            if isinstance(g, Tube):
                ang = angle_from_axis(g.line.direction, f.axis)
                if ang > delta + 1e-9:
                    raise ValidationError(
                        f"axis-{f.axis} tube at angle {ang:.3e} exceeds delta {delta:.3e}"
                    )
            elif isinstance(g, LipschitzCurve):
                if g.lip > delta * (1.0 + 1e-9):
                    raise ValidationError(
                        f"curve Lipschitz constant {g.lip:.3e} exceeds delta {delta:.3e}"
                    )


def _common_radius(families) -> float:
    w = families[0].base_radius
    for f in families:
        if abs(f.base_radius - w) > 1e-12 * w:
            raise ValidationError("all families must share one base radius")
    return w


def _check_step_delta(delta: float) -> None:
    if not (0.0 < delta <= MAX_STEP_DELTA):
        raise ValidationError(
            f"step arguments require delta in (0, {MAX_STEP_DELTA}]; got {delta!r}"
        )


def _subcube_counts(families, cube: Cube, delta: float, w: float):
    """Subdivide and count members per subcube; returns (los, side, counts).

    ``counts`` has shape (n_families, n_subcubes).
    """
    k, sub_side = subdivision_counts(cube, delta, w)
    los = subcube_grid(cube, k)
    his = los + sub_side
    counts = np.empty((len(families), los.shape[0]))
    for j, f in enumerate(sorted(families, key=lambda fam: fam.axis)):
        if f.members:
            counts[j] = np.sum(_member_box_distances(f, los, his) <= w, axis=0)
        else:
            counts[j] = 0.0
    return los, sub_side, counts


def step_numeric_bound(n: int, c_lw: float, w: float, counts: np.ndarray) -> float:
    """sum_Q c_lw W^n prod_j N_j(Q)^(1/(n-1)) over the subcubes."""
    p = 1.0 / (n - 1.0)
    prods = np.prod(np.power(counts, p), axis=0)
    return c_lw * w**n * float(np.sum(prods))


def step_bound(families, cube: Cube, delta: float) -> StepBound:
    """Per-subcube Loomis-Whitney bound for one scale step.

    Requires cube side >= delta^-1 W, a shared base radius, and member
    angles (tubes) / Lipschitz constants (curves) at most delta.
    """
    n = check_families(families)
    _check_step_delta(delta)
    w = _common_radius(families)
    if cube.side < w / delta * (1.0 - 1e-12):
        raise ValidationError("step requires cube side >= delta^-1 W")
    _validate_small_angle(families, delta)
    consts = Constants.for_dimension(n)
    los, sub_side, counts = _subcube_counts(families, cube, delta, w)
    subcubes = tuple(
        (Cube(lo, sub_side), tuple(int(c) for c in counts[:, i]))
        for i, lo in enumerate(los)
    )
    return StepBound(w, delta, subcubes, step_numeric_bound(n, consts.c_lw, w, counts))


def verify_step_inequality(
    families, cube: Cube, delta: float, grid: GridSpec, *, threads: int = 1
) -> StepVerification:
    """Quadrature check of the one-step inequality.

    Evaluates both scales on the same grid and returns
    LHS / (c_step * delta^n * RHS); the contract is ratio <= 1 plus the
    combined quadrature tolerance.  An identically-zero instance is reported
    as ratio 0 with the degenerate flag.
    """
    n = check_families(families)
    _check_step_delta(delta)
    w = _common_radius(families)
    if cube.side < w / delta * (1.0 - 1e-12):
        raise ValidationError("step requires cube side >= delta^-1 W")
    _validate_small_angle(families, delta)
    consts = Constants.for_dimension(n)
    lhs = evaluate_overlap(families, cube, grid, threads=threads).value
    coarse = [w / delta] * n
    rhs = evaluate_overlap(families, cube, grid, radii=coarse, threads=threads).value
    bound = consts.c_step * delta**n * rhs
    if bound == 0.0:
        return StepVerification(lhs, rhs, bound, 0.0, degenerate=True)
    return StepVerification(lhs, rhs, bound, lhs / bound, degenerate=False)


def cover_for_arbitrary_s(cube: Cube, delta: float, m_steps: int) -> CubeCover:
    """Cover the cube by axis-aligned cubes of side delta^-m_steps."""
    if not (0.0 < delta < 1.0):
        raise ValidationError("delta must lie in (0, 1)")
    if m_steps < 0:
        raise ValidationError("m_steps must be >= 0")
    side = delta ** (-m_steps)
    per_side = max(1, math.ceil(cube.side / side - 1e-12))
    n = cube.n
    offsets = subcube_grid(Cube(cube.min_corner, per_side * side), per_side)
    return CubeCover(tuple(Cube(lo, side) for lo in offsets), per_side**n)


def scale_count(s: float, delta: float) -> int:
    """Smallest integer M >= 0 with delta^-M >= S."""
    if s <= 1.0:
        return 0
    m = math.ceil(math.log(s) / math.log(1.0 / delta) - 1e-9)
    m = max(0, m)
    while delta ** (-m) < s * (1.0 - 1e-9):
        m += 1
    return m


def certify_multiscale(
    families,
    cube: Cube,
    delta: float,
    *,
    detail_budget: int = DEFAULT_DETAIL_BUDGET,
) -> Certificate:
    """Run the multiscale chain and emit the certified bound.

    Preconditions: cube side >= 1, unit base radius, member angles (tubes)
    and Lipschitz constants (curves) at most delta.  The chain is run on an
    enlarged cube of side delta^-M >= S sharing the min corner, which contains
    the requested cube, so the bound applies to it.
    """
    n = check_families(families)
    _check_step_delta(delta)
    if cube.side < 1.0 - 1e-12:
        raise ValidationError("certification requires cube side >= 1")
    w = _common_radius(families)
    if abs(w - 1.0) > 1e-12:
        raise ValidationError("certification requires unit base radius")
    _validate_small_angle(families, delta)
    _check_curve_spans(families, cube)
    consts = Constants.for_dimension(n)
    m_steps = scale_count(cube.side, delta)
    cover = cover_for_arbitrary_s(cube, delta, m_steps)
    counts = tuple(
        f.total_weight for f in sorted(families, key=lambda fam: fam.axis)
    )
    p = 1.0 / (n - 1.0)
    count_product = float(np.prod([c**p for c in counts]))
    final_bound = cover.multiplicity * consts.c_step**m_steps * count_product
    ladder = tuple(delta ** (-k) for k in range(m_steps + 1))
    chain_cube = Cube(cube.min_corner, ladder[-1])
    details = []
    for k in range(m_steps):
        w_k = ladder[k]
        per_side, sub_side = subdivision_counts(chain_cube, delta, w_k)
        if per_side**n > detail_budget:
            details.append(None)
            continue
        _, _, step_counts = _subcube_counts(families, chain_cube, delta, w_k)
        hists = []
        for j in range(n):
            vals, freq = np.unique(step_counts[j].astype(int), return_counts=True)
            hists.append({int(v): int(c) for v, c in zip(vals, freq)})
        details.append(
            StepDetail(
                w_k,
                sub_side,
                step_counts.shape[1],
                tuple(hists),
                step_numeric_bound(n, consts.c_lw, w_k, step_counts),
            )
        )
    return Certificate(
        n=n,
        delta=delta,
        m_steps=m_steps,
        ladder=ladder,
        c_lw=consts.c_lw,
        c_step=consts.c_step,
        counts=counts,
        covering_multiplicity=cover.multiplicity,
        final_bound=final_bound,
        epsilon_exponent=math.log(consts.c_step) / math.log(1.0 / delta),
        step_details=tuple(details),
    )


def delta_for_epsilon(eps: float, consts: Constants) -> float:
    """delta with log(c_step)/log(delta^-1) = eps, i.e. exp(-log(c_step)/eps)."""
    if not (eps > 0.0):
        raise ValidationError("epsilon must be positive")
    delta = math.exp(-math.log(consts.c_step) / eps)
    if delta < 1e-300:
        raise ValidationError(
            f"epsilon {eps!r} demands delta below 1e-300 (underflow)"
        )
    return delta


def check_certificate_soundness(
    certificate: Certificate, value: OverlapValue, tol: float = 0.0
) -> bool:
    """value <= final_bound + tol + the value's own error estimate."""
    slack = tol + (value.error_estimate or 0.0)
    return value.value <= certificate.final_bound + slack
