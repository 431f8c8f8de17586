"""Reduction of general-angle problems to certified small-angle subproblems.

Directions are partitioned into spherical caps, each cap tuple is mapped by
the linear change of coordinates sending cap centers to the coordinate axes,
tube radii are inflated by the map's maximal length distortion, and the whole
problem is rescaled to unit radius.  The reassembled bound

    sum over subproblems of distortion_factor * certificate(subproblem)

dominates the original integral: the cap split is pointwise subadditive for
the exponent 1/(n-1) <= 1, and for each subproblem

    int_{Q} prod_j (sum_{caps} T)^{1/(n-1)}
      <= |det Map|^{-1} * (sigma_max W)^n * int_{Q''} (unit-radius image),

with Q'' an axis-aligned cube containing the mapped, rescaled cube.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .certifier import Constants, delta_for_epsilon
from .errors import PropertyViolation, ValidationError
from .evaluator import (
    FamilyMember,
    GridSpec,
    TubeFamily,
    check_families,
    evaluate_overlap,
)
from .geometry import (
    Cap,
    Cube,
    Direction,
    LinearMap,
    Line,
    Tube,
    angle_from_axis,
    cap_cover,
    frame_map,
    wedge_volume,
)


@dataclass(frozen=True, eq=False)
class ReducedProblem:
    """One small-angle subproblem with its bound bookkeeping multiplier."""

    map: LinearMap
    families: tuple  # TubeFamily per axis, unit radius, angles <= delta
    cube: Cube
    distortion_factor: float
    delta: float
    cap_indices: tuple

    def to_json(self) -> dict:
        return {
            "cap_indices": list(self.cap_indices),
            "delta": self.delta,
            "distortion_factor": self.distortion_factor,
            "matrix": self.map.matrix.tolist(),
            "length_distortion": list(self.map.length_distortion),
            "volume_distortion": self.map.volume_distortion,
            "cube": {"min_corner": self.cube.min_corner.tolist(), "side": self.cube.side},
            "member_counts": [f.size for f in self.families],
        }


def split_by_caps(family: TubeFamily, caps: list[Cap]) -> list[TubeFamily]:
    """Partition members by the first cap containing their direction.

    Every member direction must lie in some cap; the output list has one
    (possibly empty) family per cap and preserves the member multiset.
    """
    buckets: list[list[FamilyMember]] = [[] for _ in caps]
    for m in family.members:
        g = m.geometry
        if not isinstance(g, Tube):
            raise ValidationError("cap splitting applies to straight tubes only")
        placed = False
        for i, cap in enumerate(caps):
            if cap.contains_line_direction(g.line.direction, tol=1e-12):
                buckets[i].append(m)
                placed = True
                break
        if not placed:
            raise ValidationError("a member direction lies in no cap")
    return [
        TubeFamily(family.axis, family.dim, tuple(b), family.base_radius)
        for b in buckets
    ]


def _oriented(direction: Direction, axis: int) -> np.ndarray:
    comps = direction.components
    return comps if comps[axis] >= 0.0 else -comps


def _transform_problem(families, cube, lmap, delta, cap_indices) -> ReducedProblem:
    """Map a cap-tuple subproblem by ``lmap`` and rescale to unit radius."""
    sigma_max = lmap.length_distortion[1]
    w = families[0].base_radius
    scale = 1.0 / (sigma_max * w)
    out_families = []
    for f in families:
        members = []
        for m in f.members:
            tube = m.geometry
            d = _oriented(tube.line.direction, f.axis)
            anchor = scale * lmap.apply(tube.line.anchor)
            new_dir = Direction.normalized(lmap.matrix @ d)
            ang = angle_from_axis(new_dir, f.axis)
            if ang > delta * (1.0 + 1e-9):
                raise PropertyViolation(
                    f"transformed angle {ang:.3e} exceeds delta {delta:.3e}"
                )
            members.append(FamilyMember(Tube(Line(anchor, new_dir), 1.0), m.weight))
        out_families.append(TubeFamily(f.axis, f.dim, tuple(members), 1.0))
    mapped = scale * lmap.apply(cube.corners())
    lo = mapped.min(axis=0)
    hi = mapped.max(axis=0)
    side = float(np.max(hi - lo)) * (1.0 + 1e-12)
    side = max(side, 1.0)
    out_cube = Cube.centered(0.5 * (lo + hi), side)
    distortion = sigma_max**cube.n * w**cube.n / lmap.volume_distortion
    return ReducedProblem(
        map=lmap,
        families=tuple(out_families),
        cube=out_cube,
        distortion_factor=distortion,
        delta=delta,
        cap_indices=tuple(cap_indices),
    )


def _reduce_with_caps(families, cube, covers, delta) -> list[ReducedProblem]:
    split = [split_by_caps(f, covers[f.axis]) for f in sorted(families, key=lambda f: f.axis)]
    problems = []
    nonempty = [
        [i for i, sub in enumerate(subs) if sub.members] for subs in split
    ]
    for combo in itertools.product(*nonempty):
        centers = [covers[j][combo[j]].center for j in range(len(covers))]
        lmap = frame_map(centers)
        tuple_families = [split[j][combo[j]] for j in range(len(covers))]
        problems.append(_transform_problem(tuple_families, cube, lmap, delta, combo))
    return problems


def reduce_general_to_small_angle(
    families, cube: Cube, eps: float, *, consts: Constants | None = None
) -> list[ReducedProblem]:
    """Split a general-angle problem (angles <= (10n)^-1) into cap tuples.

    Uses caps of radius delta/10 with delta = delta_for_epsilon(eps).  Each
    nonempty cap tuple yields one ReducedProblem whose transformed angles are
    re-validated against delta (never assumed).
    """
    n = check_families(families)
    consts = consts or Constants.for_dimension(n)
    limit = 1.0 / (10.0 * n)
    for f in families:
        for m in f.members:
            if not isinstance(m.geometry, Tube):
                raise ValidationError("reduction applies to straight tubes only")
            ang = angle_from_axis(m.geometry.line.direction, f.axis)
            if ang > limit * (1.0 + 1e-9):
                raise ValidationError(
                    f"member angle {ang:.3e} exceeds the (10n)^-1 limit {limit:.3e}"
                )
    delta = delta_for_epsilon(eps, consts)
    rho = delta / 10.0
    covers = [cap_cover(Cap(Direction.axis(n, j), limit), min(rho, limit)) for j in range(n)]
    return _reduce_with_caps(families, cube, covers, delta)


def transversal_sigma_bound(n: int, nu: float) -> float:
    """A priori bound on the frame map's max singular value: 2 sqrt(n)^(n-1)/nu."""
    return 2.0 * math.sqrt(n) ** (n - 1) / nu


def transversal_reduce(
    families,
    cube: Cube,
    direction_sets: list[Cap],
    nu: float,
    eps: float,
    *,
    consts: Constants | None = None,
) -> list[ReducedProblem]:
    """Reduction under the wedge (transversality) hypothesis.

    ``direction_sets`` are caps containing each family's directions; any
    tuple of directions from them must have wedge volume >= nu.  Cap radius is
    rho = min(nu/(100n), delta/(2 L)) with L = transversal_sigma_bound, which
    keeps every cap tuple's wedge >= nu/2 and every transformed angle <= delta;
    a cap tuple whose center wedge drops below nu/2 is rejected as a
    precondition violation.  Distortion factors are computed from the actual
    frame maps (the a priori Poly(nu^-1) bound L^n is only a ceiling).
    """
    n = check_families(families)
    if len(direction_sets) != n:
        raise ValidationError("need one direction cap per axis")
    if not (0.0 < nu <= 1.0):
        raise ValidationError("nu must lie in (0, 1]")
    consts = consts or Constants.for_dimension(n)
    for f in sorted(families, key=lambda f: f.axis):
        cap = direction_sets[f.axis]
        for m in f.members:
            if not isinstance(m.geometry, Tube):
                raise ValidationError("reduction applies to straight tubes only")
            if not cap.contains_line_direction(m.geometry.line.direction, tol=1e-9):
                raise ValidationError(
                    f"axis-{f.axis} member direction escapes its direction set"
                )
    delta = delta_for_epsilon(eps, consts)
    sigma = transversal_sigma_bound(n, nu)
    rho = min(nu / (100.0 * n), delta / (2.0 * sigma))
    covers = [
        cap_cover(cap, min(rho, cap.ang_radius)) for cap in direction_sets
    ]
    split = [
        split_by_caps(f, covers[f.axis])
        for f in sorted(families, key=lambda f: f.axis)
    ]
    nonempty = [[i for i, sub in enumerate(subs) if sub.members] for subs in split]
    problems = []
    for combo in itertools.product(*nonempty):
        centers = [covers[j][combo[j]].center for j in range(n)]
        wedge = wedge_volume(centers)
        if wedge < nu / 2.0:
            raise ValidationError(
                f"cap tuple {combo} has center wedge {wedge:.3e} < nu/2; "
                "the transversality precondition is violated"
            )
        lmap = frame_map(centers)
        tuple_families = [split[j][combo[j]] for j in range(n)]
        problems.append(_transform_problem(tuple_families, cube, lmap, delta, combo))
    return problems


def weighted_multiplicity_check(
    families, cube: Cube, grid: GridSpec, *, threads: int = 1
) -> bool:
    """Integer-weight evaluation equals the multiplicity-expanded evaluation.

    Both runs use the same grid; equality is required bit-for-bit (integer
    weights sum exactly in floating point).
    """
    check_families(families)
    expanded = [f.expand_integer_weights() for f in families]
    v_weighted = evaluate_overlap(families, cube, grid, threads=threads)
    v_expanded = evaluate_overlap(expanded, cube, grid, threads=threads)
    return v_weighted.value == v_expanded.value
