"""Scale sweeps probing the S^epsilon factor, and extremal-ratio search.

The sweep generates a configuration per scale S from one seed, evaluates the
overlap integral, certifies it, and fits the slope of log(ratio) against
log(S).  The search is greedy hill climbing with restarts (optionally
annealed) over anchor/direction perturbations; its objective is a fixed-grid
evaluate_overlap, so traces are deterministic and exactly reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .certifier import Certificate, certify_multiscale
from .errors import ValidationError
from .evaluator import (
    FamilyMember,
    GridSpec,
    OverlapValue,
    TubeFamily,
    evaluate_overlap,
    evaluate_refined,
)
from .geometry import Cube, Line, Tube
from .generators import AxisParallel, GenSpec, SmallAngle, Weighted, _direction_in_cap, generate

SWEEP_CSV_COLUMNS = (
    "s",
    "value",
    "error_estimate",
    "cells_per_side",
    "converged",
    "certified_bound",
    "ratio",
    "flagged",
)

SEARCH_CSV_COLUMNS = ("iteration", "restart", "accepted_ratio", "best_ratio")


@dataclass(frozen=True, eq=False)
class SweepRow:
    s: float
    value: OverlapValue
    certificate: Certificate
    ratio: float
    flagged: bool

    def csv_fields(self) -> tuple:
        return (
            self.s,
            self.value.value,
            self.value.error_estimate,
            self.value.grid.cells_per_side,
            self.value.converged,
            self.certificate.final_bound,
            self.ratio,
            self.flagged,
        )

    def to_json(self) -> dict:
        return {
            "s": self.s,
            "value": self.value.to_json(),
            "certificate": self.certificate.to_json(),
            "ratio": self.ratio,
            "flagged": self.flagged,
        }


@dataclass(frozen=True, eq=False)
class SweepResult:
    rows: tuple
    slope: float | None

    def to_json(self) -> dict:
        return {"rows": [r.to_json() for r in self.rows], "slope": self.slope}


def _count_normalizer(families) -> float:
    n = families[0].dim
    p = 1.0 / (n - 1.0)
    return float(np.prod([f.total_weight**p for f in families]))


def sweep_scale(
    template: GenSpec,
    s_values,
    delta: float,
    *,
    tol: float = 1e-2,
    max_doublings: int = 5,
    start_cells: int = 16,
    threads: int = 1,
) -> SweepResult:
    """Evaluate + certify the template configuration at each scale S.

    Rows with non-convergent quadrature are flagged and excluded from the
    least-squares slope fit of log(ratio) against log(S).
    """
    s_values = [float(s) for s in s_values]
    if not s_values or any(s < 1.0 for s in s_values) or sorted(s_values) != s_values:
        raise ValidationError("s_values must be increasing and >= 1")
    if not isinstance(template.regime, (AxisParallel, SmallAngle, Weighted)):
        raise ValidationError("sweeps need an axis_parallel/small_angle/weighted template")
    if isinstance(template.regime, (SmallAngle, Weighted)) and template.regime.delta > delta:
        raise ValidationError("template angles exceed the certification delta")
    rows = []
    for s in s_values:
        cube = Cube.centered(np.zeros(template.n), s)
        families = generate(template.with_cube(cube))
        value = evaluate_refined(
            families, cube, tol, max_doublings, start_cells=start_cells, threads=threads
        )
        certificate = certify_multiscale(families, cube, delta)
        norm = _count_normalizer(families)
        ratio = value.value / norm if norm > 0.0 else 0.0
        rows.append(SweepRow(s, value, certificate, ratio, flagged=not value.converged))
    fit = [(r.s, r.ratio) for r in rows if not r.flagged and r.ratio > 0.0]
    slope = None
    if len(fit) >= 2:
        xs = np.log([f[0] for f in fit])
        ys = np.log([f[1] for f in fit])
        slope = float(np.polyfit(xs, ys, 1)[0])
    return SweepResult(tuple(rows), slope)


@dataclass(frozen=True, eq=False)
class SearchState:
    families: tuple
    ratio: float
    best_ratio: float
    iteration: int
    temperature: float


@dataclass(frozen=True, eq=False)
class SearchTracePoint:
    iteration: int
    restart: int
    accepted_ratio: float
    best_ratio: float

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "restart": self.restart,
            "accepted_ratio": self.accepted_ratio,
            "best_ratio": self.best_ratio,
        }


@dataclass(frozen=True, eq=False)
class SearchResult:
    best_families: tuple
    best_ratio: float
    trace: tuple

    def to_json(self) -> dict:
        return {
            "best_ratio": self.best_ratio,
            "trace": [t.to_json() for t in self.trace],
        }


def _perturb(rng, families, cube: Cube, angle_limit: float, step: float):
    """Move one random member's anchor and direction inside the regime."""
    fams = [list(f.members) for f in families]
    j = int(rng.integers(0, len(families)))
    if not fams[j]:
        return families
    a = int(rng.integers(0, len(fams[j])))
    member = fams[j][a]
    tube = member.geometry
    anchor = tube.line.anchor + rng.uniform(-step, step, cube.n) * cube.side * 0.05
    anchor = np.clip(anchor, cube.min_corner, cube.max_corner)
    if angle_limit > 0.0:
        direction = _direction_in_cap(rng, cube.n, families[j].axis, angle_limit)
    else:
        direction = tube.line.direction
    fams[j][a] = FamilyMember(Tube(Line(anchor, direction), tube.radius), member.weight)
    return tuple(
        TubeFamily(f.axis, f.dim, tuple(ms), f.base_radius)
        for f, ms in zip(families, fams)
    )


def extremal_search(
    n: int,
    counts,
    cube: Cube,
    budget: int,
    seed: int,
    *,
    angle_limit: float | None = None,
    grid: GridSpec = GridSpec(128),
    restarts: int = 4,
    annealing: bool = False,
    t0: float = 0.1,
    cooling: float = 0.95,
    threads: int = 1,
) -> SearchResult:
    """Maximize value / prod_j N_j^(1/(n-1)) by perturbation search.

    Greedy by default (accept only improvements); with ``annealing`` worse
    moves are accepted with probability exp(delta_ratio / T) under the cooling
    schedule.  The budget is split evenly across restarts; the global
    best-so-far in the trace is non-decreasing.
    """
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    limit = 1.0 / (10.0 * n) if angle_limit is None else angle_limit
    rng = np.random.default_rng(seed)
    norm = float(np.prod([c ** (1.0 / (n - 1.0)) for c in counts]))

    def objective(fams) -> float:
        return evaluate_overlap(fams, cube, grid, threads=threads).value / norm

    per_restart = max(1, budget // max(1, restarts))
    best_families = None
    best_ratio = -math.inf
    trace = []
    iteration = 0
    restart = 0
    while iteration < budget:
        spec = GenSpec(
            n,
            tuple(counts),
            SmallAngle(limit) if limit > 0.0 else AxisParallel(),
            cube,
            int(rng.integers(0, 2**63)),
        )
        current = tuple(generate(spec))
        current_ratio = objective(current)
        temp = t0
        if current_ratio > best_ratio:
            best_ratio, best_families = current_ratio, current
        trace.append(SearchTracePoint(iteration, restart, current_ratio, best_ratio))
        iteration += 1
        steps = min(per_restart - 1, budget - iteration)
        for _ in range(steps):
            cand = _perturb(rng, current, cube, limit, step=1.0)
            cand_ratio = objective(cand)
            accept = cand_ratio > current_ratio
            if not accept and annealing and temp > 0.0:
                accept = rng.uniform() < math.exp((cand_ratio - current_ratio) / temp)
            if accept:
                current, current_ratio = cand, cand_ratio
            if current_ratio > best_ratio:
                best_ratio, best_families = current_ratio, current
            trace.append(SearchTracePoint(iteration, restart, current_ratio, best_ratio))
            iteration += 1
            temp *= cooling
        restart += 1
    return SearchResult(best_families, best_ratio, tuple(trace))
