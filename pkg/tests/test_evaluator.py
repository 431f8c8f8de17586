import math

import numpy as np
import pytest

from kakeya.errors import CellBudgetExceeded, ValidationError
from kakeya.evaluator import (
    GridSpec,
    average_integral,
    evaluate_overlap,
    evaluate_refined,
    exact_overlap_2d,
    overlap_integrand,
)
from kakeya.geometry import Cube, Direction, Line, LipschitzCurve, Tube

from conftest import axis_tube_family, family, tube

TRICYLINDER = 8.0 * (2.0 - math.sqrt(2.0))


def perpendicular(radius=1.0):
    f1 = family(0, 2, [tube([0.0, 0.0], [1.0, 0.0], radius)], radius)
    f2 = family(1, 2, [tube([0.0, 0.0], [0.0, 1.0], radius)], radius)
    return [f1, f2]


class TestIntegrand:
    def test_single_tubes(self):
        fams = perpendicular()
        assert overlap_integrand(fams, [[0.0, 0.0]])[0] == 1.0

    def test_sqrt_exponent_n3(self):
        # 4 tubes through the origin in family 0 -> 4^(1/2) * 1 * 1 = 2
        f0 = family(0, 3, [tube([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]) for _ in range(4)])
        f1 = family(1, 3, [tube([0.0, 0.0, 0.0], [0.0, 1.0, 0.0])])
        f2 = family(2, 3, [tube([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])])
        assert overlap_integrand([f0, f1, f2], [[0.0, 0.0, 0.0]])[0] == 2.0

    def test_zero_factor(self):
        fams = perpendicular()
        assert overlap_integrand(fams, [[0.0, 5.0]])[0] == 0.0

    def test_requires_complete_axes(self):
        f1 = family(0, 2, [tube([0.0, 0.0], [1.0, 0.0])])
        with pytest.raises(ValidationError):
            overlap_integrand([f1, f1], [[0.0, 0.0]])


class TestEvaluateOverlap:
    def test_perpendicular_strips(self, cube2):
        v = evaluate_overlap(perpendicular(), cube2, GridSpec(200))
        assert abs(v.value - 4.0) / 4.0 < 0.02

    def test_tricylinder(self):
        cube = Cube.centered([0.0, 0.0, 0.0], 10.0)
        fams = [
            family(j, 3, [Tube(Line(np.zeros(3), Direction.axis(3, j)), 1.0)])
            for j in range(3)
        ]
        v = evaluate_overlap(fams, cube, GridSpec(128))
        assert abs(v.value - TRICYLINDER) / TRICYLINDER < 0.05

    def test_empty_families_exact_zero(self, cube2):
        fams = [family(0, 2, []), family(1, 2, [])]
        v = evaluate_overlap(fams, cube2, GridSpec(64))
        assert v.value == 0.0

    def test_error_estimate_availability(self, cube2):
        fams = perpendicular()
        assert evaluate_overlap(fams, cube2, GridSpec(64)).error_estimate is not None
        assert evaluate_overlap(fams, cube2, GridSpec(65)).error_estimate is None

    def test_cell_budget(self, cube2):
        with pytest.raises(CellBudgetExceeded):
            evaluate_overlap(perpendicular(), cube2, GridSpec(100), cell_budget=100)

    def test_thread_count_invariance(self, cube2, rng):
        fams = [
            family(
                j,
                2,
                [
                    tube(rng.uniform(-4, 4, 2), np.eye(2)[j] + 0.05 * rng.normal(size=2))
                    for _ in range(4)
                ],
            )
            for j in range(2)
        ]
        v1 = evaluate_overlap(fams, cube2, GridSpec(128), threads=1)
        v8 = evaluate_overlap(fams, cube2, GridSpec(128), threads=8)
        assert v1.value == v8.value

    def test_monotone_in_radius(self, cube2, rng):
        anchors = rng.uniform(-4, 4, (3, 2))
        small = [axis_tube_family(j, 2, anchors, radius=0.8) for j in range(2)]
        big = [f.with_radius(1.1) for f in small]
        g = GridSpec(100)
        assert evaluate_overlap(small, cube2, g).value <= evaluate_overlap(big, cube2, g).value

    def test_superadditive_in_members(self, cube2, rng):
        anchors = rng.uniform(-4, 4, (3, 2))
        base = [axis_tube_family(j, 2, anchors) for j in range(2)]
        grown = [
            family(0, 2, [m.geometry for m in base[0].members] + [tube([0.3, 0.1], [1.0, 0.0])]),
            base[1],
        ]
        g = GridSpec(100)
        assert evaluate_overlap(base, cube2, g).value <= evaluate_overlap(grown, cube2, g).value

    def test_weight_scaling_power_of_two_exact(self, cube2, rng):
        # scaling one family's weights by 4 scales the value by 4^(1/(n-1))
        # bit-exactly: multiplication by a power of two commutes with every
        # float operation used (sums, sqrt, products)
        for n, lam, factor in ((2, 4.0, 4.0), (3, 4.0, 2.0)):
            cube = Cube.centered(np.zeros(n), 8.0)
            anchors = rng.uniform(-3, 3, (3, n))
            weights = list(rng.uniform(0.5, 2.0, 3))
            fams = [axis_tube_family(j, n, anchors, weights=weights) for j in range(n)]
            scaled = [
                axis_tube_family(0, n, anchors, weights=[lam * w for w in weights])
            ] + fams[1:]
            g = GridSpec(32)
            v = evaluate_overlap(fams, cube, g).value
            vs = evaluate_overlap(scaled, cube, g).value
            assert vs == factor * v

    def test_weight_scaling_general(self, cube2, rng):
        lam = 1.7
        anchors = rng.uniform(-3, 3, (3, 2))
        fams = [axis_tube_family(j, 2, anchors) for j in range(2)]
        scaled = [axis_tube_family(0, 2, anchors, weights=[lam] * 3), fams[1]]
        g = GridSpec(64)
        v = evaluate_overlap(fams, cube2, g).value
        vs = evaluate_overlap(scaled, cube2, g).value
        assert abs(vs - lam * v) <= 1e-12 * max(vs, 1.0)

    def test_translation_invariance(self, rng):
        shift = np.array([1.25, -2.5])
        anchors = rng.uniform(-3, 3, (2, 2))
        fams = [axis_tube_family(j, 2, anchors) for j in range(2)]
        moved = [axis_tube_family(j, 2, anchors + shift) for j in range(2)]
        cube = Cube.centered([0.0, 0.0], 9.0)
        cube_moved = Cube(cube.min_corner + shift, cube.side)
        g = GridSpec(90)
        a = evaluate_overlap(fams, cube, g).value
        b = evaluate_overlap(moved, cube_moved, g).value
        assert abs(a - b) <= 1e-12 * max(a, 1.0)


class TestEvaluateRefined:
    def test_converges_to_exact_slab(self):
        # strip boundaries on cell edges at every doubling level: the
        # midpoint rule is exact and refinement settles immediately
        cube = Cube.centered([0.0, 0.0], 8.0)
        v = evaluate_refined(perpendicular(), cube, 1e-3, 8)
        assert v.converged
        assert abs(v.value - 4.0) / 4.0 < 1e-3

    def test_value_within_trivial_bounds(self, cube2, rng):
        anchors = rng.uniform(-4, 4, (4, 2))
        fams = [axis_tube_family(j, 2, anchors) for j in range(2)]
        v = evaluate_refined(fams, cube2, 1e-2, 5)
        bound = cube2.volume * np.prod([f.total_weight for f in fams])
        assert 0.0 <= v.value <= bound

    def test_matches_exact_oracle_50_configs(self, rng):
        # module invariant: <1% vs the clipping oracle under refinement,
        # 50 random configurations
        cube = Cube.centered([0.0, 0.0], 8.0)
        checked = 0
        for _ in range(50):
            fams = [
                family(
                    j,
                    2,
                    [
                        tube(
                            rng.uniform(-3, 3, 2),
                            np.eye(2)[j] + 0.08 * rng.normal(size=2),
                        )
                        for _ in range(3)
                    ],
                )
                for j in range(2)
            ]
            v = evaluate_refined(fams, cube, 2e-3, 6, start_cells=64)
            exact = exact_overlap_2d(fams, cube)
            if exact > 0.1:
                checked += 1
                assert abs(v.value - exact) / exact < 0.01
        assert checked >= 40

    def test_nonconvergence_flag(self, cube2):
        v = evaluate_refined(perpendicular(), cube2, 1e-12, 1)
        assert not v.converged


class TestExactOverlap2d:
    def test_perpendicular(self, cube2):
        assert abs(exact_overlap_2d(perpendicular(), cube2) - 4.0) < 1e-12

    def test_oblique_strips(self):
        # strips of width 2 crossing at angle pi/6: area 2*2/sin(pi/6) = 8
        theta = math.pi / 6
        f1 = family(0, 2, [tube([0.0, 0.0], [1.0, 0.0])])
        f2 = family(1, 2, [tube([0.0, 0.0], [math.cos(theta), math.sin(theta)])])
        cube = Cube.centered([0.0, 0.0], 100.0)
        assert abs(exact_overlap_2d([f1, f2], cube) - 8.0) < 1e-9

    def test_parallel_disjoint(self, cube2):
        f1 = family(0, 2, [tube([0.0, -3.0], [1.0, 0.0])])
        f2 = family(1, 2, [])
        assert exact_overlap_2d([f1, f2], cube2) == 0.0
        g1 = axis_tube_family(0, 2, [[0.0, -3.0]])
        g2 = axis_tube_family(1, 2, [[30.0, 0.0]])
        assert exact_overlap_2d([g1, g2], cube2) == 0.0

    def test_weights_bilinear(self, cube2):
        fams = perpendicular()
        weighted = [
            family(0, 2, [fams[0].members[0].geometry], weights=[2.5]),
            family(1, 2, [fams[1].members[0].geometry], weights=[3.0]),
        ]
        assert abs(exact_overlap_2d(weighted, cube2) - 2.5 * 3.0 * 4.0) < 1e-12

    def test_rejects_n3_and_curves(self):
        cube3 = Cube.centered([0.0, 0.0, 0.0], 4.0)
        fams3 = [
            family(j, 3, [Tube(Line(np.zeros(3), Direction.axis(3, j)), 1.0)])
            for j in range(3)
        ]
        with pytest.raises(ValidationError):
            exact_overlap_2d(fams3, cube3)
        curve = LipschitzCurve(0, [-10.0, 10.0], [[0.0], [0.0]], 0.0)
        fams = [
            family(0, 2, [curve]),
            family(1, 2, [tube([0.0, 0.0], [0.0, 1.0])]),
        ]
        with pytest.raises(ValidationError):
            exact_overlap_2d(fams, Cube.centered([0.0, 0.0], 4.0))


class TestCurveEvaluation:
    def test_affine_curve_matches_tube_exactly(self, rng):
        # a 2-breakpoint curve spanning far beyond the cube is the same set
        # as its straight tube, so fixed-grid evaluation is bit-identical
        slope = 0.04
        span = 200.0
        curve = LipschitzCurve(
            0, [-span, span], [[-span * slope + 0.5], [span * slope + 0.5]], slope
        )
        straight = tube([0.0, 0.5], [1.0, slope])
        partner = family(1, 2, [tube([0.2, 0.0], [0.0, 1.0])])
        cube = Cube.centered([0.0, 0.0], 10.0)
        g = GridSpec(128)
        vc = evaluate_overlap([family(0, 2, [curve]), partner], cube, g)
        vt = evaluate_overlap([family(0, 2, [straight]), partner], cube, g)
        assert vc.value == vt.value

    def test_rejects_short_span(self):
        curve = LipschitzCurve(0, [-1.0, 1.0], [[0.0], [0.0]], 0.0)
        fams = [
            family(0, 2, [curve]),
            family(1, 2, [tube([0.0, 0.0], [0.0, 1.0])]),
        ]
        with pytest.raises(ValidationError):
            evaluate_overlap(fams, Cube.centered([0.0, 0.0], 10.0), GridSpec(16))


class TestAverageIntegral:
    def test_example(self):
        v = evaluate_overlap(perpendicular(), Cube.centered([0.0, 0.0], 2.0), GridSpec(8))
        from kakeya.evaluator import OverlapValue

        assert average_integral(OverlapValue(8.0, 0.0, GridSpec(8)), Cube.centered([0.0, 0.0], 2.0)) == 2.0

    def test_pointwise_count_bound(self, cube2, rng):
        anchors = rng.uniform(-4, 4, (4, 2))
        fams = [axis_tube_family(j, 2, anchors) for j in range(2)]
        v = evaluate_overlap(fams, cube2, GridSpec(100))
        counts = np.prod([f.total_weight for f in fams]) ** (1.0 / 1.0)
        assert average_integral(v, cube2) <= counts + 1e-12

    def test_zero(self):
        from kakeya.evaluator import OverlapValue

        assert average_integral(OverlapValue(0.0, 0.0, GridSpec(4)), Cube.centered([0.0, 0.0], 3.0)) == 0.0
