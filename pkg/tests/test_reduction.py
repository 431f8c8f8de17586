import numpy as np
import pytest

from kakeya.certifier import Constants, certify_multiscale, delta_for_epsilon
from kakeya.errors import ValidationError
from kakeya.evaluator import GridSpec, evaluate_overlap, exact_overlap_2d
from kakeya.generators import GeneralAngle, GenSpec, SmallAngle, generate
from kakeya.geometry import (
    Cap,
    Cube,
    Direction,
    angle_from_axis,
    cap_cover,
    wedge_volume,
)
from kakeya.reduction import (
    reduce_general_to_small_angle,
    split_by_caps,
    transversal_reduce,
    transversal_sigma_bound,
    weighted_multiplicity_check,
)

from conftest import axis_tube_family, family, tube


class TestSplitByCaps:
    def test_single_covering_cap(self):
        f = family(0, 2, [tube([0.0, 0.0], [1.0, 0.02]), tube([1.0, 0.0], [1.0, -0.03])])
        caps = [Cap(Direction.axis(2, 0), 0.1)]
        parts = split_by_caps(f, caps)
        assert len(parts) == 1 and parts[0].size == f.size

    def test_counts_preserved(self, rng):
        tubes = [
            tube(rng.uniform(-2, 2, 2), [1.0, float(rng.uniform(-0.04, 0.04))])
            for _ in range(20)
        ]
        f = family(0, 2, tubes)
        caps = cap_cover(Cap(Direction.axis(2, 0), 0.05), 0.01)
        parts = split_by_caps(f, caps)
        assert sum(p.size for p in parts) == 20

    def test_per_cap_homogeneity(self, rng):
        tubes = [
            tube(rng.uniform(-2, 2, 2), [1.0, float(rng.uniform(-0.04, 0.04))])
            for _ in range(20)
        ]
        f = family(0, 2, tubes)
        caps = cap_cover(Cap(Direction.axis(2, 0), 0.05), 0.01)
        for cap, part in zip(caps, split_by_caps(f, caps)):
            for m in part.members:
                assert cap.contains_line_direction(m.geometry.line.direction, tol=1e-12)

    def test_rejects_uncovered_direction(self):
        f = family(0, 2, [tube([0.0, 0.0], [1.0, 0.5])])
        with pytest.raises(ValidationError):
            split_by_caps(f, [Cap(Direction.axis(2, 0), 0.1)])


class TestReduceGeneral:
    def test_already_small_angle_single_problem(self):
        eps = 3.0
        delta = delta_for_epsilon(eps, Constants.for_dimension(2))
        rho = delta / 10.0
        fams = [
            family(0, 2, [tube([0.0, 0.0], [1.0, rho * 0.5]), tube([1.0, 1.0], [1.0, -rho * 0.5])]),
            family(1, 2, [tube([0.0, 0.0], [rho * 0.3, 1.0])]),
        ]
        cube = Cube.centered([0.0, 0.0], 4.0)
        problems = reduce_general_to_small_angle(fams, cube, eps)
        assert len(problems) == 1
        assert np.allclose(problems[0].map.matrix, np.eye(2), atol=1e-12)
        assert problems[0].cap_indices == (0, 0)

    def test_problem_count_bounded(self, rng):
        cube = Cube.centered([0.0, 0.0], 8.0)
        fams = generate(GenSpec(2, (6, 6), GeneralAngle(), cube, seed=2))
        problems = reduce_general_to_small_angle(fams, cube, 3.0)
        assert len(problems) <= 36

    def test_transformed_angles_and_distortions(self):
        cube = Cube.centered([0.0, 0.0], 8.0)
        fams = generate(GenSpec(2, (6, 6), GeneralAngle(), cube, seed=4))
        problems = reduce_general_to_small_angle(fams, cube, 3.0)
        for p in problems:
            lo, hi = p.map.length_distortion
            assert 0.5 <= lo <= hi <= 2.0
            assert p.map.volume_distortion <= 4.0
            assert p.distortion_factor >= 1.0
            for f in p.families:
                for m in f.members:
                    assert angle_from_axis(m.geometry.line.direction, f.axis) <= p.delta * (1 + 1e-9)

    def test_reassembled_bound_dominates_oracle(self):
        for seed in (1, 5, 9):
            cube = Cube.centered([0.0, 0.0], 8.0)
            fams = generate(GenSpec(2, (5, 5), GeneralAngle(), cube, seed=seed))
            problems = reduce_general_to_small_angle(fams, cube, 3.0)
            total = sum(
                p.distortion_factor * certify_multiscale(p.families, p.cube, p.delta).final_bound
                for p in problems
            )
            assert total >= exact_overlap_2d(fams, cube)

    def test_rejects_large_angles(self):
        fams = [
            family(0, 2, [tube([0.0, 0.0], [1.0, 0.2])]),
            family(1, 2, [tube([0.0, 0.0], [0.0, 1.0])]),
        ]
        with pytest.raises(ValidationError):
            reduce_general_to_small_angle(fams, Cube.centered([0.0, 0.0], 4.0), 3.0)

    def test_reassembled_bound_dominates_quadrature_n3(self):
        cube = Cube.centered([0.0, 0.0, 0.0], 6.0)
        fams = generate(GenSpec(3, (4, 4, 4), GeneralAngle(), cube, seed=21))
        problems = reduce_general_to_small_angle(fams, cube, 5.0)
        total = sum(
            p.distortion_factor * certify_multiscale(p.families, p.cube, p.delta).final_bound
            for p in problems
        )
        value = evaluate_overlap(fams, cube, GridSpec(96))
        assert total >= value.value


class TestTransversalReduce:
    def test_orthogonal_sets_behave_like_general(self):
        cube = Cube.centered([0.0, 0.0], 6.0)
        fams = generate(GenSpec(2, (4, 4), SmallAngle(0.03), cube, seed=7))
        caps = [Cap(Direction.axis(2, j), 0.04) for j in range(2)]
        problems = transversal_reduce(fams, cube, caps, nu=1.0, eps=3.0)
        assert problems
        for p in problems:
            assert p.distortion_factor >= 1.0
            for f in p.families:
                for m in f.members:
                    assert angle_from_axis(m.geometry.line.direction, f.axis) <= p.delta * (1 + 1e-9)

    def test_distortion_matches_direct_svd(self):
        cube = Cube.centered([0.0, 0.0], 6.0)
        fams = generate(GenSpec(2, (4, 4), SmallAngle(0.03), cube, seed=8))
        caps = [Cap(Direction.axis(2, j), 0.05) for j in range(2)]
        for p in transversal_reduce(fams, cube, caps, nu=0.9, eps=3.0):
            svals = np.linalg.svd(p.map.matrix, compute_uv=False)
            det = abs(np.linalg.det(p.map.matrix))
            assert abs(p.map.length_distortion[1] - svals[0]) < 1e-10
            assert abs(p.map.length_distortion[0] - svals[-1]) < 1e-10
            assert abs(p.map.volume_distortion - det) < 1e-10
            n = 2
            expected = svals[0] ** n * fams[0].base_radius**n / det
            assert abs(p.distortion_factor - expected) < 1e-9
            assert p.distortion_factor <= transversal_sigma_bound(n, 0.9) ** n

    def test_degenerate_tuple_rejected(self):
        # both families point along (nearly) the same direction: wedge ~ 0
        shared = Direction.normalized([1.0, 1.0])
        fams = [
            family(0, 2, [tube([0.0, 0.0], shared.components)]),
            family(1, 2, [tube([0.0, 0.0], shared.components + np.array([0.0, 1e-4]))]),
        ]
        caps = [Cap(shared, 0.01), Cap(shared, 0.01)]
        with pytest.raises(ValidationError):
            transversal_reduce(fams, Cube.centered([0.0, 0.0], 4.0), caps, nu=0.5, eps=3.0)

    def test_wedge_precondition_on_members(self):
        fams = [
            family(0, 2, [tube([0.0, 0.0], [1.0, 0.0])]),
            family(1, 2, [tube([0.0, 0.0], [0.0, 1.0])]),
        ]
        caps = [Cap(Direction.axis(2, 0), 0.02), Cap(Direction.axis(2, 1), 0.02)]
        problems = transversal_reduce(fams, Cube.centered([0.0, 0.0], 4.0), caps, nu=0.99, eps=3.0)
        centers = [caps[0].center, caps[1].center]
        assert wedge_volume(centers) >= 0.99 / 2


class TestWeightedMultiplicity:
    def test_unit_weights_trivially_equal(self, cube2, rng):
        anchors = rng.uniform(-4, 4, (3, 2))
        fams = [axis_tube_family(j, 2, anchors) for j in range(2)]
        assert weighted_multiplicity_check(fams, cube2, GridSpec(64))

    def test_weight_three_vs_copies(self, cube2, rng):
        anchors = rng.uniform(-4, 4, (2, 2))
        fams = [
            axis_tube_family(0, 2, anchors, weights=[3.0, 2.0]),
            axis_tube_family(1, 2, anchors, weights=[1.0, 5.0]),
        ]
        assert weighted_multiplicity_check(fams, cube2, GridSpec(64))

    def test_rational_weights_scale(self, cube2, rng):
        # weights p/q: scaling family j by q multiplies the value by
        # q^(1/(n-1)); compare against the integer-weight expansion
        anchors = rng.uniform(-4, 4, (2, 2))
        q = 4.0
        rational = [
            axis_tube_family(0, 2, anchors, weights=[3.0 / q, 2.0 / q]),
            axis_tube_family(1, 2, anchors),
        ]
        integer = [
            axis_tube_family(0, 2, anchors, weights=[3.0, 2.0]),
            axis_tube_family(1, 2, anchors),
        ]
        g = GridSpec(64)
        v_rat = evaluate_overlap(rational, cube2, g).value
        v_int = evaluate_overlap(integer, cube2, g).value
        assert v_rat * q == v_int

    def test_rejects_non_integer(self, cube2, rng):
        anchors = rng.uniform(-4, 4, (2, 2))
        fams = [
            axis_tube_family(0, 2, anchors, weights=[1.5, 2.0]),
            axis_tube_family(1, 2, anchors),
        ]
        with pytest.raises(ValidationError):
            weighted_multiplicity_check(fams, cube2, GridSpec(32))
