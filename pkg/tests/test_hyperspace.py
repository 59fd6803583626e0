import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rcbo.hyperspace import (NAMES, Dimension, DomainError, GridSpec, HyperPoint, HyperSpace,
                             baseline_grid, default_space, from_unit, grid_points, is_duplicate,
                             to_unit)

SPACE = default_space()
unit4 = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4)


def points():
    return st.builds(
        HyperPoint,
        st.floats(0.1, 1.5),
        *(st.floats(-10.0, 0.0).map(lambda e: 10.0 ** e) for _ in range(3)),
    )


def close(a, b, rtol=1e-12):
    return all(abs(x - y) <= rtol * max(abs(x), abs(y)) for x, y in zip(a, b))


class TestTransforms:
    def test_bounds_map_to_endpoints(self):
        lo = HyperPoint(0.1, 1e-10, 1e-10, 1e-10)
        hi = HyperPoint(1.5, 1.0, 1.0, 1.0)
        assert to_unit(SPACE, lo).tolist() == [0.0] * 4
        assert to_unit(SPACE, hi).tolist() == [1.0] * 4

    def test_log_midpoint(self):
        u = to_unit(SPACE, HyperPoint(0.8, 1e-5, 1e-5, 1e-5))
        assert u[1:] == pytest.approx([0.5] * 3, abs=1e-15)
        assert u[0] == pytest.approx(0.5, abs=1e-15)

    def test_from_unit_corners(self):
        assert from_unit(SPACE, [0, 0, 0, 0]).as_tuple() == (0.1, 1e-10, 1e-10, 1e-10)
        assert from_unit(SPACE, [1, 1, 1, 1]).as_tuple() == (1.5, 1.0, 1.0, 1.0)

    def test_round_trip_seeded_sample(self, rng):
        for _ in range(1000):
            p = from_unit(SPACE, rng.random(4))
            assert close(from_unit(SPACE, to_unit(SPACE, p)).as_tuple(), p.as_tuple())

    @given(points())
    def test_round_trip_property(self, p):
        assert close(from_unit(SPACE, to_unit(SPACE, p)).as_tuple(), p.as_tuple())

    def test_out_of_bounds_names_dimension(self):
        with pytest.raises(DomainError, match="gamma"):
            to_unit(SPACE, HyperPoint(1.0, 0.1, 2.0, 0.1))
        with pytest.raises(DomainError, match="alpha"):
            to_unit(SPACE, HyperPoint(0.05, 0.1, 0.1, 0.1))

    def test_from_unit_rejects_outside_cube(self):
        with pytest.raises(DomainError):
            from_unit(SPACE, [0.5, 1.2, 0.5, 0.5])
        with pytest.raises(DomainError):
            from_unit(SPACE, [0.5, 0.5, -0.1, 0.5])

    def test_fixed_dimensions_are_dropped_from_unit_vectors(self):
        sp = SPACE.with_fixed(gamma=0.01, rho=0.01)
        assert sp.active == ("alpha", "beta")
        p = from_unit(sp, [0.5, 0.5])
        assert (p.gamma, p.rho) == (0.01, 0.01)
        assert to_unit(sp, p).shape == (2,)
        with pytest.raises(DomainError):
            to_unit(sp, HyperPoint(0.8, 1e-5, 0.1, 0.01))


class TestSpaceValidation:
    def test_low_must_be_below_high(self):
        with pytest.raises(DomainError):
            Dimension("alpha", 1.0, 1.0)

    def test_log_needs_positive_low(self):
        with pytest.raises(DomainError):
            Dimension("beta", 0.0, 1.0, "log10")

    def test_dimension_order_enforced(self):
        dims = tuple(reversed(SPACE.dims))
        with pytest.raises(DomainError):
            HyperSpace(dims)

    def test_dict_round_trip(self):
        sp = SPACE.with_fixed(rho=0.1)
        assert HyperSpace.from_dict(sp.to_dict()) == sp

    def test_non_finite_point(self):
        with pytest.raises(DomainError):
            HyperPoint(math.nan, 0.1, 0.1, 0.1)


class TestGrid:
    def test_reference_grid_has_54_points(self):
        assert len(grid_points(SPACE, baseline_grid())) == 54

    def test_single_value_per_dimension(self):
        g = GridSpec([1.0], [0.1], [0.1], [0.1])
        assert len(grid_points(SPACE, g)) == 1

    def test_row_major_order(self):
        g = GridSpec([0.5, 1.0], [0.01, 0.1], [0.1], [0.2])
        pts = grid_points(SPACE, g)
        assert len(pts) == 4
        assert pts[0].as_tuple() == (0.5, 0.01, 0.1, 0.2)
        assert [p.as_tuple()[:2] for p in pts] == [(0.5, 0.01), (0.5, 0.1), (1.0, 0.01), (1.0, 0.1)]

    def test_empty_list_rejected(self):
        with pytest.raises(DomainError):
            grid_points(SPACE, GridSpec([], [0.1], [0.1], [0.1]))

    def test_value_outside_bounds_rejected(self):
        with pytest.raises(DomainError):
            grid_points(SPACE, GridSpec([2.0], [0.1], [0.1], [0.1]))

    @given(st.lists(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=4, unique=True),
                    min_size=4, max_size=4))
    def test_length_is_product_and_points_distinct(self, unit_lists):
        lists = [[SPACE.dims[j].from_unit(u) for u in unit_lists[j]] for j in range(4)]
        lists = [list(dict.fromkeys(v)) for v in lists]
        pts = grid_points(SPACE, GridSpec(*lists))
        assert len(pts) == math.prod(len(v) for v in lists)
        assert len({p.as_tuple() for p in pts}) == len(pts)


class TestDuplicates:
    def test_infinity_norm_threshold(self):
        p = from_unit(SPACE, [0.5, 0.5, 0.5, 0.5])
        near = from_unit(SPACE, [0.5, 0.5, 0.5, 0.5 + 5e-7])
        far = from_unit(SPACE, [0.5, 0.5, 0.5, 0.5 + 1e-3])
        assert is_duplicate(SPACE, p, [near], 1e-6)
        assert not is_duplicate(SPACE, p, [far], 1e-6)

    def test_empty_history(self):
        assert not is_duplicate(SPACE, HyperPoint(1, 0.1, 0.1, 0.1), [], 1e-6)

    def test_negative_tolerance(self):
        with pytest.raises(DomainError):
            is_duplicate(SPACE, HyperPoint(1, 0.1, 0.1, 0.1), [], -1.0)

    @given(points(), st.lists(points(), max_size=5))
    def test_point_in_history_is_duplicate_at_zero_tol(self, p, history):
        assert is_duplicate(SPACE, p, history + [p], 0.0)

    @given(unit4, unit4, st.floats(0.0, 1.0))
    def test_matches_definition(self, a, b, tol):
        dist = max(abs(x - y) for x, y in zip(a, b))
        assert is_duplicate(SPACE, np.array(a), [np.array(b)], tol) == (dist <= tol)


def test_names_order():
    assert NAMES == ("alpha", "beta", "gamma", "rho")
