"""Tests for grids, scalar fields and stencils."""

import numpy as np
import pytest

from cbvf.core.errors import DomainError, NonFiniteValueError, OutOfBoundsError, ShapeMismatchError
from cbvf.core.grid import (
    Grid,
    ScalarField,
    ValueSeries,
    central_gradient,
    discretize,
    interpolate,
    lipschitz_estimate,
    sup_distance,
    upwind_gradients,
)


class TestGrid:
    """Tests for Grid class."""

    def test_create_grid(self):
        """Test creating a grid."""
        grid = Grid(lo=(-1.0, 0.0), hi=(1.0, 2.0), counts=(5, 3))

        assert grid.dim == 2
        assert grid.shape == (5, 3)
        assert grid.size == 15
        assert grid.spacing == pytest.approx((0.5, 1.0))

    def test_scalar_arguments(self):
        """Test one-dimensional grids accept scalars."""
        grid = Grid(lo=-1.0, hi=1.0, counts=11)
        assert grid.counts == (11,)
        assert grid.spacing == pytest.approx((0.2,))

    @pytest.mark.parametrize(
        "lo, hi, counts",
        [
            ((0.0,), (1.0,), (2,)),
            ((1.0,), (0.0,), (5,)),
            ((0.0, 0.0), (1.0,), (5, 5)),
            ((0.0,) * 4, (1.0,) * 4, (3,) * 4),
        ],
    )
    def test_invalid_grids(self, lo, hi, counts):
        """Test invalid grids are rejected."""
        with pytest.raises(ValueError):
            Grid(lo=lo, hi=hi, counts=counts)

    def test_states_row_major(self):
        """Test node states enumerate the last axis fastest."""
        grid = Grid(lo=(0.0, 0.0), hi=(1.0, 2.0), counts=(3, 3))
        states = grid.states()

        np.testing.assert_allclose(states[:4], [[0, 0], [0, 1], [0, 2], [0.5, 0]])
        assert grid.node_index((1, 0)) == 3
        assert grid.multi_index(3) == (1, 0)

    def test_interior_mask(self):
        """Test the boundary band is excluded."""
        grid = Grid(lo=(0.0, 0.0), hi=(1.0, 1.0), counts=(10, 10))
        mask = grid.interior_mask(3)

        assert mask.sum() == 16
        assert not mask[2, 5]
        assert mask[3, 6]
        assert grid.interior_mask(0).all()

    def test_serialization(self):
        """Test serialization."""
        grid = Grid(lo=(-1.5, -2.0), hi=(1.5, 2.0), counts=(101, 101))
        assert Grid.from_dict(grid.to_dict()) == grid


class TestScalarField:
    """Tests for ScalarField class."""

    def test_values_are_read_only(self, tent):
        """Test field values cannot be modified."""
        with pytest.raises(ValueError):
            tent.values[0] = 5.0

    def test_wrong_size(self, line_grid):
        """Test a size mismatch is rejected."""
        with pytest.raises(ShapeMismatchError):
            ScalarField(line_grid, np.zeros(10))

    def test_non_finite(self):
        """Test NaN values are reported with their node."""
        grid = Grid(lo=(0.0, 0.0), hi=(1.0, 1.0), counts=(3, 3))
        values = np.zeros(9)
        values[5] = np.nan

        with pytest.raises(NonFiniteValueError) as exc:
            ScalarField(grid, values)
        assert exc.value.index == (1, 2)

    def test_with_values(self, tent):
        """Test deriving a field with new values keeps the grid."""
        doubled = tent.with_values(2 * tent.values, "double")
        assert doubled.grid == tent.grid
        assert doubled.label == "double"
        assert doubled.max() == pytest.approx(2.0)
        assert tent.min() == 0.0


class TestValueSeries:
    """Tests for ValueSeries class."""

    def test_lookup(self, tent):
        """Test looking up fields by horizon."""
        series = ValueSeries((0.0, 0.5), (tent, tent.with_values(0.5 * tent.values)))

        assert len(series) == 2
        assert series.horizon == 0.5
        assert series.at(0.5).max() == pytest.approx(0.5)
        assert series.initial is tent

    def test_missing_horizon(self, tent):
        """Test asking for an unrecorded horizon."""
        series = ValueSeries((0.0,), (tent,))
        with pytest.raises(DomainError):
            series.at(1.0)

    def test_must_start_at_zero(self, tent):
        """Test the first checkpoint must be 0."""
        with pytest.raises(ValueError):
            ValueSeries((0.5,), (tent,))

    def test_shared_grid(self, tent):
        """Test fields must share one grid."""
        other = discretize(Grid(lo=-1.0, hi=1.0, counts=11), lambda x: 1.0)
        with pytest.raises(ShapeMismatchError):
            ValueSeries((0.0, 1.0), (tent, other))


class TestStencils:
    """Tests for finite-difference stencils."""

    def test_upwind_exact_on_linear(self):
        """Test one-sided slopes of a linear function, boundaries included."""
        grid = Grid(lo=(0.0, 0.0), hi=(1.0, 1.0), counts=(11, 6))
        field = discretize(grid, lambda x: 3.0 * x[:, 0] - 2.0 * x[:, 1])

        for scheme in ("upwind1", "eno2"):
            left, right = upwind_gradients(field, scheme)
            np.testing.assert_allclose(left[0], 3.0, atol=1e-9)
            np.testing.assert_allclose(right[1], -2.0, atol=1e-9)

    def test_eno2_exact_on_quadratic(self):
        """Test second-order ENO differentiates x² exactly away from the boundary."""
        grid = Grid(lo=-1.0, hi=1.0, counts=21)
        field = discretize(grid, lambda x: x[:, 0] ** 2)
        left, right = upwind_gradients(field, "eno2")
        x = grid.axes[0]

        np.testing.assert_allclose(left[0][2:-2], 2 * x[2:-2], atol=1e-9)
        np.testing.assert_allclose(right[0][2:-2], 2 * x[2:-2], atol=1e-9)

    def test_upwind_at_kink(self, tent):
        """Test one-sided slopes straddle the peak of the tent."""
        left, right = upwind_gradients(tent)
        peak = 150

        assert left[0][peak] == pytest.approx(1.0)
        assert right[0][peak] == pytest.approx(-1.0)

    def test_unknown_scheme(self, tent):
        """Test an unknown stencil name."""
        with pytest.raises(ValueError):
            upwind_gradients(tent, "weno5")

    def test_central_gradient_shape(self):
        """Test central differences come back per axis."""
        grid = Grid(lo=(0.0, 0.0), hi=(1.0, 1.0), counts=(5, 7))
        field = discretize(grid, lambda x: x[:, 0] + 4.0 * x[:, 1])
        grad = central_gradient(field)

        assert grad.shape == (2, 5, 7)
        np.testing.assert_allclose(grad[1], 4.0)

    def test_lipschitz_estimate(self, tent):
        """Test the Lipschitz estimate of the tent."""
        assert lipschitz_estimate(tent) == pytest.approx(1.0)


class TestInterpolation:
    """Tests for interpolate and discretize."""

    def test_exact_on_linear(self):
        """Test multilinear interpolation reproduces a bilinear function."""
        grid = Grid(lo=(0.0, 0.0), hi=(1.0, 1.0), counts=(5, 5))
        field = discretize(grid, lambda x: 1.0 + x[:, 0] + 2.0 * x[:, 1])

        assert interpolate(field, [0.3, 0.7]) == pytest.approx(2.7)
        batch = interpolate(field, np.array([[0.1, 0.1], [0.9, 0.2]]))
        np.testing.assert_allclose(batch, [1.3, 2.3])

    def test_single_state_gives_float(self, tent):
        """Test a one-dimensional query returns a float."""
        value = interpolate(tent, 0.255)
        assert isinstance(value, float)
        assert value == pytest.approx(0.745)

    def test_clamp_within_half_cell(self, tent):
        """Test points just outside the grid are clamped."""
        assert interpolate(tent, 1.504) == pytest.approx(0.0)

    def test_out_of_bounds(self, tent):
        """Test points far outside the grid raise."""
        with pytest.raises(OutOfBoundsError):
            interpolate(tent, 2.0)

    def test_scalar_function_fallback(self, line_grid):
        """Test functions returning one number are evaluated node by node."""
        field = discretize(line_grid, lambda x: 0.5)
        assert np.all(field.values == 0.5)

    def test_non_finite_function(self, line_grid):
        """Test a function producing infinity."""
        with pytest.raises(NonFiniteValueError):
            discretize(line_grid, lambda x: np.where(x[:, 0] > 1.0, np.inf, 1.0))

    def test_sup_distance(self, tent):
        """Test the sup distance with and without a mask."""
        shifted = tent.with_values(tent.values + 0.1)
        mask = tent.grid.interior_mask(3)

        assert sup_distance(tent, shifted) == pytest.approx(0.1)
        assert sup_distance(tent, shifted, mask) == pytest.approx(0.1)
        assert sup_distance(tent, tent) == 0.0
