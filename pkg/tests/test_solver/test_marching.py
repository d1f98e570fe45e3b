"""Tests for the level-set marcher."""

import numpy as np
import pytest

from cbvf.core.classk import ClassKSpec
from cbvf.core.errors import (
    NegativeObstacleError,
    ShapeMismatchError,
    StiffnessError,
    TruncationError,
)
from cbvf.core.grid import Grid, discretize
from cbvf.solver.marching import (
    LevelSetMarcher,
    SolverParams,
    solve_avoid,
    solve_cbvf,
    transform_check,
    uniform_horizons,
)
from cbvf.systems.base import ControlSet, System
from cbvf.systems.builtin import DOUBLE_INTEGRATOR, SCALAR_EXAMPLE, SINGLE_INTEGRATOR


def _stiff(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    return 1e10 * u + 0.0 * x


STIFF = System("stiff", 1, _stiff, ControlSet.box([-1.0], [1.0]))


def _tent_on(count: int):
    grid = Grid(lo=(-1.5,), hi=(1.5,), counts=(count,))
    return discretize(grid, lambda x: np.maximum(0.0, 1.0 - np.abs(x[:, 0])), "tent")


def _small_plane():
    grid = Grid(lo=(-1.5, -2.0), hi=(1.5, 2.0), counts=(41, 41))
    return discretize(grid, lambda x: np.maximum(0.0, 1.0 - x[:, 0] ** 2), "slab")


class TestSolverParams:
    """Tests for SolverParams class."""

    def test_uniform_horizons(self):
        """Test evenly spaced checkpoints end exactly at the horizon."""
        assert uniform_horizons(1.0, 0.25) == (0.0, 0.25, 0.5, 0.75, 1.0)
        assert uniform_horizons(0.6, 0.25) == (0.0, 0.25, 0.5, 0.6)
        assert uniform_horizons(0.0, 0.25) == (0.0,)

    def test_uniform(self):
        """Test the uniform constructor."""
        params = SolverParams.uniform(2.0, 0.5, cfl=0.4)
        assert params.checkpoint_horizons == (0.0, 0.5, 1.0, 1.5, 2.0)
        assert params.horizon == 2.0
        assert params.cfl == 0.4

    def test_with_horizons(self):
        """Test swapping checkpoints keeps the other settings."""
        params = SolverParams.uniform(2.0, 0.5, cfl=0.4, stencil="eno2")
        swapped = params.with_horizons([0.0, 0.1, 0.3])
        assert swapped.checkpoint_horizons == (0.0, 0.1, 0.3)
        assert swapped.cfl == 0.4
        assert swapped.stencil == "eno2"
        with pytest.raises(ValueError):
            params.with_horizons((0.5, 1.0))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"cfl": 0.0},
            {"cfl": 1.5},
            {"checkpoint_horizons": (0.5, 1.0)},
            {"checkpoint_horizons": (0.0, 1.0, 0.5)},
            {"dissipation": "none"},
            {"stencil": "weno5"},
            {"formulation": "implicit"},
            {"max_steps": 0},
        ],
    )
    def test_invalid(self, kwargs):
        """Test invalid settings are rejected."""
        with pytest.raises(ValueError):
            SolverParams(**kwargs)

    def test_serialization(self):
        """Test serialization."""
        params = SolverParams.uniform(1.0, stencil="eno2", dissipation="global")
        assert SolverParams.from_dict(params.to_dict()) == params


class TestSolveCbvf:
    """Tests for solve_cbvf."""

    def test_series_layout(self, scalar_series, tent):
        """Test checkpoints and the initial field."""
        assert scalar_series.checkpoints == uniform_horizons(2.0, 0.25)
        np.testing.assert_array_equal(scalar_series.initial.values, tent.values)
        assert scalar_series.steps > 0

    def test_bounds(self, scalar_series, tent):
        """Test 0 <= v(·, T) <= g at every checkpoint."""
        for field in scalar_series.fields:
            assert field.min() >= 0.0
            assert np.all(field.values <= tent.values)

    def test_nonincreasing_in_horizon(self, scalar_series):
        """Test v(·, T) does not grow with T beyond stencil noise."""
        for earlier, later in zip(scalar_series.fields, scalar_series.fields[1:]):
            assert np.all(later.values <= earlier.values + 1e-3)

    def test_scalar_example_invariant(self, scalar_series, tent):
        """Test the tent is (numerically) its own value function."""
        mask = tent.grid.interior_mask(3)
        for field in scalar_series.fields:
            assert np.max(tent.values[mask] - field.values[mask]) <= 0.02

    def test_transform_check(self, scalar_series, tent, linear_alpha):
        """Test the transformed obstacle bound holds on the series."""
        report = transform_check(scalar_series, tent, linear_alpha)
        assert report.passed
        assert report.max_violation <= 1e-6

    def test_negative_obstacle(self, line_grid, linear_alpha):
        """Test g must be nonnegative."""
        g = discretize(line_grid, lambda x: 0.5 - np.abs(x[:, 0]))
        with pytest.raises(NegativeObstacleError):
            solve_cbvf(SCALAR_EXAMPLE, linear_alpha, g, SolverParams.uniform(0.5))

    def test_dimension_mismatch(self, tent, linear_alpha):
        """Test the grid must match the system dimension."""
        with pytest.raises(ShapeMismatchError):
            solve_cbvf(DOUBLE_INTEGRATOR, linear_alpha, tent, SolverParams.uniform(0.5))

    def test_stiffness(self, tent, linear_alpha):
        """Test an underflowing CFL step is reported."""
        with pytest.raises(StiffnessError):
            solve_cbvf(STIFF, linear_alpha, tent, SolverParams.uniform(0.5))

    def test_truncation(self, tent, linear_alpha):
        """Test an exhausted step budget carries the partial series."""
        params = SolverParams.uniform(1.0, 0.25, max_steps=300)
        with pytest.raises(TruncationError) as exc:
            solve_cbvf(SCALAR_EXAMPLE, linear_alpha, tent, params)
        partial = exc.value.partial
        assert partial.checkpoints[0] == 0.0
        assert partial.horizon < 1.0

    def test_eno2_stays_bounded(self, tent, linear_alpha):
        """Test the second-order stencil keeps 0 <= v <= g."""
        params = SolverParams.uniform(0.5, stencil="eno2")
        series = solve_cbvf(SCALAR_EXAMPLE, linear_alpha, tent, params)
        assert series.final.min() >= 0.0
        assert np.all(series.final.values <= tent.values)

    def test_decay_on_double_integrator(self, linear_alpha):
        """Test states moving fast towards the edge lose value."""
        g = _small_plane()
        series = solve_cbvf(DOUBLE_INTEGRATOR, linear_alpha, g, SolverParams.uniform(1.0))
        mask = g.grid.interior_mask(3)
        assert np.max(g.values[mask] - series.final.values[mask]) > 0.3

    def test_larger_alpha_is_more_permissive(self):
        """Test v grows with α."""
        g = _small_plane()
        params = SolverParams.uniform(1.0, 0.5)
        slow = solve_cbvf(DOUBLE_INTEGRATOR, ClassKSpec.linear(1.0), g, params).final
        fast = solve_cbvf(DOUBLE_INTEGRATOR, ClassKSpec.linear(2.0), g, params).final
        assert np.all(fast.values >= slow.values - 0.02)
        assert fast.values.sum() > slow.values.sum()

    def test_transformed_formulation_agrees(self, linear_alpha):
        """Test the transformed march agrees with the direct one."""
        g = _small_plane()
        direct = solve_cbvf(DOUBLE_INTEGRATOR, linear_alpha, g, SolverParams.uniform(1.0, 0.5))
        transformed = solve_cbvf(
            DOUBLE_INTEGRATOR,
            linear_alpha,
            g,
            SolverParams.uniform(1.0, 0.5, formulation="transformed"),
        )
        mask = g.grid.interior_mask(3)
        gap = np.abs(direct.final.values - transformed.final.values)[mask]
        assert gap.max() <= 0.05
        assert np.all(transformed.final.values <= g.values)

    def test_vanishing_alpha_matches_avoid(self):
        """Test a near-zero α gives the avoid value function."""
        g = _small_plane()
        params = SolverParams.uniform(1.0, 0.5)
        cbvf = solve_cbvf(DOUBLE_INTEGRATOR, ClassKSpec.linear(1e-8), g, params).final
        avoid = solve_avoid(DOUBLE_INTEGRATOR, g, params).final
        assert np.max(np.abs(cbvf.values - avoid.values)) <= 1e-3

    def test_tent_refinement(self, linear_alpha):
        """Test the error against the invariant tent does not grow as the grid is refined."""
        errors = []
        for count in (61, 121, 241):
            g = _tent_on(count)
            series = solve_cbvf(SCALAR_EXAMPLE, linear_alpha, g, SolverParams.uniform(1.0, 0.5))
            mask = g.grid.interior_mask(3)
            errors.append(np.max(np.abs(series.final.values - g.values)[mask]))
        assert np.all(np.diff(errors) <= 1e-9)
        assert errors[-1] <= 0.02


class TestSolveAvoid:
    """Tests for solve_avoid."""

    def test_hold_position(self):
        """Test V(0, 1) = 1 for the single integrator."""
        g = _tent_on(301)
        series = solve_avoid(SINGLE_INTEGRATOR, g, SolverParams.uniform(1.0, 0.5))
        center = g.grid.node_index((150,))
        assert series.final.flat[center] == pytest.approx(1.0, abs=0.02)

    def test_grid_refinement(self):
        """Test the error against V = g shrinks as the grid is refined."""
        errors = []
        for count in (61, 121, 241):
            g = _tent_on(count)
            series = solve_avoid(SINGLE_INTEGRATOR, g, SolverParams.uniform(1.0, 0.5))
            mask = g.grid.interior_mask(3)
            errors.append(np.max(np.abs(series.final.values - g.values)[mask]))
        assert errors[0] > errors[1] > errors[2]

    def test_avoid_below_cbvf(self, tent, scalar_series):
        """Test the avoid value never exceeds the CB-VF."""
        avoid = solve_avoid(SCALAR_EXAMPLE, tent, SolverParams.uniform(2.0))
        for field_avoid, field_cbvf in zip(avoid.fields, scalar_series.fields):
            assert np.all(field_avoid.values <= field_cbvf.values + 0.02)


class TestLevelSetMarcher:
    """Tests for LevelSetMarcher."""

    def test_resumable(self, tent, linear_alpha):
        """Test advancing in pieces records every horizon."""
        marcher = LevelSetMarcher(SCALAR_EXAMPLE, tent, linear_alpha)
        marcher.advance(0.25)
        marcher.advance(0.5)

        series = marcher.series()
        assert series.checkpoints == (0.0, 0.25, 0.5)
        assert marcher.time == 0.5

    def test_no_backwards(self, tent, linear_alpha):
        """Test marching backwards is refused."""
        marcher = LevelSetMarcher(SCALAR_EXAMPLE, tent, linear_alpha)
        marcher.advance(0.5)
        with pytest.raises(ValueError):
            marcher.advance(0.25)

    def test_nominal_step(self, tent, linear_alpha):
        """Test the CFL step accounts for the speed bound and α."""
        marcher = LevelSetMarcher(SINGLE_INTEGRATOR, tent, linear_alpha)
        assert marcher.nominal_dt == pytest.approx(0.5 / (1.0 / 0.01 + 1.0))

    def test_global_dissipation(self, tent, linear_alpha):
        """Test global dissipation also keeps the tent invariant."""
        params = SolverParams.uniform(0.5, dissipation="global")
        series = solve_cbvf(SCALAR_EXAMPLE, linear_alpha, tent, params)
        mask = tent.grid.interior_mask(3)
        assert np.max(tent.values[mask] - series.final.values[mask]) <= 0.02
