"""Pytest configuration and fixtures for cbvf tests."""

import json
import shutil
import tempfile
from collections.abc import Callable, Generator
from pathlib import Path

import numpy as np
import pytest

from cbvf.core.classk import ClassKSpec
from cbvf.core.grid import Grid, ScalarField, discretize
from cbvf.solver.marching import SolverParams, solve_cbvf
from cbvf.systems.builtin import SCALAR_EXAMPLE

CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"


def one_minus_abs(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(x[..., 0]))


def slab(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - x[..., 0] ** 2)


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for tests."""
    temp_path = Path(tempfile.mkdtemp())
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def configs_dir() -> Path:
    """The bundled run configs."""
    return CONFIGS_DIR


@pytest.fixture
def linear_alpha() -> ClassKSpec:
    return ClassKSpec.linear(1.0)


@pytest.fixture
def line_grid() -> Grid:
    """301 nodes on [-1.5, 1.5] (spacing 0.01)."""
    return Grid(lo=(-1.5,), hi=(1.5,), counts=(301,))


@pytest.fixture
def tent(line_grid: Grid) -> ScalarField:
    """g = max(0, 1 - |x|) on the 301-node line."""
    return discretize(line_grid, one_minus_abs, "tent")


@pytest.fixture
def plane_grid() -> Grid:
    """101 x 101 nodes on [-1.5, 1.5] x [-2, 2]."""
    return Grid(lo=(-1.5, -2.0), hi=(1.5, 2.0), counts=(101, 101))


@pytest.fixture
def slab_field(plane_grid: Grid) -> ScalarField:
    """g = max(0, 1 - x1²) on the double-integrator plane."""
    return discretize(plane_grid, slab, "slab")


@pytest.fixture(scope="session")
def scalar_series():
    """Value function of the tent for the scalar example up to T = 2."""
    grid = Grid(lo=(-1.5,), hi=(1.5,), counts=(301,))
    g = discretize(grid, one_minus_abs, "tent")
    return solve_cbvf(SCALAR_EXAMPLE, ClassKSpec.linear(1.0), g, SolverParams.uniform(2.0))


@pytest.fixture
def write_config(temp_dir: Path) -> Callable[..., Path]:
    """Write a config dict (or raw text) to a file and return its path."""

    def write(data, name: str = "config.json") -> Path:
        path = temp_dir / name
        text = data if isinstance(data, str) else json.dumps(data, indent=2)
        path.write_text(text, encoding="utf-8")
        return path

    return write


@pytest.fixture
def scalar_config() -> dict:
    """A fresh copy of configs/scalar_example.json."""
    return json.loads((CONFIGS_DIR / "scalar_example.json").read_text(encoding="utf-8"))


@pytest.fixture
def tent_fn() -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized max(0, 1 - |x1|)."""
    return one_minus_abs
