import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spherebayes.projection import (
    Pole,
    emit_grid,
    jacobian_ratios,
    lambert_inverse,
    lambert_project,
    project_grid,
)
from spherebayes.spectral import Direction


def test_anchor_points():
    assert lambert_project(Direction(0.0, 0.0)) == (0.0, 0.0)
    x, y = lambert_project(Direction(math.pi / 2, 0.0))
    assert x == pytest.approx(math.sqrt(2.0), abs=1e-12) and abs(y) < 1e-12
    assert math.hypot(*lambert_project(Direction(math.pi, 0.3))) == pytest.approx(2.0, abs=1e-12)
    # the south view puts the South Pole at the origin
    assert math.hypot(*lambert_project(Direction(math.pi, 0.0), Pole.SOUTH)) < 1e-12


@given(st.floats(0.0, math.pi - 1e-6), st.floats(0.0, 2 * math.pi - 1e-9),
       st.sampled_from(list(Pole)))
def test_round_trip(theta, phi, pole):
    if (pole is Pole.NORTH and theta < 1e-6) or (pole is Pole.SOUTH and theta > math.pi - 1e-6):
        return  # longitude is undefined at the viewing pole
    if (pole is Pole.NORTH and theta > math.pi - 1e-3) or (pole is Pole.SOUTH and theta < 1e-3):
        return  # the opposite pole maps to the rim, where the inverse is ill conditioned
    back = lambert_inverse(np.array([lambert_project(Direction(theta, phi), pole)]), pole)[0]
    assert back[0] == pytest.approx(theta, abs=1e-10)
    assert abs(math.remainder(back[1] - phi, 2 * math.pi)) < 1e-9


def test_area_preservation(rng):
    for pole in Pole:
        assert np.abs(jacobian_ratios(400_000, rng, pole) - 1).max() < 0.02


def test_grid_shape_and_radius():
    grid = project_grid(lambda x: np.full(len(x), 3.0), 16)
    assert grid.rows.shape == (17 * 17, 3)
    assert np.all(grid.rows[:, 2] == 3.0)
    assert np.hypot(grid.rows[:, 0], grid.rows[:, 1]).max() <= 2 + 1e-12
    half = project_grid(lambda x: np.zeros(len(x)), 16, Pole.SOUTH, hemisphere_only=True)
    assert np.hypot(half.rows[:, 0], half.rows[:, 1]).max() <= math.sqrt(2) + 1e-12
    with pytest.raises(ValueError):
        project_grid(lambda x: np.zeros(len(x)), 8)


def test_csv_is_deterministic(tmp_path):
    f = lambda x: np.cos(x[:, 0]) + np.sin(x[:, 1])  # noqa: E731
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_grid(f, 20, Pole.NORTH, False, a)
    emit_grid(f, 20, Pole.NORTH, False, b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "x,y,value"


def test_non_finite_values_rejected():
    with pytest.raises(FloatingPointError):
        project_grid(lambda x: np.full(len(x), np.nan), 16)
