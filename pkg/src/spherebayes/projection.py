"""Lambert azimuthal equal-area views of functions on the sphere."""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .spectral import (
    SOUTH_POLE_THETA,
    TWO_PI,
    Direction,
    PointsLike,
    as_angles,
    canonical_angles,
    random_directions,
)


class Pole(enum.Enum):
    NORTH = "north"
    SOUTH = "south"


def _pole(pole) -> Pole:
    return pole if isinstance(pole, Pole) else Pole(str(pole).lower())


def lambert_project(x: PointsLike, pole=Pole.NORTH):
    """(x, y) = 2 sin(t/2)(cos phi, sin phi) with t the colatitude measured
    from the chosen pole.  Returns a pair for a single direction, else an
    (n, 2) array."""
    theta, phi = as_angles(x)
    t = theta if _pole(pole) is Pole.NORTH else math.pi - theta
    r = 2.0 * np.sin(0.5 * t)
    xy = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    return (float(xy[0, 0]), float(xy[0, 1])) if isinstance(x, Direction) else xy


def lambert_inverse(xy, pole=Pole.NORTH) -> np.ndarray:
    """Angles (n, 2) for projected points with radius at most 2."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    r = np.hypot(xy[:, 0], xy[:, 1])
    if np.any(r > 2.0 + 1e-12):
        raise ValueError("projected radius exceeds 2")
    t = 2.0 * np.arcsin(np.clip(r / 2.0, 0.0, 1.0))
    theta = t if _pole(pole) is Pole.NORTH else math.pi - t
    phi = np.arctan2(xy[:, 1], xy[:, 0])
    return np.column_stack(canonical_angles(theta, phi))


@dataclass(frozen=True)
class ProjectedGrid:
    resolution: int
    pole: Pole
    hemisphere_only: bool
    rows: np.ndarray  # (N, 3): x, y, value

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,y,value\n")
        for x, y, v in self.rows:
            buf.write(f"{x:.17g},{y:.17g},{v:.17g}\n")
        return buf.getvalue()


def lattice(resolution: int, pole=Pole.NORTH, hemisphere_only: bool = False) -> np.ndarray:
    """(r+1)^2 angle pairs, row-major over a uniform (t, phi) lattice where t
    is the colatitude from the viewing pole."""
    t_max = 0.5 * math.pi if hemisphere_only else SOUTH_POLE_THETA
    t = np.linspace(0.0, t_max, resolution + 1)
    phi = np.linspace(0.0, TWO_PI, resolution + 1)
    T, P = np.meshgrid(t, phi, indexing="ij")
    theta = T if _pole(pole) is Pole.NORTH else math.pi - T
    theta = np.minimum(theta, SOUTH_POLE_THETA)
    return np.column_stack([theta.ravel(), P.ravel()])


def project_grid(
    fit: Callable, resolution: int, pole=Pole.NORTH, hemisphere_only: bool = False
) -> ProjectedGrid:
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    pole = _pole(pole)
    pts = lattice(resolution, pole, hemisphere_only)
    # phi = 2 pi is kept as a lattice column so the plot closes; evaluate there
    # through the canonical angle, project with the raw angle
    values = np.asarray(fit(pts), dtype=float).ravel()
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("fit produced non-finite values on the lattice")
    t = pts[:, 0] if pole is Pole.NORTH else math.pi - pts[:, 0]
    raw_phi = np.tile(np.linspace(0.0, TWO_PI, resolution + 1), resolution + 1)
    r = 2.0 * np.sin(0.5 * t)
    rows = np.column_stack([r * np.cos(raw_phi), r * np.sin(raw_phi), values])
    return ProjectedGrid(resolution, pole, hemisphere_only, rows)


def emit_grid(
    fit: Callable, resolution: int, pole=Pole.NORTH, hemisphere_only: bool = False, path=None
) -> ProjectedGrid:
    """Evaluate ``fit`` on the lattice and write the CSV (header x,y,value)."""
    grid = project_grid(fit, resolution, pole, hemisphere_only)
    if path is not None:
        Path(path).write_text(grid.to_csv())
    return grid


def jacobian_ratios(
    n: int, rng: np.random.Generator, pole=Pole.NORTH, boxes: int = 20, side: float = 0.8
) -> np.ndarray:
    """Monte Carlo check of area preservation.

    Uniform points on the sphere are projected; for random axis-aligned boxes
    inside the disk of radius 2 the ratio (hit fraction * 4 pi) / box area
    should be 1.
    """
    xy = lambert_project(random_directions(n, rng), pole)
    ratios = np.empty(boxes)
    for b in range(boxes):
        while True:
            c = rng.uniform(-2.0, 2.0, size=2)
            corners = c + 0.5 * side * np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])
            if np.all(np.hypot(corners[:, 0], corners[:, 1]) <= 2.0):
                break
        hit = np.all(np.abs(xy - c) <= 0.5 * side, axis=1)
        ratios[b] = hit.mean() * 4.0 * math.pi / side**2
    return ratios
