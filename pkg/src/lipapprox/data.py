"""Builtin data sets: the worked 1D cases and the radial indicator."""

from __future__ import annotations

import numpy as np

from .grid import Grid, ScalarField, build_grid, field_from_function


def case1(k: float = 1.0, r: float = 0.4):
    """Indicator ``k * 1{|x| < r}`` (open interval)."""
    return lambda x: k * (np.abs(x) < r).astype(float)


def case2():
    return lambda x: 2.0 * np.abs(x)


def case3():
    return lambda x: np.sqrt(np.abs(x))


def radial(k: float = 1.0, r: float = 0.4, center=(0.0, 0.0)):
    cx, cy = center
    return lambda x, y: k * ((x - cx) ** 2 + (y - cy) ** 2 < r * r).astype(float)


def case1_reference(x, k: float = 1.0, r: float = 0.4):
    """Closed form ``min{(r + k/2 - |x|)_+, k}`` (exact when r >= k/2 and the domain is long enough)."""
    return np.minimum(np.maximum(r + 0.5 * k - np.abs(x), 0.0), k)


def case2_reference(x):
    return np.abs(x) + 0.5


def case3_reference(x, s: float = 4.0 / 9.0):
    ax = np.abs(x)
    return np.where(ax <= s, ax - s + np.sqrt(s), np.sqrt(ax))


def builtin_field(
    name: str,
    n: int,
    k: float = 1.0,
    r0: float = 0.4,
    extent=(-1.0, 1.0),
    radius: float = 1.0,
) -> ScalarField:
    """Datum by name: ``case1``, ``case2``, ``case3`` (1D) or ``radial`` (2D disk)."""
    if name == "radial":
        grid = build_grid(2, (-radius, radius), n, ("disk", (0.0, 0.0), radius))
        return field_from_function(grid, radial(k, r0))
    rules = {"case1": lambda: case1(k, r0), "case2": case2, "case3": case3}
    if name not in rules:
        raise ValueError(f"unknown builtin datum {name!r}")
    grid: Grid = build_grid(1, extent, n)
    return field_from_function(grid, rules[name]())
