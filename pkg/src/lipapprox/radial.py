"""Radially symmetric problems on balls, reduced to weighted 1D problems."""

from __future__ import annotations

import math

import numpy as np

from .lip1d import lip_dp


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def radial_weights(R: float, n: int, dim: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Radii ``0..R`` and the measure of the shell cell around each radius.

    Cell ``i`` covers ``[rho_i - h/2, rho_i + h/2]`` clipped to ``[0, R]``, so
    every weight is positive and the weights sum to ``|B_R|``.
    """
    rho = np.linspace(0.0, R, n)
    h = rho[1] - rho[0]
    lo = np.clip(rho - 0.5 * h, 0.0, R)
    hi = np.clip(rho + 0.5 * h, 0.0, R)
    w = unit_ball_volume(dim) * (hi**dim - lo**dim)
    return rho, w


def radial_projection(profile, R: float, n: int, dim: int = 2):
    """Project a radial datum onto radial 1-Lipschitz functions on ``B_R``.

    Returns ``(rho, u, energy)`` with ``energy = 1/2 int_{B_R} (u - f)^2``.
    """
    rho, w = radial_weights(R, n, dim)
    f = np.asarray(profile(rho), dtype=float)
    u, mins = lip_dp(f, w, np.full(n - 1, rho[1] - rho[0]))
    return rho, u, float(mins[-1])


def jump_energy(r: float, dim: int = 2, penalty: float = 1.0) -> float:
    """Energy of the datum itself when its sphere of radius ``r`` is a jump set."""
    return penalty * dim * unit_ball_volume(dim) * r ** (dim - 1)


def radial_jump_comparison(k: float, r: float, R: float, n: int = 2001, dim: int = 2) -> dict:
    """Compare keeping the jump of ``k 1_{B_r}`` against the best continuous fit."""
    _, _, cont = radial_projection(lambda rho: k * (rho < r), R, n, dim)
    jump = jump_energy(r, dim)
    return {"jump_energy": jump, "continuous_energy": cont, "jumps_preferred": jump < cont}
