"""Piecewise-polynomial quadrature on [-1, 1]^d aligned with the unit lattice.

Cells have width 1/r; in 2D each cell is cut along its main diagonal into two
triangles. Every kink of the tent kernels and every jump of the cube indicators
(for even r) lies on a cell or triangle edge, so products of these kernels are
integrated exactly by the 3-point Gauss rule (collapsed for triangles).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_GAUSS_N = 3


@lru_cache(maxsize=None)
def _gauss01(n: int = _GAUSS_N) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _reference_triangles() -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on the unit square split as {v < u} and {u <= v}."""
    s, ws = _gauss01(_GAUSS_N + 1)
    t, wt = _gauss01(_GAUSS_N + 1)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt) * S
    u, v = S.ravel(), (S * T).ravel()
    w = W.ravel()
    lower = np.stack([u, v], axis=-1)
    upper = np.stack([v, u], axis=-1)
    return np.concatenate([lower, upper]), np.concatenate([w, w])


@lru_cache(maxsize=None)
def box_rule(d: int, resolution: int = 4, half_width: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (Q, d) and weights (Q,) integrating over [-half_width, half_width]^d."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    h = 1.0 / resolution
    starts = np.arange(-half_width * resolution, half_width * resolution) * h
    if d == 1:
        x, w = _gauss01()
        nodes = (starts[:, None] + h * x[None, :]).reshape(-1, 1)
        weights = np.tile(h * w, len(starts))
        return nodes, weights
    if d == 2:
        ref, wref = _reference_triangles()
        X, Y = np.meshgrid(starts, starts, indexing="ij")
        corners = np.stack([X.ravel(), Y.ravel()], axis=-1)
        nodes = (corners[:, None, :] + h * ref[None, :, :]).reshape(-1, 2)
        weights = np.tile(h * h * wref, len(corners))
        return nodes, weights
    # tensor Gauss for d >= 3 (no exactness claim across diagonals)
    x, w = _gauss01()
    pts1 = (starts[:, None] + h * x[None, :]).ravel()
    w1 = np.tile(h * w, len(starts))
    grids = np.meshgrid(*([pts1] * d), indexing="ij")
    wgrids = np.meshgrid(*([w1] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return nodes, weights


def integrate(f, d: int, resolution: int = 4, half_width: int = 1) -> float:
    nodes, weights = box_rule(d, resolution, half_width)
    return float(np.dot(weights, f(nodes)))


def integrate_with_error(f, d: int, resolution: int = 4, half_width: int = 1) -> tuple[float, float]:
    """Value at ``resolution`` plus the gap to the result at twice the resolution."""
    coarse = integrate(f, d, resolution, half_width)
    fine = integrate(f, d, 2 * resolution, half_width)
    return fine, abs(fine - coarse)
