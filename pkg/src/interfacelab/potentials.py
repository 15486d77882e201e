"""Bounded-variation potentials g = g0 + sum_j beta_j 1_{(-inf, y_j]} and their envelopes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

# name -> (value, derivative, sup |value|, sup |derivative|) for the unit-scale shape
_SMOOTH = {
    "zero": (lambda y: np.zeros_like(y), lambda y: np.zeros_like(y), 0.0, 0.0),
    "sine": (np.sin, np.cos, 1.0, 1.0),
    "arctan": (np.arctan, lambda y: 1.0 / (1.0 + y * y), np.pi / 2, 1.0),
    "scaled-tanh": (np.tanh, lambda y: 1.0 / np.cosh(y) ** 2, 1.0, 1.0),
}
SMOOTH_KINDS = tuple(_SMOOTH)


@dataclass(frozen=True)
class Potential:
    """g(y) = amplitude * shape(y / width) + sum_j jumps[j] * 1{y <= levels[j]}."""

    smooth: str = "zero"
    amplitude: float = 1.0
    width: float = 1.0
    levels: tuple[float, ...] = ()
    jumps: tuple[float, ...] = ()

    def __post_init__(self):
        if self.smooth not in _SMOOTH:
            raise ValueError(f"unknown smooth part {self.smooth!r}; choose from {SMOOTH_KINDS}")
        levels = tuple(float(v) for v in self.levels)
        jumps = tuple(float(v) for v in self.jumps)
        if len(levels) != len(jumps):
            raise ValueError("levels and jumps must have equal length")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if self.width <= 0:
            raise ValueError("width must be positive")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "jumps", jumps)

    @classmethod
    def step(cls, level: float, beta: float) -> "Potential":
        return cls(levels=(level,), jumps=(beta,))

    def smooth_value(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.amplitude * _SMOOTH[self.smooth][0](y / self.width)

    def smooth_derivative(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.amplitude / self.width * _SMOOTH[self.smooth][1](y / self.width)

    def step_value(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for level, beta in zip(self.levels, self.jumps):
            out = out + beta * (y <= level)
        return out

    def __call__(self, y) -> np.ndarray:
        return self.smooth_value(y) + self.step_value(y)

    eval = __call__

    @property
    def smooth_sup(self) -> float:
        return abs(self.amplitude) * _SMOOTH[self.smooth][2]

    @property
    def smooth_derivative_sup(self) -> float:
        return abs(self.amplitude) / self.width * _SMOOTH[self.smooth][3]

    @property
    def sup_bound(self) -> float:
        """Declared bound on |g|."""
        return self.smooth_sup + float(np.sum(np.abs(self.jumps)))

    @property
    def is_zero(self) -> bool:
        return (self.smooth == "zero" or self.amplitude == 0.0) and not any(self.jumps)


@dataclass(frozen=True)
class VariationReport:
    value: float
    smooth_part: float
    jump_part: float
    window: tuple[float, float]
    abserr: float


def total_variation(g: Potential, window=(-np.inf, np.inf), limit: int = 400) -> VariationReport:
    """Integral of |g0'| over the window plus the absolute jumps inside it.

    Returns an infinite value when the smooth part has unbounded variation on the window.
    """
    lo, hi = window
    deriv = lambda y: abs(float(g.smooth_derivative(y)))
    if g.smooth == "zero" or g.amplitude == 0.0:
        smooth, err = 0.0, 0.0
    elif np.isfinite(lo) and np.isfinite(hi):
        # split at the periodic kinks of |sin'| so quad sees smooth pieces
        pts = np.linspace(lo, hi, int(min(max((hi - lo) / g.width, 1), 2000)) + 1)
        smooth, err = 0.0, 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            v, e = integrate.quad(deriv, a, b, limit=limit)
            smooth += v
            err += e
    else:
        if g.smooth == "sine":
            smooth, err = np.inf, 0.0
        else:
            smooth, err = integrate.quad(deriv, lo, hi, limit=limit, epsabs=1e-13, epsrel=1e-12)
    jump = float(sum(abs(b) for y, b in zip(g.levels, g.jumps) if lo <= y <= hi))
    return VariationReport(smooth + jump, smooth, jump, (float(lo), float(hi)), err)


@dataclass(frozen=True)
class MonotonePair:
    """Increasing tables f1, f2 on ``grid`` with g = f1 - f2."""

    grid: np.ndarray
    f1: np.ndarray
    f2: np.ndarray

    @property
    def sup_f1(self) -> float:
        return float(np.max(np.abs(self.f1)))

    @property
    def sup_f2(self) -> float:
        return float(np.max(np.abs(self.f2)))

    def to_csv(self, path, header_note: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header_note:
                fh.write(f"# {header_note}\n")
            writer = csv.writer(fh)
            writer.writerow(["y", "f1", "f2"])
            for row in zip(self.grid, self.f1, self.f2):
                writer.writerow([repr(float(v)) for v in row])


def default_grid(g: Potential, half_width: float = 20.0, n: int = 20001) -> np.ndarray:
    """Uniform grid plus points just either side of every level."""
    base = np.linspace(-half_width, half_width, n)
    extra = []
    for y in g.levels:
        extra += [y, np.nextafter(y, np.inf)]
    return np.unique(np.concatenate([base, extra]))


def jordan_decompose(g: Potential, grid=None) -> MonotonePair:
    """f1 = accumulated upward increments, f2 = accumulated downward increments - g(y_0)."""
    y = default_grid(g) if grid is None else np.sort(np.asarray(grid, dtype=float))
    vals = g(y)
    inc = np.diff(vals)
    up = np.concatenate([[0.0], np.cumsum(np.maximum(inc, 0.0))])
    down = np.concatenate([[0.0], np.cumsum(np.maximum(-inc, 0.0))])
    return MonotonePair(y, up, down - vals[0])


class NotMonotoneError(ValueError):
    pass


def _monotone_direction(f, probe: np.ndarray) -> bool:
    v = f(probe)
    d = np.diff(v)
    if np.all(d >= -1e-12):
        return True
    if np.all(d <= 1e-12):
        return False
    raise NotMonotoneError("envelopes need a monotone function")


@dataclass(frozen=True)
class Envelopes:
    """Continuous minorant/majorant sum_i c_i tau_{m,i} with hats tau_{m,i} at i/m.

    Coefficients are computed on demand for any x, so the sandwich holds on all of R.
    """

    g_N: object = field(repr=False)
    g_ref: object = field(repr=False)
    m: int = 4
    increasing: bool = True
    tol: float = 0.0
    n_shift: int = 64

    def shift(self, i: np.ndarray) -> np.ndarray:
        """r(i) in (-1/m, 1/m): a near-minimizer of |g(i/m) - g_N(i/m + r)|, ties to small |r|."""
        i = np.asarray(i)
        r = np.arange(-self.n_shift + 1, self.n_shift) / (self.n_shift * self.m)
        r = r[np.argsort(np.abs(r), kind="stable")]
        x = i / self.m
        gap = np.abs(self.g_ref(x)[..., None] - self.g_N(x[..., None] + r))
        ok = gap <= gap.min(axis=-1, keepdims=True) + self.tol
        return r[np.argmax(ok, axis=-1)]

    def coefficient(self, j: np.ndarray, offset: int) -> np.ndarray:
        i = np.asarray(j) + offset
        return self.g_N(i / self.m + self.shift(i))

    def _combine(self, x, offset: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        j = np.floor(self.m * x).astype(np.int64)
        frac = self.m * x - j
        return (1.0 - frac) * self.coefficient(j, offset) + frac * self.coefficient(j + 1, offset)

    def minorant(self, x) -> np.ndarray:
        return self._combine(x, -2 if self.increasing else 2)

    def majorant(self, x) -> np.ndarray:
        return self._combine(x, 2 if self.increasing else -2)

    def band_width(self, x, threshold: float = 1e-9) -> float:
        """Length of the part of the (uniform) grid where majorant - minorant exceeds threshold."""
        x = np.asarray(x, dtype=float)
        gap = self.majorant(x) - self.minorant(x)
        above = x[gap > threshold]
        return 0.0 if len(above) == 0 else float(above.max() - above.min())


def mollified_envelopes(g_N, m: int, tol: float = 0.0, g_ref=None, increasing=None, n_shift: int = 64) -> Envelopes:
    """Envelopes of a monotone bounded function ``g_N`` (callable on arrays).

    ``g_ref`` is the target function used to choose the shifts (defaults to g_N);
    ``tol`` is the slack allowed in the shift search.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    probe = np.linspace(-50.0, 50.0, 20001)
    if increasing is None:
        increasing = _monotone_direction(g_N, probe)
    else:
        _monotone_direction(g_N, probe)
    return Envelopes(g_N, g_N if g_ref is None else g_ref, m, bool(increasing), tol, n_shift)


def table_function(grid, values):
    """Right-continuous step interpolation of a monotone table, constant beyond the ends."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)

    def f(y):
        idx = np.searchsorted(grid, np.asarray(y, dtype=float), side="right") - 1
        return values[np.clip(idx, 0, len(grid) - 1)]

    return f


def local_shift_distance(g, g_N, delta: float, grid, n_shift: int = 200) -> float:
    """sup over grid x of min over |r| <= delta of |g(x) - g_N(x + r)|."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    n_shift += n_shift % 2
    r = delta * (np.arange(-n_shift, n_shift + 1) / n_shift)
    x = np.asarray(grid, dtype=float)
    best = np.full(len(x), np.inf)
    gx = g(x)
    for ri in r:
        best = np.minimum(best, np.abs(gx - g_N(x + ri)))
    return float(best.max())
