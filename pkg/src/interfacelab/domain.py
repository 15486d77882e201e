"""Rectangular domains, exhausting sets D_N and the lattice grids built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FULL_CLOSURE = "full-closure"
INTERIOR_MARGIN = "interior-margin"
GRID_RULES = (FULL_CLOSURE, INTERIOR_MARGIN)


class DegenerateGridError(ValueError):
    """Raised when N * D_N contains no lattice point."""


@dataclass(frozen=True)
class Domain:
    """Open axis-aligned box ``prod_i (lower_i, upper_i)`` with a rule for D_N.

    ``full-closure`` uses ``D_N = prod_i (lower_i, upper_i]``.
    ``interior-margin`` uses ``D_N = prod_i (lower_i + m/N, upper_i - m/N)``.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    rule: str = FULL_CLOSURE
    margin: int = 0

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper) or not lower:
            raise ValueError("lower and upper must have the same positive length")
        if any(a >= b for a, b in zip(lower, upper)):
            raise ValueError("domain must be nonempty: lower < upper on every axis")
        if self.rule not in GRID_RULES:
            raise ValueError(f"unknown grid rule {self.rule!r}; expected one of {GRID_RULES}")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")

    @classmethod
    def unit(cls, d: int, rule: str = FULL_CLOSURE, margin: int = 0) -> "Domain":
        return cls((0.0,) * d, (1.0,) * d, rule, margin)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, z) -> np.ndarray:
        """Membership in the open box D for points of shape (..., d)."""
        z = np.asarray(z, dtype=float)
        return np.all((z > self.lower) & (z < self.upper), axis=-1)

    def contains_closure(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.all((z >= self.lower) & (z <= self.upper), axis=-1)

    def in_exhausting_set(self, z, N: int) -> np.ndarray:
        """Membership in D_N for points of shape (..., d)."""
        # compare in lattice units with the same tolerance as axis_ranges
        s = N * np.asarray(z, dtype=float)
        lo, hi = self.exhausting_bounds(N)
        lo, hi = N * lo, N * hi
        if self.rule == FULL_CLOSURE:
            return np.all((s > lo + 1e-9) & (s <= hi + 1e-9), axis=-1)
        return np.all((s > lo + 1e-9) & (s < hi - 1e-9), axis=-1)

    def exhausting_bounds(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        if self.rule == INTERIOR_MARGIN:
            return lo + self.margin / N, hi - self.margin / N
        return lo, hi

    def axis_ranges(self, N: int) -> list[range]:
        """Integer ranges whose product is N * D_N intersected with Z^d."""
        ranges = []
        lo, hi = self.exhausting_bounds(N)
        for a, b in zip(N * lo, N * hi):
            # strict lower bound on every rule
            first = math.floor(a + 1e-9) + 1
            if self.rule == FULL_CLOSURE:
                last = math.floor(b + 1e-9)
            else:
                last = math.ceil(b - 1e-9) - 1
            ranges.append(range(first, last + 1))
        return ranges


@dataclass(frozen=True)
class Grid:
    """Lexicographically ordered lattice points of N * D_N."""

    N: int
    domain: Domain
    ranges: tuple[range, ...]
    points: np.ndarray = field(repr=False, compare=False)

    @property
    def k(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(r) for r in self.ranges)

    @property
    def nodes(self) -> np.ndarray:
        """Node positions p_i / N in the domain."""
        return self.points / self.N

    def index_of(self, p) -> np.ndarray:
        """Inverse of the index bijection; -1 for lattice points outside the grid."""
        p = np.asarray(p, dtype=np.int64)
        idx = np.zeros(p.shape[:-1], dtype=np.int64)
        inside = np.ones(p.shape[:-1], dtype=bool)
        for axis, r in enumerate(self.ranges):
            local = p[..., axis] - r.start
            inside &= (local >= 0) & (local < len(r))
            idx = idx * len(r) + np.clip(local, 0, max(len(r) - 1, 0))
        return np.where(inside, idx, -1)


def build_grid(domain: Domain, N: int) -> Grid:
    if N < 1:
        raise ValueError("N must be a positive integer")
    ranges = tuple(domain.axis_ranges(N))
    if any(len(r) == 0 for r in ranges):
        raise DegenerateGridError(
            f"degenerate grid: N={N} leaves no lattice point in N*D_N for rule "
            f"{domain.rule!r} (margin {domain.margin})"
        )
    mesh = np.meshgrid(*[np.arange(r.start, r.stop) for r in ranges], indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1).astype(np.int64)
    return Grid(N=N, domain=domain, ranges=ranges, points=points)


@dataclass(frozen=True)
class MarginCheck:
    applicable: bool
    ok: bool
    margin: float
    required: float

    def __bool__(self):
        return self.ok


def margin_check(domain: Domain, N: int) -> MarginCheck:
    """Is every point of D_N at distance >= sqrt(d)/N from the complement of D?"""
    required = math.sqrt(domain.dim) / N
    if domain.rule != INTERIOR_MARGIN:
        return MarginCheck(applicable=False, ok=False, margin=0.0, required=required)
    # for nested boxes the distance is the smallest gap between faces
    lo, hi = domain.exhausting_bounds(N)
    gap = float(min(np.min(lo - np.asarray(domain.lower)), np.min(np.asarray(domain.upper) - hi)))
    return MarginCheck(applicable=True, ok=gap >= required - 1e-15, margin=gap, required=required)
