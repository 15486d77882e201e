"""Archetype kernels, the admissibility checks they must pass, and height maps."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse

from . import quadrature
from .domain import Grid

ARCHETYPE_KINDS = ("indicator-cube", "indicator-lower", "tent", "custom-mesh", "custom")

DEFAULT_TOL = 1e-9


class CoercivityError(ValueError):
    pass


@dataclass(frozen=True)
class Archetype:
    """Kernel Xi: R^d -> [0, 1] whose lattice shifts generate a height map.

    ``func`` takes points of shape (..., d) and returns values of shape (...).
    ``support`` is the declared box ``(low, high)`` (per axis) outside which Xi vanishes.
    """

    kind: str
    dim: int
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    support: tuple[float, float] = (-1.0, 1.0)
    exact_l2: float | None = None
    name: str = ""

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim == 0 or z.shape[-1] != self.dim:
            if self.dim == 1:
                z = z[..., None]
            else:
                raise ValueError(f"points must have trailing dimension {self.dim}")
        return self.func(z)

    @property
    def label(self) -> str:
        return self.name or f"{self.kind}-{self.dim}d"

    def scaled(self, factor: float) -> "Archetype":
        base = self.func
        return Archetype(
            kind="custom",
            dim=self.dim,
            func=lambda z: factor * base(z),
            support=self.support,
            exact_l2=None if self.exact_l2 is None else factor**2 * self.exact_l2,
            name=f"{factor:g}*{self.label}",
        )


def _indicator(low: float, high: float):
    def f(z):
        return np.all((z >= low) & (z < high), axis=-1).astype(float)

    return f


def _tent(z: np.ndarray) -> np.ndarray:
    # min over i, j of (1 + z_i - z_j), (1 + z_i), (1 - z_i), positive part
    d = z.shape[-1]
    val = np.minimum(1.0 + z, 1.0 - z).min(axis=-1)
    for i, j in itertools.permutations(range(d), 2):
        val = np.minimum(val, 1.0 + z[..., i] - z[..., j])
    return np.maximum(val, 0.0)


# closed forms: 1/3 + 1/3 in 1D; six triangles of 1/12 each in 2D
_TENT_L2 = {1: 2.0 / 3.0, 2: 1.0 / 2.0}


def make_archetype(kind: str, d: int) -> Archetype:
    if kind == "indicator-cube":
        return Archetype(kind, d, _indicator(-0.5, 0.5), (-0.5, 0.5), exact_l2=1.0)
    if kind == "indicator-lower":
        return Archetype(kind, d, _indicator(-1.0, 0.0), (-1.0, 0.0), exact_l2=1.0)
    if kind in ("tent", "tent-1d", "tent-2d"):
        if kind != "tent":
            d_tag = int(kind[-2])
            if d_tag != d:
                raise ValueError(f"{kind} requested with d={d}")
        if d not in (1, 2):
            raise ValueError(f"tent archetype supported for d in (1, 2), got d={d}")
        return Archetype("tent", d, _tent, (-1.0, 1.0), exact_l2=_TENT_L2[d])
    raise ValueError(f"unsupported archetype kind {kind!r} for d={d}")


def load_custom_archetype(path) -> Archetype:
    """Piecewise-constant kernel from a text table.

    First non-comment line: ``d step``. Every following line: ``j_1 .. j_d value``,
    meaning Xi = value on the cell ``prod [j_i * step, (j_i + 1) * step)``.
    """
    rows = []
    header = None
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if header is None:
                parts = line.split()
                header = (int(parts[0]), float(parts[1]))
                continue
            rows.append([float(v) for v in line.split()])
    if header is None:
        raise ValueError(f"{path}: missing header line 'd step'")
    d, step = header
    table = np.asarray(rows, dtype=float).reshape(-1, d + 1)
    return archetype_from_table(d, step, table[:, :d].astype(np.int64), table[:, d])


def archetype_from_table(d: int, step: float, cells: np.ndarray, values: np.ndarray) -> Archetype:
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, d)
    values = np.asarray(values, dtype=float)
    lo = cells.min(axis=0)
    shape = tuple(cells.max(axis=0) - lo + 1)
    dense = np.zeros(shape)
    dense[tuple((cells - lo).T)] = values

    def f(z):
        idx = np.floor(z / step).astype(np.int64) - lo
        ok = np.all((idx >= 0) & (idx < np.asarray(shape)), axis=-1)
        idx = np.where(ok[..., None], idx, 0)
        return np.where(ok, dense[tuple(np.moveaxis(idx, -1, 0))], 0.0)

    support = (float(lo.min() * step), float((lo + np.asarray(shape)).max() * step))
    return Archetype("custom-mesh", d, f, support, name=f"table-{d}d")


def l2_square(archetype: Archetype, resolution: int = 4) -> tuple[float, float]:
    """Integral of Xi^2 over R^d with an error estimate (resolution doubling)."""
    value, err = quadrature.integrate_with_error(
        lambda z: archetype(z) ** 2, archetype.dim, _even(resolution), half_width=2
    )
    if archetype.exact_l2 is not None:
        return archetype.exact_l2, err
    return value, err


def _even(r: int) -> int:
    return r + (r % 2)


@dataclass
class ConditionReport:
    archetype: str
    support_violation: float
    integral: float
    partition_deviation: float
    l2_square: float
    tol: float
    passed: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def as_dict(self) -> dict:
        return {
            "archetype": self.archetype,
            "support_violation": self.support_violation,
            "integral": self.integral,
            "partition_deviation": self.partition_deviation,
            "l2_square": self.l2_square,
            "tol": self.tol,
            "passed": dict(self.passed),
            "ok": self.ok,
        }


def _unit_cell_mesh(d: int, points_per_cell: int) -> np.ndarray:
    per_axis = max(2, int(round(points_per_cell ** (1.0 / d))))
    # offset keeps mesh points off the cell faces where half-open conventions bite
    axis = (np.arange(per_axis) + 0.5) / per_axis
    axis = np.concatenate([[0.0], axis])
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def check_condition(
    archetype: Archetype, resolution: int = 8, mesh_points: int = 1000, tol: float = DEFAULT_TOL
) -> ConditionReport:
    """Check support in [-1,1]^d, unit integral, partition of unity and L2 mass > 1/2."""
    d = archetype.dim
    res = _even(resolution)
    # (i) sample the shell [-2,2]^d minus [-1,1]^d
    nodes, _ = quadrature.box_rule(d, res, half_width=2)
    outside = np.any(np.abs(nodes) > 1.0, axis=-1)
    support_violation = float(np.max(np.abs(archetype(nodes[outside])), initial=0.0))
    # (ii)
    integral = quadrature.integrate(archetype, d, res, half_width=2)
    # (iii)
    mesh = _unit_cell_mesh(d, mesh_points)
    shifts = np.array(list(itertools.product(range(-2, 3), repeat=d)), dtype=float)
    total = np.zeros(len(mesh))
    for k in shifts:
        total += archetype(mesh - k)
    partition_deviation = float(np.max(np.abs(total - 1.0)))
    # (iv)
    l2, _ = l2_square(archetype, res)
    report = ConditionReport(
        archetype=archetype.label,
        support_violation=support_violation,
        integral=integral,
        partition_deviation=partition_deviation,
        l2_square=l2,
        tol=tol,
    )
    report.passed = {
        "support": support_violation <= tol,
        "integral": abs(integral - 1.0) <= tol,
        "partition_of_unity": partition_deviation <= tol,
        "l2_mass": l2 > 0.5 + tol,
    }
    return report


def overlap_table(archetype: Archetype, resolution: int = 4) -> dict[tuple[int, ...], float]:
    """Integrals of Xi(z) Xi(z - delta) for lattice offsets delta in {-1,0,1}^d."""
    d = archetype.dim
    nodes, weights = quadrature.box_rule(d, _even(resolution), half_width=1)
    base = archetype(nodes)
    table = {}
    for delta in itertools.product(range(-1, 2), repeat=d):
        table[delta] = float(np.dot(weights, base * archetype(nodes - np.asarray(delta, float))))
    return table


def _offset_sparse(points: np.ndarray, lookup, table: dict) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    for delta, value in table.items():
        if value == 0.0:
            continue
        j = lookup(points + np.asarray(delta))
        ok = np.flatnonzero(j >= 0)
        rows.append(ok)
        cols.append(j[ok])
        vals.append(np.full(len(ok), value))
    n = len(points)
    M = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return (M + M.T) * 0.5


def _point_lookup(points: np.ndarray):
    index = {tuple(p): i for i, p in enumerate(points.tolist())}

    def lookup(q):
        return np.array([index.get(tuple(r), -1) for r in q.tolist()], dtype=np.int64)

    return lookup


def gram_matrix(archetype: Archetype, window, resolution: int = 4, as_sparse: bool = False):
    """Matrix of integrals of Xi(z - k) Xi(z - l) for k, l in ``window`` (shape (n, d)).

    Entry (k, l) depends on l - k only and vanishes when max_i |k_i - l_i| > 1.
    """
    window = np.asarray(window, dtype=np.int64).reshape(len(window), -1)
    M = _offset_sparse(window, _point_lookup(window), overlap_table(archetype, resolution))
    return M if as_sparse else M.toarray()


def coercivity_constant(archetype: Archetype, resolution: int = 4) -> float:
    l2, _ = l2_square(archetype, resolution)
    c = 2.0 * l2 - 1.0
    if c <= 0.0:
        raise CoercivityError(f"coercivity violated for {archetype.label}: c = {c:.3g} <= 0")
    return c


@dataclass(frozen=True)
class HeightMap:
    """x -> N^{d/2-1} sum_i x_i Xi(N z - p_i) on the grid's domain."""

    grid: Grid
    archetype: Archetype

    def __post_init__(self):
        if self.grid.dim != self.archetype.dim:
            raise ValueError("grid and archetype dimensions differ")

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def d(self) -> int:
        return self.grid.dim

    @property
    def k(self) -> int:
        return self.grid.k

    @property
    def amplitude(self) -> float:
        return float(self.N) ** (self.d / 2.0 - 1.0)

    def basis_matrix(self, z) -> sparse.csr_matrix:
        """Sparse (m, k) matrix of Xi(N z_j - p_i)."""
        z = _as_points(z, self.d)
        Nz = self.N * z
        low, high = self.archetype.support
        base = np.floor(Nz - high).astype(np.int64)
        span = int(np.ceil(high - low)) + 2
        offsets = np.array(list(itertools.product(range(span), repeat=self.d)), dtype=np.int64)
        cand = base[:, None, :] + offsets[None, :, :]
        idx = self.grid.index_of(cand)
        vals = np.where(idx >= 0, self.archetype(Nz[:, None, :] - cand), 0.0)
        rows = np.broadcast_to(np.arange(len(z))[:, None], idx.shape)
        keep = (idx >= 0) & (vals != 0.0)
        return sparse.csr_matrix(
            (vals[keep], (rows[keep], idx[keep])), shape=(len(z), self.k)
        )

    def apply(self, x, z) -> np.ndarray:
        """Evaluate Lambda_N x at points z; x may be (k,) or (n, k)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.k:
            raise ValueError(f"state has dimension {x.shape[-1]}, grid has k_N={self.k}")
        B = self.basis_matrix(z)
        out = self.amplitude * (B @ x.T).T
        return out

    def coefficients_of(self, f, resolution: int = 4) -> np.ndarray:
        """Integrals over D of Xi(N z - p_i) f(z); f maps (..., d) points to (...)."""
        nodes, weights = quadrature.box_rule(self.d, _even(resolution), half_width=1)
        kern = self.archetype(nodes) * weights
        active = kern != 0.0
        nodes, kern = nodes[active], kern[active]
        z = (self.grid.points[:, None, :] + nodes[None, :, :]) / self.N
        inside = self.grid.domain.contains_closure(z)
        vals = np.where(inside, f(z), 0.0)
        return (vals * kern[None, :]).sum(axis=1) / self.N**self.d

    def projection_matrix(self, functions, resolution: int = 4) -> np.ndarray:
        """(k, m) matrix with entries <Lambda_N e_i, f_j>, so <Lambda_N x, f_j> = x @ P."""
        cols = [self.coefficients_of(f, resolution) for f in functions]
        return self.amplitude * np.stack(cols, axis=-1)

    def supports_inside(self) -> bool:
        low, high = self.archetype.support
        pts = self.grid.points
        lo = (pts + low) / self.N
        hi = (pts + high) / self.N
        dom = self.grid.domain
        return bool(np.all(lo >= np.asarray(dom.lower) - 1e-12) and np.all(hi <= np.asarray(dom.upper) + 1e-12))

    def metric(self, resolution: int = 4, as_sparse: bool = False):
        """Gram matrix <Lambda_N e_i, Lambda_N e_j>_H of the basis on D."""
        if self.supports_inside():
            table = overlap_table(self.archetype, resolution)
            M = _offset_sparse(self.grid.points, self.grid.index_of, table) / self.N**2
            return M if as_sparse else M.toarray()
        # integrals restricted to D near the boundary
        nodes, weights = quadrature.box_rule(self.d, _even(resolution), half_width=1)
        base = self.archetype(nodes)
        active = base != 0.0
        nodes, weights, base = nodes[active], weights[active], base[active]
        pts = self.grid.points
        rows, cols, vals = [], [], []
        for delta in itertools.product(range(-1, 2), repeat=self.d):
            delta = np.asarray(delta)
            j = self.grid.index_of(pts + delta)
            ok = j >= 0
            other = self.archetype(nodes - delta)
            z = (pts[ok][:, None, :] + nodes[None, :, :]) / self.N
            mask = self.grid.domain.contains_closure(z)
            rows.append(np.flatnonzero(ok))
            cols.append(j[ok])
            vals.append((mask * (weights * base * other)[None, :]).sum(axis=1))
        M = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.k, self.k)
        )
        M = 0.5 * (M + M.T) * self.amplitude**2 / self.N**self.d
        return M if as_sparse else M.toarray()

    def h_norm_sq(self, x, resolution: int = 4) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        M = self.metric(resolution, as_sparse=True)
        return np.sum((M @ x.T).T * x, axis=-1)


def _as_points(z, d: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if d == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        z = z.reshape(-1, 1)
    return z.reshape(-1, d)


@dataclass(frozen=True)
class SandwichResult:
    lower: float
    value: float
    upper: float
    ok: bool
    note: str = ""

    def __iter__(self):
        return iter((self.lower, self.value, self.upper, self.ok))


def norm_sandwich_check(hm: HeightMap, x, tol: float = 1e-12) -> SandwichResult:
    """c N^-2 |x|^2 <= |Lambda_N x|_H^2 <= 3^d N^-2 |x|^2 for a single state x.

    c = 2 int Xi^2 - 1 is used as is; when it is not positive the lower bound is
    vacuous and the note says so.
    """
    x = np.asarray(x, dtype=float)
    if not hm.supports_inside():
        return SandwichResult(np.nan, np.nan, np.nan, False, "kernel supports leave D; check disabled")
    l2, _ = l2_square(hm.archetype)
    c = 2.0 * l2 - 1.0
    note = "" if c > 0 else f"degenerate constant c={c:.3g}; lower bound vacuous"
    e = float(x @ x)
    lower = c * e / hm.N**2
    upper = 3**hm.d * e / hm.N**2
    value = float(hm.h_norm_sq(x))
    scale = tol * max(upper, 1.0)
    return SandwichResult(lower, value, upper, lower - scale <= value <= upper + scale, note)


def interpolation_identity_check(archetype: Archetype, values, mesh) -> float:
    """Max gap between sum_k lambda_k Xi(z - k) and the explicit piecewise-linear interpolant.

    ``values`` is indexed by sites 0..n-1 (1D) or a 2D array over sites (k1, k2);
    entries outside the array are zero.
    """
    if archetype.kind != "tent":
        raise ValueError("interpolation identity applies to tent archetypes only")
    lam = np.asarray(values, dtype=float)
    d = archetype.dim
    if lam.ndim != d:
        raise ValueError("value array rank must equal the archetype dimension")
    z = _as_points(mesh, d)
    sites = np.array(list(itertools.product(*[range(n) for n in lam.shape])), dtype=float)
    direct = archetype(z[:, None, :] - sites[None, :, :]) @ lam.ravel()

    def lam_at(k):
        k = np.asarray(k, dtype=np.int64)
        ok = np.all((k >= 0) & (k < np.asarray(lam.shape)), axis=-1)
        k = np.where(ok[..., None], k, 0)
        return np.where(ok, lam[tuple(np.moveaxis(k, -1, 0))], 0.0)

    base = np.floor(z).astype(np.int64)
    frac = z - base
    if d == 1:
        l0 = lam_at(base)
        l1 = lam_at(base + 1)
        interp = l0 + frac[:, 0] * (l1 - l0)
    else:
        e1 = np.array([1, 0])
        e2 = np.array([0, 1])
        l0 = lam_at(base)
        l1 = lam_at(base + e1)
        l2 = lam_at(base + e2)
        l12 = lam_at(base + e1 + e2)
        lower = frac[:, 1] < frac[:, 0]
        t1 = l0 + frac[:, 0] * (l1 - l0) + frac[:, 1] * (l12 - l1)
        t2 = l0 + frac[:, 1] * (l2 - l0) + frac[:, 0] * (l12 - l2)
        interp = np.where(lower, t1, t2)
    return float(np.max(np.abs(direct - interp)))
