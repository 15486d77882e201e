"""Gaussian lattice models exp(-x^T A x), their samplers, limit covariances and spectra."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse

from .domain import Grid
from .ensemble import Ensemble, run_chunked
from .heightmap import HeightMap


class NotPositiveDefinite(linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class QuadraticModel:
    """Lattice Gaussian with density proportional to exp(-x^T A x), covariance (2A)^-1."""

    A: np.ndarray
    tag: str
    params: dict = field(default_factory=dict, compare=False)
    _chol: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if np.max(np.abs(A - A.T), initial=0.0) > 1e-12:
            raise ValueError("A is not symmetric")
        A = 0.5 * (A + A.T)
        try:
            chol = np.linalg.cholesky(2.0 * A)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(f"{self.tag}: matrix is not positive definite") from exc
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "_chol", chol)

    @property
    def k(self) -> int:
        return self.A.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        return linalg.cho_solve((self._chol, True), np.eye(self.k))

    def energy(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.A, x)

    def transform(self, xi) -> np.ndarray:
        """Map standard normals (n, k) to draws with covariance (2A)^-1."""
        xi = np.atleast_2d(xi)
        return linalg.solve_triangular(self._chol, xi.T, lower=True, trans="T").T

    @property
    def max_eigenvalue(self) -> float:
        return float(linalg.eigvalsh(self.A, subset_by_index=[self.k - 1, self.k - 1])[0])


def random_walk_model(N: int) -> QuadraticModel:
    """Increments x_1, x_2 - x_1, ..., x_N - x_{N-1} i.i.d. standard normal."""
    if N < 1:
        raise ValueError("N must be >= 1")
    B = np.eye(N) - np.eye(N, k=-1)
    return QuadraticModel(0.5 * B.T @ B, "random-walk", {"N": N})


def bridge_model(n: int) -> QuadraticModel:
    """n free variables pinned by x_0 = x_{n+1} = 0; x^T A x = 1/2 sum_{i=0}^{n} (x_{i+1} - x_i)^2."""
    if n < 1:
        raise ValueError("bridge needs at least one free variable")
    A = 0.5 * (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1))
    return QuadraticModel(A, "bridge", {"n": n})


def bridge_covariance(n: int) -> np.ndarray:
    i = np.arange(1, n + 1)
    return np.minimum.outer(i, i) - np.outer(i, i) / (n + 1)


def random_walk_covariance(N: int) -> np.ndarray:
    i = np.arange(1, N + 1)
    return np.minimum.outer(i, i).astype(float)


_NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def membrane_operators(grid: Grid) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Edge-difference map D and padded Laplacian map L for the zero-extended field.

    D has one row per lattice edge touching the grid; L has one row per site of
    the grid or its neighbours, with (L x)_k = 4 x_k - sum of the four neighbours.
    """
    if grid.dim != 2:
        raise ValueError("membrane model is two-dimensional")
    pts = [tuple(p) for p in grid.points]
    index = {p: i for i, p in enumerate(pts)}
    edges = set()
    for p in pts:
        for e in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            q = (p[0] + e[0], p[1] + e[1])
            edges.add(tuple(sorted((p, q))))
    rows, cols, vals = [], [], []
    for r, (a, b) in enumerate(sorted(edges)):
        for site, sign in ((a, 1.0), (b, -1.0)):
            if site in index:
                rows.append(r)
                cols.append(index[site])
                vals.append(sign)
    D = sparse.csr_matrix((vals, (rows, cols)), shape=(len(edges), len(pts)))
    support = set(pts)
    for p in pts:
        support.update((p[0] + e[0], p[1] + e[1]) for e in _NEIGHBOURS)
    rows, cols, vals = [], [], []
    for r, k in enumerate(sorted(support)):
        if k in index:
            rows.append(r)
            cols.append(index[k])
            vals.append(4.0)
        for e in _NEIGHBOURS:
            q = (k[0] + e[0], k[1] + e[1])
            if q in index:
                rows.append(r)
                cols.append(index[q])
                vals.append(-1.0)
    L = sparse.csr_matrix((vals, (rows, cols)), shape=(len(support), len(pts)))
    return D, L


def membrane_hamiltonian(grid: Grid, alpha: float, x) -> np.ndarray:
    """Gradient plus squared-Laplacian energy with weights 1/16 and (1/4)^2 per site."""
    D, L = membrane_operators(grid)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    # every edge appears twice in the per-site neighbour sums
    grad = 2.0 / 16.0 * np.sum((D @ x.T) ** 2, axis=0)
    lap = alpha * np.sum((L @ x.T / 4.0) ** 2, axis=0)
    return grad + lap


def membrane_model(grid: Grid, alpha: float) -> QuadraticModel:
    """x^T A x = 4 H(x) on the grid {3, ..., N-3}^2 (or any 2D grid)."""
    if grid.dim != 2:
        raise ValueError("membrane model is two-dimensional")
    if grid.N < 6:
        raise ValueError("membrane model needs N >= 6")
    D, L = membrane_operators(grid)
    A = 0.5 * (D.T @ D) + alpha / 4.0 * (L.T @ L)
    return QuadraticModel(np.asarray(A.todense()), "membrane", {"N": grid.N, "alpha": alpha})


def alpha_rule(rule: str | float, N: int) -> float:
    """'2N^2', 'N^{2+eps}' with eps in the string (e.g. 'N^2.5'), or a number."""
    if isinstance(rule, (int, float)):
        return float(rule)
    r = rule.replace(" ", "")
    if r in ("2N^2", "2N2"):
        return 2.0 * N**2
    if r.startswith("N^"):
        return float(N) ** float(r[2:].strip("{}"))
    return float(r)


def sample_gaussian(model: QuadraticModel, count: int, seed: int, workers: int = 1) -> Ensemble:
    if count < 1:
        raise ValueError("count must be >= 1")

    def draw(ss, n):
        rng = np.random.default_rng(ss)
        return model.transform(rng.standard_normal((n, model.k)))

    parts = run_chunked(draw, seed, count, workers)
    return Ensemble(np.concatenate(parts), seed=seed, info={"model": model.tag})


LIMIT_KINDS = ("brownian-motion", "brownian-bridge", "membrane-biharmonic", "membrane-mixed")


@dataclass(frozen=True)
class LimitCovariance:
    """Covariance of the limiting Gaussian field.

    The 1D kinds have closed forms. The membrane kinds use the Dirichlet-sine
    surrogate basis on the unit square: modes (k, l) with eigenvalue
    mu = pi^2 (k^2 + l^2) [mixed only] + pi^4 (k^2 + l^2)^2, and the covariance
    operator is the inverse, so Cov = sum phi(s) phi(t) / mu.
    """

    kind: str
    modes: int = 40

    def __post_init__(self):
        if self.kind not in LIMIT_KINDS:
            raise ValueError(f"unsupported limit kind {self.kind!r}")

    def __call__(self, s, t) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind == "brownian-motion":
            return np.minimum(s, t)
        if self.kind == "brownian-bridge":
            return np.minimum(s, t) - s * t
        total = 0.0
        for (k, l), mu in zip(*self.spectrum(self.modes)):
            total = total + self.eigenfunction((k, l), s) * self.eigenfunction((k, l), t) / mu
        return total

    def eigenvalue(self, mode) -> float:
        if self.kind in ("brownian-motion", "brownian-bridge"):
            k = int(mode)
            if self.kind == "brownian-bridge":
                return (k * np.pi) ** 2
            return ((k - 0.5) * np.pi) ** 2
        k2 = float(np.sum(np.square(mode)))
        q = np.pi**2 * k2
        return q**2 + (q if self.kind == "membrane-mixed" else 0.0)

    def eigenfunction(self, mode, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "brownian-bridge":
            return np.sqrt(2.0) * np.sin(int(mode) * np.pi * z)
        if self.kind == "brownian-motion":
            return np.sqrt(2.0) * np.sin((int(mode) - 0.5) * np.pi * z)
        k, l = mode
        return 2.0 * np.sin(k * np.pi * z[..., 0]) * np.sin(l * np.pi * z[..., 1])

    def spectrum(self, count: int):
        """Smallest ``count`` eigenvalues (ascending) with their modes."""
        if self.kind in ("brownian-motion", "brownian-bridge"):
            modes = list(range(1, count + 1))
        else:
            side = int(np.ceil(np.sqrt(count))) + 2
            modes = sorted(itertools.product(range(1, side + 1), repeat=2), key=lambda m: (m[0] ** 2 + m[1] ** 2, m))
            modes = modes[:count]
        return modes, np.array([self.eigenvalue(m) for m in modes])


def limit_covariance(kind: str, s, t) -> np.ndarray:
    return LimitCovariance(kind)(s, t)


@dataclass(frozen=True)
class SpectralPair:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # columns are lattice states
    metric: np.ndarray = field(repr=False)


def _sign_fix(hm: HeightMap, v: np.ndarray) -> np.ndarray:
    probe = np.full((1, hm.d), 0.25)
    val = hm.apply(v, probe)[0]
    if abs(val) < 1e-8 * max(np.abs(v).max(), 1.0):
        val = v[np.argmax(np.abs(v))]
    return v if val >= 0 else -v


def spectral_pairs(model: QuadraticModel, hm: HeightMap, count: int) -> SpectralPair:
    """Solve 2A v = lambda M v with M the H-metric of the height map basis.

    Equivalent to lambda Cov(<u, phi>, <u, h>) = <phi, h> for u = Lambda_N x, x ~ exp(-x^T A x).
    Vectors are normalized to |Lambda_N v|_H = 1 and signed so that Lambda_N v > 0 at z = 1/4.
    """
    if model.k != hm.k:
        raise ValueError("model and height map disagree on k_N")
    if count > hm.k:
        raise ValueError(f"count {count} exceeds k_N = {hm.k}")
    M = hm.metric()
    vals, vecs = linalg.eigh(2.0 * model.A, M, subset_by_index=[0, count - 1])
    vecs = np.column_stack([_sign_fix(hm, vecs[:, i]) for i in range(count)])
    norms = np.sqrt(np.einsum("ij,ik,kj->j", vecs, M, vecs))
    return SpectralPair(vals, vecs / norms, M)


class AntipodalError(ValueError):
    pass


def build_rotation(phi, phi_N, metric=None, tol: float = 1e-10) -> np.ndarray:
    """Isometry J with J phi_N = phi and J = id on the complement of span{phi, phi_N}.

    Vectors are coefficient vectors; ``metric`` (default identity) gives the inner product.
    """
    phi = np.asarray(phi, dtype=float)
    phi_N = np.asarray(phi_N, dtype=float)
    n = len(phi)
    M = np.eye(n) if metric is None else np.asarray(metric, dtype=float)

    def ip(a, b):
        return float(a @ M @ b)

    for name, v in (("phi", phi), ("phi_N", phi_N)):
        if abs(ip(v, v) - 1.0) > tol:
            raise ValueError(f"{name} must have unit norm")
    c = ip(phi_N, phi)
    if c < -1.0 + tol:
        raise AntipodalError("phi = -phi_N: rotation not unique")
    s2 = 1.0 - c * c
    if s2 <= tol**2:
        return np.eye(n)
    s = np.sqrt(s2)
    v = (phi - c * phi_N) / s
    w = (c * phi - phi_N) / s
    # J = I - phi_N phi_N* - v v* + phi phi_N* + w v*, with a* = a^T M
    return (
        np.eye(n)
        - np.outer(phi_N, M @ phi_N)
        - np.outer(v, M @ v)
        + np.outer(phi, M @ phi_N)
        + np.outer(w, M @ v)
    )


def rotation_deviation_bound(phi, phi_N, metric=None) -> float:
    phi = np.asarray(phi, dtype=float)
    phi_N = np.asarray(phi_N, dtype=float)
    M = np.eye(len(phi)) if metric is None else np.asarray(metric, dtype=float)
    diff = phi - phi_N
    return float(diff @ M @ diff + 2.0 * (1.0 - phi_N @ M @ phi))
