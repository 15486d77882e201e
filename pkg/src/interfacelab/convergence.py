"""Statistical and numerical checks of the scaling limits, equivalences and spectra."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .domain import Domain, build_grid, INTERIOR_MARGIN
from .gaussian import LimitCovariance, bridge_model, spectral_pairs
from .heightmap import HeightMap, make_archetype


def sine_function(mode):
    """sqrt(2) sin(k pi z) in 1D, 2 sin(k pi z1) sin(l pi z2) in 2D."""
    if np.ndim(mode) == 0:
        k = int(mode)
        return lambda z: np.sqrt(2.0) * np.sin(k * np.pi * np.asarray(z)[..., 0])
    k, l = mode
    return lambda z: 2.0 * np.sin(k * np.pi * z[..., 0]) * np.sin(l * np.pi * z[..., 1])


@dataclass(frozen=True)
class DualNormSpec:
    """Sine basis phi_k with weights w_k; |eta|^2_{H0'} = sum w_k^2 <phi_k, eta>^2."""

    d: int = 1
    n_modes: int = 32
    weight_scale: float = 1.0

    @property
    def modes(self) -> list:
        if self.d == 1:
            return list(range(1, self.n_modes + 1))
        return list(itertools.product(range(1, self.n_modes + 1), repeat=2))

    @property
    def weights(self) -> np.ndarray:
        if self.d == 1:
            w = 1.0 / np.arange(1, self.n_modes + 1)
        else:
            w = np.array([1.0 / (k * l) for k, l in self.modes])
        return self.weight_scale * w

    @property
    def functions(self) -> list:
        return [sine_function(m) for m in self.modes]

    def hs_sum(self) -> float:
        s = float(np.sum(self.weights**2))
        if not np.isfinite(s):
            raise ValueError("weights are not square summable")
        return s

    def hs_tail_bound(self) -> float:
        """Bound on the omitted part of sum w_k^2 (1D: sum_{k>n} 1/k^2 <= 1/n)."""
        if self.d == 1:
            return self.weight_scale**2 / self.n_modes
        return self.weight_scale**2 * (np.pi**2 / 6) * 2.0 / self.n_modes

    def dual_norm_sq(self, coeffs) -> np.ndarray:
        return np.sum(self.weights**2 * np.asarray(coeffs) ** 2, axis=-1)


@dataclass
class CovarianceReport:
    empirical: np.ndarray
    limit: np.ndarray
    stderr: np.ndarray
    max_abs_error: float
    max_studentized: float
    samples: int

    def passed(self, nsigma: float = 3.0) -> bool:
        return bool(self.max_studentized <= nsigma)


def covariance_compare(values, limit, points, weights=None) -> CovarianceReport:
    """Empirical Cov(u(s), u(t)) on a point grid against a limit covariance.

    ``values`` holds u(points) per sample, shape (n, m). Standard errors come from the
    sample variance of the centred products.
    """
    U = np.asarray(values, dtype=float)
    n = len(U)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
    else:
        w = np.full(n, 1.0 / n)
    C = U - w @ U
    prod = C[:, :, None] * C[:, None, :]
    emp = np.einsum("n,nij->ij", w, prod)
    var = np.einsum("n,nij->ij", w, (prod - emp) ** 2)
    n_eff = 1.0 / np.sum(w**2)
    se = np.sqrt(var / n_eff)
    pts = np.asarray(points, dtype=float)
    if isinstance(limit, LimitCovariance) or callable(limit):
        lim = limit(pts[:, None], pts[None, :])
    else:
        lim = np.asarray(limit, dtype=float)
    diff = np.abs(emp - lim)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, diff / se, np.where(diff > 1e-12, np.inf, 0.0))
    return CovarianceReport(emp, lim, se, float(diff.max()), float(z.max()), n)


@dataclass
class TwoSampleReport:
    statistic: float
    p_value: float
    null_mean: float
    null_std: float
    ks_statistics: np.ndarray
    ks_p_values: np.ndarray
    max_ks: float
    max_ks_p_value: float
    sizes: tuple
    n_projections: int
    info: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "mmd": self.statistic,
            "p_value": self.p_value,
            "null_mean": self.null_mean,
            "null_std": self.null_std,
            "ks_statistics": np.asarray(self.ks_statistics).tolist(),
            "ks_p_values": np.asarray(self.ks_p_values).tolist(),
            "max_ks": self.max_ks,
            "max_ks_p_value": self.max_ks_p_value,
            "sizes": list(self.sizes),
            "n_projections": self.n_projections,
        }


def _median_bandwidth(Z: np.ndarray, rng, max_points: int = 1000) -> float:
    idx = rng.choice(len(Z), size=min(len(Z), max_points), replace=False)
    S = Z[np.sort(idx)]
    d2 = np.sum((S[:, None, :] - S[None, :, :]) ** 2, axis=-1)
    med = np.median(d2[np.triu_indices(len(S), 1)])
    return float(np.sqrt(0.5 * med)) if med > 0 else 1.0


def _mmd_from_kernel(K: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Biased MMD^2 for one or more 0/1 label vectors (rows of ``labels``)."""
    L = np.atleast_2d(labels).astype(float)
    nx = L.sum(axis=1)
    ny = L.shape[1] - nx
    KL = L @ K
    kxx = np.einsum("ij,ij->i", KL, L)
    kxy = KL.sum(axis=1) - kxx
    kyy = K.sum() - 2.0 * kxy - kxx
    return kxx / nx**2 + kyy / ny**2 - 2.0 * kxy / (nx * ny)


def mmd_permutation_test(X, Y, n_perm: int = 200, seed: int = 0, bandwidth=None) -> TwoSampleReport:
    """Gaussian-kernel MMD with median-heuristic bandwidth plus per-coordinate KS.

    Coordinates are scaled by the pooled standard deviation first. P-values are
    (1 + #{null >= observed}) / (1 + n_perm).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] == 0:
        raise ValueError("projection list is empty")
    rng = np.random.default_rng(seed)
    Z = np.concatenate([X, Y])
    scale = Z.std(axis=0)
    scale[scale == 0] = 1.0
    Z = Z / scale
    bw = _median_bandwidth(Z, rng) if bandwidth is None else bandwidth
    sq = np.sum(Z * Z, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * Z @ Z.T, 0.0)
    K = np.exp(-d2 / (2.0 * bw * bw))
    labels = np.zeros(len(Z))
    labels[: len(X)] = 1.0
    observed = float(_mmd_from_kernel(K, labels)[0])
    if np.array_equal(X, Y):
        observed = 0.0
    perms = np.stack([rng.permutation(labels) for _ in range(n_perm)])
    null = np.concatenate([_mmd_from_kernel(K, perms[i : i + 50]) for i in range(0, n_perm, 50)])
    p = (1.0 + np.sum(null >= observed - 1e-15)) / (1.0 + n_perm)
    # per-projection KS, with a permutation p-value for the max
    ks = np.array([stats.ks_2samp(X[:, j], Y[:, j]).statistic for j in range(X.shape[1])])
    ks_p = np.array([stats.ks_2samp(X[:, j], Y[:, j]).pvalue for j in range(X.shape[1])])
    max_ks = float(ks.max())
    null_ks = []
    for lab in perms[: min(n_perm, 100)]:
        A, B = Z[lab == 1], Z[lab == 0]
        null_ks.append(max(stats.ks_2samp(A[:, j], B[:, j]).statistic for j in range(Z.shape[1])))
    ks_perm_p = (1.0 + np.sum(np.asarray(null_ks) >= max_ks - 1e-15)) / (1.0 + len(null_ks))
    return TwoSampleReport(
        observed, float(p), float(null.mean()), float(null.std()), ks, ks_p, max_ks, float(ks_perm_p),
        (len(X), len(Y)), X.shape[1], {"bandwidth": bw, "n_perm": n_perm},
    )


def heightmap_equivalence_test(
    lattice, hm_a: HeightMap, hm_b: HeightMap, projections, seed: int = 0, n_perm: int = 200, paired: bool = False
) -> TwoSampleReport:
    """Push lattice samples through two height maps and compare projections.

    ``lattice`` is (n, k) for static ensembles or (n, n_times, k) for paths; for paths
    the time marginals are concatenated and tested jointly. By default the first half
    of the samples goes through ``hm_a`` and the second half through ``hm_b``, so the
    two groups are independent and p-values are calibrated under the null. With
    ``paired=True`` all samples go through both maps (a conservative test).
    """
    if len(projections) == 0:
        raise ValueError("projection list is empty")
    X = np.asarray(lattice, dtype=float)
    Pa = hm_a.projection_matrix(projections)
    Pb = hm_b.projection_matrix(projections)
    if paired:
        Xa, Xb = X, X
    else:
        if len(X) < 4:
            raise ValueError("need at least 4 samples to split into two groups")
        h = len(X) // 2
        Xa, Xb = X[:h], X[h : 2 * h]
    A = Xa @ Pa
    B = Xb @ Pb
    if X.ndim == 3:
        A = A.reshape(len(A), -1)
        B = B.reshape(len(B), -1)
    return mmd_permutation_test(A, B, n_perm=n_perm, seed=seed)


@dataclass
class SlopeReport:
    lags: np.ndarray
    moments: np.ndarray
    moment_stderr: np.ndarray
    slope: float
    slope_stderr: float
    degenerate: bool = False

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.slope - z * self.slope_stderr, self.slope + z * self.slope_stderr


def increment_moment_slope(coeffs, times, dual: DualNormSpec, lags) -> SlopeReport:
    """Log-log slope of E|u_{t+h} - u_t|^4_{H0'} against h.

    ``coeffs`` has shape (R, n_times, n_modes) (coefficients against dual.functions);
    every pair of recorded times whose gap equals a requested lag contributes.
    """
    C = np.asarray(coeffs, dtype=float)
    times = np.asarray(times, dtype=float)
    lags = np.asarray(lags, dtype=float)
    if len(lags) < 2 or np.any(lags <= 0):
        raise ValueError("need at least two positive lags")
    moments, errs = [], []
    for h in lags:
        vals = []
        for i, t in enumerate(times):
            j = np.flatnonzero(np.isclose(times, t + h, rtol=1e-9, atol=1e-12))
            if len(j):
                vals.append(dual.dual_norm_sq(C[:, j[0]] - C[:, i]) ** 2)
        if not vals:
            raise ValueError(f"lag {h} does not match any pair of recorded times")
        v = np.concatenate(vals)
        moments.append(v.mean())
        errs.append(v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else 0.0)
    moments = np.asarray(moments)
    errs = np.asarray(errs)
    if np.all(moments == 0):
        return SlopeReport(lags, moments, errs, float("nan"), float("nan"), True)
    fit = stats.linregress(np.log(lags), np.log(moments))
    # delta-method error of the log moments propagated through least squares
    x = np.log(lags) - np.log(lags).mean()
    sl_err = float(np.sqrt(np.sum((x / np.sum(x * x)) ** 2 * (errs / moments) ** 2)))
    return SlopeReport(lags, moments, errs, float(fit.slope), sl_err)


@dataclass(frozen=True)
class CylinderFunctional:
    """F(u) = phi(<u, f_1>, ..., <u, f_m>) with phi and its gradient given explicitly."""

    functions: tuple
    phi: object
    grad_phi: object
    name: str = ""

    @classmethod
    def linear(cls, f):
        return cls((f,), lambda y: y[..., 0], lambda y: np.ones_like(y), "linear")

    @classmethod
    def sine(cls, f):
        return cls((f,), lambda y: np.sin(y[..., 0]), lambda y: np.cos(y), "sin")

    @classmethod
    def constant(cls, c: float, f):
        return cls((f,), lambda y: np.full(y.shape[:-1], c), lambda y: np.zeros_like(y), "constant")


@dataclass
class FormEstimate:
    N: int
    value: float
    stderr: float


def form_value(X, hm: HeightMap, F: CylinderFunctional, G: CylinderFunctional, weights=None) -> FormEstimate:
    """N^2 * 1/2 * sum_i E[d_i(F o Lambda_N) d_i(G o Lambda_N)] over samples X (n, k)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Pf = hm.projection_matrix(F.functions)
    Pg = hm.projection_matrix(G.functions)
    # d_i (F o Lambda) (x) = sum_l d_l phi(<Lambda x, f>) <Lambda e_i, f_l>
    dF = F.grad_phi(X @ Pf) @ Pf.T
    dG = G.grad_phi(X @ Pg) @ Pg.T
    per = 0.5 * hm.N**2 * np.sum(dF * dG, axis=1)
    if weights is None:
        return FormEstimate(hm.N, float(per.mean()), float(per.std(ddof=1) / np.sqrt(len(per))) if len(per) > 1 else 0.0)
    w = np.asarray(weights) / np.sum(weights)
    m = float(w @ per)
    return FormEstimate(hm.N, m, float(np.sqrt(np.sum(w**2 * (per - m) ** 2))))


def linear_form_identity(hm: HeightMap, f) -> float:
    """1/2 N^d sum_p <xi_p, f>^2 for the linear functional (no sampling needed)."""
    c = hm.coefficients_of(f)
    return 0.5 * hm.N**hm.d * float(np.sum(c * c))


def form_convergence_check(samplers, hms, F, G, seed: int, reference=None) -> dict:
    """N^2 E^N(F, G) for each N; ``samplers[i](seed) -> (n, k)`` matches ``hms[i]``.

    ``reference`` = (sampler, heightmap) gives the large-N proxy of the limit form.
    """
    rows = [form_value(s(seed), hm, F, G) for s, hm in zip(samplers, hms)]
    out = {"estimates": rows}
    if reference is not None:
        sampler, hm = reference
        out["reference"] = form_value(sampler(seed), hm, F, G)
    return out


def bridge_grid(N: int):
    return build_grid(Domain.unit(1, INTERIOR_MARGIN, 0), N)


def eigen_convergence_table(N_list, archetype_kind: str = "tent", count: int = 5) -> list[dict]:
    """lambda_N^(i) of the bridge family on the grid {1..N-1} against (i pi)^2."""
    limit = LimitCovariance("brownian-bridge")
    rows = []
    for N in N_list:
        grid = bridge_grid(N)
        hm = HeightMap(grid, make_archetype(archetype_kind, 1))
        sp = spectral_pairs(bridge_model(grid.k), hm, min(count, grid.k))
        for i, lam in enumerate(sp.eigenvalues, start=1):
            ref = limit.eigenvalue(i)
            rows.append({"N": N, "i": i, "lambda_N": float(lam), "limit": ref, "rel_error": abs(lam - ref) / ref})
    return rows


@dataclass
class LevelSetReport:
    epsilons: np.ndarray
    mean_measure: np.ndarray
    stderr: np.ndarray
    slope: float


def level_set_measure(values, mesh, a: float, eps: float) -> np.ndarray:
    """|{z : |h(z) - a| < eps}| for the piecewise-linear interpolant of 1D mesh values.

    ``values`` has shape (n, m) for a sorted mesh of m points; exact on each segment.
    """
    h = np.atleast_2d(np.asarray(values, dtype=float))
    z = np.asarray(mesh, dtype=float).ravel()
    L = np.diff(z)
    h0, h1 = h[:, :-1], h[:, 1:]
    dh = h1 - h0
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (a - eps - h0) / dh
        t_hi = (a + eps - h0) / dh
    lo = np.clip(np.minimum(t_lo, t_hi), 0.0, 1.0)
    hi = np.clip(np.maximum(t_lo, t_hi), 0.0, 1.0)
    frac = np.where(dh != 0, hi - lo, (np.abs(h0 - a) < eps).astype(float))
    return frac @ L


def level_set_decay(values, mesh, a: float, epsilons) -> LevelSetReport:
    eps = np.asarray(epsilons, dtype=float)
    meas = np.stack([level_set_measure(values, mesh, a, e) for e in eps], axis=1)
    mean = meas.mean(axis=0)
    se = meas.std(axis=0, ddof=1) / np.sqrt(len(meas)) if len(meas) > 1 else np.zeros_like(mean)
    slope = float(stats.linregress(np.log(eps), np.log(mean)).slope) if np.all(mean > 0) else float("nan")
    return LevelSetReport(eps, mean, se, slope)


@dataclass
class ComponentDensity:
    """rho_N(h, r) = rho~(h + r phi) / int rho~(h + t phi) N(dt; 0, 1/lam)."""

    rho_tilde: object
    h: np.ndarray
    phi: np.ndarray
    lam: float
    breakpoints: tuple = ()
    normalizer: float = field(init=False)
    normalizer_err: float = field(init=False)

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        sd = 1.0 / np.sqrt(self.lam)
        lo, hi = -12.0 * sd, 12.0 * sd
        pts = sorted(p for p in self.breakpoints if lo < p < hi)
        edges = [lo] + pts + [hi]
        total, err = 0.0, 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(lambda t: self._line(t) * stats.norm.pdf(t, scale=sd), a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
            total += v
            err += e
        if not np.isfinite(total) or total <= 0 or err > 1e-8 * max(total, 1.0):
            raise ArithmeticError(f"normalizing quadrature did not converge (value {total}, error {err})")
        self.normalizer = total
        self.normalizer_err = err

    def _line(self, t):
        return float(self.rho_tilde(self.h + t * self.phi))

    def __call__(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return np.array([self._line(t) for t in r]) / self.normalizer

    def normalization(self) -> float:
        """int rho_N(h, r) N(dr) (should be 1)."""
        sd = 1.0 / np.sqrt(self.lam)
        lo, hi = -12.0 * sd, 12.0 * sd
        pts = sorted(p for p in self.breakpoints if lo < p < hi)
        edges = [lo] + pts + [hi]
        return sum(
            integrate.quad(lambda t: self(t)[0] * stats.norm.pdf(t, scale=sd), a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
            for a, b in zip(edges[:-1], edges[1:])
        )


def component_density(h, r, phi, lam: float, rho_tilde, breakpoints=()) -> np.ndarray:
    return ComponentDensity(rho_tilde, h, phi, lam, tuple(breakpoints))(r)
