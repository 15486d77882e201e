"""Perturbed lattice Gaussians, the pinning (wetting) measure, samplers and pushforwards."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .ensemble import Ensemble, run_chunked
from .gaussian import QuadraticModel
from .heightmap import HeightMap
from .potentials import Potential


class SamplerWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PerturbedMeasure:
    """exp(-x^T A x - N^-d sum_i g(N^{d/2-1} x_i)) on R^k."""

    model: QuadraticModel
    potential: Potential
    N: int
    d: int = 1

    @property
    def k(self) -> int:
        return self.model.k

    @property
    def arg_scale(self) -> float:
        return float(self.N) ** (self.d / 2.0 - 1.0)

    @property
    def energy_weight(self) -> float:
        return float(self.N) ** (-self.d)

    def perturbation(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.energy_weight * np.sum(self.potential(self.arg_scale * x), axis=-1)

    def log_density(self, x) -> np.ndarray:
        return -self.model.energy(x) - self.perturbation(x)

    @property
    def weight_spread(self) -> float:
        """k ||g|| / N^d, the log-range of the perturbation weight."""
        return self.k * self.potential.sup_bound * self.energy_weight

    def preferred_sampler(self) -> str:
        return "importance" if self.weight_spread <= 2.0 else "mcmc"


def log_density_unnormalized(measure: PerturbedMeasure, x) -> np.ndarray:
    return measure.log_density(x)


def sample_importance(measure: PerturbedMeasure, count: int, seed: int, workers: int = 1) -> Ensemble:
    """Gaussian proposals reweighted by exp(-perturbation); warns when ESS < 5%."""
    if count < 1:
        raise ValueError("count must be >= 1")

    def draw(ss, n):
        rng = np.random.default_rng(ss)
        return measure.model.transform(rng.standard_normal((n, measure.k)))

    x = np.concatenate(run_chunked(draw, seed, count, workers))
    logw = -measure.perturbation(x)
    w = np.exp(logw - logw.max())
    ens = Ensemble(x, w, seed=seed)
    ens.info.update(sampler="importance", ess=ens.ess, ess_fraction=ens.ess / count)
    ens.info["ess_warning"] = ens.ess < 0.05 * count
    if ens.info["ess_warning"]:
        warnings.warn(f"importance sampling ESS {ens.ess:.1f} is below 5% of {count}", SamplerWarning)
    return ens


def sample_mcmc(
    measure: PerturbedMeasure,
    count: int,
    burn_in: int,
    step_scale: float,
    seed: int,
    thin: int = 1,
    chains: int = 1,
) -> Ensemble:
    """Random-walk Metropolis with proposals shaped by the Gaussian covariance.

    ``chains`` independent chains run side by side; each chain is sequential and the
    output is ordered chain-major after thinning.
    """
    if step_scale <= 0:
        raise ValueError("step_scale must be positive")
    if count < 1 or chains < 1 or thin < 1:
        raise ValueError("count, chains and thin must be positive")
    rng = np.random.default_rng(seed)
    per_chain = -(-count // chains)
    x = measure.model.transform(rng.standard_normal((chains, measure.k)))
    lp = measure.log_density(x)
    out = np.empty((per_chain, chains, measure.k))
    accepted = 0
    proposals = 0
    total = burn_in + per_chain * thin
    for it in range(total):
        prop = x + step_scale * measure.model.transform(rng.standard_normal((chains, measure.k)))
        lp_prop = measure.log_density(prop)
        accept = np.log(rng.random(chains)) < lp_prop - lp
        x = np.where(accept[:, None], prop, x)
        lp = np.where(accept, lp_prop, lp)
        if it >= burn_in:
            accepted += int(accept.sum())
            proposals += chains
            j = it - burn_in
            if (j + 1) % thin == 0:
                out[j // thin] = x
    samples = out.transpose(1, 0, 2).reshape(-1, measure.k)[:count]
    rate = accepted / max(proposals, 1)
    ens = Ensemble(samples, seed=seed)
    ens.info.update(sampler="mcmc", acceptance_rate=rate, chain_length=total, thin=thin, chains=chains)
    if not 0.05 <= rate <= 0.95:
        ens.info["tuning_warning"] = True
        warnings.warn(f"MCMC acceptance rate {rate:.3f} outside [0.05, 0.95]", SamplerWarning)
    return ens


def gaussian_potential(s):
    """Standard normal negative log-density, so that kappa = sigma = 1."""
    s = np.asarray(s, dtype=float)
    return 0.5 * s * s + 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PinningMeasure:
    """exp(-sum_{i=0}^{N} V(sigma x_{i+1} - sigma x_i)) prod (1_{x_i >= 0} dx_i + beta delta_0), x_0 = x_{N+1} = 0."""

    V: Callable = field(repr=False)
    beta: float
    N: int
    kappa: float = field(default=None)
    sigma: float = field(default=None)

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.kappa is None or self.sigma is None:
            kappa, sigma2 = potential_moments(self.V)
            object.__setattr__(self, "kappa", kappa)
            object.__setattr__(self, "sigma", float(np.sqrt(sigma2)))

    def hamiltonian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pad = np.zeros(x.shape[:-1] + (1,))
        full = np.concatenate([pad, x, pad], axis=-1)
        return np.sum(self.V(self.sigma * np.diff(full, axis=-1)), axis=-1)


def potential_moments(V, lo: float = -np.inf, hi: float = np.inf) -> tuple[float, float]:
    """kappa = int e^-V and sigma^2 = kappa^-1 int s^2 e^-V by quadrature."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        f = lambda s: float(np.exp(-V(s)))
        kappa, _ = integrate.quad(f, lo, hi, limit=200)
        m2, _ = integrate.quad(lambda s: s * s * f(s), lo, hi, limit=200)
    if not np.isfinite(kappa) or kappa <= 0 or not np.isfinite(m2):
        raise ValueError("exp(-V) must be integrable with a finite second moment")
    return float(kappa), float(m2 / kappa)


def _conditional_logpi(pm: PinningMeasure, left, xi, right):
    s = pm.sigma
    return -pm.V(s * (xi - left)) - pm.V(s * (right - xi))


def _reflected_density(x, y, step):
    c = 1.0 / (step * np.sqrt(2.0 * np.pi))
    return c * (np.exp(-0.5 * ((y - x) / step) ** 2) + np.exp(-0.5 * ((y + x) / step) ** 2))


def atom_probability(beta: float) -> float:
    # clamp away from 1 so chains can still leave the atom region when beta is huge
    return 0.0 if beta == 0 else min(max(beta / (beta + 1.0), 0.1), 0.9)


def _pinning_sweep(pm: PinningMeasure, x: np.ndarray, rng, step: float, q: float) -> int:
    """One checkerboard sweep of Metropolis-within-Gibbs; returns accepted moves."""
    n_chain, N = x.shape
    accepted = 0
    full = np.zeros((n_chain, N + 2))
    if q > 0:
        # log of (1 - q) times the reflected proposal density from 0, minus log(q / beta)
        jump_const = np.log((1.0 - q) * 2.0 / (step * np.sqrt(2.0 * np.pi))) - np.log(q / pm.beta)
    for parity in (0, 1):
        full[:, 1:-1] = x
        left = full[:, parity : N : 2]
        right = full[:, parity + 2 : N + 2 : 2]
        cur = x[:, parity::2].copy()
        to_atom = rng.random(cur.shape) < q
        prop = np.abs(cur + step * rng.standard_normal(cur.shape))
        prop[to_atom] = 0.0
        # both conditionals in one potential call
        lp = _conditional_logpi(pm, np.stack([left, left]), np.stack([cur, prop]), np.stack([right, right]))
        log_ratio = lp[1] - lp[0]
        if q > 0:
            cur0 = cur == 0.0
            prop0 = prop == 0.0
            log_ratio += np.where(~cur0 & prop0, jump_const - 0.5 * (cur / step) ** 2, 0.0)
            log_ratio -= np.where(cur0 & ~prop0, jump_const - 0.5 * (prop / step) ** 2, 0.0)
            log_ratio[cur0 & prop0] = 0.0
        accept = np.log(rng.random(cur.shape)) < log_ratio
        x[:, parity::2] = np.where(accept, prop, cur)
        accepted += int(accept.sum())
    return accepted


def pinning_sampler(
    pm: PinningMeasure,
    count: int,
    seed: int,
    sweeps: int | None = None,
    step: float | None = None,
    chains: int | None = None,
    thin: int | None = None,
) -> Ensemble:
    """Metropolis-within-Gibbs for the pinning measure.

    Per coordinate the proposal jumps to the atom at 0 with probability
    q = beta / (beta + 1) clamped to [0.1, 0.9] (q = 0 when beta = 0) and otherwise makes a
    reflected Gaussian step on [0, inf). Chains start from the absolute value of a
    discrete bridge and run ``sweeps`` burn-in sweeps (default 4 N^2).
    """
    rng = np.random.default_rng(seed)
    N = pm.N
    chains = min(count, 512) if chains is None else chains
    sweeps = 4 * N * N if sweeps is None else sweeps
    step = 1.0 / pm.sigma if step is None else step
    thin = max(1, N * N // 4) if thin is None else thin
    q = atom_probability(pm.beta)
    walk = np.cumsum(rng.standard_normal((chains, N + 1)), axis=1) / pm.sigma
    bridge = walk[:, :-1] - np.outer(walk[:, -1], np.arange(1, N + 1) / (N + 1))
    x = np.abs(bridge) + 1e-12
    for _ in range(sweeps):
        _pinning_sweep(pm, x, rng, step, q)
    per_chain = -(-count // chains)
    out = np.empty((per_chain, chains, N))
    acc = 0
    moves = 0
    for j in range(per_chain):
        for _ in range(thin):
            acc += _pinning_sweep(pm, x, rng, step, q)
            moves += chains * N
        out[j] = x
    samples = out.transpose(1, 0, 2).reshape(-1, N)[:count]
    ens = Ensemble(samples, seed=seed)
    ens.info.update(
        sampler="pinning-gibbs", acceptance_rate=acc / max(moves, 1), atom_probability=q,
        burn_in_sweeps=sweeps, thin=thin, chains=chains,
    )
    return ens


@dataclass(frozen=True)
class CriticalBetaReport:
    kappa: float
    sigma: float
    Z: np.ndarray
    Z_stderr: np.ndarray
    partial_estimates: np.ndarray
    estimate: float
    tail_bound: float
    growth_ratio: float
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "sigma": self.sigma,
            "Z": self.Z.tolist(),
            "Z_stderr": self.Z_stderr.tolist(),
            "partial_estimates": self.partial_estimates.tolist(),
            "estimate": self.estimate,
            "tail_bound": self.tail_bound,
            "growth_ratio": self.growth_ratio,
            "note": self.note,
        }


def _increment_sampler(V, kappa: float, half_width: float = 40.0, n: int = 200001):
    s = np.linspace(-half_width, half_width, n)
    with np.errstate(over="ignore"):
        dens = np.exp(-V(s)) / kappa
    cdf = integrate.cumulative_trapezoid(dens, s, initial=0.0)
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    s_k, cdf_k = s[keep], cdf[keep]

    def draw(u):
        return np.interp(u, cdf_k, s_k)

    def density(y):
        with np.errstate(over="ignore"):
            return np.exp(-V(np.asarray(y, dtype=float))) / kappa

    return draw, density


def critical_beta_estimate(V, N_max: int, samples: int = 200_000, seed: int = 0) -> CriticalBetaReport:
    """kappa / (1 + sum_{N <= N_max} Z_{0,N}) with Monte Carlo Z_{0,N}.

    Z_{0,N} = sigma^-N kappa^{N+1} E[1{y_1..y_N >= 0} p(-y_N)] for a random walk y
    with increment density p = e^-V / kappa. Z_{0,1} is also done by quadrature.
    The tail beyond N_max is bounded by a C N^{-3/2} fit when kappa = sigma and
    geometrically otherwise.
    """
    kappa, sigma2 = potential_moments(V)
    sigma = float(np.sqrt(sigma2))
    draw, density = _increment_sampler(V, kappa)
    rng = np.random.default_rng(seed)
    y = np.cumsum(draw(rng.random((samples, N_max))), axis=1)
    alive = np.minimum.accumulate(y >= 0, axis=1)
    vals = alive * density(-y)
    ratio = kappa / sigma
    scale = ratio ** np.arange(1, N_max + 1) * kappa
    Z = vals.mean(axis=0) * scale
    err = vals.std(axis=0, ddof=1) / np.sqrt(samples) * scale
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        z1, _ = integrate.quad(lambda x: float(np.exp(-V(sigma * x) - V(-sigma * x))), 0, np.inf)
    Z[0], err[0] = z1, 0.0
    partial = kappa / (1.0 + np.cumsum(Z))
    note = ""
    if ratio > 1.0 + 1e-9:
        tail, note = np.inf, "kappa > sigma: Z_{0,N} grows geometrically, beta_c = 0"
    elif ratio < 1.0 - 1e-9:
        tail = float(Z[-1] * ratio / (1.0 - ratio))
    else:
        n = np.arange(1, N_max + 1)
        sel = n >= max(2, N_max // 2)
        C = float(np.mean(Z[sel] * n[sel] ** 1.5))
        # sum_{n > N} C n^{-3/2} <= 2 C N^{-1/2}
        tail = 2.0 * C / np.sqrt(N_max)
    return CriticalBetaReport(kappa, sigma, Z, err, partial, float(partial[-1]), tail, ratio, note)


@dataclass
class InterfaceEnsemble:
    """Pushed-forward samples: mesh values or basis coefficients, one row per sample."""

    values: np.ndarray
    weights: np.ndarray | None
    kind: str  # "mesh" or "coefficients"
    points: np.ndarray | None = None

    def __len__(self):
        return len(self.values)


def pushforward(ensemble: Ensemble, hm: HeightMap, mesh=None, basis=None, resolution: int = 4) -> InterfaceEnsemble:
    """Evaluate Lambda_N x on a mesh, or project it onto a list of basis functions."""
    if (mesh is None) == (basis is None):
        raise ValueError("give exactly one of mesh or basis")
    X = ensemble.samples
    if X.shape[1] != hm.k:
        raise ValueError(f"samples have dimension {X.shape[1]}, height map has k_N={hm.k}")
    if mesh is not None:
        pts = np.asarray(mesh, dtype=float).reshape(-1, hm.d)
        return InterfaceEnsemble(hm.apply(X, pts), ensemble.weights, "mesh", pts)
    P = hm.projection_matrix(basis, resolution)
    return InterfaceEnsemble(X @ P, ensemble.weights, "coefficients")
