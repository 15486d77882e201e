"""Skew interacting Brownian motions: Euler steps with a skew-reflection crossing rule."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .ensemble import run_chunked
from .gaussian import QuadraticModel
from .heightmap import HeightMap
from .potentials import Potential

SCHEMES = ("bridge-crossing", "straddle")


class SimulationBlowUp(RuntimeError):
    pass


class HorizonTooShort(ValueError):
    pass


def skew_intensity(beta, N: int, d: int) -> np.ndarray:
    """(1 - e^{-beta/N^d}) / (1 + e^{-beta/N^d}), i.e. tanh(beta / (2 N^d))."""
    return np.tanh(np.asarray(beta, dtype=float) / (2.0 * float(N) ** d))


@dataclass(frozen=True)
class SkewSDEConfig:
    model: QuadraticModel
    potential: Potential
    N: int
    d: int
    dt: float
    T: float
    scheme: str = "bridge-crossing"
    stability: float = 0.5
    guard: float = 1e6
    warnings_: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0:
            raise ValueError("dt and T must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown crossing scheme {self.scheme!r}; expected one of {SCHEMES}")
        lam = self.model.max_eigenvalue
        if self.dt * lam > self.stability:
            raise ValueError(
                f"dt * lambda_max(A) = {self.dt * lam:.3g} exceeds the stability bound {self.stability}"
            )
        if np.any(np.abs(self.gammas) >= 1.0):
            raise ValueError("skew intensities must lie in (-1, 1)")
        lv = self.scaled_levels
        if len(lv) > 1 and np.min(np.diff(lv)) < 4.0 * np.sqrt(self.dt):
            msg = "levels closer than 4 sqrt(dt); crossings may be resolved coarsely"
            self.warnings_.append(msg)
            warnings.warn(msg, RuntimeWarning)

    @property
    def k(self) -> int:
        return self.model.k

    @property
    def arg_scale(self) -> float:
        return float(self.N) ** (self.d / 2.0 - 1.0)

    @property
    def scaled_levels(self) -> np.ndarray:
        """Levels in lattice units: y_j N^{1 - d/2}."""
        return np.asarray(self.potential.levels, dtype=float) / self.arg_scale

    @property
    def gammas(self) -> np.ndarray:
        return skew_intensity(np.asarray(self.potential.jumps, dtype=float), self.N, self.d)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def drift(config: SkewSDEConfig, x) -> np.ndarray:
    """-(A x)_i - 1/2 N^{-d/2-1} g0'(N^{d/2-1} x_i), batched over leading axes."""
    x = np.asarray(x, dtype=float)
    out = -x @ config.model.A
    if not (config.potential.smooth == "zero" or config.potential.amplitude == 0.0):
        c = 0.5 * float(config.N) ** (-config.d / 2.0 - 1.0)
        out = out - c * config.potential.smooth_derivative(config.arg_scale * x)
    return out


@dataclass
class StepDiagnostics:
    multi_level: int = 0
    crossings: int = 0


def step(config: SkewSDEConfig, x, dt: float, noise, rng=None, diag: StepDiagnostics | None = None):
    """One Euler step plus the skew crossing rule.

    Returns (x_new, local_time_increments) with increments of shape x.shape + (M,).
    With the bridge-crossing scheme a level counts as hit when the step straddles it,
    or otherwise with the Brownian-bridge probability exp(-2 (x - y)(x' - y) / dt);
    a hit places the end point at y +- |x' - y| with + chosen with probability (1 + gamma)/2.
    The straddle scheme only reacts to straddles.
    """
    x = np.asarray(x, dtype=float)
    prop = x + drift(config, x) * dt + np.sqrt(dt) * np.asarray(noise, dtype=float)
    levels = config.scaled_levels
    M = len(levels)
    lt = np.zeros(x.shape + (M,))
    if M == 0:
        return prop, lt
    if rng is None:
        rng = np.random.default_rng()
    eps = np.sqrt(dt)
    a = x[..., None] - levels
    b = prop[..., None] - levels
    # occupation-density estimate, truncated at 4 eps
    z = a / eps
    lt = np.where(np.abs(z) <= 4.0, dt * np.exp(-0.5 * z * z) / (eps * np.sqrt(2.0 * np.pi)), 0.0)
    hit = a * b <= 0.0
    if config.scheme == "bridge-crossing":
        with np.errstate(over="ignore"):
            p = np.exp(-2.0 * np.maximum(a * b, 0.0) / dt)
        hit |= rng.random(hit.shape) < p
    n_hit = hit.sum(axis=-1)
    any_hit = n_hit > 0
    if not np.any(any_hit):
        return prop, lt
    if diag is not None:
        diag.multi_level += int(np.sum(n_hit > 1))
        diag.crossings += int(np.sum(any_hit))
    # nearest hit level to the start point
    dist = np.where(hit, np.abs(a), np.inf)
    j = np.argmin(dist, axis=-1)
    y = levels[j]
    gam = config.gammas[j]
    up = rng.random(x.shape) < 0.5 * (1.0 + gam)
    r = np.abs(prop - y)
    new = np.where(up, y + r, y - r)
    return np.where(any_hit, new, prop), lt


@dataclass
class Trajectory:
    """Recorded states (n_times, replicas, k) and final local times (replicas, k, M)."""

    times: np.ndarray
    states: np.ndarray
    local_times: np.ndarray
    local_time_path: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def state_at(self, s: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - s)))
        if abs(self.times[i] - s) > 1e-9 * max(1.0, abs(s)):
            raise HorizonTooShort(f"time {s} not on the recorded grid")
        return self.states[i]


def _noise_source(noise, rng, shape):
    if noise is None:
        return rng.standard_normal(shape)
    if isinstance(noise, str) and noise == "zero":
        return np.zeros(shape)
    return noise(rng, shape)


def simulate(
    config: SkewSDEConfig,
    x0,
    seed=None,
    record_every: int = 1,
    record_steps=None,
    noise=None,
    rng=None,
) -> Trajectory:
    """Simulate replicas started at x0 (shape (k,) or (R, k)) up to T.

    ``record_steps`` (sorted step indices) overrides ``record_every``. ``noise`` is a
    test hook: "zero" or a callable (rng, shape) -> standard normal array.
    """
    x = np.array(x0, dtype=float, ndmin=2)
    if x.shape[-1] != config.k:
        raise ValueError("x0 dimension does not match the model")
    rng = np.random.default_rng(seed) if rng is None else rng
    n = config.n_steps
    if record_steps is None:
        record_steps = np.arange(0, n + 1, record_every)
    record_steps = np.asarray(sorted(set(int(s) for s in record_steps)))
    if record_steps.size and record_steps[-1] > n:
        raise HorizonTooShort("requested record step beyond the horizon")
    states = np.empty((len(record_steps),) + x.shape)
    lt_path = np.empty((len(record_steps),) + x.shape + (len(config.scaled_levels),))
    lt = np.zeros(x.shape + (len(config.scaled_levels),))
    diag = StepDiagnostics()
    r = 0
    for i in range(n + 1):
        if r < len(record_steps) and record_steps[r] == i:
            states[r] = x
            lt_path[r] = lt
            r += 1
        if i == n:
            break
        x, dl = step(config, x, config.dt, _noise_source(noise, rng, x.shape), rng, diag)
        lt += dl
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > config.guard:
            raise SimulationBlowUp(
                f"state norm exceeded {config.guard:g} at step {i + 1} (t={(i + 1) * config.dt:.4g}); "
                f"dt={config.dt}, lambda_max={config.model.max_eigenvalue:.4g}"
            )
    info = {
        "multi_level_warnings": diag.multi_level,
        "crossings": diag.crossings,
        "local_time_total": float(lt.sum()),
        "steps": n,
        "dt": config.dt,
    }
    return Trajectory(record_steps * config.dt, states, lt, lt_path, info)


def intrinsic_steps(config: SkewSDEConfig, times) -> np.ndarray:
    """Step indices for rescaled times t (intrinsic time s = N^2 t)."""
    s = np.asarray(times, dtype=float) * config.N**2
    steps = np.round(s / config.dt).astype(np.int64)
    if np.any(np.abs(steps * config.dt - s) > 1e-6 * np.maximum(1.0, s)):
        raise ValueError("output times must be multiples of dt / N^2")
    if np.any(steps > config.n_steps):
        raise HorizonTooShort(f"horizon T={config.T} shorter than N^2 * max(t)")
    return steps


def rescaled_interface(traj: Trajectory, hm: HeightMap, times, mesh=None, basis=None) -> np.ndarray:
    """u_t = Lambda_N X_{N^2 t}; returns (n_times, replicas, m) mesh values or coefficients."""
    if (mesh is None) == (basis is None):
        raise ValueError("give exactly one of mesh or basis")
    horizon = traj.times[-1]
    out = []
    for t in np.atleast_1d(times):
        s = hm.N**2 * float(t)
        if s > horizon + 1e-12:
            raise HorizonTooShort(f"need intrinsic time {s}, trajectory ends at {horizon}")
        X = traj.state_at(s)
        if mesh is not None:
            out.append(hm.apply(X, np.asarray(mesh, dtype=float).reshape(-1, hm.d)))
        else:
            out.append(X @ hm.projection_matrix(basis))
    return np.stack(out)


@dataclass
class PathEnsemble:
    """Replica paths at output times: states (R, n_times, k) in lattice units."""

    times: np.ndarray
    states: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def project(self, P: np.ndarray) -> np.ndarray:
        """Apply a (k, m) projection matrix; returns (R, n_times, m)."""
        return self.states @ P


def stationary_ensemble_run(
    config: SkewSDEConfig,
    initial_sampler,
    replicas: int,
    output_times,
    seed: int,
    workers: int = 1,
    noise=None,
) -> PathEnsemble:
    """Independent replicas started from ``initial_sampler(rng, n) -> (n, k)``.

    ``output_times`` are rescaled times t; states are read at intrinsic time N^2 t.
    Replicas run in fixed-size chunks with one seed per chunk, so the output does not
    depend on ``workers``.
    """
    steps = intrinsic_steps(config, output_times)

    def run(ss, n):
        rng = np.random.default_rng(ss)
        x0 = initial_sampler(rng, n)
        traj = simulate(config, x0, record_steps=steps, noise=noise, rng=rng)
        return traj.states.transpose(1, 0, 2), traj.diagnostics, traj.local_times.sum()

    parts = run_chunked(run, seed, replicas, workers, chunk=256)
    states = np.concatenate([p[0] for p in parts])
    diag = {
        "multi_level_warnings": int(sum(p[1]["multi_level_warnings"] for p in parts)),
        "crossings": int(sum(p[1]["crossings"] for p in parts)),
        "local_time_total": float(sum(p[2] for p in parts)),
        "replicas": replicas,
    }
    return PathEnsemble(np.asarray(output_times, dtype=float), states, diag)
