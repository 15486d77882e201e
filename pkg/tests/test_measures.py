import warnings

import numpy as np
import pytest
from scipy import integrate
from scipy.special import erf

from interfacelab.domain import FULL_CLOSURE, INTERIOR_MARGIN, Domain, build_grid
from interfacelab.ensemble import Ensemble
from interfacelab.gaussian import QuadraticModel, bridge_model, random_walk_model
from interfacelab.heightmap import HeightMap, make_archetype
from interfacelab.measures import (
    PerturbedMeasure,
    PinningMeasure,
    SamplerWarning,
    critical_beta_estimate,
    gaussian_potential,
    log_density_unnormalized,
    pinning_sampler,
    potential_moments,
    pushforward,
    sample_importance,
    sample_mcmc,
)
from interfacelab.potentials import Potential


def step_cdf_oracle(beta):
    """CDF of exp(-x^2 - beta 1{x <= 0}) by numerical integration."""
    dens = lambda x: np.exp(-x * x - beta * (x <= 0))
    Z = integrate.quad(dens, -np.inf, 0)[0] + integrate.quad(dens, 0, np.inf)[0]

    def cdf(v):
        v = np.asarray(v, dtype=float)
        below = np.exp(-beta) * np.sqrt(np.pi) / 2 * (1 + erf(np.minimum(v, 0.0)))
        above = np.where(v > 0, np.sqrt(np.pi) / 2 * erf(np.maximum(v, 0.0)), 0.0)
        return (below + above) / Z

    return cdf


def one_site(potential):
    return PerturbedMeasure(QuadraticModel(np.eye(1), "single"), potential, N=1, d=1)


def weighted_ks(x, w, cdf):
    order = np.argsort(x)
    xs, ws = x[order], w[order] / w.sum()
    F = np.cumsum(ws)
    ref = cdf(xs)
    return max(np.max(np.abs(F - ref)), np.max(np.abs(F - ws - ref)))


def test_log_density_examples():
    m = one_site(Potential.step(0.0, 1.0))
    assert log_density_unnormalized(m, np.array([-1.0])) == pytest.approx(-2.0)
    g = Potential(smooth="sine", levels=(0.0,), jumps=(0.7,))
    meas = PerturbedMeasure(bridge_model(7), g, N=8, d=1)
    assert meas.log_density(np.zeros(7)) == pytest.approx(-(1 / 8) * 7 * (np.sin(0.0) + 0.7))
    x = np.random.default_rng(0).standard_normal(7)
    plain = PerturbedMeasure(bridge_model(7), Potential(), N=8)
    assert plain.log_density(x) == pytest.approx(-bridge_model(7).energy(x))


def test_importance_trivial_weights():
    e = sample_importance(PerturbedMeasure(bridge_model(5), Potential(), 6), 500, seed=1)
    assert np.allclose(e.weights, 1 / 500)
    c = sample_importance(PerturbedMeasure(bridge_model(5), Potential(smooth="arctan", amplitude=0.0, levels=(1e9,), jumps=(3.0,)), 6), 500, seed=1)
    assert np.allclose(c.weights, 1 / 500)


def test_importance_step_ks():
    e = sample_importance(one_site(Potential.step(0.0, 1.0)), 100_000, seed=5)
    assert weighted_ks(e.samples[:, 0], e.weights, step_cdf_oracle(1.0)) < 0.02


def test_importance_ess_warning():
    m = PerturbedMeasure(bridge_model(20), Potential(levels=(0.0,), jumps=(400.0,)), N=1)
    with pytest.warns(SamplerWarning):
        e = sample_importance(m, 200, seed=0)
    assert e.info["ess_warning"]


def test_mcmc_gaussian_covariance():
    model = random_walk_model(4)
    e = sample_mcmc(PerturbedMeasure(model, Potential(), 4), 20_000, burn_in=200, step_scale=0.6, seed=3, thin=5, chains=200)
    C = e.covariance()
    # per-chain batch means give a stderr that accounts for autocorrelation
    X = e.samples.reshape(200, -1, 4)
    per_chain = np.stack([np.cov(x.T) for x in X])
    se = per_chain.std(axis=0, ddof=1) / np.sqrt(200)
    assert np.max(np.abs(C - model.covariance) / se) <= 4.0


def test_mcmc_step_ks_and_determinism():
    m = one_site(Potential.step(0.0, 1.0))
    e = sample_mcmc(m, 100_000, burn_in=100, step_scale=1.5, seed=7, thin=4, chains=500)
    ks = weighted_ks(e.samples[:, 0], np.ones(len(e)), step_cdf_oracle(1.0))
    assert ks < 0.02
    a = sample_mcmc(m, 50, 10, 1.0, seed=1)
    b = sample_mcmc(m, 50, 10, 1.0, seed=1)
    assert np.array_equal(a.samples, b.samples)


def test_mcmc_tuning_warning():
    with pytest.warns(SamplerWarning):
        sample_mcmc(one_site(Potential()), 100, 10, 200.0, seed=0)


def pinning_atom_oracle(beta):
    """Enumerate the four atom patterns for N = 2 with V(s) = s^2 / 2."""
    w = lambda x1, x2: np.exp(-0.5 * (x1 * x1 + (x2 - x1) ** 2 + x2 * x2))
    z00 = beta * beta
    z0c = beta * integrate.quad(lambda t: w(0.0, t), 0, np.inf)[0]
    zc0 = beta * integrate.quad(lambda t: w(t, 0.0), 0, np.inf)[0]
    zcc = integrate.dblquad(lambda b, a: w(a, b), 0, np.inf, 0, np.inf)[0]
    return (z00 + z0c) / (z00 + z0c + zc0 + zcc)


def test_pinning_two_sites_against_enumeration():
    V = lambda s: 0.5 * np.asarray(s) ** 2
    pm = PinningMeasure(V, 1.0, 2)
    assert pm.sigma == pytest.approx(1.0)
    n = 20_000
    e = pinning_sampler(pm, n, seed=11, chains=n)
    p = np.mean(e.samples[:, 0] == 0.0)
    ref = pinning_atom_oracle(1.0)
    assert abs(p - ref) <= 3 * np.sqrt(ref * (1 - ref) / n)


def test_pinning_extremes():
    V = lambda s: 0.5 * np.asarray(s) ** 2
    free = pinning_sampler(PinningMeasure(V, 0.0, 9), 400, seed=1)
    assert np.all(free.samples > 0)
    assert np.mean(free.samples[:, 4]) > 0
    pinned = pinning_sampler(PinningMeasure(V, 1e6, 9), 400, seed=1)
    assert np.mean(pinned.samples == 0.0) > 0.99


def test_potential_moments_compact():
    V = lambda s: np.where(np.abs(s) <= 1, 0.0, np.inf)
    kappa, s2 = potential_moments(V, -1, 1)
    assert kappa == pytest.approx(2.0)
    assert s2 == pytest.approx(1 / 3)


def test_critical_beta():
    V = lambda s: 0.5 * np.asarray(s) ** 2
    rep = critical_beta_estimate(V, 5, samples=2000, seed=0)
    assert rep.Z[0] == pytest.approx(np.sqrt(np.pi) / 2, rel=1e-8)
    # kappa > sigma here: the series diverges
    assert rep.tail_bound == np.inf
    g = critical_beta_estimate(gaussian_potential, 30, samples=20000, seed=0)
    assert g.kappa == pytest.approx(1.0) and g.sigma == pytest.approx(1.0)
    assert np.all(np.diff(g.partial_estimates) < 0)
    assert 0.5 < g.estimate < 0.8


def test_pushforward():
    grid = build_grid(Domain.unit(1, FULL_CLOSURE), 2)
    hm = HeightMap(grid, make_archetype("indicator-cube", 1))
    zero = pushforward(Ensemble(np.zeros((3, 2))), hm, mesh=np.linspace(0, 1, 9))
    assert np.all(zero.values == 0)
    x = np.array([[0.3, -1.2]])
    mesh = np.linspace(0.05, 0.95, 7)
    assert np.allclose(pushforward(Ensemble(x), hm, mesh=mesh).values, hm.apply(x, mesh))
    with pytest.raises(ValueError):
        pushforward(Ensemble(x), hm)


def test_pushforward_bridge_spectrum():
    N = 128
    grid = build_grid(Domain.unit(1, INTERIOR_MARGIN, 0), N)
    hm = HeightMap(grid, make_archetype("tent", 1))
    from interfacelab.gaussian import sample_gaussian

    ens = sample_gaussian(bridge_model(grid.k), 20_000, seed=2)
    basis = [lambda z, k=k: np.sqrt(2) * np.sin(k * np.pi * z[..., 0]) for k in (1, 2, 3)]
    coeffs = pushforward(ens, hm, basis=basis).values
    var = coeffs.var(axis=0)
    ref = 1 / (np.arange(1, 4) * np.pi) ** 2
    assert np.all(np.abs(var - ref) <= 4 * ref * np.sqrt(2 / 20_000) + 1e-4 * ref)
