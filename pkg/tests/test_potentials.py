import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from interfacelab.potentials import (
    NotMonotoneError,
    Potential,
    jordan_decompose,
    local_shift_distance,
    mollified_envelopes,
    table_function,
    total_variation,
)


def test_step_closed_left():
    g = Potential.step(0.0, 2.5)
    assert g(-1.0) == 2.5 and g(0.0) == 2.5 and g(1.0) == 0.0


def test_smooth_parts():
    g = Potential(smooth="sine")
    y = np.linspace(-3, 3, 11)
    assert np.allclose(g.smooth_derivative(y), np.cos(y))
    assert np.all(Potential()(y) == 0)
    assert Potential().is_zero


def test_invalid_potentials():
    with pytest.raises(ValueError):
        Potential(levels=(0.0, 1.0), jumps=(1.0,))
    with pytest.raises(ValueError):
        Potential(levels=(1.0, 0.0), jumps=(1.0, 1.0))
    with pytest.raises(ValueError):
        Potential(smooth="cubic")


def test_total_variation_examples():
    assert total_variation(Potential.step(0.0, 2.0)).value == 2.0
    assert total_variation(Potential(levels=(0.0, 1.0), jumps=(1.0, -1.0))).value == 2.0
    tv = total_variation(Potential(smooth="arctan"))
    oracle, _ = integrate.quad(lambda y: 1 / (1 + y * y), -np.inf, np.inf)
    assert tv.value == pytest.approx(oracle, abs=1e-8)
    assert tv.value == pytest.approx(np.pi, abs=1e-8)
    assert total_variation(Potential(smooth="sine")).value == np.inf
    assert total_variation(Potential(smooth="sine"), (-np.pi, np.pi)).value == pytest.approx(4.0, abs=1e-10)


def test_jordan_monotone_input():
    g = Potential(smooth="arctan")
    y = np.linspace(-10, 10, 2001)
    pair = jordan_decompose(g, y)
    assert np.allclose(pair.f1, g(y) - g(y).min())
    assert np.allclose(pair.f2, pair.f2[0])


def test_jordan_decreasing_step():
    g = Potential.step(0.0, 1.0)
    y = np.linspace(-2, 2, 401)
    pair = jordan_decompose(g, y)
    assert np.all(pair.f1 == pair.f1[0])
    assert np.all(np.diff(pair.f2) >= 0)
    assert pair.f2[-1] - pair.f2[0] == pytest.approx(1.0)
    assert np.allclose(pair.f1 - pair.f2, g(y))


def test_jordan_sine_against_quadrature():
    g = Potential(smooth="sine")
    y = np.linspace(-np.pi, np.pi, 200001)
    pair = jordan_decompose(g, y)
    up, _ = integrate.quad(lambda t: max(np.cos(t), 0.0), -np.pi, np.pi, points=[-np.pi / 2, np.pi / 2])
    down, _ = integrate.quad(lambda t: max(-np.cos(t), 0.0), -np.pi, np.pi, points=[-np.pi / 2, np.pi / 2])
    assert pair.f1[-1] - pair.f1[0] == pytest.approx(up, abs=1e-6)
    assert pair.f2[-1] - pair.f2[0] == pytest.approx(down, abs=1e-6)


@given(
    st.lists(st.floats(-3, 3), min_size=0, max_size=3, unique=True),
    st.lists(st.floats(-2, 2), min_size=3, max_size=3),
    st.sampled_from(["zero", "sine", "arctan", "scaled-tanh"]),
)
def test_jordan_property(levels, jumps, smooth):
    levels = sorted(levels)
    g = Potential(smooth=smooth, levels=tuple(levels), jumps=tuple(jumps[: len(levels)]))
    y = np.linspace(-6, 6, 3001)
    pair = jordan_decompose(g, y)
    assert np.all(np.diff(pair.f1) >= 0) and np.all(np.diff(pair.f2) >= 0)
    assert np.allclose(pair.f1 - pair.f2, g(y), atol=1e-10)


def unit_step(y):
    return (np.asarray(y) >= 0).astype(float)


@pytest.mark.parametrize("m", [4, 8, 16, 32])
def test_envelopes_plateaus(m):
    env = mollified_envelopes(unit_step, m)
    right = np.linspace(3 / m + 1e-9, 10, 500)
    left = np.linspace(-10, -3 / m - 1e-9, 500)
    assert np.all(env.minorant(right) == 1) and np.all(env.majorant(right) == 1)
    assert np.all(env.minorant(left) == 0) and np.all(env.majorant(left) == 0)


def test_envelope_band_shrinks():
    x = np.linspace(-5, 5, 10_000)
    widths = []
    for m in (4, 8, 16, 32):
        env = mollified_envelopes(unit_step, m)
        lo, hi = env.minorant(x), env.majorant(x)
        assert np.all(lo <= unit_step(x)) and np.all(unit_step(x) <= hi)
        widths.append(env.band_width(x))
    assert all(b < a for a, b in zip(widths, widths[1:]))
    assert widths[-1] <= 5 / 32


@given(st.integers(1, 40), st.floats(-3, 3), st.booleans())
def test_envelope_sandwich_property(m, shift, decreasing):
    sign = -1.0 if decreasing else 1.0
    f = lambda y: sign * np.arctan(np.asarray(y) - shift) + unit_step(np.asarray(y) - shift) * sign
    env = mollified_envelopes(f, m)
    x = np.random.default_rng(m).uniform(-20, 20, 2000)
    assert np.all(env.minorant(x) <= f(x) + 1e-12)
    assert np.all(f(x) <= env.majorant(x) + 1e-12)


def test_envelopes_reject_non_monotone():
    with pytest.raises(NotMonotoneError):
        mollified_envelopes(np.sin, 4)


def test_table_function():
    f = table_function([0.0, 1.0, 2.0], [0.0, 1.0, 3.0])
    assert f(-1.0) == 0.0 and f(0.5) == 0.0 and f(1.0) == 1.0 and f(5.0) == 3.0


def test_local_shift_distance():
    g = lambda y: (np.asarray(y) <= 0).astype(float)
    gN = lambda y: (np.asarray(y) <= 1).astype(float)
    grid = np.linspace(-3, 3, 601)
    assert local_shift_distance(g, gN, 0.5, grid) == 1.0
    assert local_shift_distance(g, g, 0.5, grid) == 0.0
    half = lambda y: (np.asarray(y) <= 0.25).astype(float)
    assert local_shift_distance(g, half, 0.5, grid) == 0.0
