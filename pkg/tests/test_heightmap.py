import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from interfacelab.domain import FULL_CLOSURE, INTERIOR_MARGIN, Domain, build_grid
from interfacelab.heightmap import (
    CoercivityError,
    HeightMap,
    archetype_from_table,
    check_condition,
    coercivity_constant,
    gram_matrix,
    interpolation_identity_check,
    l2_square,
    load_custom_archetype,
    make_archetype,
    norm_sandwich_check,
)

TENT1 = make_archetype("tent", 1)
TENT2 = make_archetype("tent", 2)
CUBE1 = make_archetype("indicator-cube", 1)
CUBE2 = make_archetype("indicator-cube", 2)


def tent2_oracle(z1, z2):
    # independent closed form: the P1 hat on the triangulation cut along z1 = z2
    return max(0.0, 1.0 - max(abs(z1), abs(z2), abs(z1 - z2)))


def test_kernel_values():
    assert TENT1(0.0) == 1.0
    assert TENT1(1.0) == 0.0 and TENT1(-1.0) == 0.0
    assert TENT2([0.5, 0.25]) == pytest.approx(0.5)
    assert CUBE2([0.4, -0.5]) == 1.0
    assert CUBE2([0.5, 0.0]) == 0.0


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_tent2_matches_closed_form(z1, z2):
    assert TENT2([z1, z2]) == pytest.approx(tent2_oracle(z1, z2), abs=1e-12)


def test_l2_tent_1d():
    assert abs(l2_square(TENT1)[0] - 2 / 3) <= 1e-9


def test_l2_indicator_is_one():
    assert l2_square(CUBE1)[0] == 1.0
    assert l2_square(CUBE2)[0] == 1.0


def test_l2_tent_2d_against_dblquad():
    # the independent oracle gives 1/2; see the decisions ledger on the 3/4 value
    oracle, _ = integrate.dblquad(lambda y, x: tent2_oracle(x, y) ** 2, -1, 1, -1, 1, epsabs=1e-11)
    assert oracle == pytest.approx(0.5, abs=1e-7)
    assert l2_square(TENT2)[0] == pytest.approx(oracle, abs=1e-7)
    # the quadrature path without the closed form agrees
    stripped = make_archetype("tent", 2).scaled(1.0)
    assert l2_square(stripped)[0] == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("a", [TENT1, CUBE1, CUBE2])
def test_condition_passes(a):
    rep = check_condition(a)
    assert rep.ok, rep.as_dict()
    assert rep.partition_deviation <= 1e-9


def test_condition_tent2_partition_holds_but_mass_fails():
    rep = check_condition(TENT2)
    assert rep.passed["support"] and rep.passed["integral"] and rep.passed["partition_of_unity"]
    assert rep.partition_deviation <= 1e-9
    assert not rep.passed["l2_mass"]


def test_scaled_indicator_counterexample():
    rep = check_condition(CUBE1.scaled(0.5))
    assert not rep.passed["integral"]
    assert not rep.passed["partition_of_unity"]


def test_gram_tent_1d():
    G = gram_matrix(TENT1, np.arange(5)[:, None])
    assert np.allclose(np.diag(G), 2 / 3, atol=1e-12)
    assert np.allclose(np.diag(G, 1), 1 / 6, atol=1e-12)
    assert np.allclose(np.diag(G, 2), 0.0)
    # oracle for the off-diagonal: integral of (1 - z) z over [0, 1]
    assert integrate.quad(lambda z: (1 - z) * z, 0, 1)[0] == pytest.approx(1 / 6)


def test_gram_indicator_identity():
    w = np.array(list(np.ndindex(4, 4)))
    assert np.allclose(gram_matrix(CUBE2, w), np.eye(16))


def test_gram_tent_2d_diagonal_and_floor():
    w = np.array(list(np.ndindex(15, 15)))
    G = gram_matrix(TENT2, w)
    assert np.allclose(np.diag(G), 0.5)
    lam_min = np.linalg.eigvalsh(G).min()
    # symbol 1/2 + (cos t1 + cos t2 + cos(t1 - t2)) / 6 has minimum 1/4
    assert 0.25 <= lam_min < 0.27


def test_coercivity_constants():
    assert coercivity_constant(TENT1) == pytest.approx(1 / 3)
    assert coercivity_constant(CUBE1) == 1.0
    with pytest.raises(CoercivityError, match="coercivity violated"):
        coercivity_constant(TENT2)


def test_apply_lower_indicator_example():
    grid = build_grid(Domain.unit(1, FULL_CLOSURE), 2)
    hm = HeightMap(grid, make_archetype("indicator-lower", 1))
    assert hm.apply(np.array([1.0, 0.0]), 0.25)[0] == pytest.approx(2**-0.5)


@given(st.integers(2, 40), st.integers(0, 10**6))
def test_tent_interpolates_nodes(N, seed):
    grid = build_grid(Domain.unit(1, FULL_CLOSURE), N)
    hm = HeightMap(grid, TENT1)
    x = np.random.default_rng(seed).standard_normal(grid.k)
    assert np.allclose(hm.apply(x, grid.nodes.ravel()), x / np.sqrt(N), atol=1e-12)


def test_apply_zero_state():
    grid = build_grid(Domain.unit(2, INTERIOR_MARGIN, 2), 8)
    hm = HeightMap(grid, TENT2)
    assert np.all(hm.apply(np.zeros(grid.k), np.random.default_rng(0).random((20, 2))) == 0)


def test_coefficients():
    N = 8
    grid = build_grid(Domain.unit(1, INTERIOR_MARGIN, 0), N)
    ones = HeightMap(grid, CUBE1).coefficients_of(lambda z: np.ones(z.shape[:-1]))
    assert np.allclose(ones[1:-1], 1 / N)
    assert np.all(HeightMap(grid, TENT1).coefficients_of(lambda z: np.zeros(z.shape[:-1])) == 0)
    lin = HeightMap(grid, TENT1).coefficients_of(lambda z: z[..., 0])
    # quadrature oracle for node i: integral of tent(N z - i) z dz
    for i, p in enumerate(grid.points[:, 0]):
        ref = integrate.quad(lambda z: max(0.0, 1 - abs(N * z - p)) * z, (p - 1) / N, (p + 1) / N)[0]
        assert lin[i] == pytest.approx(ref, abs=1e-14)
        assert lin[i] == pytest.approx(p / N / N)


def test_metric_matches_quadrature_boundary():
    grid = build_grid(Domain.unit(1, FULL_CLOSURE), 8)
    hm = HeightMap(grid, TENT1)
    M = hm.metric()
    # last node's hat is cut at z = 1
    assert M[-1, -1] == pytest.approx((1 / 3) / 64)
    assert M[0, 0] == pytest.approx((2 / 3) / 64)
    assert M[-2, -1] == pytest.approx((1 / 6) / 64)


def test_sandwich_examples():
    for d, a in ((1, CUBE1), (2, CUBE2)):
        grid = build_grid(Domain.unit(d, INTERIOR_MARGIN, 0), 6)
        hm = HeightMap(grid, a)
        e = np.zeros(grid.k)
        e[grid.k // 2] = 1.0
        r = norm_sandwich_check(hm, e)
        assert r.ok and r.value == pytest.approx(1 / 36)
    grid = build_grid(Domain.unit(1, INTERIOR_MARGIN, 0), 8)
    hm = HeightMap(grid, TENT1)
    x = np.ones(grid.k)
    r = norm_sandwich_check(hm, x)
    G = gram_matrix(TENT1, grid.points)
    assert r.ok and r.value == pytest.approx(x @ G @ x / 64)
    assert tuple(norm_sandwich_check(hm, np.zeros(grid.k))) == (0.0, 0.0, 0.0, True)


def test_sandwich_degenerate_constant_note():
    grid = build_grid(Domain.unit(2, INTERIOR_MARGIN, 0), 6)
    r = norm_sandwich_check(HeightMap(grid, TENT2), np.ones(grid.k))
    assert r.ok and r.lower == 0.0 and "vacuous" in r.note


@given(st.integers(0, 10**6), st.sampled_from([1, 2]), st.sampled_from(["tent", "indicator-cube"]))
def test_sandwich_property(seed, d, kind):
    a = make_archetype(kind, d)
    N = 5 if d == 2 else 12
    grid = build_grid(Domain.unit(d, INTERIOR_MARGIN, 0), N)
    x = np.random.default_rng(seed).standard_normal(grid.k)
    assert norm_sandwich_check(HeightMap(grid, a), x).ok


def test_interpolation_identity():
    lam = np.zeros(7)
    lam[3] = 1.0
    assert interpolation_identity_check(TENT1, lam, np.array([3.5])) == 0.0
    assert TENT1(0.5) == 0.5
    rng = np.random.default_rng(3)
    assert interpolation_identity_check(TENT1, rng.standard_normal(20), rng.uniform(-1, 21, 500)) <= 1e-12
    single = np.zeros((4, 4))
    single[1, 1] = 1.0
    z = np.array([[1.6, 1.2], [1.2, 1.7], [0.5, 0.9]])
    assert interpolation_identity_check(TENT2, single, z) <= 1e-12
    assert interpolation_identity_check(TENT2, rng.standard_normal((6, 6)), rng.uniform(-1, 7, (300, 2))) <= 1e-12


def test_custom_table(tmp_path):
    p = tmp_path / "cube.txt"
    p.write_text("# half-open unit cube, two cells\n1 0.5\n-1 1.0\n0 1.0\n")
    a = load_custom_archetype(p)
    assert a(np.array([-0.5])) == 1.0 and a(np.array([0.49])) == 1.0 and a(np.array([0.5])) == 0.0
    assert check_condition(a).ok
    b = archetype_from_table(1, 1.0, np.array([[0]]), np.array([1.0]))
    assert b(0.3) == 1.0 and b(-0.3) == 0.0
