import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from mvempirical._simplex import transport
from mvempirical.measures import make_empirical
from mvempirical.wasserstein import (
    gaussian_quantile_measure,
    w2_1d,
    w2_exact_small,
    w2_sliced,
    w2_vs_gaussian_1d,
)


def emp(atoms, weights=None):
    a = np.asarray(atoms, dtype=float)
    return make_empirical(a.reshape(len(a), -1), weights)


def brute_force_equal_weights(x, y):
    """Minimum over all bijections of the mean squared displacement."""
    cost = ((x[:, None, :] - y[None, :, :]) ** 2).sum(-1)
    n = len(x)
    return math.sqrt(min(cost[np.arange(n), list(p)].mean() for p in itertools.permutations(range(n))))


def lp_w2(mu, nu):
    n, m = len(mu), len(nu)
    cost = ((mu.atoms[:, None, :] - nu.atoms[None, :, :]) ** 2).sum(-1).ravel()
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        a_eq[n + j, j::m] = 1
    res = linprog(cost, A_eq=a_eq, b_eq=np.concatenate([mu.weights, nu.weights]), bounds=(0, None),
                  method="highs")
    return math.sqrt(max(res.fun, 0.0))


def test_dirac_pair():
    assert w2_1d(emp([0.0]), emp([3.0])) == 3.0


def test_identity():
    mu = emp([0.0, 1.0, 5.0], [0.2, 0.3, 0.5])
    assert w2_1d(mu, mu) == 0.0
    assert w2_exact_small(mu, mu)[0] == 0.0


def test_hand_quantile_coupling():
    assert w2_1d(emp([0, 1]), emp([0, 2])) == pytest.approx(math.sqrt(0.5), abs=1e-15)


def test_exact_2d_dirac_pair():
    d, plan = w2_exact_small(emp([[0.0, 0.0]]), emp([[3.0, 4.0]]))
    assert d == 5.0 and plan.plan.tolist() == [[1.0]]


def test_exact_matches_permutations_on_three_atoms():
    g = np.random.default_rng(0)
    for _ in range(30):
        x, y = g.normal(size=(3, 2)), g.normal(size=(3, 2))
        assert w2_exact_small(emp(x), emp(y))[0] == pytest.approx(brute_force_equal_weights(x, y), abs=1e-12)


def test_exact_matches_1d_on_random_pairs():
    g = np.random.default_rng(1)
    for _ in range(100):
        n, m = g.integers(1, 9, size=2)
        mu = emp(g.normal(size=n), g.dirichlet(np.ones(n)))
        nu = emp(g.normal(size=m), g.dirichlet(np.ones(m)))
        assert w2_exact_small(mu, nu)[0] == pytest.approx(w2_1d(mu, nu), abs=1e-10)


def test_exact_matches_linear_program_in_3d():
    g = np.random.default_rng(2)
    for _ in range(20):
        n, m = g.integers(1, 12, size=2)
        mu = emp(g.normal(size=(n, 3)), g.dirichlet(np.ones(n)))
        nu = emp(g.normal(size=(m, 3)), g.dirichlet(np.ones(m)))
        assert w2_exact_small(mu, nu)[0] == pytest.approx(lp_w2(mu, nu), abs=1e-9)


def test_unequal_counts_equal_weights_use_refinement():
    g = np.random.default_rng(3)
    mu, nu = emp(g.normal(size=(4, 2))), emp(g.normal(size=(6, 2)))
    d, plan = w2_exact_small(mu, nu)
    assert d == pytest.approx(lp_w2(mu, nu), abs=1e-10)
    assert plan.plan.shape == (4, 6)


def test_exact_size_cap():
    with pytest.raises(ValueError):
        w2_exact_small(emp(np.zeros(65)), emp([0.0]))


def test_plan_serializes():
    _, plan = w2_exact_small(emp([0.0, 1.0]), emp([2.0]))
    doc = json.loads(json.dumps(plan.to_json()))
    assert set(doc) == {"rows", "cols", "plan", "cost"}
    assert doc["plan"] == [[0.5], [0.5]]


def test_transport_degenerate_problem():
    a = np.array([0.5, 0.5])
    b = np.array([0.5, 0.5])
    cost = np.array([[1.0, 1.0], [1.0, 1.0]])
    plan = transport(a, b, cost)
    assert np.allclose(plan.sum(0), b) and np.allclose(plan.sum(1), a)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        w2_exact_small(emp([[0.0, 0.0]]), emp([0.0]))


def test_sliced_1d_equals_exact():
    mu, nu = emp([0.0, 1.0, 3.0]), emp([2.0, 2.5])
    for k in (1, 7, 64):
        assert w2_sliced(mu, nu, n_proj=k) == w2_1d(mu, nu)


def test_sliced_identity_and_projection_limit():
    mu = emp([[0.0, 0.0]])
    assert w2_sliced(mu, mu) == 0.0
    assert w2_sliced(mu, emp([[3.0, 4.0]]), n_proj=20_000, seed=5) == pytest.approx(math.sqrt(12.5), abs=0.05)


def test_sliced_below_exact():
    g = np.random.default_rng(4)
    for i in range(30):
        mu, nu = emp(g.normal(size=(5, 2))), emp(g.normal(size=(7, 2)))
        assert w2_sliced(mu, nu, 32, seed=i) <= w2_exact_small(mu, nu)[0] + 1e-9


def test_gaussian_against_dirac_at_mean():
    assert w2_vs_gaussian_1d(emp([1.5]), 1.5, 2.0) == pytest.approx(2.0, abs=1e-3)


def test_gaussian_closed_form():
    fine = gaussian_quantile_measure(1.0, 1.0, 20_000)
    assert w2_vs_gaussian_1d(fine, 0.0, 2.0) == pytest.approx(math.sqrt(2.0), abs=1e-2)


def test_gaussian_identity_limit():
    errs = [w2_vs_gaussian_1d(gaussian_quantile_measure(0, 1, n), 0.0, 1.0, 4 * n) for n in (100, 1000, 10_000)]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-2


def test_gaussian_input_checks():
    with pytest.raises(ValueError):
        w2_vs_gaussian_1d(emp([0.0]), 0.0, 1.0, 50)
    with pytest.raises(ValueError):
        gaussian_quantile_measure(0.0, 0.0, 100)


small_1d = st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=8)


@settings(max_examples=100, deadline=None)
@given(small_1d, small_1d)
def test_symmetry_exact(x, y):
    mu, nu = emp(x), emp(y)
    assert w2_1d(mu, nu) == w2_1d(nu, mu)
    assert w2_exact_small(mu, nu)[0] == w2_exact_small(nu, mu)[0]


@settings(max_examples=100, deadline=None)
@given(small_1d, small_1d, st.floats(-10, 10), st.floats(0.1, 10))
def test_translation_and_scaling(x, y, c, a):
    mu, nu = emp(x), emp(y)
    base = w2_1d(mu, nu)
    assert w2_1d(emp(np.add(x, c)), emp(np.add(y, c))) == pytest.approx(base, abs=1e-10 * (1 + base) + 1e-9)
    assert w2_1d(emp(np.multiply(x, -a)), emp(np.multiply(y, -a))) == pytest.approx(a * base, rel=1e-10, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(small_1d, small_1d, small_1d)
def test_triangle_inequality(x, y, z):
    a, b, c = emp(x), emp(y), emp(z)
    assert w2_1d(a, c) <= w2_1d(a, b) + w2_1d(b, c) + 1e-9
    assert w2_exact_small(a, c)[0] <= w2_exact_small(a, b)[0] + w2_exact_small(b, c)[0] + 1e-9
