import numpy as np
import pytest

from phononmap.simplex import SearchOptions, direct_search


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_convex_quadratic():
    res = direct_search(lambda x: float(np.dot(x, x)), [1.0, 1.0], SearchOptions(tol_x=1e-9, tol_f=1e-16))
    assert np.max(np.abs(res.x)) < 1e-6
    assert res.reason in ("tol_x", "tol_f")


def test_rosenbrock():
    res = direct_search(rosenbrock, [-1.2, 1.0], SearchOptions(tol_x=1e-10, tol_f=1e-14))
    assert res.f < 1e-6
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-3)


def test_constant_function_stops_on_spread():
    res = direct_search(lambda x: 3.0, [0.5, -0.5, 2.0])
    assert res.reason == "tol_f"
    assert res.n_evals == 4  # start point plus one vertex per dimension
    assert np.array_equal(res.x, [0.5, -0.5, 2.0])


def test_budget_is_respected_and_flagged():
    calls = []

    def f(x):
        calls.append(1)
        return rosenbrock(x)

    res = direct_search(f, [-1.2, 1.0], SearchOptions(max_evals=37, tol_x=0, tol_f=0))
    assert res.n_evals == len(calls) == 37
    assert res.budget_exhausted


def test_zero_budget_returns_start_point():
    res = direct_search(rosenbrock, [-1.2, 1.0], SearchOptions(max_evals=0))
    assert res.n_evals == 1
    assert res.f == rosenbrock([-1.2, 1.0])
    assert res.budget_exhausted


def test_trace_is_monotone_and_consistent():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 6))
    res = direct_search(lambda x: float(np.sum((a @ x - 1) ** 2)), np.zeros(6), SearchOptions(max_evals=500))
    assert len(res.trace) == res.n_evals
    assert all(b <= a_ for a_, b in zip(res.trace, res.trace[1:]))
    assert res.trace[-1] == res.f


@pytest.mark.parametrize("seed", range(3))
def test_deterministic(seed):
    x0 = np.random.default_rng(seed).normal(size=4)
    r1 = direct_search(lambda x: float(np.sum(np.cos(x) + x**2)), x0)
    r2 = direct_search(lambda x: float(np.sum(np.cos(x) + x**2)), x0)
    assert r1.trace == r2.trace and np.array_equal(r1.x, r2.x)
