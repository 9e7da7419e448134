from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from tensionweb import lp


def _scipy_status(c, A, b, G, h, free):
    bounds = [(None, None) if f else (0, None) for f in free]
    # HiGHS presolve misreports some unbounded problems with free variables as infeasible,
    # and without presolve it occasionally gives up on numerics
    for presolve in (False, True):
        r = linprog(c, A_ub=-G if len(G) else None, b_ub=-h if len(G) else None,
                    A_eq=A if len(A) else None, b_eq=b if len(A) else None, bounds=bounds, method="highs",
                    options={"presolve": presolve})
        if r.status != 4:
            break
    return {0: lp.OPTIMAL, 2: lp.INFEASIBLE, 3: lp.UNBOUNDED}[r.status], r


def test_small_optimum():
    # min -x - y  s.t. x + y <= 4 (as -x - y >= -4), x, y >= 0, x - y = 0
    p = lp.LpProblem(c=[-1, -1], A_eq=[[1, -1]], b_eq=[0], G=[[-1, -1]], h=[-4])
    r = lp.solve(p)
    assert r.status == lp.OPTIMAL
    np.testing.assert_allclose(r.x, [2, 2], atol=1e-12)
    assert r.objective == pytest.approx(-4)
    assert r.dual_objective == pytest.approx(r.objective)


def test_infeasible_certificate():
    p = lp.LpProblem(c=[1, 1], A_eq=[[1, 1]], b_eq=[-1])
    r = lp.solve(p)
    assert r.status == lp.INFEASIBLE
    viol, margin = lp.certificate_check(p, r)
    assert viol <= 1e-9 and margin > 0


def test_unbounded_ray():
    p = lp.LpProblem(c=[-1, 0], A_eq=[[0, 1]], b_eq=[1])
    r = lp.solve(p)
    assert r.status == lp.UNBOUNDED
    assert r.ray is not None and np.dot([-1, 0], r.ray) < 0


def test_exact_mode_returns_fractions():
    p = lp.LpProblem(c=[1, 2], A_eq=[[1, 1]], b_eq=[1], G=[[1, -1]], h=[Fraction(1, 3)])
    r = lp.solve(p, exact=True)
    assert r.status == lp.OPTIMAL
    assert all(isinstance(v, Fraction) for v in r.x)
    assert r.x[0] == 1 and r.x[1] == 0


def test_unbounded_with_free_variable():
    G = [[2, -1, 0, 2], [-2, 2, -3, -1], [2, 3, 0, -2]]
    p = lp.LpProblem(c=[-2, -2, 3, -3], G=G, h=[0, -3, -1], lb=[-np.inf, 0, 0, 0])
    for exact in (False, True):
        r = lp.solve(p, exact=exact)
        assert r.status == lp.UNBOUNDED
        d = np.asarray(r.ray, dtype=float)
        assert np.dot([-2, -2, 3, -3], d) < 0
        assert (np.asarray(G) @ d).min() >= -1e-12 and d[1:].min() >= -1e-12


def test_free_variables():
    p = lp.LpProblem(c=[1, 0], A_eq=[[1, -1]], b_eq=[-3], G=[[0, 1]], h=[0], lb=[-np.inf, -np.inf])
    r = lp.solve(p)
    assert r.status == lp.OPTIMAL
    assert r.x[0] == pytest.approx(-3)


def test_shape_validation():
    with pytest.raises(lp.LpError):
        lp.LpProblem(c=[1, 2], A_eq=[[1, 2, 3]], b_eq=[1])


def test_range_reduce_drops_dependent_rows():
    A = np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 1.0]])
    b = np.array([1.0, 2.0, 3.0])
    Ar, br, r = lp.range_reduce(A, b)
    assert Ar.shape[0] == 2 and np.abs(r).max() < 1e-12


def test_feasible_nonneg_certificate():
    A = np.array([[1.0, 1.0]])
    res = lp.feasible_nonneg(A, np.array([-2.0]))
    assert not res.feasible
    y = res.certificate
    assert np.all(A.T @ y >= -1e-12) and y @ np.array([-2.0]) < 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_agrees_with_highs_on_random_problems(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    me, mi = int(rng.integers(0, 3)), int(rng.integers(0, 4))
    A = rng.integers(-3, 4, size=(me, n)).astype(float)
    b = rng.integers(-3, 4, size=me).astype(float)
    G = rng.integers(-3, 4, size=(mi, n)).astype(float)
    h = rng.integers(-3, 4, size=mi).astype(float)
    c = rng.integers(-3, 4, size=n).astype(float)
    free = rng.random(n) < 0.3
    lb = np.where(free, -np.inf, 0.0)
    r = lp.solve(lp.LpProblem(c=c, A_eq=A.reshape(me, n), b_eq=b, G=G.reshape(mi, n), h=h, lb=lb))
    status, ref = _scipy_status(c, A, b, G, h, free)
    assert r.status == status
    if status == lp.OPTIMAL:
        assert r.objective == pytest.approx(ref.fun, abs=1e-7)
        assert r.dual_objective == pytest.approx(r.objective, abs=1e-7)
    elif status == lp.INFEASIBLE:
        viol, margin = lp.certificate_check(lp.LpProblem(c=c, A_eq=A.reshape(me, n), b_eq=b,
                                                         G=G.reshape(mi, n), h=h, lb=lb), r)
        assert viol <= 1e-8 and margin > 0
    else:
        d = np.asarray(r.ray, dtype=float)
        assert c @ d < 0
        assert np.abs(A.reshape(me, n) @ d).max(initial=0.0) <= 1e-9
        assert (G.reshape(mi, n) @ d).min(initial=0.0) >= -1e-9
        assert d[~free].min(initial=0.0) >= -1e-9
