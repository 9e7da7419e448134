import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from tensionweb import fixtures
from tensionweb.core import (INTERNAL, ConfigError, TerminalConfig, Web, equilibrium_matrix, equilibrium_residual,
                             is_connected, project_balanced)
from tensionweb.uniloadable import (NotInteriorError, cone_synthesis, connected_support, count_supported_off_ray,
                                    decompose_over_rays, in_degenerate_set, make_uniloadable, require_interior,
                                    stress_space, unstuck_shift, verify_uniloadable)
from tensionweb.webbuild import find_stress


def interior_loading(rng, n, d):
    """Loading with every pair strictly stretched, hence strictly inside the admissible cone."""
    X = rng.normal(size=(n, d))
    F = np.zeros_like(X)
    for i, j in itertools.combinations(range(n), 2):
        w = rng.uniform(0.2, 1.0)
        F[i] += w * (X[i] - X[j])
        F[j] += w * (X[j] - X[i])
    return TerminalConfig(X, F)


def lp_unique_stress(web):
    """Independent oracle: do all balanced nonnegative stresses (summing to 1) coincide and stay positive?"""
    A = equilibrium_matrix(web)
    rows = [r for v in range(len(web.nodes)) if web.roles[v] == INTERNAL
            for r in range(web.dim * v, web.dim * v + web.dim)]
    A = np.vstack([A[rows], np.ones(web.n_edges)])
    b = np.r_[np.zeros(len(rows)), 1.0]
    lo, hi = [], []
    for e in range(web.n_edges):
        c = np.zeros(web.n_edges)
        c[e] = 1
        r1 = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        r2 = linprog(-c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        if r1.status or r2.status:
            return False
        lo.append(r1.fun)
        hi.append(-r2.fun)
    return np.allclose(lo, hi, atol=1e-7) and min(lo) > 1e-9


def test_boundary_loadings_are_refused():
    with pytest.raises(NotInteriorError):
        require_interior(fixtures.arrowhead())
    with pytest.raises(NotInteriorError):
        require_interior(fixtures.compress_pair())
    with pytest.raises(NotInteriorError):
        unstuck_shift(fixtures.arrowhead())
    assert require_interior(fixtures.square_radial()) > 0


def test_degenerate_set():
    assert in_degenerate_set([[1, 0], [-1, 0], [0, 1], [0, -1]])
    assert not in_degenerate_set([[2, 0], [-1, 1], [-1, -1.5], [0, 0.5]])
    assert not in_degenerate_set([[1, 0], [0, 0], [-0.5, 1], [-0.5, -1]])   # the zero force is ignored


def test_retraction_keeps_loading_interior():
    cfg = fixtures.square_radial()
    eps = unstuck_shift(cfg)
    assert eps > 0
    assert require_interior(cfg.with_positions(cfg.positions - eps * cfg.forces)) > 0


def test_connected_support_on_degenerate_loading():
    # rhombus loaded along both diagonals: each diagonal pair balances on its own
    X = np.array([[2.0, 0], [0, 1], [-2, 0], [0, -1]])
    F = np.array([[1.0, 0], [0, 1], [-1, 0], [0, -1]])
    cfg = TerminalConfig(X, F)
    assert in_degenerate_set(F)
    web, t = connected_support(cfg)
    assert t.min() > 0
    assert equilibrium_residual(web, t, cfg) < 1e-8
    assert is_connected(web, t)


def test_y_shape_is_uniloadable():
    X = np.array([[1.0, 0], [-0.5, np.sqrt(3) / 2], [-0.5, -np.sqrt(3) / 2]])
    cfg = TerminalConfig(X, X.copy())
    web, t = make_uniloadable(cfg)
    assert verify_uniloadable(web)
    assert lp_unique_stress(web)


def test_complete_graph_is_not_uniloadable():
    web = Web(fixtures.SQUARE, [0, 1, 2, 3], np.array(list(itertools.combinations(range(4), 2))))
    # no internal nodes: every stress balances, so the space is six-dimensional
    assert stress_space(web).shape[1] == 6
    assert not verify_uniloadable(web)
    assert not lp_unique_stress(web)


def test_disconnected_web_is_rejected():
    web = Web([[0, 0], [1, 0], [2, 0], [3, 0]], [0, 1, 2, 3], [[0, 1], [2, 3]])
    with pytest.raises(ConfigError):
        verify_uniloadable(web)


def test_square_uniloadable_web():
    cfg = fixtures.square_radial()
    web, t = make_uniloadable(cfg)
    assert verify_uniloadable(web, lp_check=True)
    assert equilibrium_residual(web, t, cfg) < 1e-9
    deg = web.degrees()
    for k, v in web.terminal_nodes().items():
        assert deg[v] == 1
        e = int(np.flatnonzero((web.edges == v).any(axis=1))[0])
        assert t[e] == pytest.approx(np.linalg.norm(cfg.forces[k]), abs=1e-9)
    assert max(deg[web.roles == INTERNAL]) <= 3
    assert count_supported_off_ray(web, cfg, samples=20) == 0
    # the defining ray itself is supported at any scale
    assert find_stress(web, cfg.with_forces(3 * cfg.forces)) is not None


@pytest.mark.parametrize("seed,d,n", [(1, 2, 4), (2, 3, 4), (3, 2, 5)])
def test_random_uniloadable(seed, d, n):
    cfg = interior_loading(np.random.default_rng(seed), n, d)
    web, t = make_uniloadable(cfg, seed=seed)
    assert verify_uniloadable(web)
    assert equilibrium_residual(web, t, cfg) < 1e-8
    assert count_supported_off_ray(web, cfg, samples=10, seed=seed) == 0


def test_cone_synthesis_supports_exactly_the_cone():
    X = fixtures.SQUARE
    F1 = fixtures.square_radial().forces
    # second ray: positive pair weights on the square
    F2 = np.zeros_like(X)
    for (i, j), w in zip(itertools.combinations(range(4), 2), [0.3, 1.0, 0.2, 0.5, 0.9, 0.4]):
        F2[i] += w * (X[i] - X[j])
        F2[j] += w * (X[j] - X[i])
    cw = cone_synthesis(X, [F1, F2])
    for F, s in zip(cw.rays, cw.stresses):
        assert equilibrium_residual(cw.web, s, TerminalConfig(X, F)) < 1e-8
    mix = 0.3 * cw.rays[0] + 0.7 * cw.rays[1]
    assert find_stress(cw.web, TerminalConfig(X, mix)) is not None
    coef, res = decompose_over_rays(mix, cw.rays)
    assert res < 1e-9 and np.all(coef >= 0)
    # loadings outside the conic hull of the two rays are not supported
    rng = np.random.default_rng(0)
    for _ in range(10):
        G = project_balanced(rng.normal(size=X.shape), X)
        if decompose_over_rays(G, cw.rays)[1] > 1e-6:
            assert find_stress(cw.web, TerminalConfig(X, G)) is None
