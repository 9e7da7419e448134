import numpy as np
import pytest
from scipy.optimize import linprog

from tensionweb.core import INTERNAL, ConfigError, TerminalConfig, Web, equilibrium_residual
from tensionweb.junctions import (JunctionError, JunctionLocal, five_wire_geometry, five_wires_replace,
                                  reduce_all, reduce_junction_2d, reduce_junction_3d)


def internal_degrees(web):
    deg = web.degrees()
    return [int(deg[v]) for v in range(len(web.nodes)) if web.roles[v] == INTERNAL]


def balanced_directions(rng, m, d, floor=0.2):
    while True:
        V = rng.normal(size=(m, d))
        V /= np.linalg.norm(V, axis=1)[:, None]
        r = linprog(np.zeros(m), A_eq=V.T, b_eq=np.zeros(d), bounds=[(floor, None)] * m, method="highs")
        if r.status == 0:
            return V, r.x


def star_instance(rng, m, d):
    """A hub joined to m terminals, loaded by the wire pulls, so the hub has degree m."""
    V, T = balanced_directions(rng, m, d)
    center = rng.normal(size=d)
    X = center + rng.uniform(0.5, 2.0, size=(m, 1)) * V
    cfg = TerminalConfig(X, T[:, None] * V)
    web = Web(np.vstack([X, center]), list(range(m)) + [INTERNAL], [[k, m] for k in range(m)])
    return web, T, cfg


def test_junction_validation():
    with pytest.raises(ConfigError):
        JunctionLocal([0, 0], [[1, 0], [-1, 0]], [1, 0], 1.0)
    with pytest.raises(ConfigError):
        JunctionLocal([0, 0], [[1, 0], [-1, 0]], [1, 1], 0.0)


def test_four_way_cross_cleaves_into_square_ring():
    J = JunctionLocal([0, 0], [[1, 0], [0, 1], [-1, 0], [0, -1]], [1, 1, 1, 1], 1.0)
    web, t = reduce_junction_2d(J)
    assert internal_degrees(web) == [3, 3, 3, 3]
    ring = [s for (a, b), s in zip(web.edges, t) if web.roles[a] == INTERNAL and web.roles[b] == INTERNAL]
    # each ring node balances a unit pull with two perpendicular ring wires at 45 degrees
    np.testing.assert_allclose(ring, np.full(4, 1 / np.sqrt(2)), rtol=1e-12)
    assert equilibrium_residual(web, t, J.local_config()) < 1e-12
    assert np.linalg.norm(web.nodes[web.roles == INTERNAL], axis=1).max() <= 0.25 + 1e-12


def test_unbalanced_junction_cannot_be_cleaved():
    J = JunctionLocal([0, 0], [[1, 0], [0, 1], [-1, 0], [0, -1]], [1, 2, 1, 1], 1.0)
    with pytest.raises(JunctionError):
        reduce_junction_2d(J)


def test_low_degree_is_left_alone():
    J = JunctionLocal([0, 0], [[1, 0], [-0.5, 0.8], [-0.5, -0.8]], [1, 0.625, 0.625], 1.0)
    web, t = reduce_junction_2d(J)
    assert internal_degrees(web) == [3]


def test_planar_junction_embedded_in_space():
    rng = np.random.default_rng(11)
    V2, T = balanced_directions(rng, 6, 2)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    J = JunctionLocal(rng.normal(size=3), V2 @ Q[:2], T, 1.0)
    web, t = reduce_junction_2d(J)
    assert max(internal_degrees(web)) <= 3
    assert equilibrium_residual(web, t, J.local_config()) < 1e-10


def five_wire_instance():
    s3 = np.sqrt(3)
    V = np.vstack([np.identity(3), -np.ones(3) / s3, np.ones(3) / s3])
    T = np.array([1.0, 1.0, 1.0, 2 * s3, s3])          # T_5 = T_4 / 2
    return V, T


def test_five_wire_geometry_balances_every_node():
    V, T = five_wire_instance()
    assert np.linalg.norm(T @ V) < 1e-14
    x, ten = five_wire_geometry(V, T, t=0.1, s=1.0)
    for i in range(5):
        f = T[i] * V[i]
        for (a, b), s in ten.items():
            if i in (a, b):
                j = b if i == a else a
                f = f + s * (x[j] - x[i]) / np.linalg.norm(x[j] - x[i])
        assert np.linalg.norm(f) <= 1e-12
    assert min(ten.values()) > 0


def test_five_wires_replace_local_web():
    V, T = five_wire_instance()
    J = JunctionLocal([0.0, 0.0, 0.0], V, T, 1.0)
    web, t = five_wires_replace(J, s=1.0)
    assert equilibrium_residual(web, t, J.local_config()) <= 1e-12
    assert t.min() > 0 and max(internal_degrees(web)) <= 4


def test_five_wires_preconditions():
    with pytest.raises(ConfigError):
        five_wires_replace(JunctionLocal([0, 0], [[1, 0], [0, 1], [-1, 0], [0, -1], [1, 1]],
                                         [1, 1, 1, 1, 1], 1.0))
    V = np.array([[1, 0, 0], [0, 1, 0], [-1, -1, 0], [0, 0, 1], [0, 0, -1.0]])
    with pytest.raises(ConfigError):
        five_wires_replace(JunctionLocal([0, 0, 0], V, [1, 1, 1, 1, 1], 1.0))


def test_octahedral_star():
    V = np.vstack([np.identity(3), -np.identity(3)])
    J = JunctionLocal([0, 0, 0], V, np.ones(6), 1.0)
    web, t = reduce_junction_3d(J)
    assert max(internal_degrees(web)) <= 4
    assert equilibrium_residual(web, t, J.local_config()) < 1e-9
    assert t.min() > 0


@pytest.mark.parametrize("m", [5, 6, 7, 8])
def test_random_3d_stars(m):
    rng = np.random.default_rng(100 + m)
    for _ in range(3):
        web, T, cfg = star_instance(rng, m, 3)
        w2, t2 = reduce_all(web, T, cfg)
        assert max(internal_degrees(w2)) <= 4
        assert equilibrium_residual(w2, t2, cfg) <= 1e-8
        assert t2.min() > 0


@pytest.mark.parametrize("m", [4, 6, 8])
def test_random_2d_stars(m):
    rng = np.random.default_rng(200 + m)
    web, T, cfg = star_instance(rng, m, 2)
    w2, t2 = reduce_all(web, T, cfg)
    assert max(internal_degrees(w2)) <= 3
    assert equilibrium_residual(w2, t2, cfg) <= 1e-8


def test_reduce_all_rejects_unsupported_tensions():
    rng = np.random.default_rng(1)
    web, T, cfg = star_instance(rng, 5, 3)
    with pytest.raises(ConfigError):
        reduce_all(web, 2 * T, cfg)
