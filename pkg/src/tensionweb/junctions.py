"""Reducing the number of wires meeting at internal nodes.

Every reduction works on a *local* problem: the wires at one node are cut at
a sphere of half the node's clearance, the cut points become terminals loaded
by the wire tensions, and the star is replaced by a web of lower degree inside
that ball.  ``reduce_all`` splices local results back into the full web.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import lp
from .core import (DEFAULT_TOL, INTERNAL, ConfigError, TerminalConfig, Tolerances, Web, WebBuilder,
                   equilibrium_residual)


class JunctionError(RuntimeError):
    pass


@dataclass
class JunctionLocal:
    center: np.ndarray
    directions: np.ndarray     # (M, d) unit vectors along the wires, away from the center
    tensions: np.ndarray       # (M,)
    clearance: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        V = np.asarray(self.directions, dtype=float)
        self.directions = V / np.linalg.norm(V, axis=1)[:, None]
        self.tensions = np.asarray(self.tensions, dtype=float)
        if np.any(self.tensions <= 0):
            raise ConfigError("junction tensions must be positive")
        if not self.clearance > 0:
            raise ConfigError("clearance must be positive")

    @property
    def degree(self) -> int:
        return len(self.tensions)

    @property
    def dim(self) -> int:
        return len(self.center)

    def imbalance(self) -> float:
        return float(np.linalg.norm(self.tensions @ self.directions))

    def boundary_points(self) -> np.ndarray:
        return self.center + 0.5 * self.clearance * self.directions

    def local_config(self) -> TerminalConfig:
        """Cut points at half clearance, each pulled outward by its wire."""
        return TerminalConfig(self.boundary_points(), self.tensions[:, None] * self.directions)

    def star(self):
        """The unreduced junction as a local web."""
        B = self.boundary_points()
        nodes = np.vstack([B, self.center])
        M = self.degree
        web = Web(nodes, list(range(M)) + [INTERNAL], [[k, M] for k in range(M)])
        return web, self.tensions.copy()


def _local_from_builder(b: WebBuilder, junction: JunctionLocal, tol: Tolerances):
    web, t = b.build(drop_below=tol.tol_feas * (1 + float(junction.tensions.max())))
    cfg = junction.local_config()
    res = equilibrium_residual(web, t, cfg)
    if res > 1e-8 * (1 + float(junction.tensions.max())):
        raise JunctionError(f"local replacement out of balance (residual {res:.3g})")
    return web, t


def _check_distinct_directions(V, tol=1e-9):
    for i, j in combinations(range(len(V)), 2):
        if V[i] @ V[j] > 1 - tol:
            raise JunctionError("two wires leave the junction in the same direction")


# ------------------------------------------------------------------ planar

def _cleave_points(V2, T, radius):
    """Ring geometry for a planar junction given 2-d directions.

    Returns the ring radii s_k along each wire (in the input order) and the
    tension of the ring segment from wire k to the next wire counter-clockwise,
    along with that order.
    """
    ang = np.arctan2(V2[:, 1], V2[:, 0])
    order = list(np.argsort(ang, kind="stable"))
    Vs, Ts = V2[order], T[order]
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])        # quarter turn counter-clockwise
    steps = Ts[:, None] * (Vs @ rot.T)
    L = np.cumsum(steps, axis=0)                     # slope of the sector after each wire
    p = L.mean(axis=0)
    proj = np.einsum("ij,ij->i", L - p, Vs)
    if np.any(proj <= 0):
        raise JunctionError("junction is not balanced; cannot cleave")
    s = 1.0 / proj
    s = s * (radius / s.max())
    ring_t = np.linalg.norm(L - p, axis=1)
    radii = np.empty(len(T))
    radii[order] = s
    return radii, order, ring_t


def _plane_basis(V, tol=1e-9):
    """Orthonormal rows spanning the directions, and the rank."""
    _, sv, Vt = np.linalg.svd(V)
    rank = int(np.sum(sv > tol * sv.max()))
    return Vt[:rank], rank


def reduce_junction_2d(junction: JunctionLocal, tol: Tolerances = DEFAULT_TOL):
    """Replace a planar junction of degree > 3 by a ring of degree-3 nodes.

    Works for a planar junction embedded in 3-d as well.  The ring vertices sit
    on the wires no farther than a quarter of the clearance from the centre.
    """
    V, T = junction.directions, junction.tensions
    M = junction.degree
    if M <= 3:
        return junction.star()
    _check_distinct_directions(V)
    if junction.dim == 2:
        basis = np.identity(2)
    else:
        basis, rank = _plane_basis(V)
        if rank != 2:
            raise JunctionError("junction wires are not coplanar")
    V2 = V @ basis.T
    V2 = V2 / np.linalg.norm(V2, axis=1)[:, None]
    radii, order, ring_t = _cleave_points(V2, T, junction.clearance / 4)
    b = WebBuilder(junction.dim, 1e-12)
    B = junction.boundary_points()
    for k in range(M):
        b.add_node(B[k], k)
    q = [b.add_node(junction.center + radii[k] * V[k]) for k in range(M)]
    for k in range(M):
        b.add_wire(k, q[k], T[k])
    for pos, k in enumerate(order):
        nxt = order[(pos + 1) % M]
        b.add_wire(q[k], q[nxt], ring_t[pos])
    return _local_from_builder(b, junction, tol)


# ------------------------------------------------------------ five wires

def five_wire_geometry(V, T, t, s=None):
    """Nodes and tensions replacing five wires where wire 4 continues straight through as wire 5.

    ``V`` holds unit directions v_1..v_5 (rows, v_5 = -v_4), ``T`` the tensions.
    Returns (points x_1..x_5 relative to the junction, dict of (i, j) -> tension).
    """
    V = np.asarray(V, dtype=float)
    T = np.asarray(T, dtype=float)
    alpha = T[4] / T[3]
    if s is None:
        s = max(1.0, alpha)
    if not s > alpha / 3:
        raise ConfigError("need s > alpha / 3")
    r = s / (3 * s - alpha)
    x = np.zeros((5, V.shape[1]))
    for i in range(3):
        x[i] = t * T[i] * V[i]
    x[3] = t * s * T[3] * V[3]
    x[4] = -t * r * T[3] * V[3]
    ten = {}
    for i in range(3):
        ten[(i, 3)] = r * np.linalg.norm(x[i] - x[3]) / (t * (r + s))
        ten[(i, 4)] = s * np.linalg.norm(x[i] - x[4]) / (t * (r + s))
    return x, ten


def _straight_pairs(V, tol=1e-9):
    return [(i, j) for i, j in combinations(range(len(V)), 2) if V[i] @ V[j] < -1 + tol]


def five_wires_replace(junction: JunctionLocal, tol: Tolerances = DEFAULT_TOL, s: float | None = None,
                       t: float | None = None):
    """Replace a five-wire junction with one straight-through wire by six wires between five nodes."""
    V, T = junction.directions, junction.tensions
    if junction.dim != 3 or junction.degree != 5:
        raise ConfigError("five-wire replacement needs exactly five wires in 3-d")
    pairs = _straight_pairs(V)
    if len(pairs) != 1:
        raise ConfigError("need exactly one wire passing straight through")
    a, c = pairs[0]
    # the outgoing side with the larger tension plays the role of wire 4
    if T[c] > T[a]:
        a, c = c, a
    rest = [k for k in range(5) if k not in (a, c)]
    if np.linalg.matrix_rank(V[rest], tol=1e-9) < 3:
        raise ConfigError("remaining three wires must be linearly independent")
    order = rest + [a, c]
    Vo, To = V[order], T[order]
    alpha = To[4] / To[3]
    s_val = max(1.0, alpha) if s is None else s
    r = s_val / (3 * s_val - alpha)
    extent = max(float(To[:3].max()), s_val * To[3], r * To[3])
    if t is None:
        t = junction.clearance / (4 * extent)
    x, ten = five_wire_geometry(Vo, To, t, s_val)
    b = WebBuilder(3, 1e-12)
    B = junction.boundary_points()
    for k in range(5):
        b.add_node(B[k], k)
    nodes = [b.add_node(junction.center + x[i]) for i in range(5)]
    for i, k in enumerate(order):
        b.add_wire(k, nodes[i], T[k])
    for (i, j), v in ten.items():
        b.add_wire(nodes[i], nodes[j], v)
    return _local_from_builder(b, junction, tol)


# -------------------------------------------------------------- 3-d star

def _balanced_subset(V, T):
    """Pick 3 or 4 wires with a strictly positive self-balancing combination.

    Returns (indices, kappa) with sum(kappa) = 1, or None.  Subsets are scored
    by their smallest coefficient times how far the chords between the chosen
    wires stay from the centre (lowest indices on ties); nearly opposite wires
    would put a chord right next to the node and starve later steps of room.
    """
    best = None
    for size in (3, 4):
        for S in combinations(range(len(V)), size):
            A = V[list(S)].T
            # maximise tau subject to A k = 0, sum k = 1, k >= tau
            n = len(S)
            Aeq = np.vstack([np.hstack([A, np.zeros((A.shape[0], 1))]), np.r_[np.ones(n), 0.0]])
            beq = np.r_[np.zeros(A.shape[0]), 1.0]
            Ar, br, r = lp.range_reduce(Aeq, beq)
            if np.abs(r).max() > 1e-12:
                continue
            G = np.hstack([np.identity(n), -np.ones((n, 1))])
            c = np.zeros(n + 1)
            c[-1] = -1
            res = lp.solve(lp.LpProblem(c=c, A_eq=Ar, b_eq=br, G=G, h=np.zeros(n)))
            if res.status != lp.OPTIMAL:
                continue
            tau = -float(res.objective)
            if tau <= 1e-6:
                continue
            VS = V[list(S)]
            spread = min(np.linalg.norm(VS[i] + VS[j]) / 2 for i, j in combinations(range(n), 2))
            score = tau * spread
            if best is None or score > best[0] + 1e-12:
                best = (score, S, np.maximum(res.x[:n], 0.0))
    if best is None:
        return None
    return list(best[1]), best[2]


def _node_clearance(b: WebBuilder, v: int) -> float:
    """Room around node v: distance to the nearest other node, and in the plane also to other wires.

    In 3-d a replacement almost never meets an unrelated wire, and keeping
    clear of nearby chords would shrink each step by orders of magnitude, so
    there only actual hits are caught afterwards (see ``_collides``).
    """
    p = b.points[v]
    best = np.inf
    for u, q in enumerate(b.points):
        if u != v:
            best = min(best, float(np.linalg.norm(q - p)))
    if b.dim != 2:
        return best
    for (a, c) in b.wires:
        if v in (a, c):
            continue
        A, C = b.points[a], b.points[c]
        d = C - A
        s = np.clip((p - A) @ d / (d @ d), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(A + s * d - p)))
    return best


def _local_junction(b: WebBuilder, v: int) -> tuple[JunctionLocal, list[int]]:
    nbrs = b.neighbors(v)
    V = np.array([b.points[u] - b.points[v] for u in nbrs])
    T = np.array([b.wires[(min(u, v), max(u, v))] for u in nbrs])
    return JunctionLocal(b.points[v], V, T, _node_clearance(b, v)), nbrs


def _splice(b: WebBuilder, v: int, nbrs: list[int], local: Web, lt: np.ndarray):
    """Replace node v's star in ``b`` by a local web whose terminal k is neighbour k."""
    for u in nbrs:
        b.remove_wire(u, v)
    mapping = {}
    for i, role in enumerate(local.roles):
        mapping[i] = nbrs[role] if role != INTERNAL else None
    for i, role in enumerate(local.roles):
        if role == INTERNAL:
            mapping[i] = b.add_node(local.nodes[i])
    for (i, j), t in zip(local.edges, lt):
        b.add_wire(mapping[int(i)], mapping[int(j)], t)


def _needs_reduction(b: WebBuilder, v: int, dim: int) -> bool:
    if b.roles[v] != INTERNAL:
        return False
    nbrs = b.neighbors(v)
    deg = len(nbrs)
    if dim == 2:
        return deg > 3
    if deg > 4:
        return True
    if deg == 4:
        V = np.array([b.points[u] - b.points[v] for u in nbrs])
        V = V / np.linalg.norm(V, axis=1)[:, None]
        return _plane_basis(V)[1] < 3
    return False


def _collides(b: WebBuilder, v: int, nbrs: list[int], local: Web, eps: float) -> bool:
    """Whether a new node of ``local`` lands on an existing node or on a wire not at v."""
    P = np.array(b.points)
    others = [(a, c) for (a, c) in b.wires if v not in (a, c)]
    for i in np.nonzero(np.asarray(local.roles) == INTERNAL)[0]:
        p = local.nodes[i]
        d = np.linalg.norm(P - p, axis=1)
        d[v] = np.inf
        if d.min() <= eps:
            return True
        for a, c in others:
            A, C = P[a], P[c]
            r = C - A
            s = np.clip((p - A) @ r / (r @ r), 0.0, 1.0)
            if np.linalg.norm(A + s * r - p) <= eps:
                return True
    return False


def _reduce_node(b: WebBuilder, v: int, dim: int, tol: Tolerances, retries: int = 20) -> None:
    J, nbrs = _local_junction(b, v)
    eps = max(tol.tol_geom * max(1.0, float(np.abs(J.center).max())), 1e-6 * J.clearance)
    for _ in range(retries + 1):
        if dim == 2:
            local, lt = reduce_junction_2d(J, tol)
        else:
            local, lt = reduce_junction_3d(J, tol)
        if not _collides(b, v, nbrs, local, eps):
            _splice(b, v, nbrs, local, lt)
            return
        J = JunctionLocal(J.center, J.directions, J.tensions, J.clearance / 2)
    raise JunctionError("replacement keeps landing on existing nodes or wires")


def reduce_junction_3d(junction: JunctionLocal, tol: Tolerances = DEFAULT_TOL, max_steps: int = 200):
    """Bring a 3-d junction down to at most four non-coplanar wires per internal node.

    Each step superposes a small self-stressed tensegrity on a balanced subset
    of three or four wires, scaled so the inner part of one wire goes slack.
    A tetrahedral subset leaves five-wire nodes with a straight-through wire,
    which are then split by the five-wire replacement; coplanar subsets and
    leftover coplanar nodes are cleaved in their plane.
    """
    if junction.dim != 3:
        raise ConfigError("3-d junction expected")
    V = junction.directions
    _check_distinct_directions(V)
    rank = _plane_basis(V)[1]
    M = junction.degree
    if M <= 3 or (M == 4 and rank == 3):
        return junction.star()
    if rank == 2:
        return reduce_junction_2d(junction, tol)
    if M == 5 and len(_straight_pairs(V)) == 1:
        try:
            return five_wires_replace(junction, tol)
        except ConfigError:
            pass
    web, t = junction.star()
    b = WebBuilder.from_web(web, t, 1e-12)
    center = len(b.points) - 1
    for _ in range(max_steps):
        todo = [v for v in range(len(b.points)) if _needs_reduction(b, v, 3)]
        if not todo:
            break
        v = todo[0]
        if v == center and len(b.neighbors(v)) > 4:
            _tensegrity_step(b, v, tol)
        else:
            _reduce_node(b, v, 3, tol)
    else:
        raise JunctionError("junction reduction did not finish")
    return _local_from_builder(b, junction, tol)


def _tensegrity_step(b: WebBuilder, v: int, tol: Tolerances) -> None:
    J, nbrs = _local_junction(b, v)
    V, T = J.directions, J.tensions
    pick = _balanced_subset(V, T)
    if pick is None:
        raise JunctionError("no balanced subset of wires found; junction inconsistent")
    S, kappa = pick
    scale = float(np.min(T[S] / kappa))         # the wire attaining this goes slack
    K = scale * kappa                           # compression superposed on each chosen wire
    rho = J.clearance / 4
    VS = V[S]
    basis, rank = _plane_basis(VS)
    ring = None
    if rank == 3:
        radii = np.full(len(S), rho)
    else:
        V2 = VS @ basis.T
        V2 = V2 / np.linalg.norm(V2, axis=1)[:, None]
        radii, order, ring_t = _cleave_points(V2, K, rho)
        ring = (order, ring_t)
    pts = [b.add_node(J.center + radii[i] * VS[i]) for i in range(len(S))]
    for i, k in enumerate(S):
        u = nbrs[k]
        T_k = b.remove_wire(u, v)
        b.add_wire(u, pts[i], T_k)
        inner = T_k - K[i]
        if inner > tol.tol_feas * (1 + T_k):
            b.add_wire(pts[i], v, inner)
    if ring is None:
        # tetrahedron carrying the pairwise tensions of the radial tensegrity
        c = K / rho
        for i, j in combinations(range(len(S)), 2):
            L = rho * np.linalg.norm(VS[i] - VS[j])
            b.add_wire(pts[i], pts[j], L * c[i] * c[j] / c.sum())
    else:
        order, ring_t = ring
        for pos, i in enumerate(order):
            j = order[(pos + 1) % len(order)]
            b.add_wire(pts[i], pts[j], float(ring_t[pos]))


# ---------------------------------------------------------------- driver

def reduce_all(web: Web, tensions, cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL, max_steps: int | None = None):
    """Reduce every internal node to at most 3 wires (2-d) or 4 non-coplanar wires (3-d)."""
    t = np.asarray(tensions, dtype=float)
    res0 = equilibrium_residual(web, t, cfg)
    if res0 > 1e-8 * (1 + float(np.abs(cfg.forces).max())):
        raise ConfigError("tensions do not support the loading")
    dim = web.dim
    b = WebBuilder.from_web(web, t, tol.tol_geom)
    for key in [k for k, v in b.wires.items() if v <= tol.tol_feas]:
        del b.wires[key]
    if max_steps is None:
        max_steps = 50 * (len(b.points) + len(b.wires)) + 50
    for _ in range(max_steps):
        todo = [v for v in range(len(b.points)) if _needs_reduction(b, v, dim)]
        if not todo:
            break
        _reduce_node(b, todo[0], dim, tol)
    else:
        raise JunctionError("junction reduction exceeded its step limit")
    return b.build()
