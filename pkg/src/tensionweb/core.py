"""Domain types, equilibrium residuals, rigid-motion algebra and hull predicates."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull, QhullError

INTERNAL = -1


class ConfigError(ValueError):
    """Invalid terminal configuration or web."""


@dataclass(frozen=True)
class Tolerances:
    tol_feas: float = 1e-9
    tol_eq: float = 1e-9
    tol_geom: float = 1e-9

    def __post_init__(self):
        for name in ("tol_feas", "tol_eq", "tol_geom"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")

    @classmethod
    def from_env(cls, base: "Tolerances | None" = None) -> "Tolerances":
        """Apply the TENSIONWEB_TOL override (feasibility and equilibrium jointly)."""
        base = base or cls()
        raw = os.environ.get("TENSIONWEB_TOL")
        if not raw:
            return base
        t = float(raw)
        return replace(base, tol_feas=t, tol_eq=t)


DEFAULT_TOL = Tolerances()


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be a 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TerminalConfig:
    """Terminal points x_i (rows of ``positions``) with applied forces f_i."""

    positions: np.ndarray
    forces: np.ndarray

    def __post_init__(self):
        X = _as_matrix(self.positions, "positions")
        F = _as_matrix(self.forces, "forces")
        object.__setattr__(self, "positions", X)
        object.__setattr__(self, "forces", F)
        if X.shape != F.shape:
            raise ConfigError(f"positions {X.shape} and forces {F.shape} differ in shape")
        n, d = X.shape
        if d not in (2, 3):
            raise ConfigError(f"dimension must be 2 or 3, got {d}")
        if n < 2:
            raise ConfigError("need at least two terminals")
        if min_pair_distance(X) <= DEFAULT_TOL.tol_geom:
            raise ConfigError("terminal positions must be pairwise distinct")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def with_positions(self, X) -> "TerminalConfig":
        return TerminalConfig(X, self.forces)

    def with_forces(self, F) -> "TerminalConfig":
        return TerminalConfig(self.positions, F)

    def __eq__(self, other):
        return (isinstance(other, TerminalConfig)
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.forces, other.forces))


@dataclass(frozen=True, eq=False)
class Web:
    """Nodes with roles (terminal index or ``INTERNAL``) joined by straight wires.

    ``edges`` is an (E, 2) integer array with ``i < j`` in every row.
    """

    nodes: np.ndarray
    roles: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.nodes, dtype=float)
        P = _as_matrix(raw, "nodes") if raw.ndim == 2 else np.zeros((0, 2))
        roles = np.array(self.roles, dtype=int).reshape(-1)
        E = np.array(self.edges, dtype=int).reshape(-1, 2)
        if len(roles) != len(P):
            raise ConfigError("one role per node required")
        if len(E):
            if E.min() < 0 or E.max() >= len(P):
                raise ConfigError("edge endpoint out of range")
            if np.any(E[:, 0] >= E[:, 1]):
                raise ConfigError("edges must satisfy i < j")
            if len({tuple(e) for e in E}) != len(E):
                raise ConfigError("duplicate edges")
            if np.any(np.linalg.norm(P[E[:, 1]] - P[E[:, 0]], axis=1) <= DEFAULT_TOL.tol_geom):
                raise ConfigError("zero-length edge")
        term = roles[roles != INTERNAL]
        if np.any(term < 0) or len(set(term.tolist())) != len(term):
            raise ConfigError("terminal roles must be distinct nonnegative indices")
        for name, arr in (("nodes", P), ("roles", roles), ("edges", E)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def build(cls, nodes, roles, edges) -> "Web":
        """Like the constructor but accepts edges in either orientation."""
        E = np.array(edges, dtype=int).reshape(-1, 2)
        E = np.sort(E, axis=1)
        return cls(np.asarray(nodes, dtype=float), roles, E)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def terminal_node(self, k: int) -> int:
        idx = np.flatnonzero(self.roles == k)
        if len(idx) != 1:
            raise ConfigError(f"terminal {k} not present exactly once")
        return int(idx[0])

    def terminal_nodes(self) -> dict[int, int]:
        return {int(r): i for i, r in enumerate(self.roles) if r != INTERNAL}

    def lengths(self) -> np.ndarray:
        if not len(self.edges):
            return np.zeros(0)
        return np.linalg.norm(self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]], axis=1)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.reshape(-1), minlength=len(self.nodes))

    def internal_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.roles == INTERNAL)

    def check_matches(self, cfg: TerminalConfig) -> None:
        if self.dim != cfg.dim:
            raise ConfigError("web and configuration dimensions differ")
        tn = self.terminal_nodes()
        if sorted(tn) != list(range(cfg.n)):
            raise ConfigError("web terminal roles do not match the configuration")
        for k, i in tn.items():
            if np.linalg.norm(self.nodes[i] - cfg.positions[k]) > 1e3 * DEFAULT_TOL.tol_geom * (1 + np.abs(cfg.positions).max()):
                raise ConfigError(f"terminal {k} is not at its configured position")

    def __eq__(self, other):
        return (isinstance(other, Web) and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.roles, other.roles) and np.array_equal(self.edges, other.edges))


def min_pair_distance(X: np.ndarray) -> float:
    X = np.asarray(X, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):      # distances beyond float range count as infinite
        dist = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
    iu = np.triu_indices(len(X), 1)
    return float(dist[iu].min()) if len(iu[0]) else np.inf


def pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


# ---------------------------------------------------------------- balance

def balance_operator(X: np.ndarray) -> np.ndarray:
    """Rows map a flattened loading to (force sum, antisymmetric moment sum)."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    rows = []
    for a in range(d):
        r = np.zeros((n, d))
        r[:, a] = 1.0
        rows.append(r.ravel())
    for p, q in combinations(range(d), 2):
        r = np.zeros((n, d))
        # component (p,q) of sum f (x) x - x (x) f
        r[:, p] = X[:, q]
        r[:, q] = -X[:, p]
        rows.append(r.ravel())
    return np.array(rows)


def is_balanced(cfg: TerminalConfig, tol: float = DEFAULT_TOL.tol_eq) -> bool:
    """True iff the forces have zero resultant and zero moment."""
    scale = max(float(np.abs(cfg.forces).max()), 1e-300)
    r = balance_operator(cfg.positions) @ cfg.forces.ravel()
    return bool(np.all(np.abs(r) <= tol * scale * max(1.0, np.abs(cfg.positions).max())))


def rigid_motion_basis(X) -> np.ndarray:
    """Orthonormal basis of infinitesimal rigid motions u_i = a + A x_i, as rows (k, N*d).

    Directions that vanish on degenerate point sets are dropped.
    """
    X = np.asarray(getattr(X, "positions", X), dtype=float)
    raw = balance_operator(X)
    # The rows of the balance operator are exactly the rigid motions paired with loads.
    U, s, Vt = np.linalg.svd(raw, full_matrices=False)
    keep = s > 1e-10 * max(1.0, s.max(initial=0.0))
    return Vt[keep]


def balanced_basis(X) -> np.ndarray:
    """Orthonormal basis (rows) of the balanced-loading subspace."""
    X = np.asarray(getattr(X, "positions", X), dtype=float)
    R = rigid_motion_basis(X)
    n = X.size
    Q, _ = np.linalg.qr(np.vstack([R, np.identity(n)]).T)
    return Q[:, len(R):n].T


def project_balanced(v, X):
    """Orthogonal projection of a loading or displacement onto the balanced subspace."""
    X = np.asarray(getattr(X, "positions", X), dtype=float)
    v = np.asarray(v, dtype=float)
    R = rigid_motion_basis(X)
    flat = v.ravel()
    return (flat - R.T @ (R @ flat)).reshape(v.shape)


# ------------------------------------------------------------ equilibrium

def equilibrium_matrix(web: Web) -> np.ndarray:
    """(M*d, E) matrix whose product with tensions gives wire pull at each node."""
    M, d = web.nodes.shape
    A = np.zeros((M * d, web.n_edges))
    for e, (a, b) in enumerate(web.edges):
        u = web.nodes[b] - web.nodes[a]
        u = u / np.linalg.norm(u)
        A[a * d:(a + 1) * d, e] = u
        A[b * d:(b + 1) * d, e] = -u
    return A


def applied_forces(web: Web, cfg: TerminalConfig) -> np.ndarray:
    F = np.zeros_like(web.nodes)
    for k, i in web.terminal_nodes().items():
        F[i] = cfg.forces[k]
    return F


def node_residuals(web: Web, tensions, cfg: TerminalConfig) -> np.ndarray:
    t = np.asarray(tensions, dtype=float).reshape(-1)
    if len(t) != web.n_edges:
        raise ConfigError(f"{len(t)} tensions for {web.n_edges} edges")
    web.check_matches(cfg)
    R = applied_forces(web, cfg).ravel() + equilibrium_matrix(web) @ t
    return np.linalg.norm(R.reshape(web.nodes.shape), axis=1)


def equilibrium_residual(web: Web, tensions, cfg: TerminalConfig) -> float:
    """Largest net force over all nodes (applied force plus wire pulls)."""
    r = node_residuals(web, tensions, cfg)
    return float(r.max(initial=0.0))


def supports(web: Web, tensions, cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL) -> bool:
    t = np.asarray(tensions, dtype=float)
    return bool(np.all(t >= -tol.tol_feas) and equilibrium_residual(web, t, cfg) <= tol.tol_eq)


# --------------------------------------------------------------- geometry

def affine_frame(points, tol: float = DEFAULT_TOL.tol_geom):
    """Return (origin, basis) with orthonormal basis rows spanning the affine hull."""
    P = np.asarray(points, dtype=float)
    origin = P.mean(axis=0)
    if len(P) < 2:
        return origin, np.zeros((0, P.shape[1]))
    _, s, Vt = np.linalg.svd(P - origin, full_matrices=False)
    scale = max(1.0, float(np.abs(P).max()))
    return origin, Vt[s > tol * scale * 10]


def signed_area(poly) -> float:
    P = np.asarray(poly, dtype=float)
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def cross2(a, b):
    """z-component of the planar cross product (works on stacked rows)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def hull_2d(points, tol: float = 0.0) -> list[int]:
    """Indices of strict hull vertices in clockwise order (monotone chain)."""
    P = np.asarray(points, dtype=float)
    order = sorted(range(len(P)), key=lambda i: (P[i, 0], P[i, 1]))

    def chain(idx):
        out: list[int] = []
        for i in idx:
            while len(out) >= 2 and cross2(P[out[-1]] - P[out[-2]], P[i] - P[out[-2]]) <= tol:
                out.pop()
            out.append(i)
        return out

    lower = chain(order)
    upper = chain(order[::-1])
    ccw = lower[:-1] + upper[:-1]
    return ccw[::-1]


INSIDE, BOUNDARY, OUTSIDE = "inside", "boundary", "outside"


@dataclass
class Hull:
    """Convex hull of a point set, possibly lower-dimensional."""

    points: np.ndarray
    origin: np.ndarray
    frame: np.ndarray          # (k, d) orthonormal rows spanning the affine hull
    vertices: list[int]        # clockwise in 2D frames; sorted otherwise
    normals: np.ndarray        # facet inequalities in frame coordinates: n.y + off <= 0
    offsets: np.ndarray
    tol: float

    @property
    def dim(self) -> int:
        return len(self.frame)

    @property
    def degenerate(self) -> bool:
        return self.dim < self.points.shape[1]

    def classify(self, q) -> str:
        q = np.asarray(q, dtype=float)
        rel = q - self.origin
        y = self.frame @ rel
        off_span = np.linalg.norm(rel - self.frame.T @ y)
        if off_span > self.tol:
            return OUTSIDE
        if self.dim == 0:
            return BOUNDARY
        s = self.normals @ y + self.offsets
        worst = float(s.max())
        if worst > self.tol:
            return OUTSIDE
        if worst >= -self.tol:
            return BOUNDARY
        return INSIDE

    def distance_outside(self, q) -> float:
        """How far q lies outside the hull along the worst facet (<= 0 when inside)."""
        q = np.asarray(q, dtype=float)
        rel = q - self.origin
        y = self.frame @ rel
        off_span = float(np.linalg.norm(rel - self.frame.T @ y))
        if self.dim == 0:
            return off_span
        return max(off_span, float((self.normals @ y + self.offsets).max()))


def convex_hull(points, tol: float = DEFAULT_TOL.tol_geom) -> Hull:
    P = np.asarray(points, dtype=float)
    scale = max(1.0, float(np.abs(P).max()))
    origin, frame = affine_frame(P, tol)
    Y = (P - origin) @ frame.T
    k = len(frame)
    if k == 0:
        return Hull(P, origin, frame, [0], np.zeros((0, 0)), np.zeros(0), tol * scale)
    if k == 1:
        lo, hi = int(np.argmin(Y[:, 0])), int(np.argmax(Y[:, 0]))
        normals = np.array([[-1.0], [1.0]])
        offsets = np.array([Y[lo, 0], -Y[hi, 0]])
        return Hull(P, origin, frame, sorted({lo, hi}), normals, offsets, tol * scale)
    if k == 2:
        if P.shape[1] == 2:
            # keep the native orientation for planar input
            origin = np.zeros(2)
            frame = np.identity(2)
            Y = P.copy()
        verts = hull_2d(Y)
        normals, offsets = [], []
        for a, b in zip(verts, verts[1:] + verts[:1]):
            e = Y[b] - Y[a]
            # clockwise order: outward normal is the left-hand perpendicular
            nrm = np.array([-e[1], e[0]]) / np.linalg.norm(e)
            normals.append(nrm)
            offsets.append(-nrm @ Y[a])
        return Hull(P, origin, frame, verts, np.array(normals), np.array(offsets), tol * scale)
    try:
        ch = ConvexHull(P)
    except QhullError as exc:  # pragma: no cover - frame check should prevent this
        raise ConfigError("hull computation failed") from exc
    eq = ch.equations
    return Hull(P, np.zeros(3), np.identity(3), sorted(ch.vertices.tolist()),
                eq[:, :3], eq[:, 3], tol * scale)


def convex_hull_and_membership(points, queries, tol: float = DEFAULT_TOL.tol_geom):
    """Hull of ``points`` and an inside/boundary/outside label per query point."""
    hull = convex_hull(points, tol)
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    return hull, [hull.classify(q) for q in Q]


def strictly_inside_count(cfg: TerminalConfig, tol: float = DEFAULT_TOL.tol_geom) -> int:
    """Number of terminals strictly inside the hull of all terminals."""
    hull = convex_hull(cfg.positions, tol)
    return sum(hull.classify(x) == INSIDE for x in cfg.positions)


# ---------------------------------------------------------------- assembly

class WebBuilder:
    """Accumulates nodes (merged when coincident) and wires (tensions summed on repeats)."""

    def __init__(self, dim: int, merge_tol: float = DEFAULT_TOL.tol_geom):
        self.dim = dim
        self.merge_tol = merge_tol
        self.points: list[np.ndarray] = []
        self.roles: list[int] = []
        self.wires: dict[tuple[int, int], float] = {}

    @classmethod
    def from_web(cls, web: Web, tensions=None, merge_tol: float = DEFAULT_TOL.tol_geom) -> "WebBuilder":
        b = cls(web.dim, merge_tol)
        b.points = [p.copy() for p in web.nodes]
        b.roles = [int(r) for r in web.roles]
        t = np.zeros(web.n_edges) if tensions is None else np.asarray(tensions, dtype=float)
        for (i, j), v in zip(web.edges, t):
            b.wires[(int(i), int(j))] = float(v)
        return b

    def find(self, p) -> int | None:
        p = np.asarray(p, dtype=float)
        if not self.points:
            return None
        d = np.linalg.norm(np.array(self.points) - p, axis=1)
        k = int(np.argmin(d))
        return k if d[k] <= self.merge_tol * max(1.0, float(np.abs(p).max())) else None

    def add_node(self, p, role: int = INTERNAL) -> int:
        k = self.find(p)
        if k is None:
            self.points.append(np.array(p, dtype=float))
            self.roles.append(role)
            return len(self.points) - 1
        if role != INTERNAL:
            if self.roles[k] not in (INTERNAL, role):
                raise ConfigError("two terminals would coincide")
            self.roles[k] = role
        return k

    def add_wire(self, i: int, j: int, tension: float) -> None:
        if i == j:
            return
        key = (min(i, j), max(i, j))
        self.wires[key] = self.wires.get(key, 0.0) + float(tension)

    def remove_wire(self, i: int, j: int) -> float:
        return self.wires.pop((min(i, j), max(i, j)), 0.0)

    def neighbors(self, i: int) -> list[int]:
        return [b if a == i else a for (a, b) in self.wires if i in (a, b)]

    def build(self, drop_below: float | None = None) -> tuple[Web, np.ndarray]:
        """Materialize; wires at or below ``drop_below`` and orphaned internal nodes are removed."""
        wires = {k: v for k, v in self.wires.items() if drop_below is None or v > drop_below}
        used = {i for e in wires for i in e}
        keep = [i for i in range(len(self.points)) if self.roles[i] != INTERNAL or i in used]
        remap = {old: new for new, old in enumerate(keep)}
        nodes = np.array([self.points[i] for i in keep]).reshape(-1, self.dim)
        roles = [self.roles[i] for i in keep]
        keys = sorted((min(remap[a], remap[b]), max(remap[a], remap[b]), v) for (a, b), v in wires.items())
        edges = np.array([[a, b] for a, b, _ in keys], dtype=int).reshape(-1, 2)
        t = np.array([v for *_, v in keys], dtype=float)
        return Web(nodes, roles, edges), t


def is_connected(web: Web, tensions=None, tol: float = 0.0) -> bool:
    """Connectivity of the graph formed by wires carrying tension above ``tol``."""
    t = np.ones(web.n_edges) if tensions is None else np.asarray(tensions, dtype=float)
    active = web.edges[t > tol]
    nodes = set(active.reshape(-1).tolist())
    if not nodes:
        return False
    adj: dict[int, list[int]] = {}
    for a, b in active:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    start = next(iter(nodes))
    seen = {start}
    stack = [start]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen == nodes


def michell_cost(web: Web, tensions, cfg: TerminalConfig) -> tuple[float, float]:
    """Total tension times length, and its gap to the work of the loading on the positions."""
    t = np.asarray(tensions, dtype=float)
    cost = float(t @ web.lengths())
    work = float(np.einsum("ij,ij->", cfg.forces, cfg.positions))
    return cost, abs(cost - work)
