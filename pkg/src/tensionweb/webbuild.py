"""Web construction: pairwise and radial webs, stresses on fixed geometry, planar loops."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .core import (DEFAULT_TOL, INTERNAL, ConfigError, TerminalConfig, Tolerances, Web, WebBuilder,
                   applied_forces, cross2, equilibrium_matrix, equilibrium_residual,
                   michell_cost, pairs, signed_area, strictly_inside_count)
from .admissibility import farkas_decompose, reconstruct

__all__ = [
    "pairwise_web", "radial_closed_form", "radial_loading", "find_stress", "insert_crossing_nodes",
    "minimal_loops", "loop_bound", "simplify_loops", "michell_cost", "merge_pass_through", "Loop",
]


class PlanarityError(ValueError):
    pass


def pairwise_web(cfg: TerminalConfig, lam: dict | None = None, tol: Tolerances = DEFAULT_TOL):
    """Web joining terminals pairwise, with tension lambda_ij * |x_i - x_j| on each used pair."""
    if lam is None:
        lam = farkas_decompose(cfg, tol)
        if lam is None:
            raise ConfigError("loading is not admissible")
    scale = 1 + float(np.abs(cfg.forces).max())
    if any(v < -tol.tol_feas for v in lam.values()):
        raise ConfigError("negative pair coefficient")
    if np.abs(reconstruct(cfg, lam) - cfg.forces).max() > 1e3 * tol.tol_feas * scale:
        raise ConfigError("coefficients do not reconstruct the loading")
    edges, t = [], []
    for (i, j), v in sorted(lam.items()):
        if v > tol.tol_feas:
            edges.append((i, j))
            t.append(v * np.linalg.norm(cfg.positions[i] - cfg.positions[j]))
    web = Web(cfg.positions.copy(), np.arange(cfg.n), np.array(edges, dtype=int).reshape(-1, 2))
    return web, np.array(t)


def radial_loading(x0, X, c) -> TerminalConfig:
    """Forces c_i (x_i - x0) directed away from the centre x0."""
    X = np.asarray(X, dtype=float)
    c = np.asarray(c, dtype=float)
    return TerminalConfig(X, c[:, None] * (X - np.asarray(x0, dtype=float)))


def radial_closed_form(x0, X, c, tol: Tolerances = DEFAULT_TOL):
    """Radial (hub at x0) and pairwise webs for the loading f_i = c_i (x_i - x0).

    Returns ``((radial_web, radial_tensions), (pair_web, pair_tensions))``.  Pair
    tensions are |x_i - x_j| c_i c_j / sum(c); the radial wire to x_i carries |f_i|.
    """
    X = np.asarray(X, dtype=float)
    c = np.asarray(c, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if np.any(c <= 0):
        raise ConfigError("weights must be positive")
    scale = 1 + float(np.abs(X).max()) * float(c.max())
    if np.abs(c @ (X - x0)).max() > tol.tol_eq * scale:
        raise ConfigError("weights do not balance about the centre")
    n, d = X.shape

    b = WebBuilder(d, tol.tol_geom)
    for k in range(n):
        b.add_node(X[k], k)
    hub = b.add_node(x0)
    for k in range(n):
        b.add_wire(k, hub, c[k] * np.linalg.norm(X[k] - x0))
    radial = merge_pass_through(*b.build(drop_below=0.0), tol=tol)

    edges, t = [], []
    for i, j in pairs(n):
        edges.append((i, j))
        t.append(np.linalg.norm(X[i] - X[j]) * c[i] * c[j] / c.sum())
    pair = (Web(X.copy(), np.arange(n), np.array(edges).reshape(-1, 2)), np.array(t))
    return radial, pair


def merge_pass_through(web: Web, tensions, tol: Tolerances = DEFAULT_TOL):
    """Remove internal nodes where one straight wire simply passes through."""
    b = WebBuilder.from_web(web, tensions, tol.tol_geom)
    changed = True
    while changed:
        changed = False
        for v in range(len(b.points)):
            if b.roles[v] != INTERNAL:
                continue
            nb = b.neighbors(v)
            if len(nb) != 2:
                continue
            u, w = nb
            a = b.points[u] - b.points[v]
            c = b.points[w] - b.points[v]
            cosang = a @ c / (np.linalg.norm(a) * np.linalg.norm(c))
            if cosang > -1 + 1e-12:
                continue
            tu, tw = b.remove_wire(u, v), b.remove_wire(v, w)
            b.add_wire(u, w, 0.5 * (tu + tw))
            changed = True
    return b.build()


def find_stress(web: Web, cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL, certificate: bool = False):
    """Nonnegative tensions on ``web`` balancing the loading, or None if there are none.

    With ``certificate=True`` returns the underlying feasibility result instead,
    which carries a separating vector when infeasible.
    """
    web.check_matches(cfg)
    A = equilibrium_matrix(web)
    b = -applied_forces(web, cfg).ravel()
    res = lp.feasible_nonneg(A, b, tol=tol.tol_feas)
    if certificate:
        return res
    if not res.feasible:
        return None
    t = np.maximum(res.x, 0.0)
    if equilibrium_residual(web, t, cfg) > tol.tol_eq * (1 + float(np.abs(b).max(initial=0.0))):
        return None
    return t


# ------------------------------------------------------------- crossings

def _node_hits(P, E, P0, R, L, eps):
    D = P[None, :, :] - P0[:, None, :]                      # (E, V, d)
    s = np.einsum("evk,ek->ev", D, R) / (L * L)[:, None]
    dist = np.linalg.norm(D - s[:, :, None] * R[:, None, :], axis=2)
    lim = (eps / L)[:, None]
    hit = (dist <= eps) & (s > lim) & (s < 1 - lim)
    hit[np.arange(len(E)), E[:, 0]] = False
    hit[np.arange(len(E)), E[:, 1]] = False
    return hit


def _segment_crossings(P0, R, L, eps):
    """Interior crossing parameters (u1, u2) and masks for crossing and parallel pairs."""
    n = len(L)
    Q = P0[None, :, :] - P0[:, None, :]                      # q_j - p_i
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    a = np.einsum("ik,ik->i", R, R)[:, None]
    c = a.T
    d = np.einsum("ijk,ik->ij", Q, R)                        # R_i . Q_ij
    if R.shape[1] == 2:
        n_ij = cross2(R[:, None, :], R[None, :, :])
        denom = n_ij ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            u1 = cross2(Q, R[None, :, :]) / n_ij
            u2 = cross2(Q, R[:, None, :]) / n_ij
    else:
        n_ij = np.cross(R[:, None, :], R[None, :, :])
        denom = np.einsum("ijk,ijk->ij", n_ij, n_ij)
        with np.errstate(divide="ignore", invalid="ignore"):
            u1 = np.einsum("ijk,ijk->ij", np.cross(Q, R[None, :, :]), n_ij) / denom
            u2 = np.einsum("ijk,ijk->ij", np.cross(Q, R[:, None, :]), n_ij) / denom
    parallel = denom <= 1e-24 * a * c
    if R.shape[1] == 2:
        gap = np.zeros_like(u1)                              # non-parallel planar lines always meet
    else:
        with np.errstate(invalid="ignore"):
            X1 = P0[:, None, :] + u1[:, :, None] * R[:, None, :]
            X2 = P0[None, :, :] + u2[:, :, None] * R[None, :, :]
            gap = np.linalg.norm(X1 - X2, axis=2)
    l1 = (eps / L)[:, None]
    l2 = (eps / L)[None, :]
    cross = upper & ~parallel & (gap <= eps) & (u1 > l1) & (u1 < 1 - l1) & (u2 > l2) & (u2 < 1 - l2)
    # distance from P0_j to the line of wire i, for parallel pairs
    off = np.linalg.norm(Q - (d / a)[:, :, None] * R[:, None, :], axis=2)
    coline = upper & parallel & (off <= eps)
    return Q, u1, cross, coline


def insert_crossing_nodes(web: Web, tensions=None, tol: Tolerances = DEFAULT_TOL,
                          merge_overlaps: bool = False):
    """Split wires wherever they cross or pass through a node.

    Returns ``(web, tensions)``; each piece keeps the tension of its wire.
    In 3-d only wires that actually meet (within tolerance) are split.
    Collinear overlapping wires raise ``PlanarityError`` unless
    ``merge_overlaps`` is set, in which case shared pieces add their tensions.
    """
    t = np.zeros(web.n_edges) if tensions is None else np.asarray(tensions, dtype=float)
    P = web.nodes
    E = web.edges
    if not len(E):
        return web, t.copy()
    scale = max(1.0, float(np.abs(P).max(initial=0.0)))
    eps = tol.tol_geom * scale
    P0 = P[E[:, 0]]
    R = P[E[:, 1]] - P0
    L = np.linalg.norm(R, axis=1)
    splits: list[list[np.ndarray]] = [[] for _ in range(len(E))]
    for e, v in zip(*np.nonzero(_node_hits(P, E, P0, R, L, eps))):
        splits[e].append(P[v])
    Q, u1, cross, coline = _segment_crossings(P0, R, L, eps)
    for i, j in zip(*np.nonzero(cross)):
        x = P0[i] + u1[i, j] * R[i]
        splits[i].append(x)
        splits[j].append(x)
    for i, j in zip(*np.nonzero(coline)) if not merge_overlaps else ():
        t0 = Q[i, j] @ R[i] / L[i] ** 2
        t1 = (Q[i, j] + R[j]) @ R[i] / L[i] ** 2
        lo, hi = max(0.0, min(t0, t1)), min(1.0, max(t0, t1))
        if (hi - lo) * L[i] > eps:
            raise PlanarityError(f"wires {tuple(E[i])} and {tuple(E[j])} overlap")
    if not any(splits):
        return web, t.copy()
    bld = WebBuilder(web.dim, tol.tol_geom)
    for v in range(len(P)):
        bld.points.append(P[v].copy())
        bld.roles.append(int(web.roles[v]))
    for e, (a, b) in enumerate(E):
        pts = sorted(splits[e], key=lambda x: (x - P[a]) @ (P[b] - P[a]))
        chain = [int(a)] + [bld.add_node(x) for x in pts] + [int(b)]
        for u, v in zip(chain, chain[1:]):
            if u == v:
                continue
            if (min(u, v), max(u, v)) in bld.wires and not merge_overlaps:
                raise PlanarityError("overlapping wires after splitting")
            bld.add_wire(u, v, t[e])
    return bld.build()


def _check_planar(web: Web, tol: Tolerances):
    w2, _ = insert_crossing_nodes(web, None, tol)
    if len(w2.nodes) != len(web.nodes):
        raise PlanarityError("web has crossing wires; insert crossing nodes first")


# ----------------------------------------------------------------- faces

@dataclass
class Loop:
    nodes: list[int]          # boundary walk, counter-clockwise
    area: float
    simple: bool              # simple polygon with nothing inside it

    def polygon(self, web: Web) -> np.ndarray:
        return web.nodes[self.nodes]


def _faces(web: Web, active: np.ndarray):
    P = web.nodes
    adj: dict[int, list[int]] = {}
    for a, b in web.edges[active]:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    for v, nb in adj.items():
        nb.sort(key=lambda u: np.arctan2(*(P[u] - P[v])[::-1]))
    pos = {v: {u: k for k, u in enumerate(nb)} for v, nb in adj.items()}
    seen = set()
    faces = []
    for a, b in web.edges[active]:
        for start in ((int(a), int(b)), (int(b), int(a))):
            if start in seen:
                continue
            walk = []
            h = start
            while h not in seen:
                seen.add(h)
                walk.append(h[0])
                u, v = h
                nb = adj[v]
                w = nb[(pos[v][u] - 1) % len(nb)]
                h = (v, w)
            faces.append(walk)
    return faces


def _point_in_polygon(q, poly) -> bool:
    inside = False
    n = len(poly)
    for k in range(n):
        a, b = poly[k], poly[(k + 1) % n]
        if (a[1] > q[1]) != (b[1] > q[1]):
            x = a[0] + (q[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x > q[0]:
                inside = not inside
    return inside


def minimal_loops(web: Web, tensions=None, tol: Tolerances = DEFAULT_TOL, check_planar: bool = True) -> list[Loop]:
    """Bounded faces of a planar web (wires with zero tension are ignored)."""
    if web.dim != 2:
        raise ConfigError("loops are computed for planar webs")
    active = np.ones(web.n_edges, dtype=bool)
    if tensions is not None:
        active = np.asarray(tensions, dtype=float) > tol.tol_feas
    if check_planar:
        sub = Web(web.nodes, web.roles, web.edges[active])
        _check_planar(sub, tol)
    loops = []
    scale = max(1.0, float(np.abs(web.nodes).max(initial=0.0)))
    for walk in _faces(web, active):
        poly = web.nodes[walk]
        area = signed_area(poly)
        if area <= tol.tol_geom * scale * scale:
            continue
        simple = len(set(walk)) == len(walk)
        if simple:
            others = set(range(len(web.nodes))) - set(walk)
            used = set(web.edges[active].reshape(-1).tolist())
            simple = not any(_point_in_polygon(web.nodes[v], poly) for v in others if v in used)
        loops.append(Loop(walk, area, simple))
    return loops


def loop_bound(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL) -> int:
    """Number of terminals strictly inside the terminals' convex hull."""
    return strictly_inside_count(cfg, tol.tol_geom)


# ------------------------------------------------------- loop replacement

def _clip(poly, labels, n, c, label, eps):
    """Keep the part of a labelled convex polygon where n.x + c >= 0."""
    out_p, out_l = [], []
    m = len(poly)
    for k in range(m):
        P, Q = poly[k], poly[(k + 1) % m]
        fP, fQ = n @ P + c, n @ Q + c
        inP, inQ = fP >= -eps, fQ >= -eps
        if inP:
            out_p.append(P)
            out_l.append(labels[k])
            if not inQ:
                out_p.append(P + (Q - P) * (fP / (fP - fQ)))
                out_l.append(label)
        elif inQ:
            out_p.append(P + (Q - P) * (fP / (fP - fQ)))
            out_l.append(labels[k])
    # drop zero-length edges
    k = 0
    while len(out_p) > 1 and k < len(out_p):
        nxt = (k + 1) % len(out_p)
        if np.linalg.norm(out_p[k] - out_p[nxt]) <= eps:
            del out_p[k]
            del out_l[k]
        else:
            k += 1
    return out_p, out_l


def _merge_collinear_edges(poly, tensions, eps):
    V = [np.asarray(p, dtype=float) for p in poly]
    m = len(V)

    def straight(k):        # is vertex k a straight angle?
        a, b, c = V[k - 1], V[k], V[(k + 1) % m]
        return abs(cross2(b - a, c - b)) <= eps * np.linalg.norm(b - a) * np.linalg.norm(c - b)

    keep = [k for k in range(m) if not straight(k)]
    if len(keep) == m:
        return V, list(tensions), []
    pieces, tens = [], []
    for r, k in enumerate(keep):
        stop = keep[(r + 1) % len(keep)]
        run = [(k + i) % m for i in range((stop - k) % m or m)]
        low = min(tensions[e] for e in run)
        tens.append(low)
        pieces += [(V[e], V[(e + 1) % m], tensions[e] - low) for e in run if tensions[e] > low]
    return [V[k] for k in keep], tens, pieces


def open_web_for_loop(poly, tensions_on_edges, eps):
    """Replacement wires for a convex loop.

    ``poly`` lists the loop vertices counter-clockwise and edge k joins vertex k
    to vertex k+1 with tension ``tensions_on_edges[k]``.  The replacement is
    the crease pattern of max_k t_k <m_k, x - v_k> over the polygon, with m_k
    the outward unit normal of edge k; each crease carries the jump in slope.
    Returns a list of (point_a, point_b, tension).

    Runs of collinear edges are treated as one edge carrying the smallest
    tension of the run; the excess on each edge stays on that edge.
    """
    V, tens, pieces = _merge_collinear_edges(poly, tensions_on_edges, eps)
    m = len(V)
    normals, grads, consts = [], [], []
    for k in range(m):
        e = V[(k + 1) % m] - V[k]
        nk = np.array([e[1], -e[0]]) / np.linalg.norm(e)
        normals.append(nk)
        grads.append(tens[k] * nk)
        consts.append(-tens[k] * nk @ V[k])
    for k in range(m):
        region, labels = list(V), [("edge", j) for j in range(m)]
        for j in range(m):
            if j == k:
                continue
            g = grads[k] - grads[j]
            region, labels = _clip(region, labels, g, consts[k] - consts[j], ("vs", j), eps * (1 + np.linalg.norm(g)))
            if len(region) < 2:
                break
        nr = len(region)
        for idx in range(nr if nr > 2 else 0):
            kind, j = labels[idx]
            a, b = region[idx], region[(idx + 1) % nr]
            if np.linalg.norm(a - b) <= eps:
                continue
            if kind == "vs" and j > k:
                pieces.append((a, b, float(np.linalg.norm(grads[k] - grads[j]))))
            elif kind == "edge" and j != k:
                pieces.append((a, b, float(np.linalg.norm(grads[k] - grads[j]))))
    return pieces


def _loop_is_convex(poly, eps) -> bool:
    m = len(poly)
    for k in range(m):
        a, b, c = poly[k - 1], poly[k], poly[(k + 1) % m]
        if cross2(b - a, c - b) < -eps * np.linalg.norm(b - a) * np.linalg.norm(c - b):
            return False
    return True


def _replace_loop(web: Web, t: np.ndarray, loop: Loop, tol: Tolerances):
    P = web.nodes
    scale = max(1.0, float(np.abs(P).max()))
    eps = tol.tol_geom * scale
    walk = loop.nodes
    poly = P[walk]
    edge_index = {(int(a), int(b)): e for e, (a, b) in enumerate(web.edges)}
    te = []
    for k in range(len(walk)):
        a, b = walk[k], walk[(k + 1) % len(walk)]
        te.append(t[edge_index[(min(a, b), max(a, b))]])
    pieces = open_web_for_loop(poly, te, eps)
    bld = WebBuilder.from_web(web, t, tol.tol_geom)
    for k in range(len(walk)):
        bld.remove_wire(walk[k], walk[(k + 1) % len(walk)])
    for a, b, tension in pieces:
        bld.add_wire(bld.add_node(a), bld.add_node(b), tension)
    w2, t2 = bld.build(drop_below=tol.tol_feas * (1 + float(np.max(t, initial=0.0))))
    w2, t2 = insert_crossing_nodes(w2, t2, tol, merge_overlaps=True)
    return merge_pass_through(w2, t2, tol)


def simplify_loops(web: Web, tensions, cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL):
    """Replace convex minimal loops by open webs, smallest area first.

    Every accepted step keeps the loading supported and strictly lowers the
    loop count; a replacement failing either check is skipped.
    """
    t = np.asarray(tensions, dtype=float)
    if equilibrium_residual(web, t, cfg) > tol.tol_eq * (1 + float(np.abs(cfg.forces).max())):
        raise ConfigError("tensions do not support the loading")
    b = WebBuilder.from_web(web, t, tol.tol_geom)
    web, t = b.build(drop_below=tol.tol_feas)
    web, t = insert_crossing_nodes(web, t, tol)
    loops = minimal_loops(web, t, tol, check_planar=False)
    cap = 10 * len(loops) + 10
    failed: set[frozenset] = set()
    res_tol = tol.tol_eq * (1 + float(np.abs(cfg.forces).max()))
    for _ in range(cap):
        scale = max(1.0, float(np.abs(web.nodes).max()))
        cand = [L for L in loops if L.simple
                and frozenset(map(tuple, np.round(L.polygon(web), 12))) not in failed
                and _loop_is_convex(L.polygon(web), 1e-9 * scale)]
        if not cand:
            break
        L = min(cand, key=lambda L: L.area)
        key = frozenset(map(tuple, np.round(L.polygon(web), 12)))
        try:
            w2, t2 = _replace_loop(web, t, L, tol)
            ok = (np.all(t2 >= -tol.tol_feas) and equilibrium_residual(w2, t2, cfg) <= res_tol)
            loops2 = minimal_loops(w2, t2, tol, check_planar=False) if ok else loops
            ok = ok and len(loops2) < len(loops)
        except (ConfigError, ValueError):
            ok = False
        if ok:
            web, t, loops = w2, t2, loops2
        else:
            failed.add(key)
    return web, t
