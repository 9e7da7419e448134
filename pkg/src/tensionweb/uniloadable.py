"""Webs that support exactly one loading ray, and superpositions of them."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import linprog, nnls

from .admissibility import (INTERIOR_THRESHOLD, InadmissibleError, farkas_decompose, interior_margin)
from .core import (DEFAULT_TOL, INTERNAL, ConfigError, TerminalConfig, Tolerances, Web, WebBuilder,
                   equilibrium_matrix, equilibrium_residual, is_connected, min_pair_distance,
                   project_balanced)
from .junctions import reduce_all
from .webbuild import PlanarityError, find_stress, insert_crossing_nodes, pairwise_web


class NotInteriorError(InadmissibleError):
    """The loading is admissible at best on the boundary of the cone."""


class PipelineError(RuntimeError):
    pass


def _force_scale(F) -> float:
    return max(1.0, float(np.abs(F).max()))


def require_interior(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL) -> float:
    try:
        m = interior_margin(cfg, tol)
    except InadmissibleError as exc:
        raise NotInteriorError(str(exc)) from None
    if not m > INTERIOR_THRESHOLD * _force_scale(cfg.forces):
        raise NotInteriorError(f"loading is on the boundary of the admissible cone (margin {m:.3g})")
    return m


def in_degenerate_set(F, tol: float = DEFAULT_TOL.tol_feas) -> bool:
    """True when some proper, nonempty group of the nonzero forces sums to zero."""
    F = np.asarray(F, dtype=float)
    scale = _force_scale(F)
    nz = [i for i in range(len(F)) if np.linalg.norm(F[i]) > tol * scale]
    n = len(nz)
    if n > 20:
        raise ConfigError("degenerate-set test is limited to 20 loaded terminals")
    for size in range(1, n // 2 + 1):
        for S in combinations(nz, size):
            if np.linalg.norm(F[list(S)].sum(axis=0)) <= tol * scale:
                return True
    return False


def loaded_terminals(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    norms = np.linalg.norm(cfg.forces, axis=1)
    return np.nonzero(norms > tol.tol_feas * _force_scale(cfg.forces))[0]


def unstuck_shift(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL, steps: int = 30) -> float:
    """A retraction size eps with F still strictly interior at X - eps F."""
    m = require_interior(cfg, tol)
    nz = loaded_terminals(cfg, tol)
    fmax = float(np.linalg.norm(cfg.forces, axis=1).max())
    eps = 0.1 * min_pair_distance(cfg.positions[nz]) / fmax
    for _ in range(steps):
        shifted = cfg.with_positions(cfg.positions - eps * cfg.forces)
        try:
            if interior_margin(shifted, tol) > 0.5 * m:
                return eps
        except InadmissibleError:
            pass
        eps /= 2
    raise PipelineError("no admissible retraction found")


def _sub_config(cfg: TerminalConfig, idx) -> TerminalConfig:
    return TerminalConfig(cfg.positions[idx], cfg.forces[idx])


def connected_support(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL, seed: int = 0,
                      attempts: int = 50):
    """A connected web with strictly positive tensions supporting an interior loading.

    Terminals without force are left out of the web (they stay as isolated
    terminal nodes).  Loadings in which a proper group of forces balances on its
    own are split as (F + G)/2 + (F - G)/2 with a small random balanced G.
    """
    m = require_interior(cfg, tol)
    nz = loaded_terminals(cfg, tol)
    sub = _sub_config(cfg, nz)
    rng = np.random.default_rng(seed)

    def assemble(lam):
        w, t = pairwise_web(sub, lam, tol)
        if not len(t) or not is_connected(w, t, tol.tol_feas) or t.min() <= tol.tol_feas:
            return None
        b = WebBuilder(cfg.dim, tol.tol_geom)
        for k in range(cfg.n):
            b.add_node(cfg.positions[k], k)
        for (i, j), v in zip(w.edges, t):
            b.add_wire(int(nz[i]), int(nz[j]), v)
        return b.build()

    if not in_degenerate_set(sub.forces, tol.tol_feas):
        lam = farkas_decompose(sub, tol)
        if lam is not None:
            out = assemble(lam)
            if out is not None:
                return out
    size = m / 4
    for k in range(attempts):
        if k and k % 10 == 0:
            size /= 2
        G = project_balanced(rng.normal(size=sub.forces.shape), sub.positions)
        G *= size / np.linalg.norm(G)
        plus, minus = sub.with_forces(sub.forces + G), sub.with_forces(sub.forces - G)
        if in_degenerate_set(plus.forces, tol.tol_feas) or in_degenerate_set(minus.forces, tol.tol_feas):
            continue
        lp_, lm = farkas_decompose(plus, tol), farkas_decompose(minus, tol)
        if lp_ is None or lm is None:
            continue
        lam = {key: 0.5 * (lp_.get(key, 0.0) + lm.get(key, 0.0)) for key in set(lp_) | set(lm)}
        out = assemble(lam)
        if out is not None:
            return out
    raise PipelineError("could not find a connected supporting web")


def _internal_rows(web: Web) -> np.ndarray:
    A = equilibrium_matrix(web)
    d = web.dim
    rows = [r for v in web.internal_nodes() for r in range(d * int(v), d * int(v) + d)]
    return A[rows]


def _split_rows(web: Web, tol: float = 1e-9):
    """Orthonormal bases of the balance row space and of its null space (as rows)."""
    A = _internal_rows(web)
    E = web.n_edges
    if not len(A):
        return np.zeros((0, E)), np.identity(E)
    _, sv, Vt = np.linalg.svd(A)
    rank = int(np.sum(sv > tol * max(A.shape) * sv[0]))
    return Vt[:rank], Vt[rank:]


def stress_space(web: Web, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (columns) of tensions balancing every internal node."""
    return _split_rows(web, tol)[1].T


def stress_range(web: Web):
    """Per-wire minimum and maximum tension over balanced, nonnegative, unit-sum stresses."""
    E = web.n_edges
    rows, _ = _split_rows(web)     # a row basis: redundant balance rows disagree slightly in floats
    Aeq = np.vstack([rows, np.ones((1, E))])
    beq = np.r_[np.zeros(len(rows)), 1.0]
    lo, hi = np.empty(E), np.empty(E)
    for e in range(E):
        c = np.zeros(E)
        c[e] = 1.0
        r1 = linprog(c, A_eq=Aeq, b_eq=beq, bounds=(0, None), method="highs")
        r2 = linprog(-c, A_eq=Aeq, b_eq=beq, bounds=(0, None), method="highs")
        if r1.status != 0 or r2.status != 0:
            return None
        lo[e], hi[e] = r1.fun, -r2.fun
    return lo, hi


def verify_uniloadable(web: Web, tol: Tolerances = DEFAULT_TOL, lp_check: bool = False) -> bool:
    """Whether balanced nonnegative stresses on ``web`` form a single ray with every wire taut."""
    if not web.n_edges or not is_connected(web):
        raise ConfigError("web is not connected")
    N = stress_space(web)
    ok = N.shape[1] == 1
    if ok:
        v = N[:, 0] * np.sign(N[:, 0].sum())
        v = v / v.sum()
        ok = bool(v.min() > tol.tol_feas)
    if lp_check:
        rng_ = stress_range(web)
        lp_ok = rng_ is not None and bool(np.all(rng_[1] - rng_[0] <= 1e-7)) and bool(rng_[0].min() > tol.tol_feas)
        if lp_ok != ok:
            raise PipelineError("nullspace and LP uniqueness checks disagree")
    return ok


def make_uniloadable(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL, seed: int = 0):
    """Web supporting the ray through an interior loading and no other loading.

    Every loaded terminal ends up joined by a single wire along its force, with
    tension equal to the force magnitude.  Returns ``(web, tensions)``.
    """
    eps = unstuck_shift(cfg, tol)
    nz = loaded_terminals(cfg, tol)
    Y = cfg.positions - eps * cfg.forces
    inner_cfg = cfg.with_positions(Y)
    inner, t_in = connected_support(inner_cfg, tol, seed)
    b = WebBuilder(cfg.dim, tol.tol_geom)
    for k in range(cfg.n):
        b.add_node(cfg.positions[k], k)
    loaded = set(nz.tolist())
    ids = []
    for v, p in enumerate(inner.nodes):
        if inner.roles[v] != INTERNAL and inner.roles[v] not in loaded:
            ids.append(None)        # unloaded terminal, left isolated
            continue
        k = b.find(p)
        if k is not None and b.roles[k] != INTERNAL:
            raise PipelineError("retracted node coincides with a terminal")
        ids.append(b.add_node(p))
    for (i, j), v in zip(inner.edges, t_in):
        b.add_wire(ids[i], ids[j], v)
    for k in nz:
        yi = ids[inner.terminal_node(int(k))]
        b.add_wire(int(k), yi, float(np.linalg.norm(cfg.forces[k])))
    web, t = b.build()
    try:
        web, t = insert_crossing_nodes(web, t, tol)
    except PlanarityError as exc:
        raise PipelineError(str(exc)) from None
    web, t = reduce_all(web, t, cfg, tol)
    res = equilibrium_residual(web, t, cfg)
    if res > 1e-8 * (1 + float(np.abs(cfg.forces).max())):
        raise PipelineError(f"uniloadable web out of balance (residual {res:.3g})")
    return web, t


def sample_off_ray(cfg: TerminalConfig, rng: np.random.Generator, min_angle: float = 1e-3) -> np.ndarray:
    """A random balanced loading at least ``min_angle`` radians away from the ray of F."""
    F = cfg.forces.ravel()
    u = F / np.linalg.norm(F)
    while True:
        G = project_balanced(rng.normal(size=cfg.forces.shape), cfg.positions).ravel()
        G /= np.linalg.norm(G)
        if np.arccos(np.clip(G @ u, -1.0, 1.0)) > min_angle:
            return G.reshape(cfg.forces.shape) * np.linalg.norm(F)


def count_supported_off_ray(web: Web, cfg: TerminalConfig, samples: int = 100, seed: int = 0,
                            tol: Tolerances = DEFAULT_TOL) -> int:
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(samples):
        G = sample_off_ray(cfg, rng)
        if find_stress(web, cfg.with_forces(G), tol) is not None:
            hits += 1
    return hits


# --------------------------------------------------------- cone synthesis

@dataclass
class ConeWeb:
    web: Web
    rays: np.ndarray          # (j, N, d) loadings actually used, after any perturbation
    stresses: np.ndarray      # (j, E) tensions supporting each ray on the combined web

    @property
    def tensions(self) -> np.ndarray:
        return self.stresses.sum(axis=0)


def _collinear_terminals(rays, tol=1e-9) -> list[tuple[int, int]]:
    """(ray index, terminal) pairs whose force is collinear with an earlier ray's force there."""
    bad = []
    j = len(rays)
    for m in range(j):
        for l in range(m):
            for i in range(rays.shape[1]):
                a, b = rays[m, i], rays[l, i]
                na, nb = np.linalg.norm(a), np.linalg.norm(b)
                if na == 0 or nb == 0:
                    continue
                if abs(a @ b) / (na * nb) > 1 - tol:
                    bad.append((m, i))
    return bad


def cone_synthesis(X, rays, tol: Tolerances = DEFAULT_TOL, seed: int = 0, attempts: int = 100) -> ConeWeb:
    """Superpose uniloadable webs, one per ray, into a web whose supported cone is their conic hull."""
    X = np.asarray(X, dtype=float)
    rays = np.array([np.asarray(F, dtype=float) for F in rays])
    if rays.ndim != 3 or rays.shape[1:] != X.shape:
        raise ConfigError("each ray must give one force per terminal")
    margins = [require_interior(TerminalConfig(X, F), tol) for F in rays]
    rng = np.random.default_rng(seed)
    for attempt in range(attempts):
        for m, _ in _collinear_terminals(rays):
            G = project_balanced(rng.normal(size=X.shape), X)
            rays[m] = rays[m] + G * (margins[m] / 8 / np.linalg.norm(G))
        if _collinear_terminals(rays):
            continue
        try:
            return _superpose(X, rays, tol, seed + attempt)
        except (PipelineError, PlanarityError, ConfigError):
            # coincident internal nodes or overlapping wires: perturb every ray slightly
            for m in range(len(rays)):
                G = project_balanced(rng.normal(size=X.shape), X)
                rays[m] = rays[m] + G * (margins[m] / 16 / np.linalg.norm(G))
    raise PipelineError("could not separate the component webs")


def _superpose(X, rays, tol: Tolerances, seed: int) -> ConeWeb:
    dim = X.shape[1]
    b = WebBuilder(dim, tol.tol_geom)
    for k in range(len(X)):
        b.add_node(X[k], k)
    parts = []
    for m, F in enumerate(rays):
        cfg = TerminalConfig(X, F)
        w, t = make_uniloadable(cfg, tol, seed + m)
        ids = []
        for v, p in enumerate(w.nodes):
            if w.roles[v] != INTERNAL:
                ids.append(int(w.roles[v]))
                continue
            if b.find(p) is not None:
                raise PipelineError("component webs share an internal node")
            ids.append(b.add_node(p))
        for (i, j), v in zip(w.edges, t):
            key = (min(ids[i], ids[j]), max(ids[i], ids[j]))
            if key in b.wires:
                raise PipelineError("component webs share a wire")
            b.add_wire(ids[i], ids[j], v)
        parts.append(cfg)
    web, _ = b.build()
    web, _ = insert_crossing_nodes(web, None, tol)
    stresses = []
    for cfg in parts:
        s = find_stress(web, cfg, tol)
        if s is None:
            raise PipelineError("combined web lost support for a ray")
        stresses.append(s)
    return ConeWeb(web, rays, np.array(stresses))


def decompose_over_rays(G, rays) -> tuple[np.ndarray, float]:
    """Nonnegative coefficients expressing G over the rays, and the residual norm."""
    A = np.array([np.asarray(F, dtype=float).ravel() for F in rays]).T
    coef, res = nnls(A, np.asarray(G, dtype=float).ravel())
    return coef, float(res)


__all__ = [
    "NotInteriorError", "PipelineError", "require_interior", "in_degenerate_set", "loaded_terminals",
    "unstuck_shift", "connected_support", "stress_space", "stress_range", "verify_uniloadable",
    "make_uniloadable", "sample_off_ray", "count_supported_off_ray", "ConeWeb", "cone_synthesis",
    "decompose_over_rays",
]
