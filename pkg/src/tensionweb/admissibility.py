"""Admissibility of a loading: primal (pair decomposition) and dual (expansive displacements)."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import lp
from .core import (DEFAULT_TOL, ConfigError, TerminalConfig, Tolerances, affine_frame,
                   balance_operator, cross2, is_balanced, pairs)

INTERIOR_THRESHOLD = 1e-6
DEFAULT_T_GRID = (1e-2, 1e-3, 1e-4)
# dual minima closer to zero than this (relative) are re-decided in exact arithmetic
EXACT_BAND = 1e-7


class NotBalancedError(ValueError):
    pass


class InadmissibleError(ValueError):
    pass


@dataclass
class AdmissibilityReport:
    admissible: bool
    farkas_coefficients: dict[tuple[int, int], float] | None = None
    dual_margin: float | None = None
    violating_displacement: np.ndarray | None = None
    reduced: bool = False


@dataclass
class StuckReport:
    classification: str                 # interior_unstuck | boundary_unstuck | stuck | completely_stuck
    terminal: int | None = None         # witness k for completely_stuck
    t_grid: tuple = DEFAULT_T_GRID
    shifted_all: dict = field(default_factory=dict)      # t -> admissible at X - tF
    shifted_single: dict = field(default_factory=dict)   # (k, t) -> admissible with only x_k moved
    exact_used: bool = False

    @property
    def label(self) -> str:
        if self.classification == "completely_stuck":
            return f"completely_stuck({self.terminal})"
        return self.classification


def _require_balanced(cfg: TerminalConfig, tol: Tolerances):
    if not is_balanced(cfg, tol.tol_eq):
        raise NotBalancedError("loading is not balanced (nonzero resultant force or moment)")


def _scale(cfg: TerminalConfig) -> float:
    return max(1.0, float(np.abs(cfg.forces).max()))


def pair_matrix(X) -> np.ndarray:
    """Columns are the pair loadings F^(ij) (f_i = x_i - x_j, f_j = x_j - x_i), flattened."""
    X = np.asarray(X)
    n, d = X.shape
    P = pairs(n)
    A = np.zeros((n * d, len(P)), dtype=X.dtype)
    for col, (i, j) in enumerate(P):
        v = X[i] - X[j]
        A[i * d:(i + 1) * d, col] = v
        A[j * d:(j + 1) * d, col] = -v
    return A


# ----------------------------------------------------------------- primal

def farkas_decompose(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL):
    """Nonnegative pair coefficients reconstructing F, or None when F is not admissible.

    Among all decompositions the one maximizing the smallest coefficient is
    returned, so every pair that can carry tension does.
    """
    _require_balanced(cfg, tol)
    X, F = cfg.positions, cfg.forces
    A = pair_matrix(X)
    n_p = A.shape[1]
    b = F.ravel()
    Ar, br, r = lp.range_reduce(A, b)
    if np.abs(r).max() > tol.tol_feas * (1 + np.abs(b).max()):
        return None
    # variables (lambda, tau): max tau subject to A lambda = F, lambda_ij >= tau
    Aeq = np.hstack([Ar, np.zeros((Ar.shape[0], 1))])
    G = np.hstack([np.identity(n_p), -np.ones((n_p, 1))])
    c = np.zeros(n_p + 1)
    c[-1] = -1.0
    res = lp.solve(lp.LpProblem(c=c, A_eq=Aeq, b_eq=br, G=G, h=np.zeros(n_p)), tol=tol.tol_feas)
    if res.status != lp.OPTIMAL:
        return None
    lam = np.maximum(res.x[:n_p], 0.0)
    err = np.abs(A @ lam - b).max(initial=0.0)
    if err > tol.tol_feas * (1 + np.abs(b).max()):
        polished = lp._polish(A, b, lam, tol.tol_feas)
        if np.abs(A @ polished - b).max(initial=0.0) < err:
            lam = polished
    return {p: float(v) for p, v in zip(pairs(cfg.n), lam)}


def reconstruct(cfg: TerminalConfig, lam: dict) -> np.ndarray:
    F = np.zeros_like(cfg.forces)
    for (i, j), v in lam.items():
        F[i] += v * (cfg.positions[i] - cfg.positions[j])
        F[j] += v * (cfg.positions[j] - cfg.positions[i])
    return F


# ------------------------------------------------------------------- dual

@dataclass
class _Reduced:
    X: np.ndarray        # centered coordinates in the affine frame (N, k)
    F: np.ndarray        # in-frame force components (N, k)
    frame: np.ndarray    # (k, d)
    F_perp: np.ndarray   # force components off the span (N, d)

    @property
    def reduced(self) -> bool:
        return self.frame.shape[0] < self.frame.shape[1]


def _reduce(cfg: TerminalConfig, tol: Tolerances) -> _Reduced:
    _, frame = affine_frame(cfg.positions, tol.tol_geom)
    if len(frame) == cfg.dim:
        frame = np.identity(cfg.dim)
    X = (cfg.positions - cfg.positions.mean(axis=0)) @ frame.T
    F = cfg.forces @ frame.T
    return _Reduced(X, F, frame, cfg.forces - F @ frame)


def _dual_problem(X, F):
    """min F.U over U in B_X with expansive pair constraints and U.X = 1 (X centered)."""
    n, k = X.shape
    Bop = _balance_rows(X)
    P = pair_matrix(X)            # column (i,j) pairs U with (x_i-x_j).(u_i-u_j)
    c = F.ravel()
    Aeq = np.vstack([Bop, X.ravel()[None, :]])
    one = Fraction(1) if X.dtype == object else 1.0
    zero = Fraction(0) if X.dtype == object else 0.0
    beq = np.array([zero] * len(Bop) + [one], dtype=X.dtype)
    h = np.array([zero] * P.shape[1], dtype=X.dtype)
    lb = np.full(n * k, -np.inf)
    return lp.LpProblem(c=c, A_eq=Aeq, b_eq=beq, G=P.T, h=h, lb=lb)


def _balance_rows(X):
    if X.dtype != object:
        return balance_operator(X) if X.shape[1] > 0 else np.zeros((0, X.size))
    n, d = X.shape
    rows = []
    for a in range(d):
        r = np.full((n, d), Fraction(0), dtype=object)
        r[:, a] = Fraction(1)
        rows.append(r.ravel())
    for p in range(d):
        for q in range(p + 1, d):
            r = np.full((n, d), Fraction(0), dtype=object)
            r[:, p] = X[:, q]
            r[:, q] = -X[:, p]
            rows.append(r.ravel())
    return np.array(rows, dtype=object)


@dataclass
class DualResult:
    status: str               # "empty" (only U=0), "bounded", "unbounded"
    value: float              # minimum of F.U (-inf when unbounded)
    U: np.ndarray | None      # minimizer or ray, full coordinates (N, d)
    reduced: bool = False
    exact: bool = False


def dual_min(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL, exact: bool = False,
             exact_X=None) -> DualResult:
    """Minimize F.U over normalized expansive balanced displacements.

    In exact mode ``exact_X`` may supply rational positions to use in place of
    the (rounded) float ones.
    """
    red = _reduce(cfg, tol)
    scale = _scale(cfg)
    if np.abs(red.F_perp).max() > tol.tol_feas * scale:
        # forces leaving the span of the terminals: sliding perpendicular is expansive
        U = -red.F_perp
        U = U / max(np.linalg.norm(U), 1e-300)
        return DualResult("unbounded", -np.inf, U, reduced=True)
    if exact:
        if red.reduced:
            raise ValueError("exact dual requires a full-dimensional configuration")
        Xq = lp._to_fraction(cfg.positions if exact_X is None else exact_X)
        Xq = Xq - Xq.sum(axis=0) / cfg.n
        Fq = lp._to_fraction(cfg.forces)
        res = lp.solve(_dual_problem(Xq, Fq), exact=True)
    else:
        res = lp.solve(_dual_problem(red.X, red.F), tol=tol.tol_feas)
    n, k = red.X.shape
    if res.status == lp.INFEASIBLE:
        return DualResult("empty", np.inf, None, red.reduced, exact)
    if res.status == lp.UNBOUNDED:
        U = np.asarray(res.ray, dtype=float).reshape(n, k) @ red.frame
        return DualResult("unbounded", -np.inf, U, red.reduced, exact)
    U = np.asarray(res.x, dtype=float).reshape(n, k) @ red.frame
    value = res.objective
    return DualResult("bounded", value if exact else float(value), U, red.reduced, exact)


def dual_check(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL):
    """Decide admissibility from the displacement side.

    Returns ``(admissible, U)`` where ``U`` is the minimizing displacement (a
    descent ray when the minimum is unbounded) whenever F.U < 0.
    """
    _require_balanced(cfg, tol)
    r = dual_min(cfg, tol)
    if r.status == "empty":
        return True, None
    ok = r.value >= -tol.tol_feas * _scale(cfg)
    return bool(ok), (None if ok else r.U)


def interior_margin(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL) -> float:
    """Minimum of F.U over the normalized expansive cone; > 0 means strictly interior."""
    _require_balanced(cfg, tol)
    r = dual_min(cfg, tol)
    if r.status == "empty":
        return np.inf
    if r.value < -tol.tol_feas * _scale(cfg):
        raise InadmissibleError("loading is not admissible")
    return max(float(r.value), 0.0)


def check(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL) -> AdmissibilityReport:
    """Run both tests and assemble a report."""
    _require_balanced(cfg, tol)
    lam = farkas_decompose(cfg, tol)
    r = dual_min(cfg, tol)
    if lam is not None:
        margin = max(float(r.value), 0.0) if r.status == "bounded" else (np.inf if r.status == "empty" else None)
        return AdmissibilityReport(True, lam, margin, None, r.reduced)
    return AdmissibilityReport(False, None, None if r.status == "unbounded" else float(r.value), r.U, r.reduced)


def is_admissible(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL, exact_fallback: bool = True,
                  exact_X=None):
    """Admissibility decided robustly near the cone boundary.

    Returns ``(admissible, used_exact)``.  Double precision decides when the
    primal and dual agree and the dual minimum is clearly away from zero;
    otherwise the dual is re-solved over the rationals, where only the
    balanced part of F matters.
    """
    scale = _scale(cfg)
    try:
        lam_ok = _primal_feasible(cfg, tol)
        r = dual_min(cfg, tol)
    except lp.LpError:
        if not exact_fallback:
            raise
        lam_ok, r = None, None
    if r is not None:
        dual_ok = r.status == "empty" or r.value >= -tol.tol_feas * scale
        near = r.status == "bounded" and abs(r.value) <= EXACT_BAND * scale
        if (lam_ok == dual_ok and not near) or not exact_fallback or r.reduced:
            return bool(dual_ok), False
    ex = dual_min(cfg, tol, exact=True, exact_X=exact_X)
    return bool(ex.status == "empty" or ex.value >= 0), True


def _primal_feasible(cfg, tol):
    A = pair_matrix(cfg.positions)
    return lp.feasible_nonneg(A, cfg.forces.ravel(), tol=tol.tol_feas).feasible


# ------------------------------------------------------------ convex polygons

R_PERP = np.array([[0.0, 1.0], [-1.0, 0.0]])   # quarter turn clockwise


def _check_convex_clockwise(X, tol=1e-12):
    X = np.asarray(X, dtype=float)
    if X.shape[1] != 2:
        raise ConfigError("convex-polygon operations are planar")
    n = len(X)
    if n < 3:
        raise ConfigError("need at least three vertices")
    e = np.roll(X, -1, axis=0) - X
    turns = cross2(e, np.roll(e, -1, axis=0))
    scale = max(1.0, float(np.abs(X).max())) ** 2
    if np.any(turns >= -tol * scale):
        raise ConfigError("terminals are not a strictly convex clockwise polygon")
    angles = np.arctan2(turns, np.einsum("ij,ij->i", e, np.roll(e, -1, axis=0)))
    if not np.isclose(angles.sum(), -2 * np.pi, atol=1e-6):
        raise ConfigError("polygon winds more than once")


def clamshell(cfg: TerminalConfig, j: int, i: int) -> np.ndarray:
    """Clam-shell displacement: rotate vertices j..i-1 (cyclic, 0-based) about x_j.

    ``i`` may be given as ``j + N`` for the full cycle.
    """
    X = cfg.positions
    _check_convex_clockwise(X)
    n = cfg.n
    if not (0 <= j < n) or i == j or not (0 <= i <= j + n):
        raise ConfigError("need 0 <= j < N and a distinct end index")
    length = (i - j) % n or n
    U = np.zeros_like(X)
    for step in range(length):
        k = (j + step) % n
        U[k] = -R_PERP @ (X[k] - X[j])
    return U


def arc_torques(cfg: TerminalConfig) -> np.ndarray:
    """T[j, L] = sum over the L vertices starting at j of det(x_k - x_j, f_k)."""
    X, F = cfg.positions, cfg.forces
    n = cfg.n
    T = np.zeros((n, n + 1))
    for j in range(n):
        acc = 0.0
        for L in range(1, n + 1):
            k = (j + L - 1) % n
            acc += cross2(X[k] - X[j], F[k])
            T[j, L] = acc
    return T


def torque_criterion(cfg: TerminalConfig, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Every clockwise run of consecutive vertices has nonnegative torque about its first vertex."""
    _check_convex_clockwise(cfg.positions)
    T = arc_torques(cfg)
    scale = _scale(cfg) * max(1.0, float(np.abs(cfg.positions).max()))
    return bool(T[:, 1:cfg.n].min() >= -tol.tol_feas * scale)


# ------------------------------------------------------------------ stuck

def _shift(cfg, t, k=None):
    """Retract all terminals (or only terminal k) by t along their forces.

    Also returns the shifted positions computed over the rationals.
    """
    Xq = lp._to_fraction(cfg.positions)
    Fq = lp._to_fraction(cfg.forces)
    tq = Fraction(repr(t))
    if k is None:
        Xq = Xq - tq * Fq
    else:
        Xq[k] = Xq[k] - tq * Fq[k]
    X = cfg.positions.copy()
    if k is None:
        X = X - t * cfg.forces
    else:
        X[k] = X[k] - t * cfg.forces[k]
    return cfg.with_positions(X), Xq


def stuck_classify(cfg: TerminalConfig, t_grid=DEFAULT_T_GRID, tol: Tolerances = DEFAULT_TOL) -> StuckReport:
    """Grid test of whether retracting terminals along their forces keeps F admissible."""
    _require_balanced(cfg, tol)
    ok, used = is_admissible(cfg, tol)
    if not ok:
        raise InadmissibleError("loading is not admissible")
    rep = StuckReport("stuck", t_grid=tuple(t_grid), exact_used=used)
    for t in t_grid:
        shifted, Xq = _shift(cfg, t)
        ok, used = is_admissible(shifted, tol, exact_X=Xq)
        rep.shifted_all[t] = ok
        rep.exact_used |= used
    if all(rep.shifted_all.values()):
        r = dual_min(cfg, tol)
        interior = r.status == "empty" or r.value > INTERIOR_THRESHOLD
        rep.classification = "interior_unstuck" if interior else "boundary_unstuck"
        return rep
    for k in range(cfg.n):
        if not np.any(cfg.forces[k]):
            continue
        for t in t_grid:
            shifted, Xq = _shift(cfg, t, k)
            ok, used = is_admissible(shifted, tol, exact_X=Xq)
            rep.shifted_single[(k, t)] = ok
            rep.exact_used |= used
        if rep.classification == "stuck" and not any(rep.shifted_single[(k, t)] for t in t_grid):
            rep.classification = "completely_stuck"
            rep.terminal = k
    return rep
