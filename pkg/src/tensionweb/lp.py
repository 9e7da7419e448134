"""Dense linear programming: two-phase revised simplex with Bland's rule.

Problems have the form

    minimize    c @ x
    subject to  A_eq @ x == b_eq
                G @ x >= h
                x >= lb            (entries of lb may be -inf)

Infeasible problems come back with a Farkas certificate and unbounded ones with
a recession ray.  The same code runs in double precision or, with
``exact=True``, over ``fractions.Fraction``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    """Raised on malformed problems or numerical breakdown."""


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    lb: np.ndarray | None = None

    def __post_init__(self):
        n = len(np.asarray(self.c))
        for M, v, name in ((self.A_eq, self.b_eq, "A_eq"), (self.G, self.h, "G")):
            if (M is None) != (v is None):
                raise LpError(f"{name} given without right-hand side (or vice versa)")
            if M is not None:
                M = np.asarray(M)
                if M.ndim != 2 or M.shape[1] != n or M.shape[0] != len(np.asarray(v)):
                    raise LpError(f"{name} has shape {M.shape}, incompatible with {n} variables")
        if self.lb is not None and len(np.asarray(self.lb)) != n:
            raise LpError("lb length does not match number of variables")

    @property
    def n(self) -> int:
        return len(np.asarray(self.c))

    def parts(self):
        """Return dense (c, A_eq, b_eq, G, h, lb) with empty blocks filled in."""
        n = self.n
        dt = _dtype_of(self.c, self.A_eq, self.b_eq, self.G, self.h)
        c = np.asarray(self.c, dtype=dt)
        A = np.zeros((0, n), dtype=dt) if self.A_eq is None else np.asarray(self.A_eq, dtype=dt)
        b = np.zeros(0, dtype=dt) if self.b_eq is None else np.asarray(self.b_eq, dtype=dt)
        G = np.zeros((0, n), dtype=dt) if self.G is None else np.asarray(self.G, dtype=dt)
        h = np.zeros(0, dtype=dt) if self.h is None else np.asarray(self.h, dtype=dt)
        lb = np.zeros(n, dtype=float) if self.lb is None else np.asarray(self.lb, dtype=float)
        if dt == float:
            for arr in (c, A, b, G, h):
                if not np.all(np.isfinite(arr)):
                    raise LpError("non-finite problem data")
        if np.any(np.isnan(lb)) or np.any(lb == np.inf):
            raise LpError("invalid lower bounds")
        return c, A, b, G, h, lb


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    objective: float | Fraction | None = None
    y_eq: np.ndarray | None = None
    y_ineq: np.ndarray | None = None
    # For infeasible problems (y_eq, y_ineq) is a Farkas certificate: y_ineq >= 0,
    # g = A_eq^T y_eq + G^T y_ineq is <= 0 on bounded variables and 0 on free
    # ones, and y_eq.b_eq + y_ineq.h - g.lb > 0.
    ray: np.ndarray | None = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def dual_objective(self):
        return self.info.get("dual_objective")


def _dtype_of(*arrays):
    for a in arrays:
        if a is not None and np.asarray(a).dtype == object:
            return object
    return float


def _to_fraction(a):
    a = np.asarray(a)
    out = np.empty(a.shape, dtype=object)
    flat = out.reshape(-1)
    for k, v in enumerate(a.reshape(-1)):
        flat[k] = v if isinstance(v, Fraction) else Fraction(repr(float(v))) if not isinstance(v, int) else Fraction(v)
    return out


def _exact_inverse(B):
    """Gauss-Jordan inverse over the rationals; None when singular."""
    m = B.shape[0]
    aug = np.empty((m, 2 * m), dtype=object)
    aug[:, :m] = B
    aug[:, m:] = _to_fraction(np.identity(m))
    for col in range(m):
        piv = next((r for r in range(col, m) if aug[r, col] != 0), None)
        if piv is None:
            return None
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] = aug[col] / aug[col, col]
        for r in range(m):
            if r != col and aug[r, col] != 0:
                aug[r] = aug[r] - aug[r, col] * aug[col]
    return aug[:, m:]


class _Tableau:
    """Revised simplex state on a standard-form problem A z = b, z >= 0."""

    def __init__(self, A, b, free, exact, pivot_tol, cost_tol, max_iter):
        self.A = A
        self.free = free
        self.b = b
        self.m, self.ncol = A.shape
        self.exact = exact
        self.ptol = 0 if exact else pivot_tol
        self.ctol = 0 if exact else cost_tol
        self.max_iter = max_iter
        self.iterations = 0
        self.since_refactor = 0
        if exact:
            self.cols = [A[:, j] for j in range(self.ncol)]
        else:
            self.colnorm = np.abs(A).max(axis=0) if self.m else np.zeros(self.ncol)

    def start_with_artificials(self):
        # the last m columns of A are the artificial identity block
        self.basis = list(range(self.ncol - self.m, self.ncol))
        self.Binv = np.identity(self.m, dtype=object if self.exact else float)
        if self.exact:
            self.Binv = _to_fraction(self.Binv)
        self.xB = self.b.copy()

    def start_with_basis(self, basis) -> bool:
        """Exact mode: adopt a basis found elsewhere if it is primal feasible."""
        Binv = _exact_inverse(self.A[:, basis])
        if Binv is None:
            return False
        xB = Binv @ self.b
        if any(v < 0 and not self.free[j] for v, j in zip(xB, basis)):
            return False
        self.basis, self.Binv, self.xB = list(basis), Binv, xB
        return True

    def refactor(self):
        if self.exact or self.m == 0:
            return
        B = self.A[:, self.basis]
        try:
            cond = np.linalg.cond(B)
        except np.linalg.LinAlgError as exc:
            raise LpError("basis factorization failed") from exc
        if not np.isfinite(cond) or cond > 1e13:
            raise LpError(f"ill-conditioned basis (cond={cond:.3g})")
        self.Binv = np.linalg.inv(B)
        self.xB = self.Binv @ self.b
        # clip roundoff below zero; true negatives would mean breakdown
        bounded = ~self.free[self.basis]
        if np.any(self.xB[bounded] < -1e-7 * (1 + np.abs(self.b).max(initial=0))):
            raise LpError("basic solution lost feasibility after refactorization")
        self._clip()
        self.since_refactor = 0

    def duals(self, cost):
        cB = cost[self.basis]
        return cB @ self.Binv if self.m else np.zeros(0, dtype=cost.dtype)

    def _clip(self):
        bounded = ~self.free[self.basis]
        self.xB[bounded] = np.maximum(self.xB[bounded], 0.0)

    def run(self, cost, allowed, bounded=False):
        """Iterate to optimality.

        Returns (OPTIMAL, duals) or (UNBOUNDED, (column, direction sign, w)).
        With ``bounded=True`` the objective is known to be bounded below, so a
        column without a ratio-test row is roundoff and is skipped.  Free
        columns may enter in either direction and never leave the basis.
        """
        skip: set[int] = set()
        while True:
            if self.iterations >= self.max_iter:
                raise LpError("simplex iteration limit reached")
            y = self.duals(cost)
            in_basis = np.zeros(self.ncol, dtype=bool)
            in_basis[self.basis] = True
            enter, sgn = -1, 1
            if self.exact:
                # Bland only needs the first improving column, so price lazily
                for j in range(self.ncol):
                    if not allowed[j] or in_basis[j]:
                        continue
                    dj = cost[j] - y @ self.cols[j]
                    if dj < 0 or (dj > 0 and self.free[j]):
                        enter, sgn = j, (1 if dj < 0 else -1)
                        break
            else:
                d = cost - self.A.T @ y if self.m else cost.copy()
                ymag = float(np.abs(y).max(initial=0.0))
                thresh = self.ctol * (1.0 + np.abs(cost) + ymag * self.colnorm)
                for j in range(self.ncol):
                    if not allowed[j] or in_basis[j] or j in skip:
                        continue
                    if d[j] < -thresh[j] or (self.free[j] and d[j] > thresh[j]):
                        enter, sgn = j, (1 if d[j] < 0 else -1)
                        break
            if enter < 0:
                return OPTIMAL, y
            w = self.Binv @ self.A[:, enter]
            leave = -1
            best = None
            for r in range(self.m):
                if self.free[self.basis[r]]:
                    continue
                wr = w[r] if sgn > 0 else -w[r]
                if wr > self.ptol:
                    ratio = self.xB[r] / wr
                    if (best is None or ratio < best
                            or (ratio == best and self.basis[r] < self.basis[leave])):
                        best, leave = ratio, r
            if leave < 0:
                if bounded and not self.exact:
                    skip.add(enter)
                    continue
                return UNBOUNDED, (enter, sgn, w)
            skip.clear()
            self.pivot(leave, enter, w, sgn)

    def pivot(self, r, enter, w, sgn=1):
        piv = w[r]
        row = self.Binv[r] / piv
        self.Binv = self.Binv - np.outer(w, row)
        self.Binv[r] = row
        theta = self.xB[r] / piv          # signed step of the entering variable
        self.xB = self.xB - w * theta
        self.xB[r] = theta
        self.basis[r] = enter
        if not self.exact:
            self._clip()
        self.iterations += 1
        self.since_refactor += 1
        if self.since_refactor >= 40:
            self.refactor()


def solve(p: LpProblem, exact: bool = False, tol: float = 1e-9, max_iter: int | None = None,
          warm_start: bool = True) -> LpResult:
    """Solve ``p``.  ``tol`` is the feasibility tolerance used in float mode.

    In exact mode the final basis of a double-precision solve is tried first
    (when ``warm_start``); the rational simplex then only has to certify it or
    take the few remaining pivots.
    """
    warm = None
    if exact and warm_start:
        fp = LpProblem(*(None if a is None else np.asarray(a, dtype=float)
                         for a in (p.c, p.A_eq, p.b_eq, p.G, p.h)), lb=p.lb)
        try:
            warm = solve(fp, tol=tol, max_iter=max_iter).info.get("basis")
        except LpError:
            warm = None
    c, A_eq, b_eq, G, h, lb = p.parts()
    n = p.n
    if exact:
        c, A_eq, b_eq, G, h = (_to_fraction(a) for a in (c, A_eq, b_eq, G, h))
    zero = Fraction(0) if exact else 0.0
    free = ~np.isfinite(lb)
    lb0_f = np.where(free, 0.0, lb)
    lb0 = _to_fraction(lb0_f) if exact else lb0_f

    # z = [x - lb (one per variable), s (one per G row)], artificials appended
    meq, mg = A_eq.shape[0], G.shape[0]
    m = meq + mg
    ncol_struct = n + mg
    dt = object if exact else float
    A_std = np.empty((m, ncol_struct + m), dtype=dt)
    A_std[:] = zero
    if meq:
        A_std[:meq, :n] = A_eq
    if mg:
        A_std[meq:, :n] = G
        for i in range(mg):
            A_std[meq + i, n + i] = Fraction(-1) if exact else -1.0
    b_std = np.concatenate([b_eq - A_eq @ lb0, h - G @ lb0]) if m else np.zeros(0, dtype=dt)
    sign = np.array([(-1 if v < 0 else 1) for v in b_std], dtype=int)
    for i in range(m):
        if sign[i] < 0:
            A_std[i, :ncol_struct] = -A_std[i, :ncol_struct]
            b_std[i] = -b_std[i]
    for i in range(m):
        A_std[i, ncol_struct + i] = Fraction(1) if exact else 1.0
    free_col = np.zeros(ncol_struct + m, dtype=bool)
    free_col[:n] = free
    if max_iter is None:
        max_iter = 50 * (m + ncol_struct) + 1000

    bscale = 1.0 + float(np.max(np.abs(np.asarray(b_std, dtype=float)), initial=0.0))
    tab = _Tableau(A_std, b_std, free_col, exact, pivot_tol=1e-9 if not exact else 0,
                   cost_tol=1e-12, max_iter=max_iter)
    tab.start_with_artificials()
    if warm is not None and len(warm) == m:
        tab.start_with_basis(warm)
    art = np.arange(ncol_struct, ncol_struct + m)

    # phase 1
    cost1 = np.empty(ncol_struct + m, dtype=dt)
    cost1[:] = zero
    cost1[art] = Fraction(1) if exact else 1.0
    allowed = np.ones(ncol_struct + m, dtype=bool)
    status, y1 = tab.run(cost1, allowed, bounded=True)
    assert status == OPTIMAL  # phase 1 is bounded below by zero
    infeas = sum((tab.xB[r] for r in range(m) if tab.basis[r] >= ncol_struct), zero)
    if (infeas > 0) if exact else (infeas > tol * bscale):
        y = y1 * sign
        y_eq, w = y[:meq], y[meq:]
        if not exact:
            w = np.maximum(w, 0.0)
        return LpResult(INFEASIBLE, y_eq=y_eq, y_ineq=w, iterations=tab.iterations,
                        info={"phase1_objective": infeas, "basis": list(tab.basis)})

    # drive artificials out of the basis where possible
    for r in range(m):
        if tab.basis[r] < ncol_struct:
            continue
        row = tab.Binv[r] @ A_std[:, :ncol_struct]
        cand = [j for j in range(ncol_struct)
                if j not in tab.basis and (row[j] != 0 if exact else abs(row[j]) > 1e-9)]
        if cand:
            j = cand[0]
            w = tab.Binv @ A_std[:, j]
            tab.pivot(r, j, w)

    # phase 2
    cost2 = np.empty(ncol_struct + m, dtype=dt)
    cost2[:] = zero
    cost2[:n] = c
    allowed = np.ones(ncol_struct + m, dtype=bool)
    allowed[art] = False
    status, y = tab.run(cost2, allowed)
    z = np.empty(ncol_struct + m, dtype=dt)
    z[:] = zero
    z[tab.basis] = tab.xB
    x = lb0 + z[:n]
    if status == UNBOUNDED:
        enter, sgn, wdir = y
        dz = np.empty(ncol_struct + m, dtype=dt)
        dz[:] = zero
        dz[tab.basis] = -wdir * sgn
        dz[enter] = sgn * (Fraction(1) if exact else 1.0)
        return LpResult(UNBOUNDED, x=x, ray=dz[:n], iterations=tab.iterations,
                        info={"basis": list(tab.basis)})
    y = y * sign
    y_eq, w = y[:meq], y[meq:]
    r = c - (A_eq.T @ y_eq if meq else zero) - (G.T @ w if mg else zero)
    obj = c @ x
    dual_obj = (b_eq @ y_eq if meq else zero) + (h @ w if mg else zero) + r @ lb0
    return LpResult(OPTIMAL, x=x, objective=obj, y_eq=y_eq, y_ineq=w,
                    iterations=tab.iterations, info={"dual_objective": dual_obj, "reduced_costs": r,
                                                     "basis": list(tab.basis)})


def certificate_check(p: LpProblem, res: LpResult) -> tuple[float, float]:
    """Return ``(sign_violation, margin)`` for an infeasibility certificate.

    The certificate is valid when the violation is ~0 and the margin is positive.
    """
    c, A, b, G, h, lb = p.parts()
    A, b, G, h = (np.asarray(v, dtype=float) for v in (A, b, G, h))
    y = np.asarray(res.y_eq, dtype=float)
    w = np.asarray(res.y_ineq, dtype=float)
    g = A.T @ y + G.T @ w
    free = ~np.isfinite(lb)
    viol = max(float(np.max(-w, initial=0.0)),
               float(np.max(g[~free], initial=0.0)),
               float(np.max(np.abs(g[free]), initial=0.0)))
    margin = float(y @ b + w @ h - g[~free] @ lb[~free])
    return viol, margin


@dataclass
class NonnegResult:
    feasible: bool
    x: np.ndarray | None = None
    # Farkas certificate when infeasible: A^T y >= 0 and b.y < 0
    certificate: np.ndarray | None = None


def range_reduce(A, b):
    """Replace A x = b by an equivalent system with independent rows.

    Returns ``(A_r, b_r, r)`` where ``r`` is the least-squares residual of b
    against the range of A; the reduced system is equivalent when r = 0.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    U, sv, _ = np.linalg.svd(A, full_matrices=False)
    keep = sv > 1e-12 * max(1.0, sv.max(initial=0.0))
    T = U[:, keep].T
    r = b - T.T @ (T @ b)
    return T @ A, T @ b, r


def feasible_nonneg(A, b, tol: float = 1e-9, exact: bool = False) -> NonnegResult:
    """Find x >= 0 with A x = b, or a certificate y with A^T y >= 0, b.y < 0."""
    A = np.atleast_2d(np.asarray(A, dtype=object if exact else float))
    b = np.asarray(b, dtype=object if exact else float).reshape(-1)
    if A.shape[0] != len(b):
        raise LpError("A and b have incompatible shapes")
    n = A.shape[1]
    if exact:
        res = solve(LpProblem(c=np.zeros(n), A_eq=A, b_eq=b), exact=True)
        if res.status == INFEASIBLE:
            return NonnegResult(False, certificate=-res.y_eq)
        return NonnegResult(True, x=res.x)
    bnorm = float(np.max(np.abs(b), initial=0.0))
    if n == 0:
        if bnorm <= tol:
            return NonnegResult(True, x=np.zeros(0))
        return NonnegResult(False, certificate=-b)
    Ar, br, r = range_reduce(A, b)
    if np.max(np.abs(r), initial=0.0) > tol * (1 + bnorm):
        # b has a component outside the range of A: -r is a certificate
        return NonnegResult(False, certificate=-r)
    res = solve(LpProblem(c=np.zeros(n), A_eq=Ar, b_eq=br), tol=tol)
    if res.status == INFEASIBLE:
        U, sv, _ = np.linalg.svd(A, full_matrices=False)
        keep = sv > 1e-12 * max(1.0, sv.max(initial=0.0))
        return NonnegResult(False, certificate=-(U[:, keep] @ res.y_eq))
    return NonnegResult(True, x=_polish(A, b, res.x, tol))


def _polish(A, b, x, tol):
    """Least-squares refinement on the support; kept only if it stays nonnegative and helps."""
    support = x > tol * 1e-3
    if not support.any():
        return x
    best = np.max(np.abs(A @ x - b), initial=0.0)
    xs, *_ = np.linalg.lstsq(A[:, support], b, rcond=None)
    if np.all(xs >= 0):
        cand = np.zeros_like(x)
        cand[support] = xs
        if np.max(np.abs(A @ cand - b), initial=0.0) < best:
            return cand
    return x


def farkas_dual_min(A, b, exact: bool = False, tol: float = 1e-9):
    """Minimize b.y over A^T y >= 0, -1 <= y <= 1.

    The minimum is negative exactly when A x = b has no nonnegative solution.
    Returns ``(min_value, y)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    m = A.shape[0]
    G = np.vstack([A.T, -np.identity(m)])
    h = np.concatenate([np.zeros(A.shape[1]), -np.ones(m)])
    res = solve(LpProblem(c=b, G=G, h=h, lb=-np.ones(m)), exact=exact, tol=tol)
    if res.status != OPTIMAL:
        raise LpError(f"bounded dual test returned {res.status}")
    return res.objective, res.x
