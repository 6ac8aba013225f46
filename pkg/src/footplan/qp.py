"""Dual active-set solver for convex quadratic programs.

Solves

    min  0.5 x'Qx + c'x   s.t.   A_ub x <= b_ub,   A_eq x = b_eq

with the Goldfarb-Idnani method: start at the unconstrained minimizer and
add the most violated constraint at a time, taking dual steps that drop
blocking active constraints when necessary. Q only needs to be positive
semidefinite; a tiny ridge (orders of magnitude below every reported
tolerance) makes the factorization strictly convex.

The method needs no feasibility phase, detects infeasible systems, and
terminates finitely. All choices (violated constraint, blocking
constraint) break ties by lowest index, so runs are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalBreakdown
from . import simplex

_RIDGE = 1e-9
_TOL = 1e-9


@dataclass
class QpResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == simplex.OPTIMAL


def solve_quadratic(Q, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                    *, max_iter=None, trace=None) -> QpResult:
    with simplex.single_threaded_blas():
        return _solve_quadratic(Q, c, A_ub, b_ub, A_eq, b_eq,
                                max_iter=max_iter, trace=trace)


def _solve_quadratic(Q, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                     *, max_iter=None, trace=None) -> QpResult:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = len(c)
    Q = np.asarray(Q, dtype=float).reshape(n, n)
    A_ub = simplex._as_2d(A_ub, n)
    b_ub = simplex._as_1d(b_ub)
    A_eq = simplex._as_2d(A_eq, n)
    b_eq = simplex._as_1d(b_eq)
    meq = A_eq.shape[0]
    # Internal form C x >= d, equalities first.
    C = np.vstack([A_eq, -A_ub]) if (meq or len(b_ub)) else np.zeros((0, n))
    d = np.concatenate([b_eq, -b_ub])
    m = len(d)
    if max_iter is None:
        max_iter = 200 + 40 * (m + n)

    scale = max(1.0, np.abs(Q).max(initial=0.0))
    Greg = Q + (_RIDGE * scale) * np.eye(n)
    try:
        Ginv = np.linalg.inv(Greg)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("quadratic term is not factorizable") from exc

    x = -(Ginv @ c)
    active: list[int] = []
    u = np.zeros(0)
    sign = np.ones(m)  # equalities get re-oriented toward their violation
    tol = _TOL * max(1.0, np.abs(d).max(initial=0.0))

    def objective(v):
        return float(0.5 * v @ Q @ v + c @ v)

    iterations = 0
    while iterations < max_iter:
        iterations += 1
        s = C @ x - d
        s[:meq] = -np.abs(s[:meq])  # equalities violate in either direction
        for k in active:
            s[k] = 0.0
        worst = int(np.argmin(s))
        if s[worst] >= -tol:
            res = QpResult(simplex.OPTIMAL, x, objective(x), iterations)
            return res
        if worst < meq:
            sign[worst] = -1.0 if (C[worst] @ x - d[worst]) > 0 else 1.0
        npl = sign[worst] * C[worst]
        dpl = sign[worst] * d[worst]
        u_plus = 0.0

        # Inner loop: take primal/dual steps until `worst` becomes active.
        while True:
            if iterations >= max_iter:
                return QpResult(simplex.ITER_LIMIT, x, objective(x), iterations)
            gn = Ginv @ npl
            if active:
                N = C[active] * sign[active, None]
                M = N @ Ginv @ N.T
                rhs = N @ gn
                try:
                    r = np.linalg.solve(M, rhs)
                except np.linalg.LinAlgError:
                    r, *_ = np.linalg.lstsq(M, rhs, rcond=None)
                z = gn - Ginv @ (N.T @ r)
            else:
                r = np.zeros(0)
                z = gn
            # Dual blocking step over droppable (inequality) constraints.
            t1 = np.inf
            block = -1
            for idx, k in enumerate(active):
                if k >= meq and r[idx] > _TOL:
                    ratio = u[idx] / r[idx]
                    if ratio < t1 - 1e-12:
                        t1 = ratio
                        block = idx
            zn = float(z @ npl)
            t2 = np.inf
            if zn > _TOL:
                t2 = -float(npl @ x - dpl) / zn
            if not np.isfinite(t1) and not np.isfinite(t2):
                return QpResult(simplex.INFEASIBLE, None, np.nan, iterations)
            t = min(t1, t2)
            if np.isfinite(t2):
                x = x + t * z
            if len(u):
                u = u - t * r
            u_plus += t
            if t == t2 and np.isfinite(t2):
                active.append(worst)
                u = np.append(u, u_plus)
                break
            # Dual-only step: drop the blocking constraint and retry.
            dropped = active.pop(block)
            u = np.delete(u, block)
            if trace is not None:
                trace(f"qp it={iterations} drop={dropped}")
            iterations += 1
        if trace is not None:
            trace(f"qp it={iterations} add={worst} |W|={len(active)}")

    return QpResult(simplex.ITER_LIMIT, x, objective(x), iterations)
