"""Independent reference implementations used to pin expected values.

These deliberately avoid the package's solver code paths: LPs are checked
by basic-solution enumeration, QPs by an accelerated projected-gradient
method on the dual, steering profiles by direct numeric simulation.
"""

from __future__ import annotations

import itertools

import numpy as np


def lp_by_vertex_enumeration(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                             nonneg=None, tol=1e-8):
    """Exact bounded-LP solve: enumerate basic solutions of tight rows.

    Returns (status, x, objective) with status in {optimal, infeasible,
    unbounded-or-degenerate}. The caller is responsible for posing bounded
    problems; an optimum found here is a true optimum by exhaustion.
    """
    c = np.asarray(c, dtype=float)
    n = len(c)
    rows = []
    rhs = []
    kinds = []  # True = must be tight (equality)
    if A_eq is not None and len(np.atleast_2d(A_eq)):
        for a, b in zip(np.atleast_2d(A_eq), np.atleast_1d(b_eq)):
            rows.append(np.asarray(a, dtype=float))
            rhs.append(float(b))
            kinds.append(True)
    if A_ub is not None and len(np.atleast_2d(A_ub)):
        for a, b in zip(np.atleast_2d(A_ub), np.atleast_1d(b_ub)):
            rows.append(np.asarray(a, dtype=float))
            rhs.append(float(b))
            kinds.append(False)
    if nonneg is not None:
        for i in np.flatnonzero(np.asarray(nonneg, dtype=bool)):
            e = np.zeros(n)
            e[i] = -1.0
            rows.append(e)
            rhs.append(0.0)
            kinds.append(False)
    R = np.array(rows)
    r = np.array(rhs)
    eq_idx = [i for i, k in enumerate(kinds) if k]
    in_idx = [i for i, k in enumerate(kinds) if not k]
    need = n - len(eq_idx)
    if need < 0:
        eq_idx = eq_idx[:n]
        need = 0

    best_x, best_obj = None, np.inf
    feasible_found = False
    for combo in itertools.combinations(in_idx, need):
        sel = list(eq_idx) + list(combo)
        M = R[sel]
        if np.linalg.matrix_rank(M, tol=1e-10) < n:
            continue
        x = np.linalg.lstsq(M, r[sel], rcond=None)[0]
        if np.max(R[in_idx] @ x - r[in_idx], initial=0.0) > tol:
            continue
        if eq_idx and np.max(np.abs(R[eq_idx] @ x - r[eq_idx])) > tol:
            continue
        feasible_found = True
        obj = float(c @ x)
        if obj < best_obj - 1e-12:
            best_obj, best_x = obj, x
    if not feasible_found:
        return "infeasible", None, np.nan
    return "optimal", best_x, best_obj


def qp_by_dual_projection(Q, c, A_ub, b_ub, iters=200000, tol=1e-11):
    """Strictly convex QP via accelerated projected gradient on the dual.

    Only inequality constraints; equalities should be passed as row pairs.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_ub, dtype=float))
    b = np.atleast_1d(np.asarray(b_ub, dtype=float))
    Qi = np.linalg.inv(Q)
    H = A @ Qi @ A.T
    g = A @ Qi @ c + b
    L = float(np.linalg.eigvalsh(H).max())
    if L <= 0:
        lam = np.zeros(len(b))
    else:
        step = 1.0 / L
        lam = np.zeros(len(b))
        y = lam.copy()
        t = 1.0
        for _ in range(iters):
            grad = H @ y + g
            lam_next = np.maximum(y - step * grad, 0.0)
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = lam_next + ((t - 1.0) / t_next) * (lam_next - lam)
            if np.abs(lam_next - lam).max() < tol * (1.0 + np.abs(lam_next).max()):
                lam = lam_next
                break
            lam, t = lam_next, t_next
    x = -Qi @ (c + A.T @ lam)
    return x, float(0.5 * x @ Q @ x + c @ x)


def simulate_profile(pieces, x0, v0, dt=1e-5):
    """Numerically integrate a piecewise-constant-acceleration profile."""
    x, v = x0, v0
    vmax_seen, amax_seen = abs(v0), 0.0
    for dur, acc in pieces:
        steps = max(int(np.ceil(dur / dt)), 1)
        h = dur / steps
        for _ in range(steps):
            x += v * h + 0.5 * acc * h * h
            v += acc * h
            vmax_seen = max(vmax_seen, abs(v))
        amax_seen = max(amax_seen, abs(acc))
    return x, v, vmax_seen, amax_seen


def min_time_candidates_1d(dx, v0, v1, vmax, amax, grid=10000):
    """Exact feasible accelerate-cruise-decelerate profiles on a t1 grid.

    For each first-phase duration t1 the cruise and deceleration phases
    are solved in closed form to hit (dx, v1) exactly; every returned
    duration is achievable, so their minimum upper-bounds the true optimum.
    """
    times = []
    for sign in (1.0, -1.0):
        t1_max = (sign * vmax - v0) / (sign * amax)
        if t1_max < 0:
            continue
        for t1 in np.linspace(0.0, t1_max, grid):
            vp = v0 + sign * amax * t1
            t2 = (vp - v1) / (sign * amax)
            if t2 < 0:
                continue
            d1 = v0 * t1 + 0.5 * sign * amax * t1 * t1
            d2 = vp * t2 - 0.5 * sign * amax * t2 * t2
            rest = dx - d1 - d2
            if abs(vp) < 1e-12:
                if abs(rest) < 1e-12:
                    times.append(t1 + t2)
                continue
            tc = rest / vp
            if tc >= -1e-12:
                times.append(t1 + max(tc, 0.0) + t2)
    return times


def sample_polygon(surface, n, rng):
    """Uniform samples on a contact surface polygon (plane-frame rejection)."""
    o, U = surface.plane_frame()
    pts2 = (surface.vertices - o) @ U
    lo, hi = pts2.min(axis=0), pts2.max(axis=0)
    out = []
    while len(out) < n:
        cand = rng.uniform(lo, hi, size=(max(n, 64), 2))
        G = surface.halfspaces_A @ U
        h = surface.halfspaces_b - surface.halfspaces_A @ o
        ok = np.all(cand @ G.T <= h + 1e-12, axis=1)
        for p in cand[ok]:
            out.append(o + U @ p)
            if len(out) == n:
                break
    return np.array(out)
