"""Dense revised-simplex solver for linear programs.

Solves

    min  c'x   s.t.   A_ub x <= b_ub,   A_eq x = b_eq,   x_i >= 0 for flagged i

with a two-phase revised simplex on an explicit basis inverse. Free
variables are split into positive/negative parts internally; slack and
artificial columns are kept implicit (signed unit vectors) so the stored
working matrix stays m x n_structural.

Pivoting is deterministic: Dantzig pricing with lowest-index tie-breaks,
falling back to Bland's rule after a run of degenerate pivots. Identical
inputs therefore produce identical iterates and solutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import contextlib

import numpy as np

try:
    from scipy.linalg.blas import dger as _dger
except ImportError:  # pragma: no cover - scipy is a soft dependency here
    _dger = None

try:
    from threadpoolctl import threadpool_limits as _thread_limits
except ImportError:  # pragma: no cover
    _thread_limits = None

from .errors import NumericalBreakdown


def single_threaded_blas():
    """Pivot-sized BLAS calls lose badly to thread-pool churn; solvers run
    their hot loops under a one-thread limit when threadpoolctl is around."""
    if _thread_limits is None:
        return contextlib.nullcontext()
    return _thread_limits(limits=1, user_api="blas")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITER_LIMIT = "iter_limit"

_ENTER_TOL = 1e-9
_PIVOT_TOL = 1e-9
_DEGEN_TOL = 1e-11
_FEAS_TOL = 1e-8


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _as_2d(a, n):
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    return a


def _as_1d(b):
    if b is None:
        return np.zeros(0)
    return np.atleast_1d(np.asarray(b, dtype=float))


class _Simplex:
    """Working state for one solve: standard form, basis, basis inverse."""

    def __init__(self, c, A_ub, b_ub, A_eq, b_eq, nonneg, trace=None):
        n = len(c)
        A_ub = _as_2d(A_ub, n)
        A_eq = _as_2d(A_eq, n)
        b_ub = _as_1d(b_ub)
        b_eq = _as_1d(b_eq)
        if nonneg is None:
            nonneg = np.zeros(n, dtype=bool)
        nonneg = np.asarray(nonneg, dtype=bool)

        G = np.vstack([A_ub, A_eq]) if n else np.zeros((len(b_ub) + len(b_eq), 0))
        h = np.concatenate([b_ub, b_eq])
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
            raise NumericalBreakdown("non-finite coefficient in LP data")

        self.n_orig = n
        self.m_ub = len(b_ub)
        self.m = len(h)
        self.free_idx = np.flatnonzero(~nonneg)
        self.trace = trace

        # Structural columns: all variables as-is, then negated copies of the
        # free ones (x_free = x+ - x-).
        if len(self.free_idx):
            self.A = np.concatenate([G, -G[:, self.free_idx]], axis=1)
            self.c_struct = np.concatenate([np.asarray(c, dtype=float),
                                            -np.asarray(c, dtype=float)[self.free_idx]])
        else:
            self.A = G.copy()
            self.c_struct = np.asarray(c, dtype=float).copy()
        self.ns = self.A.shape[1]

        # Sign-normalize rows so the rhs is nonnegative; slack coefficients
        # for inequality rows become +/-1 accordingly.
        sign = np.where(h < 0.0, -1.0, 1.0)
        self.A *= sign[:, None]
        self.b = h * sign
        self.slack_sign = sign[: self.m_ub]

        # Column ids: [0, ns) structural, [ns, ns+m_ub) slacks, then one
        # artificial per row that cannot start with a basic slack.
        self.slack0 = self.ns
        self.art0 = self.ns + self.m_ub
        need_art = np.ones(self.m, dtype=bool)
        need_art[: self.m_ub] = self.slack_sign < 0.0
        self.art_rows = np.flatnonzero(need_art)
        self.n_art = len(self.art_rows)

        basis = np.empty(self.m, dtype=np.int64)
        basis[: self.m_ub] = self.slack0 + np.arange(self.m_ub)
        art_col = {int(r): self.art0 + k for k, r in enumerate(self.art_rows)}
        for r in self.art_rows:
            basis[r] = art_col[int(r)]
        self.basis = basis
        self.in_basis = np.zeros(self.art0 + self.n_art, dtype=bool)
        self.in_basis[self.basis] = True

        # Fortran order lets the rank-1 basis-inverse update run in place.
        self.Binv = np.asfortranarray(np.eye(self.m))
        self.xB = self.b.copy()
        self.iterations = 0
        self._since_refactor = 0

    # -- column access -------------------------------------------------

    def column(self, j: int) -> np.ndarray:
        if j < self.slack0:
            return self.A[:, j]
        col = np.zeros(self.m)
        if j < self.art0:
            r = j - self.slack0
            col[r] = self.slack_sign[r]
        else:
            col[self.art_rows[j - self.art0]] = 1.0
        return col

    def _refactor(self):
        B = np.empty((self.m, self.m))
        for k, j in enumerate(self.basis):
            B[:, k] = self.column(int(j))
        try:
            self.Binv = np.asfortranarray(np.linalg.inv(B))
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("singular basis during refactorization") from exc
        self.xB = self.Binv @ self.b
        np.clip(self.xB, 0.0, None, out=self.xB)
        self._since_refactor = 0

    # -- pricing -------------------------------------------------------

    def _reduced_costs(self, costs: np.ndarray, phase1: bool):
        """Reduced costs of structural + slack columns (artificials barred)."""
        cB = costs[self.basis]
        y = cB @ self.Binv
        r_struct = costs[: self.ns] - y @ self.A
        r_slack = costs[self.slack0: self.art0] - y[: self.m_ub] * self.slack_sign
        r = np.concatenate([r_struct, r_slack])
        r[self.in_basis[: self.art0]] = 0.0
        return r

    def _ratio_test(self, d: np.ndarray):
        """Leaving position for entering direction d; ties pick the smallest
        basic column id (Bland-compatible, deterministic)."""
        pos = np.flatnonzero(d > _PIVOT_TOL)
        if not len(pos):
            return -1, 0.0
        ratios = self.xB[pos] / d[pos]
        theta = ratios.min()
        ties = pos[ratios <= theta + 1e-12]
        leave = ties[np.argmin(self.basis[ties])]
        return int(leave), float(max(theta, 0.0))

    def _pivot(self, enter: int, leave_pos: int, d: np.ndarray, theta: float):
        self.xB -= theta * d
        self.xB[leave_pos] = theta
        np.clip(self.xB, 0.0, None, out=self.xB)
        old = int(self.basis[leave_pos])
        self.in_basis[old] = False
        self.basis[leave_pos] = enter
        self.in_basis[enter] = True
        # Eta update of the basis inverse (in-place rank-1 when BLAS allows).
        piv = d[leave_pos]
        row = self.Binv[leave_pos] / piv
        if _dger is not None and self.Binv.flags.f_contiguous:
            _dger(-1.0, d, row, a=self.Binv, overwrite_a=1)
        else:
            self.Binv -= np.outer(d, row)
        self.Binv[leave_pos] = row
        self._since_refactor += 1
        if self._since_refactor >= 400:
            self._refactor()

    def run(self, costs: np.ndarray, phase1: bool, max_iter: int, bland_after: int):
        """Iterate to optimality of `costs`; returns a status string."""
        degen_run = 0
        while True:
            if self.iterations >= max_iter:
                return ITER_LIMIT
            r = self._reduced_costs(costs, phase1)
            if degen_run >= bland_after:
                cand = np.flatnonzero(r < -_ENTER_TOL)
                if not len(cand):
                    return OPTIMAL
                enter = int(cand[0])
            else:
                enter = int(np.argmin(r))
                if r[enter] >= -_ENTER_TOL:
                    return OPTIMAL
            d = self.Binv @ self.column(enter)
            leave_pos, theta = self._ratio_test(d)
            if leave_pos < 0:
                return UNBOUNDED
            self._pivot(enter, leave_pos, d, theta)
            self.iterations += 1
            degen_run = degen_run + 1 if theta <= _DEGEN_TOL else 0
            if self.trace is not None:
                self.trace(f"pivot phase={1 if phase1 else 2} it={self.iterations} "
                           f"enter={enter} leave={leave_pos} theta={theta:.3e}")
            if not np.all(np.isfinite(self.xB)):
                raise NumericalBreakdown("non-finite basic solution")

    def drive_out_artificials(self, max_iter: int):
        """Pivot zero-valued artificial variables out of the basis when a
        structural/slack column with a nonzero tableau entry exists."""
        for pos in range(self.m):
            j = int(self.basis[pos])
            if j < self.art0:
                continue
            row = self.Binv[pos] @ self.A
            cand = np.flatnonzero((np.abs(row) > 1e-7) & ~self.in_basis[: self.ns])
            if not len(cand):
                continue  # redundant row; artificial stays basic at zero
            enter = int(cand[0])
            d = self.Binv @ self.column(enter)
            self._pivot(enter, pos, d, self.xB[pos] / d[pos] if abs(d[pos]) > _PIVOT_TOL else 0.0)
            self.iterations += 1
            if self.iterations >= max_iter:
                return

    def solution(self) -> np.ndarray:
        x_std = np.zeros(self.ns)
        struct = self.basis < self.ns
        x_std[self.basis[struct]] = self.xB[struct]
        x = x_std[: self.n_orig].copy()
        if len(self.free_idx):
            x[self.free_idx] -= x_std[self.n_orig:]
        return x


def solve_linear(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, nonneg=None,
                 *, max_iter=None, bland_after=50, trace=None) -> LpResult:
    """Minimize c'x subject to A_ub x <= b_ub, A_eq x = b_eq and sign flags.

    Returns an LpResult whose status is one of optimal / infeasible /
    unbounded / iter_limit. Infeasibility and unboundedness are data, not
    exceptions; numerical failures raise NumericalBreakdown.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    with single_threaded_blas():
        state = _Simplex(c, A_ub, b_ub, A_eq, b_eq, nonneg, trace=trace)
        if max_iter is None:
            max_iter = 200 + 60 * (state.m + state.ns)

        # Phase 1: minimize the artificial total.
        if state.n_art:
            costs1 = np.zeros(state.art0 + state.n_art)
            costs1[state.art0:] = 1.0
            status = state.run(costs1, True, max_iter, bland_after)
            if status == ITER_LIMIT:
                return LpResult(ITER_LIMIT, None, np.nan, state.iterations)
            art_total = float(costs1[state.basis] @ state.xB)
            if art_total > _FEAS_TOL * (1.0 + abs(state.b).max(initial=0.0)):
                return LpResult(INFEASIBLE, None, np.nan, state.iterations)
            state.drive_out_artificials(max_iter)

        costs2 = np.zeros(state.art0 + state.n_art)
        costs2[: state.ns] = state.c_struct
        costs2[state.art0:] = 0.0
        status = state.run(costs2, False, max_iter, bland_after)
        if status == UNBOUNDED:
            return LpResult(UNBOUNDED, None, -np.inf, state.iterations)
        if status == ITER_LIMIT:
            return LpResult(ITER_LIMIT, None, np.nan, state.iterations)
        x = state.solution()
        return LpResult(OPTIMAL, x, float(c @ x), state.iterations)


def feasible_point(A_ub=None, b_ub=None, A_eq=None, b_eq=None, n=None,
                   nonneg=None, **kw) -> np.ndarray | None:
    """Phase-1 helper: a vertex of the polyhedron, or None when empty."""
    if n is None:
        for a in (A_ub, A_eq):
            if a is not None:
                n = np.asarray(a).shape[-1]
                break
    res = solve_linear(np.zeros(n), A_ub, b_ub, A_eq, b_eq, nonneg, **kw)
    return res.x if res.optimal else None
