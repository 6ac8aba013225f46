"""Instance-level solvers: LP/QP, branch-and-bound, and the L1 pipeline.

Branch-and-bound explores depth-first with a best-bound tiebreak,
branching on the most fractional selection variable (lowest column on
ties). Presolve, when enabled, fixes selections forced by cardinality,
eliminates candidates that no stride-compatible neighbor supports, and
tries to certify an integral optimum at the root by re-solving the
cheapest integral rounding of the root relaxation.

The L1 path solves the relaxed instance once, reads the per-step slack
sparsity pattern, and falls back to ordered enumeration of the undecided
steps, re-solving a fixed-selection LP per trial up to a trial budget.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from . import qp, simplex
from .errors import BigMTooSmall, InvalidParams, NumericalBreakdown
from .formulation import (MIP_FEAS, MIP_OPT, QP_REFINE, SL1M, ProblemInstance,
                          build_fixed_instance, build_instance)
from .geometry import frame_rotation

NODE_LIMIT = "node_limit"

SPARSITY_ZERO_TOL = 1e-6
INTEGRALITY_TOL = 1e-6


@dataclass
class SolveResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    feasibility_residual: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == simplex.OPTIMAL


@dataclass
class MipStats:
    node_count: int = 0
    incumbent_updates: int = 0
    presolve_enabled: bool = True
    fixed_by_presolve: int = 0
    root_integral: bool = False
    root_objective: float = np.nan
    presolve_ms: float = 0.0
    root_ms: float = 0.0
    nodes_ms: float = 0.0


@dataclass
class Sl1mOutcome:
    status: str                      # decided / fallback / infeasible / exhausted
    selection: tuple[int, ...] | None
    undecided: tuple[int, ...]
    trials_used: int
    fallback_exhausted: bool
    footsteps: np.ndarray | None
    x: np.ndarray | None
    objective: float
    objective_trace: tuple = ()

    @property
    def solved(self) -> bool:
        return self.selection is not None


# ---------------------------------------------------------------------------
# Instance reduction (fixing selection columns)


def _reduced_arrays(inst: ProblemInstance, fixings: dict[int, float]):
    """LP/QP arrays with fixed columns substituted out.

    Rows whose selection slack is fixed to 1 are dropped: the big-M term
    makes them vacuous over the working volume (checked post-hoc by the
    big-M margin diagnostic). Returns None when a row reduces to an
    unsatisfiable constant.
    """
    n = inst.n_vars
    keep = np.ones(n, dtype=bool)
    xfix = np.zeros(n)
    for col, val in fixings.items():
        keep[col] = False
        xfix[col] = val
    drop_ub = np.zeros(len(inst.b_ub), dtype=bool)
    for r, col in enumerate(inst.row_slack):
        if col >= 0 and not keep[col] and xfix[col] >= 0.5:
            drop_ub[r] = True
    A_ub = inst.A_ub[~drop_ub]
    b_ub = inst.b_ub[~drop_ub] - A_ub[:, ~keep] @ xfix[~keep]
    A_ub = A_ub[:, keep]
    A_eq = inst.A_eq
    b_eq = inst.b_eq - A_eq[:, ~keep] @ xfix[~keep]
    A_eq = A_eq[:, keep]

    zero_ub = ~np.any(A_ub, axis=1)
    if np.any(b_ub[zero_ub] < -1e-9):
        return None
    A_ub, b_ub = A_ub[~zero_ub], b_ub[~zero_ub]
    zero_eq = ~np.any(A_eq, axis=1)
    if np.any(np.abs(b_eq[zero_eq]) > 1e-9):
        return None
    A_eq, b_eq = A_eq[~zero_eq], b_eq[~zero_eq]

    cost = inst.cost[keep]
    shift = float(inst.cost[~keep] @ xfix[~keep])
    quad = None
    if inst.quad is not None:
        if np.any(inst.quad[~keep][:, ~keep]) or np.any(inst.quad[np.ix_(keep, ~keep)]):
            raise InvalidParams("fixed columns may not carry quadratic cost")
        quad = inst.quad[np.ix_(keep, keep)]
    return keep, xfix, A_ub, b_ub, A_eq, b_eq, inst.nonneg[keep], cost, quad, shift


def _lift(keep: np.ndarray, xfix: np.ndarray, x_red: np.ndarray) -> np.ndarray:
    x = xfix.copy()
    x[keep] = x_red
    return x


def _eliminate_free_singletons(A_ub, b_ub, A_eq, b_eq, nonneg, cost, quad):
    """Substitute out free zero-cost columns unique to one equality row.

    Plane-deviation variables (and the quadruped com xy coordinates) have
    exactly this shape; removing them strips most artificial variables
    from the simplex phase 1. Returns the reduced system plus a recovery
    recipe (column, equality row, coefficients) applied in reverse after
    the solve.
    """
    n = A_eq.shape[1]
    if not len(b_eq):
        return A_ub, b_ub, A_eq, b_eq, nonneg, cost, quad, [], np.ones(n, bool)
    col_eq_count = np.count_nonzero(A_eq, axis=0)
    quad_free = np.ones(n, bool) if quad is None else ~np.any(quad, axis=0)
    eligible = (~nonneg) & (cost == 0.0) & (col_eq_count == 1) & quad_free
    A_ub = A_ub.copy()
    b_ub = b_ub.copy()
    A_eq = A_eq.copy()
    b_eq = b_eq.copy()
    recovery = []
    dead_rows = np.zeros(len(b_eq), bool)
    dead_cols = np.zeros(n, bool)
    for r in range(len(b_eq)):
        if dead_rows[r]:
            continue
        cols = np.flatnonzero(A_eq[r])
        pick = -1
        for k in cols:
            if eligible[k] and not dead_cols[k] and abs(A_eq[r, k]) > 1e-9:
                pick = int(k)
                break
        if pick < 0:
            continue
        coef = A_eq[r, pick]
        row = A_eq[r].copy()
        rhs = b_eq[r]
        recovery.append((pick, row, rhs, coef))
        hit = np.flatnonzero(A_ub[:, pick])
        if len(hit):
            factor = A_ub[hit, pick] / coef
            A_ub[hit] -= factor[:, None] * row[None, :]
            b_ub[hit] -= factor * rhs
        dead_rows[r] = True
        dead_cols[pick] = True
    if not recovery:
        return A_ub, b_ub, A_eq, b_eq, nonneg, cost, quad, [], np.ones(n, bool)
    keep_cols = ~dead_cols
    A_ub = A_ub[:, keep_cols]
    A_eq = A_eq[~dead_rows][:, keep_cols]
    b_eq = b_eq[~dead_rows]
    quad_red = quad[np.ix_(keep_cols, keep_cols)] if quad is not None else None
    return (A_ub, b_ub, A_eq, b_eq, nonneg[keep_cols], cost[keep_cols],
            quad_red, recovery, keep_cols)


def _recover_eliminated(x_red, recovery, keep_cols):
    n = len(keep_cols)
    x = np.zeros(n)
    x[keep_cols] = x_red
    for pick, row, rhs, coef in reversed(recovery):
        others = row.copy()
        others[pick] = 0.0
        x[pick] = (rhs - others @ x) / coef
    return x


def instance_violations(inst: ProblemInstance, x: np.ndarray) -> tuple[float, float]:
    """(max inequality violation, max equality residual) of the full system."""
    ub = float(np.max(inst.A_ub @ x - inst.b_ub, initial=0.0)) if len(inst.b_ub) else 0.0
    eq = float(np.max(np.abs(inst.A_eq @ x - inst.b_eq), initial=0.0)) if len(inst.b_eq) else 0.0
    lb = float(np.max(-x[inst.nonneg], initial=0.0)) if inst.nonneg.any() else 0.0
    return max(ub, lb), eq


def _solve_relaxation(inst: ProblemInstance, fixings: dict[int, float],
                      trace=None) -> SolveResult:
    red = _reduced_arrays(inst, fixings)
    if red is None:
        return SolveResult(simplex.INFEASIBLE, None, np.nan, 0)
    keep, xfix, A_ub, b_ub, A_eq, b_eq, nonneg, cost, quad, shift = red
    (A_ub, b_ub, A_eq, b_eq, nonneg_r, cost_r, quad_r,
     recovery, keep_cols) = _eliminate_free_singletons(
        A_ub, b_ub, A_eq, b_eq, nonneg, cost, quad)
    if quad is None:
        res = simplex.solve_linear(cost_r, A_ub, b_ub, A_eq, b_eq, nonneg_r,
                                   trace=trace)
    else:
        rows_nn = np.flatnonzero(nonneg_r)
        n_red = len(cost_r)
        A2 = np.vstack([A_ub, -np.eye(n_red)[rows_nn]]) if len(rows_nn) else A_ub
        b2 = np.concatenate([b_ub, np.zeros(len(rows_nn))]) if len(rows_nn) else b_ub
        res = qp.solve_quadratic(quad_r, cost_r, A2, b2, A_eq, b_eq, trace=trace)
    if not res.optimal:
        return SolveResult(res.status, None, res.objective, res.iterations)
    x_red = _recover_eliminated(res.x, recovery, keep_cols)
    x = _lift(keep, xfix, x_red)
    return SolveResult(res.status, x, float(inst.objective_value(x)),
                       res.iterations)


def _with_residual(inst: ProblemInstance, res: SolveResult) -> SolveResult:
    if res.optimal and res.x is not None:
        ub, eq = instance_violations(inst, res.x)
        res.feasibility_residual = max(ub, eq)
        if res.feasibility_residual > 1e-7:
            raise NumericalBreakdown(
                f"solution violates constraints by {res.feasibility_residual:.2e}")
    return res


def solve_lp(inst: ProblemInstance, trace=None) -> SolveResult:
    """Linear-cost solve of an instance, ignoring any integrality mask."""
    if inst.quad is not None:
        raise InvalidParams("instance carries a quadratic cost; use solve_qp")
    return _with_residual(inst, _solve_relaxation(inst, {}, trace=trace))


def solve_qp(inst: ProblemInstance, trace=None) -> SolveResult:
    """Quadratic solve of an instance (PSD cost), no integrality."""
    if inst.quad is None:
        raise InvalidParams("instance has no quadratic cost; use solve_lp")
    return _with_residual(inst, _solve_relaxation(inst, {}, trace=trace))


# ---------------------------------------------------------------------------
# Big-M margin diagnostic


def big_m_margin_violations(inst: ProblemInstance, x: np.ndarray,
                            margin: float = 1e-3) -> list[int]:
    """Rows whose deactivated constraint is binding at (almost) exactly M."""
    bad = []
    if not len(inst.b_ub):
        return bad
    resid = inst.b_ub - inst.A_ub @ x
    for r, col in enumerate(inst.row_slack):
        if col >= 0 and x[col] >= 1.0 - margin and resid[r] <= margin:
            bad.append(r)
    return bad


def assert_big_m_margin(inst: ProblemInstance, x: np.ndarray,
                        margin: float = 1e-3) -> None:
    bad = big_m_margin_violations(inst, x, margin)
    if bad:
        kinds = sorted({inst.row_kind[r] for r in bad})
        raise BigMTooSmall(
            f"{len(bad)} deactivated rows bind at the full relaxation "
            f"(kinds: {', '.join(kinds)}); increase big_m")


# ---------------------------------------------------------------------------
# Presolve


def _sel_pairs_by_step(inst: ProblemInstance) -> dict[int, list[int]]:
    steps: dict[int, list[int]] = {}
    for i, j in inst.layout.pairs:
        steps.setdefault(i, []).append(j)
    return steps


def _pair_feasible(scene, model, prev_effector, prev_yaw, prev_surface,
                   prev_position, surface, goal_box=None) -> bool:
    """Small LP: can a step land on `surface` with a stride-compatible
    predecessor on `prev_surface` (or at a fixed position)?"""
    stride = model.rel_foot[prev_effector]
    normal = prev_surface.normal if prev_surface is not None else np.array([0.0, 0.0, 1.0])
    poly = stride.rotate(frame_rotation(prev_yaw, normal))
    rows_A, rows_b = [], []
    n_vars = 3 if prev_position is not None else 6

    def pad(block, offset):
        out = np.zeros((block.shape[0], n_vars))
        out[:, offset:offset + 3] = block
        return out

    rows_A.append(pad(surface.halfspaces_A, 0))
    rows_b.append(surface.halfspaces_b)
    eq_A = [pad(surface.normal.reshape(1, 3), 0)]
    eq_b = [np.array([surface.plane_offset])]
    if prev_position is None:
        rows_A.append(np.hstack([poly.A, -poly.A]))
        rows_b.append(poly.b)
        rows_A.append(pad(prev_surface.halfspaces_A, 3))
        rows_b.append(prev_surface.halfspaces_b)
        eq_A.append(pad(prev_surface.normal.reshape(1, 3), 3))
        eq_b.append(np.array([prev_surface.plane_offset]))
    else:
        rows_A.append(pad(poly.A, 0))
        rows_b.append(poly.b + poly.A @ prev_position)
    if goal_box is not None:
        gx, gy, half = goal_box
        box_A = np.zeros((4, n_vars))
        box_A[0, 0], box_A[1, 0], box_A[2, 1], box_A[3, 1] = 1, -1, 1, -1
        rows_A.append(box_A)
        rows_b.append(np.array([gx + half, -(gx - half), gy + half, -(gy - half)]))
    res = simplex.solve_linear(np.zeros(n_vars),
                               np.vstack(rows_A), np.concatenate(rows_b),
                               np.vstack(eq_A), np.concatenate(eq_b))
    return res.optimal


def _probe_viability(inst: ProblemInstance) -> dict[int, list[int]] | None:
    """Arc-consistency over consecutive steps' candidates via stride LPs.

    Returns the surviving candidates per step, or None when some step has
    no viable candidate (instance infeasible).
    """
    meta = inst.meta
    schedule, scene, model = meta.schedule, meta.scene, meta.model
    from .formulation import _gait_cycle, GOAL_BOX_HALF_WIDTH
    gait = _gait_cycle(schedule, model)
    steps = schedule.steps
    viable = {s.index: list(s.candidates) for s in steps}
    last_step_of = {}
    for s in steps:
        last_step_of[s.effector] = s.index

    def goal_box_for(i):
        eff = steps[i].effector
        if last_step_of[eff] != i:
            return None
        gx, gy = meta.goal_xy[eff]
        return (gx, gy, GOAL_BOX_HALF_WIDTH)

    def link_ok(i, j_prev, j):
        if i == 0:
            prev_eff = gait[-1]
            return _pair_feasible(scene, model, prev_eff, schedule.start.yaw,
                                  None, meta.stance[prev_eff],
                                  scene.surfaces[j], goal_box_for(0))
        prev_eff = steps[i - 1].effector
        return _pair_feasible(scene, model, prev_eff, steps[i - 1].yaw,
                              scene.surfaces[j_prev], None,
                              scene.surfaces[j], goal_box_for(i))

    cache: dict[tuple, bool] = {}
    changed = True
    while changed:
        changed = False
        for i in range(len(steps)):
            kept = []
            for j in viable[i]:
                prevs = [None] if i == 0 else viable[i - 1]
                ok = False
                for jp in prevs:
                    key = (i, jp, j)
                    if key not in cache:
                        cache[key] = link_ok(i, jp, j)
                    if cache[key]:
                        ok = True
                        break
                if ok and i + 1 < len(steps):
                    ok = any(cache.setdefault((i + 1, j, jn), link_ok(i + 1, j, jn))
                             for jn in viable[i + 1])
                if ok:
                    kept.append(j)
            if not kept:
                return None
            if kept != viable[i]:
                viable[i] = kept
                changed = True
    return viable


def _presolve_fixings(inst: ProblemInstance) -> dict[int, float] | None:
    """Selection fixes from cardinality forcing and stride probing."""
    layout = inst.layout
    fixings: dict[int, float] = {}
    viable = _probe_viability(inst)
    if viable is None:
        return None
    by_step = _sel_pairs_by_step(inst)
    for i, cands in sorted(by_step.items()):
        alive = viable[i]
        for j in cands:
            if j not in alive:
                fixings[layout.sel_col(i, j)] = 1.0
        if len(alive) == 1:
            fixings[layout.sel_col(i, alive[0])] = 0.0
    return fixings


def _propagate_cardinality(inst: ProblemInstance, fixings: dict[int, float]) -> bool:
    """Logical closure of the one-surface-per-step rule; False on conflict."""
    layout = inst.layout
    by_step = _sel_pairs_by_step(inst)
    changed = True
    while changed:
        changed = False
        for i, cands in sorted(by_step.items()):
            cols = [layout.sel_col(i, j) for j in cands]
            zeros = [c for c in cols if fixings.get(c) == 0.0]
            ones = [c for c in cols if fixings.get(c) == 1.0]
            free = [c for c in cols if c not in fixings]
            if len(zeros) > 1 or len(ones) == len(cols):
                return False
            if zeros:
                for c in free:
                    fixings[c] = 1.0
                    changed = True
            elif len(free) == 1 and len(ones) == len(cols) - 1:
                fixings[free[0]] = 0.0
                changed = True
    return True


# ---------------------------------------------------------------------------
# Branch and bound


def _selection_from_x(inst: ProblemInstance, x: np.ndarray) -> tuple[int, ...]:
    """Per step, the candidate with the smallest selection value."""
    layout = inst.layout
    out = []
    for i, cands in sorted(_sel_pairs_by_step(inst).items()):
        vals = [(x[layout.sel_col(i, j)], j) for j in cands]
        out.append(min(vals)[1])
    return tuple(out)


def _integral(inst: ProblemInstance, x: np.ndarray) -> bool:
    cols = np.flatnonzero(inst.integrality)
    if not len(cols):
        return True
    v = x[cols]
    return bool(np.all(np.minimum(np.abs(v), np.abs(v - 1.0)) <= INTEGRALITY_TOL))


def _fixed_solution_as_full(inst: ProblemInstance, selection) -> SolveResult:
    """Solve the instance with an integral selection fixed, lifted back to
    the full variable space (deactivated slacks at 1)."""
    layout = inst.layout
    fixings: dict[int, float] = {}
    for (i, j) in layout.pairs:
        fixings[layout.sel_col(i, j)] = 0.0 if selection[i] == j else 1.0
    res = _solve_relaxation(inst, fixings)
    if res.optimal:
        # Deactivated plane deviations are free; pin them to the plane gap
        # so the lifted point satisfies the full equality system.
        x = res.x.copy()
        for (i, j) in layout.pairs:
            if selection[i] != j:
                surf = inst.meta.scene.surfaces[j]
                p = x[layout.step_cols(i)]
                x[layout.dev_col(i, j)] = float(p @ surf.normal - surf.plane_offset)
        res.x = x
        res.objective = inst.objective_value(x)
    return res


def branch_and_bound(inst: ProblemInstance, presolve: bool = True,
                     node_limit: int = 20000, trace=None) -> tuple[SolveResult, MipStats]:
    """Exact solve of an instance with binary selection variables."""
    if not inst.integrality.any() and inst.layout.pairs:
        raise InvalidParams("instance has no integrality mask")
    stats = MipStats(presolve_enabled=presolve)
    layout = inst.layout
    t0 = time.perf_counter()

    base_fixings: dict[int, float] = {}
    if presolve:
        fixed = _presolve_fixings(inst)
        if fixed is None:
            stats.presolve_ms = 1e3 * (time.perf_counter() - t0)
            return SolveResult(simplex.INFEASIBLE, None, np.nan, 0), stats
        base_fixings = fixed
        if not _propagate_cardinality(inst, base_fixings):
            stats.presolve_ms = 1e3 * (time.perf_counter() - t0)
            return SolveResult(simplex.INFEASIBLE, None, np.nan, 0), stats
        stats.fixed_by_presolve = len(base_fixings)
    stats.presolve_ms = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    root = _solve_relaxation(inst, base_fixings, trace=trace)
    stats.root_objective = root.objective
    if not root.optimal:
        stats.root_ms = 1e3 * (time.perf_counter() - t0)
        return root, stats
    if _integral(inst, root.x):
        stats.root_integral = True
        stats.root_ms = 1e3 * (time.perf_counter() - t0)
        return _with_residual(inst, root), stats
    if presolve:
        # Integral-optimum certification: re-solve the rounding of the root
        # point; accepting it requires matching the relaxation bound.
        sel = _selection_from_x(inst, root.x)
        cand = _fixed_solution_as_full(inst, sel)
        feas_mode = inst.quad is None and not np.any(inst.cost)
        if cand.optimal and (feas_mode or cand.objective <= root.objective + 1e-7):
            ub, eq = instance_violations(inst, cand.x)
            if max(ub, eq) <= 1e-7:
                stats.root_integral = True
                stats.root_ms = 1e3 * (time.perf_counter() - t0)
                cand.iterations += root.iterations
                return cand, stats
    stats.root_ms = 1e3 * (time.perf_counter() - t0)

    # Depth-first, best-bound tiebreak, most-fractional branching.
    t0 = time.perf_counter()
    feas_mode = inst.quad is None and not np.any(inst.cost)
    incumbent: SolveResult | None = None
    seq = itertools.count()
    open_nodes = [(0, root.objective, next(seq), base_fixings, root)]
    sel_cols = np.flatnonzero(inst.integrality)

    while open_nodes:
        if stats.node_count >= node_limit:
            status = NODE_LIMIT
            if incumbent is not None:
                incumbent.status = NODE_LIMIT
                stats.nodes_ms = 1e3 * (time.perf_counter() - t0)
                return incumbent, stats
            stats.nodes_ms = 1e3 * (time.perf_counter() - t0)
            return SolveResult(status, None, np.nan, 0), stats
        open_nodes.sort(key=lambda n: (-n[0], n[1], n[2]))
        depth, bound, _, fixings, relax = open_nodes.pop(0)
        if incumbent is not None and bound >= incumbent.objective - 1e-9:
            continue
        free = [c for c in sel_cols if c not in fixings]
        vals = relax.x[free]
        frac = np.minimum(np.abs(vals), np.abs(vals - 1.0))
        branch_col = free[int(np.argmax(frac))]
        v = relax.x[branch_col]
        first = 1.0 if v >= 0.5 else 0.0
        for val in (first, 1.0 - first):
            child = dict(fixings)
            child[branch_col] = val
            if not _propagate_cardinality(inst, child):
                continue
            res = _solve_relaxation(inst, child)
            stats.node_count += 1
            if trace is not None:
                trace(f"node {stats.node_count} depth={depth + 1} col={branch_col} "
                      f"val={val:g} status={res.status} obj={res.objective:.6g}")
            if not res.optimal:
                continue
            if incumbent is not None and res.objective >= incumbent.objective - 1e-9:
                continue
            if _integral(inst, res.x):
                stats.incumbent_updates += 1
                incumbent = res
                if feas_mode:
                    stats.nodes_ms = 1e3 * (time.perf_counter() - t0)
                    return _with_residual(inst, incumbent), stats
                continue
            open_nodes.append((depth + 1, res.objective, next(seq), child, res))
    stats.nodes_ms = 1e3 * (time.perf_counter() - t0)
    if incumbent is None:
        return SolveResult(simplex.INFEASIBLE, None, np.nan, 0), stats
    assert stats.root_objective <= incumbent.objective + 1e-6
    return _with_residual(inst, incumbent), stats


# ---------------------------------------------------------------------------
# L1 relaxation pipeline


def _sparsity_pattern(inst: ProblemInstance, x: np.ndarray):
    """Per-step decided selection (exactly one zero slack) or None."""
    layout = inst.layout
    decided: dict[int, int] = {}
    undecided: list[int] = []
    for i, cands in sorted(_sel_pairs_by_step(inst).items()):
        vals = np.array([x[layout.sel_col(i, j)] for j in cands])
        zeros = np.flatnonzero(vals <= SPARSITY_ZERO_TOL)
        if len(zeros) == 1:
            decided[i] = cands[int(zeros[0])]
        else:
            undecided.append(i)
    return decided, undecided


def _fixed_feasibility(inst: ProblemInstance, selection) -> SolveResult:
    fixed = build_fixed_instance(inst.meta.schedule, inst.meta.scene,
                                 inst.meta.model, selection, quadratic=False,
                                 big_m=inst.big_m)
    return _solve_relaxation(fixed, {})


def sl1m_solve(inst: ProblemInstance, max_trials: int = 4000,
               trace=None) -> Sl1mOutcome:
    """Relaxation solve, sparsity reading, and bounded fallback enumeration."""
    if inst.mode != SL1M:
        raise InvalidParams("sl1m_solve expects an SL1M-mode instance")
    res = solve_lp(inst, trace=trace)
    if res.status == simplex.INFEASIBLE:
        return Sl1mOutcome("infeasible", None, (), 0, False, None, None, np.nan)
    if not res.optimal:
        raise NumericalBreakdown(f"relaxation solve ended with status {res.status}")

    decided, undecided = _sparsity_pattern(inst, res.x)
    layout = inst.layout
    n_steps = inst.meta.schedule.n
    if not undecided:
        selection = tuple(decided[i] for i in range(n_steps))
        footsteps = np.array([res.x[layout.step_cols(i)] for i in range(n_steps)])
        assert_big_m_margin(inst, res.x)
        return Sl1mOutcome("decided", selection, (), 0, False, footsteps,
                           res.x, res.objective)

    # Fallback: cheapest-cardinality-first enumeration; candidates per step
    # ordered by their relaxed slack value (most promising first).
    by_step = _sel_pairs_by_step(inst)
    order = sorted(undecided, key=lambda i: (len(by_step[i]), i))
    ranked = {}
    for i in order:
        vals = [(res.x[layout.sel_col(i, j)], j) for j in by_step[i]]
        ranked[i] = [j for _, j in sorted(vals)]
    trials = 0
    for combo in itertools.product(*(ranked[i] for i in order)):
        if trials >= max_trials:
            return Sl1mOutcome("exhausted", None, tuple(order), trials, True,
                               None, None, np.nan)
        trial_sel = dict(decided)
        trial_sel.update({i: j for i, j in zip(order, combo)})
        selection = tuple(trial_sel[i] for i in range(n_steps))
        trials += 1
        if trace is not None:
            trace(f"trial {trials} selection={selection}")
        sub = _fixed_feasibility(inst, selection)
        if sub.optimal:
            footsteps = np.array([sub.x[0:0] for _ in range(0)]) if n_steps == 0 else \
                np.array([sub.x[3 * i:3 * i + 3] for i in range(n_steps)])
            return Sl1mOutcome("fallback", selection, tuple(order), trials,
                               False, footsteps, sub.x, res.objective)
    return Sl1mOutcome("infeasible", None, tuple(order), trials, False,
                       None, None, np.nan)


def reweighted_l1(inst: ProblemInstance, iters: int = 5, eps: float = 1e-3,
                  max_trials: int = 4000, trace=None) -> Sl1mOutcome:
    """Iteratively reweighted L1: weights 1/(slack + eps) from the previous
    solve, then the standard sparsity/fallback reading."""
    if inst.mode != SL1M:
        raise InvalidParams("reweighted_l1 expects an SL1M-mode instance")
    meta = inst.meta
    layout = inst.layout
    current = inst
    prev_x = None
    tracked = []
    for it in range(iters):
        res = solve_lp(current, trace=trace)
        if res.status == simplex.INFEASIBLE:
            return Sl1mOutcome("infeasible", None, (), 0, False, None, None,
                               np.nan, tuple(tracked))
        if prev_x is not None:
            w_before = float(current.cost @ prev_x)
            w_after = float(current.cost @ res.x)
            tracked.append((w_before, w_after))
        prev_x = res.x
        sel_vals = {(i, j): res.x[layout.sel_col(i, j)] for i, j in layout.pairs}
        if it < iters - 1:
            weights = {key: 1.0 / (val + eps) for key, val in sel_vals.items()}
            current = build_instance(meta.schedule, meta.scene, meta.model, SL1M,
                                     big_m=inst.big_m, sel_weights=weights)
    decided, undecided = _sparsity_pattern(current, prev_x)
    n_steps = meta.schedule.n
    if not undecided:
        selection = tuple(decided[i] for i in range(n_steps))
        footsteps = np.array([prev_x[layout.step_cols(i)] for i in range(n_steps)])
        return Sl1mOutcome("decided", selection, (), 0, False, footsteps,
                           prev_x, float(current.cost @ prev_x), tuple(tracked))
    out = sl1m_solve(current, max_trials=max_trials, trace=trace)
    return Sl1mOutcome(out.status, out.selection, out.undecided, out.trials_used,
                       out.fallback_exhausted, out.footsteps, out.x,
                       out.objective, tuple(tracked))
