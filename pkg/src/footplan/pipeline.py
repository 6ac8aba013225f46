"""End-to-end planners, the exhaustive ground-truth oracle, and plan checks.

plan_footsteps wires the stages together: guide trajectory, schedule
(pruned by the trajectory or full-combinatorics at the same step count),
instance build, solver dispatch, quadratic refinement for the relaxation
methods, and a final verification sweep. Failures surface as
PlanningFailed with the stage that caused them.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import simplex
from .errors import (EmptyCandidates, FootplanError, GuideNotFound,
                     InfeasibleSelection, InvalidParams, PlanningFailed,
                     TooLarge, ValidationError)
from .formulation import (MIP_FEAS, MIP_OPT, SL1M, ProblemInstance,
                          build_fixed_instance, build_instance,
                          build_refinement, objective_cost)
from .geometry import Scene, surface_contains, _freeze
from .guide import (GuideConfig, RootTrajectory, ScheduleStep, StepSchedule,
                    discretize, rrt_plan, state_from_pose)
from .scenario import Pose, RobotModel, stance_positions
from . import solve as solver

SL1M_REWEIGHTED = "SL1M_REWEIGHTED"
METHODS = (MIP_OPT, MIP_FEAS, SL1M, SL1M_REWEIGHTED)
PRUNING_MODES = ("trajectory", "none")


@dataclass(frozen=True)
class PlanQuery:
    scene: Scene
    model: RobotModel
    start: Pose
    goal: Pose
    method: str = SL1M
    pruning: str = "trajectory"
    dt: float = 1.0
    seed: int = 0
    big_m: float = 100.0
    max_trials: int = 4000
    presolve: bool = True
    guide_iters: int = 400

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParams(f"unknown method '{self.method}'")
        if self.pruning not in PRUNING_MODES:
            raise InvalidParams(f"unknown pruning mode '{self.pruning}'")
        if self.dt <= 0:
            raise InvalidParams("dt must be positive")


@dataclass(frozen=True)
class PlanStep:
    index: int
    effector: int
    surface: int
    position: np.ndarray
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "position", _freeze(self.position))


@dataclass
class SolveStats:
    method: str = ""
    pruning: str = ""
    n_steps: int = 0
    mean_candidates: float = 0.0
    trajectory_ms: float = 0.0
    build_ms: float = 0.0
    solve_ms: float = 0.0
    refine_ms: float = 0.0
    node_count: int | None = None
    root_integral: bool | None = None
    trials_used: int | None = None
    iterations: int = 0


@dataclass(frozen=True)
class FootstepPlan:
    steps: tuple[PlanStep, ...]
    com: tuple[tuple[np.ndarray, np.ndarray], ...]
    initial_stance: np.ndarray
    cost: float
    stats: SolveStats
    schedule: StepSchedule

    @property
    def selection(self) -> tuple[int, ...]:
        return tuple(s.surface for s in self.steps)


# ---------------------------------------------------------------------------
# Schedules


def pruned_schedule(query: PlanQuery, traj: RootTrajectory) -> StepSchedule:
    model = query.model
    stance, _ = stance_positions(query.scene, model, query.start)
    goal_xy = np.array(query.goal.position[:2])
    # The first swing effector is the one lagging farthest behind the goal.
    dists = np.linalg.norm(stance[:, :2] - goal_xy[None, :], axis=1)
    first = int(np.argmax(dists))
    k = model.gait.index(first)
    gait = model.gait[k:] + model.gait[:k]
    sched = discretize(traj, query.dt, query.scene, model, gait=gait)
    return replace(sched, start=query.start, goal=query.goal)


def heading_schedule(query: PlanQuery, traj: RootTrajectory) -> StepSchedule:
    """Full-combinatorics schedule at the trajectory's step count: every
    surface is a candidate and yaw points straight at the goal."""
    scene, model = query.scene, query.model
    pruned = pruned_schedule(query, traj)
    d = query.goal.position[:2] - query.start.position[:2]
    yaw = float(np.arctan2(d[1], d[0])) if np.linalg.norm(d) > 1e-9 else query.start.yaw
    all_ids = tuple(s.id for s in scene.surfaces)
    n = pruned.n
    steps = []
    for i, step in enumerate(pruned.steps):
        f = (i + 1) / max(n, 1)
        pos = (1 - f) * query.start.position + f * query.goal.position
        steps.append(ScheduleStep(i, step.time, pos, yaw, step.effector, all_ids))
    return StepSchedule(pruned.dt, tuple(steps), query.start, query.goal)


# ---------------------------------------------------------------------------
# Planning


def _selection_from_solution(inst: ProblemInstance, x: np.ndarray) -> tuple[int, ...]:
    layout = inst.layout
    by_step: dict[int, list[int]] = {}
    for i, j in layout.pairs:
        by_step.setdefault(i, []).append(j)
    out = []
    for i in sorted(by_step):
        vals = [(x[layout.sel_col(i, j)], j) for j in by_step[i]]
        out.append(min(vals)[1])
    return tuple(out)


def _plan_from_solution(schedule: StepSchedule, inst: ProblemInstance,
                        x: np.ndarray, selection, stats: SolveStats) -> FootstepPlan:
    layout = inst.layout
    steps = []
    com = []
    for i, step in enumerate(schedule.steps):
        p = x[layout.step_cols(i)]
        steps.append(PlanStep(i, step.effector, int(selection[i]), p, step.yaw))
        com.append((x[layout.com_cols(i, 0)].copy(), x[layout.com_cols(i, 1)].copy()))
    plan = FootstepPlan(tuple(steps), tuple(com), inst.meta.stance, 0.0,
                        stats, schedule)
    return replace(plan, cost=objective_cost(plan))


def plan_footsteps(query: PlanQuery) -> FootstepPlan:
    scene, model = query.scene, query.model
    stats = SolveStats(method=query.method, pruning=query.pruning)

    t0 = time.perf_counter()
    try:
        start_state = state_from_pose(scene, model, query.start)
        goal_state = state_from_pose(scene, model, query.goal)
        traj = rrt_plan(start_state, goal_state, scene, model,
                        GuideConfig(seed=query.seed, max_iters=query.guide_iters))
    except (GuideNotFound, EmptyCandidates) as exc:
        raise PlanningFailed("guide", type(exc).__name__, exc) from exc
    stats.trajectory_ms = 1e3 * (time.perf_counter() - t0)

    try:
        if query.pruning == "trajectory":
            schedule = pruned_schedule(query, traj)
        else:
            schedule = heading_schedule(query, traj)
    except EmptyCandidates as exc:
        raise PlanningFailed("schedule", "EmptyCandidates", exc) from exc
    stats.n_steps = schedule.n
    stats.mean_candidates = schedule.mean_candidates()
    if schedule.n == 0:
        stance, _ = stance_positions(scene, model, query.start)
        return FootstepPlan((), (), stance, 0.0, stats, schedule)

    t0 = time.perf_counter()
    mode = SL1M if query.method in (SL1M, SL1M_REWEIGHTED) else query.method
    inst = build_instance(schedule, scene, model, mode, big_m=query.big_m)
    stats.build_ms = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    if query.method in (MIP_OPT, MIP_FEAS):
        res, mip_stats = solver.branch_and_bound(inst, presolve=query.presolve)
        stats.solve_ms = 1e3 * (time.perf_counter() - t0)
        stats.node_count = mip_stats.node_count
        stats.root_integral = mip_stats.root_integral
        stats.iterations = res.iterations
        if not res.optimal:
            raise PlanningFailed("solve", res.status)
        selection = _selection_from_solution(inst, res.x)
        plan = _plan_from_solution(schedule, inst, res.x, selection, stats)
    else:
        if query.method == SL1M:
            outcome = solver.sl1m_solve(inst, max_trials=query.max_trials)
        else:
            outcome = solver.reweighted_l1(inst, max_trials=query.max_trials)
        stats.solve_ms = 1e3 * (time.perf_counter() - t0)
        stats.trials_used = outcome.trials_used
        if not outcome.solved:
            raise PlanningFailed("solve", outcome.status)
        t0 = time.perf_counter()
        refined = build_refinement(inst, outcome.selection)
        qres = solver.solve_qp(refined)
        stats.refine_ms = 1e3 * (time.perf_counter() - t0)
        if not qres.optimal:
            raise PlanningFailed("refine", "InfeasibleSelection",
                                 InfeasibleSelection(str(outcome.selection)))
        plan = _plan_from_solution(schedule, refined, qres.x, outcome.selection,
                                   stats)

    report = verify_plan(plan, scene, model)
    if not report.ok:
        raise PlanningFailed("verify", "; ".join(c.name for c in report.failures))
    return plan


# ---------------------------------------------------------------------------
# Exhaustive oracle


@dataclass
class OracleResult:
    status: str
    selection: tuple[int, ...] | None
    cost: float
    evaluated: int

    @property
    def feasible(self) -> bool:
        return self.selection is not None


def brute_force_oracle(schedule: StepSchedule, scene: Scene, model: RobotModel,
                       objective: str = "quadratic", guard: float = 1e6,
                       big_m: float = 100.0) -> OracleResult:
    """Solve one fixed problem per surface combination; exact by exhaustion."""
    if objective not in ("quadratic", "feasibility"):
        raise InvalidParams("objective must be 'quadratic' or 'feasibility'")
    total = 1
    for step in schedule.steps:
        total *= len(step.candidates)
        if total > guard:
            raise TooLarge(f"{total} combinations exceed the oracle guard")
    quadratic = objective == "quadratic"
    best_sel = None
    best_cost = np.inf
    evaluated = 0
    for combo in itertools.product(*(s.candidates for s in schedule.steps)):
        inst = build_fixed_instance(schedule, scene, model, combo,
                                    quadratic=quadratic, big_m=big_m)
        res = solver.solve_qp(inst) if quadratic else solver.solve_lp(inst)
        evaluated += 1
        if res.optimal:
            if not quadratic:
                return OracleResult("feasible", combo, 0.0, evaluated)
            if res.objective < best_cost - 1e-12:
                best_cost = res.objective
                best_sel = combo
    if best_sel is None:
        return OracleResult("infeasible", None, np.nan, evaluated)
    return OracleResult("optimal", best_sel, best_cost, evaluated)


# ---------------------------------------------------------------------------
# Verification


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> tuple[CheckResult, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            mark = "pass" if c.passed else "FAIL"
            lines.append(f"[{mark}] {c.name}: residual={c.residual:.3e}"
                         + (f" ({c.detail})" if c.detail else ""))
        return "\n".join(lines)


SEGMENT_SAMPLES = 11


def verify_plan(plan: FootstepPlan, scene: Scene, model: RobotModel,
                tol: float = 1e-6) -> VerifyReport:
    """Re-check every plan invariant against scene geometry and the
    slack-free constraint system."""
    checks: list[CheckResult] = []
    if not plan.steps:
        return VerifyReport((CheckResult("empty-plan", True, 0.0),))
    schedule = plan.schedule

    # Footsteps on their selected surfaces.
    worst = 0.0
    for step in plan.steps:
        surf = scene.surfaces[step.surface]
        plane = abs(step.position @ surf.normal - surf.plane_offset)
        half = float(np.max(surf.halfspaces_A @ step.position - surf.halfspaces_b,
                            initial=0.0))
        worst = max(worst, plane, half)
    checks.append(CheckResult("footsteps-on-surface", worst <= tol, worst))

    # Gait order.
    from .formulation import _gait_cycle
    gait = _gait_cycle(schedule, model)
    order_ok = all(step.effector == gait[i % len(gait)]
                   for i, step in enumerate(plan.steps))
    checks.append(CheckResult("gait-order", order_ok, 0.0 if order_ok else 1.0))

    # Full slack-free row system at the plan's variables.
    inst = build_fixed_instance(schedule, scene, model, plan.selection,
                                quadratic=False)
    x = np.zeros(inst.n_vars)
    for i, step in enumerate(plan.steps):
        x[inst.layout.step_cols(i)] = step.position
        x[inst.layout.com_cols(i, 0)] = plan.com[i][0]
        x[inst.layout.com_cols(i, 1)] = plan.com[i][1]
    ub, eq = solver.instance_violations(inst, x)
    checks.append(CheckResult("reachability-rows", max(ub, eq) <= tol, max(ub, eq)))

    # Sampled convex combinations of consecutive com points must stay inside
    # the rows that bind both segment endpoints: the reach rows along the
    # within-phase segment, the entry support rows along the transition
    # segment. Convexity makes this a consequence of the endpoint checks;
    # sampling guards the assembly itself.
    worst_seg = 0.0
    kinds = np.array(inst.row_kind)
    for i in range(len(plan.steps)):
        slot = inst.layout.com_cols(i, 0)
        touch = np.any(inst.A_ub[:, slot], axis=1)
        reach_rows = np.flatnonzero(touch & (kinds == "com-reach"))
        entry_rows = np.flatnonzero(touch & (kinds == "support-entry"))
        segments = [(plan.com[i][0], plan.com[i][1], reach_rows)]
        if i > 0:
            segments.append((plan.com[i - 1][1], plan.com[i][0], entry_rows))
        for a, b, rows in segments:
            if not len(rows):
                continue
            for f in np.linspace(0.0, 1.0, SEGMENT_SAMPLES):
                xi = x.copy()
                xi[slot] = (1 - f) * a + f * b
                v = float(np.max(inst.A_ub[rows] @ xi - inst.b_ub[rows], initial=0.0))
                worst_seg = max(worst_seg, v)
    checks.append(CheckResult("com-segments", worst_seg <= tol, worst_seg))

    if model.n_feet == 4:
        worst_avg = 0.0
        latest = {k: plan.initial_stance[k] for k in range(model.n_feet)}
        for i, step in enumerate(plan.steps):
            w = model.phase_weights(i)
            before = sum(w[k] * latest[k][:2] for k in range(model.n_feet))
            latest[step.effector] = np.asarray(step.position)
            after = sum(w[k] * latest[k][:2] for k in range(model.n_feet))
            worst_avg = max(worst_avg,
                            float(np.abs(plan.com[i][0][:2] - before).max()),
                            float(np.abs(plan.com[i][1][:2] - after).max()))
        checks.append(CheckResult("com-average", worst_avg <= 1e-9, worst_avg))

    # Goal boxes per effector's final step.
    from .formulation import GOAL_BOX_HALF_WIDTH, _goal_stance_xy
    goal_xy = _goal_stance_xy(model, schedule.goal)
    last: dict[int, PlanStep] = {}
    for step in plan.steps:
        last[step.effector] = step
    worst_goal = 0.0
    for k, step in last.items():
        worst_goal = max(worst_goal,
                         float(np.abs(step.position[:2] - goal_xy[k]).max())
                         - GOAL_BOX_HALF_WIDTH)
    checks.append(CheckResult("goal-box", worst_goal <= tol, max(worst_goal, 0.0)))

    # Declared cost matches a recomputation from raw positions.
    recomputed = objective_cost(plan)
    dc = abs(recomputed - plan.cost)
    checks.append(CheckResult("cost-recomputation", dc <= 1e-9, dc))
    return VerifyReport(tuple(checks))


# ---------------------------------------------------------------------------
# Plan serialization


def save_plan(plan: FootstepPlan) -> str:
    doc = {
        "steps": [
            {"index": s.index, "effector": s.effector, "surface": s.surface,
             "position": s.position.tolist(), "yaw": s.yaw}
            for s in plan.steps
        ],
        "com": [[a.tolist(), b.tolist()] for a, b in plan.com],
        "initial_stance": plan.initial_stance.tolist(),
        "cost": plan.cost,
        "stats": {
            "method": plan.stats.method,
            "pruning": plan.stats.pruning,
            "n_steps": plan.stats.n_steps,
            "mean_candidates": plan.stats.mean_candidates,
            "trajectory_ms": plan.stats.trajectory_ms,
            "build_ms": plan.stats.build_ms,
            "solve_ms": plan.stats.solve_ms,
            "refine_ms": plan.stats.refine_ms,
            "node_count": plan.stats.node_count,
            "trials_used": plan.stats.trials_used,
        },
    }
    return json.dumps(doc, indent=2)
