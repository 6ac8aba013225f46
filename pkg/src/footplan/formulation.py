"""Assembly of footstep optimization instances.

Modes:
  MIP_OPT    binary surface selection, quadratic travel cost
  MIP_FEAS   binary surface selection, zero objective
  SL1M       continuous nonnegative selection slacks, L1 slack cost
  QP_REFINE  fixed selection, quadratic travel cost (built via
             build_refinement / build_fixed_instance)

Per step i and candidate surface j the encoding is: the surface halfspace
rows relaxed by M*sel(i,j), the plane equality carrying a free deviation
variable dev(i,j), and a two-row absolute-value split bounding |dev| by
M*sel. Selection semantics: sel=0 activates the candidate, sel=1 (or a
positive relaxation level) deactivates it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParams, OverflowGuard
from .geometry import Scene
from .guide import StepSchedule
from .reachability import (PhaseVars, Row, Support, com_kinematic_rows,
                           equilibrium_rows, quadruped_com_substitution,
                           relative_foot_rows)
from .scenario import Pose, RobotModel, stance_positions

MIP_OPT = "MIP_OPT"
MIP_FEAS = "MIP_FEAS"
SL1M = "SL1M"
QP_REFINE = "QP_REFINE"

GOAL_BOX_HALF_WIDTH = 0.15
COEFF_GUARD = 1e9
DEFAULT_BIG_M = 100.0


@dataclass(frozen=True)
class VariableLayout:
    """Column map: footsteps, per-phase com pairs, deviations, selections."""

    n_steps: int
    pairs: tuple[tuple[int, int], ...]  # (step, surface id), build order

    def __post_init__(self):
        object.__setattr__(self, "_pair_col",
                           {p: k for k, p in enumerate(self.pairs)})

    @property
    def n_vars(self) -> int:
        return 9 * self.n_steps + 2 * len(self.pairs)

    def step_cols(self, i: int) -> slice:
        return slice(3 * i, 3 * i + 3)

    def com_cols(self, i: int, m: int) -> slice:
        base = 3 * self.n_steps + 6 * i + 3 * m
        return slice(base, base + 3)

    def dev_col(self, i: int, j: int) -> int:
        return 9 * self.n_steps + self._pair_col[(i, j)]

    def sel_col(self, i: int, j: int) -> int:
        return 9 * self.n_steps + len(self.pairs) + self._pair_col[(i, j)]

    def columns(self, ref) -> tuple[slice | int, int]:
        """(column slice/index, width) for a variable reference."""
        kind = ref[0]
        if kind == "p":
            return self.step_cols(ref[1]), 3
        if kind == "c":
            return self.com_cols(ref[1], ref[2]), 3
        if kind == "dev":
            return self.dev_col(ref[1], ref[2]), 1
        if kind == "sel":
            return self.sel_col(ref[1], ref[2]), 1
        raise KeyError(f"unknown variable reference {ref!r}")

    def names(self) -> list[str]:
        out = []
        for i in range(self.n_steps):
            out += [f"p{i}.{ax}" for ax in "xyz"]
        for i in range(self.n_steps):
            for m in (0, 1):
                out += [f"c{i}.{m}.{ax}" for ax in "xyz"]
        out += [f"dev.{i}.{j}" for i, j in self.pairs]
        out += [f"sel.{i}.{j}" for i, j in self.pairs]
        return out


@dataclass(frozen=True)
class InstanceMeta:
    """Everything needed to rebuild, refine, or verify an instance."""

    schedule: StepSchedule
    scene: Scene
    model: RobotModel
    stance: np.ndarray           # (n_feet, 3) initial foot positions
    stance_normals: np.ndarray   # (n_feet, 3) supporting-surface normals
    goal_xy: np.ndarray          # (n_feet, 2) goal stance targets
    selection: tuple[int, ...] | None = None


@dataclass
class ProblemInstance:
    mode: str
    layout: VariableLayout
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    nonneg: np.ndarray
    integrality: np.ndarray
    cost: np.ndarray
    quad: np.ndarray | None
    obj_const: float
    big_m: float
    row_slack: np.ndarray        # ub-row -> sel column (or -1)
    row_kind: tuple[str, ...]
    eq_kind: tuple[str, ...]
    meta: InstanceMeta

    @property
    def n_vars(self) -> int:
        return self.layout.n_vars

    def objective_value(self, x: np.ndarray) -> float:
        val = float(self.cost @ x) + self.obj_const
        if self.quad is not None:
            val += 0.5 * float(x @ self.quad @ x)
        return val

    def validate(self) -> None:
        n = self.n_vars
        for arr, cols in ((self.A_ub, n), (self.A_eq, n)):
            if arr.shape[1] != cols:
                raise InvalidParams("instance dimension mismatch")
        if self.mode == SL1M and self.integrality.any():
            raise InvalidParams("continuous-relaxation instance cannot carry integrality")
        if self.quad is not None:
            w = np.linalg.eigvalsh(0.5 * (self.quad + self.quad.T))
            if w.min() < -1e-9:
                raise InvalidParams("quadratic cost is not positive semidefinite")


# ---------------------------------------------------------------------------
# Shared construction helpers


def _gait_cycle(schedule: StepSchedule, model: RobotModel) -> tuple[int, ...]:
    if schedule.steps:
        first = schedule.steps[0].effector
        k = model.gait.index(first)
        return model.gait[k:] + model.gait[:k]
    return model.gait


def _goal_stance_xy(model: RobotModel, goal: Pose) -> np.ndarray:
    c, s = np.cos(goal.yaw), np.sin(goal.yaw)
    out = np.zeros((model.n_feet, 2))
    for k, (ox, oy) in enumerate(model.stance_offsets):
        out[k] = (goal.position[0] + c * ox - s * oy,
                  goal.position[1] + s * ox + c * oy)
    return out


def build_phases(schedule: StepSchedule, scene: Scene, model: RobotModel,
                 meta: InstanceMeta,
                 candidates: list[tuple[int, ...]] | None = None) -> list[PhaseVars]:
    """PhaseVars per step, threading supports through the gait cycle."""
    gait = _gait_cycle(schedule, model)
    start_yaw = schedule.start.yaw
    latest: dict[int, Support] = {
        k: Support(k, start_yaw, position=meta.stance[k],
                   normal=meta.stance_normals[k])
        for k in range(model.n_feet)
    }
    phases = []
    for i, step in enumerate(schedule.steps):
        cands = candidates[i] if candidates is not None else step.candidates
        prev_eff = gait[(i - 1) % len(gait)]
        prev = latest[prev_eff]
        before = tuple(latest[k] for k in range(model.n_feet))
        self_support = Support(step.effector, step.yaw, ref=("p", i), candidates=cands)
        after_map = dict(latest)
        after_map[step.effector] = self_support
        after = tuple(after_map[k] for k in range(model.n_feet))
        phases.append(PhaseVars(
            index=i, effector=step.effector, yaw=step.yaw, candidates=cands,
            foot=("p", i), com0=("c", i, 0), com1=("c", i, 1), prev=prev,
            supports_before=before, supports_after=after))
        latest[step.effector] = self_support
    return phases


def reachability_rows(phases: list[PhaseVars], scene: Scene, model: RobotModel,
                      big_m: float) -> list[Row]:
    rows: list[Row] = []
    quadruped = model.n_feet == 4
    for phase in phases:
        if quadruped:
            rows += quadruped_com_substitution(phase, model)
        else:
            rows += equilibrium_rows(phase, model, scene, big_m)
        rows += com_kinematic_rows(phase, model, scene, big_m)
        rows += relative_foot_rows(phase, model, scene, big_m)
    return rows


def goal_rows(phases: list[PhaseVars], meta: InstanceMeta,
              half_width: float = GOAL_BOX_HALF_WIDTH) -> list[Row]:
    """xy box around the goal stance for each effector's final step."""
    rows: list[Row] = []
    last: dict[int, int] = {}
    for phase in phases:
        last[phase.effector] = phase.index
    for effector, i in sorted(last.items()):
        gx, gy = meta.goal_xy[effector]
        for axis, target in ((np.array([1.0, 0, 0]), gx), (np.array([0, 1.0, 0]), gy)):
            rows.append(Row(((("p", i), axis),), "le", target + half_width, kind="goal"))
            rows.append(Row(((("p", i), -axis),), "le", -(target - half_width), kind="goal"))
    return rows


def _assemble(layout: VariableLayout, rows: list[Row], big_m: float):
    n = layout.n_vars
    ub_rows, ub_rhs, ub_slack, ub_kind = [], [], [], []
    eq_rows, eq_rhs, eq_kind = [], [], []
    for row in rows:
        vec = np.zeros(n)
        for ref, coeff in row.coeffs:
            cols, width = layout.columns(ref)
            if width == 1:
                vec[cols] += coeff[0]
            else:
                vec[cols] += coeff
        if row.rel == "le":
            if row.slack is not None:
                vec[layout.columns(row.slack)[0]] -= row.slack_coeff
                ub_slack.append(layout.columns(row.slack)[0])
            else:
                ub_slack.append(-1)
            ub_rows.append(vec)
            ub_rhs.append(row.rhs)
            ub_kind.append(row.kind)
        else:
            eq_rows.append(vec)
            eq_rhs.append(row.rhs)
            eq_kind.append(row.kind)
    A_ub = np.array(ub_rows) if ub_rows else np.zeros((0, n))
    A_eq = np.array(eq_rows) if eq_rows else np.zeros((0, n))
    b_ub = np.array(ub_rhs)
    b_eq = np.array(eq_rhs)
    for arr in (A_ub, b_ub, A_eq, b_eq):
        if arr.size and np.abs(arr).max() > COEFF_GUARD:
            raise OverflowGuard("constraint coefficient above 1e9")
    return (A_ub, b_ub, A_eq, b_eq, np.array(ub_slack, dtype=np.int64),
            tuple(ub_kind), tuple(eq_kind))


def _travel_pairs(phases: list[PhaseVars], meta: InstanceMeta):
    """(step index, previous same-effector step or None, constant) chain."""
    prev_step: dict[int, int] = {}
    pairs = []
    for phase in phases:
        k = phase.effector
        if k in prev_step:
            pairs.append((phase.index, prev_step[k], None))
        else:
            pairs.append((phase.index, None, meta.stance[k]))
        prev_step[k] = phase.index
    return pairs


def travel_cost_terms(layout: VariableLayout, phases: list[PhaseVars],
                      meta: InstanceMeta):
    """Quadratic form (Q, c, const) of the per-effector squared travel."""
    n = layout.n_vars
    Q = np.zeros((n, n))
    c = np.zeros(n)
    const = 0.0
    for i, prev, anchor in _travel_pairs(phases, meta):
        si = layout.step_cols(i)
        idx_i = np.arange(si.start, si.stop)
        Q[idx_i, idx_i] += 2.0
        if prev is not None:
            sp = layout.step_cols(prev)
            idx_p = np.arange(sp.start, sp.stop)
            Q[idx_p, idx_p] += 2.0
            Q[idx_i, idx_p] -= 2.0
            Q[idx_p, idx_i] -= 2.0
        else:
            c[si] -= 2.0 * anchor
            const += float(anchor @ anchor)
    return Q, c, const


def _make_meta(schedule: StepSchedule, scene: Scene, model: RobotModel,
               selection=None) -> InstanceMeta:
    stance, supports = stance_positions(scene, model, schedule.start)
    normals = np.array([s.normal for s in supports])
    goal_xy = _goal_stance_xy(model, schedule.goal)
    return InstanceMeta(schedule, scene, model, stance, normals, goal_xy,
                        tuple(selection) if selection is not None else None)


# ---------------------------------------------------------------------------
# Builders


def build_instance(schedule: StepSchedule, scene: Scene, model: RobotModel,
                   mode: str, big_m: float = DEFAULT_BIG_M,
                   sel_weights: dict | None = None) -> ProblemInstance:
    """Full selection instance in MIP_OPT, MIP_FEAS, or SL1M mode."""
    if mode == QP_REFINE:
        raise InvalidParams("refinement instances are built from a selection")
    if mode not in (MIP_OPT, MIP_FEAS, SL1M):
        raise InvalidParams(f"unknown mode '{mode}'")
    if any(not step.candidates for step in schedule.steps):
        raise InvalidParams("every step needs at least one candidate surface")

    meta = _make_meta(schedule, scene, model)
    pairs = tuple((s.index, j) for s in schedule.steps for j in s.candidates)
    layout = VariableLayout(schedule.n, pairs)
    phases = build_phases(schedule, scene, model, meta)

    rows: list[Row] = []
    for step in schedule.steps:
        i = step.index
        for j in step.candidates:
            surf = scene.surfaces[j]
            for a, b in zip(surf.halfspaces_A, surf.halfspaces_b):
                rows.append(Row(((("p", i), a),), "le", float(b),
                                slack=("sel", i, j), slack_coeff=big_m, kind="surface"))
            rows.append(Row(((("p", i), surf.normal), (("dev", i, j), np.array([-1.0]))),
                            "eq", surf.plane_offset, kind="plane"))
            rows.append(Row(((("dev", i, j), np.array([1.0])),), "le", 0.0,
                            slack=("sel", i, j), slack_coeff=big_m, kind="plane-gap"))
            rows.append(Row(((("dev", i, j), np.array([-1.0])),), "le", 0.0,
                            slack=("sel", i, j), slack_coeff=big_m, kind="plane-gap"))
        if mode in (MIP_OPT, MIP_FEAS):
            coeffs = tuple((("sel", i, j), np.array([1.0])) for j in step.candidates)
            rows.append(Row(coeffs, "eq", float(len(step.candidates) - 1),
                            kind="cardinality"))
            for j in step.candidates:
                rows.append(Row(((("sel", i, j), np.array([1.0])),), "le", 1.0,
                                kind="sel-bound"))
    rows += reachability_rows(phases, scene, model, big_m)
    rows += goal_rows(phases, meta)

    A_ub, b_ub, A_eq, b_eq, row_slack, ub_kind, eq_kind = _assemble(layout, rows, big_m)

    n = layout.n_vars
    nonneg = np.zeros(n, dtype=bool)
    integrality = np.zeros(n, dtype=bool)
    cost = np.zeros(n)
    quad = None
    const = 0.0
    for i, j in pairs:
        nonneg[layout.sel_col(i, j)] = True
    if mode in (MIP_OPT, MIP_FEAS):
        for i, j in pairs:
            integrality[layout.sel_col(i, j)] = True
    if mode == MIP_OPT:
        quad, c_lin, const = travel_cost_terms(layout, phases, meta)
        cost = c_lin
    elif mode == SL1M:
        # The relaxation is unit-weighted; a rank-proportional nudge far
        # below the sparsity tolerance resolves degenerate split-slack
        # optima toward a single zero slack per step deterministically.
        rank_in_step: dict[tuple[int, int], int] = {}
        for step in schedule.steps:
            for r, j in enumerate(step.candidates):
                rank_in_step[(step.index, j)] = r
        for i, j in pairs:
            w = 1.0 if sel_weights is None else float(sel_weights.get((i, j), 1.0))
            cost[layout.sel_col(i, j)] = w * (1.0 + 1e-6 * rank_in_step[(i, j)])

    inst = ProblemInstance(mode, layout, A_ub, b_ub, A_eq, b_eq, nonneg,
                           integrality, cost, quad, const, big_m, row_slack,
                           ub_kind, eq_kind, meta)
    inst.validate()
    return inst


def build_fixed_instance(schedule: StepSchedule, scene: Scene, model: RobotModel,
                         selection, quadratic: bool,
                         big_m: float = DEFAULT_BIG_M) -> ProblemInstance:
    """Instance with one fixed surface per step: deactivated candidates'
    rows dropped, active rows enforced without slack."""
    selection = tuple(int(j) for j in selection)
    if len(selection) != schedule.n:
        raise InvalidParams("selection must assign one surface per step")
    for step, j in zip(schedule.steps, selection):
        if j not in step.candidates:
            raise InvalidParams(f"surface {j} is not a candidate of step {step.index}")

    meta = _make_meta(schedule, scene, model, selection)
    layout = VariableLayout(schedule.n, ())
    fixed_cands = [(j,) for j in selection]
    phases = build_phases(schedule, scene, model, meta, candidates=fixed_cands)

    rows: list[Row] = []
    for step, j in zip(schedule.steps, selection):
        surf = scene.surfaces[j]
        i = step.index
        for a, b in zip(surf.halfspaces_A, surf.halfspaces_b):
            rows.append(Row(((("p", i), a),), "le", float(b), kind="surface"))
        rows.append(Row(((("p", i), surf.normal),), "eq", surf.plane_offset, kind="plane"))
    # Reachability rows come back slack-tagged per candidate; with a single
    # fixed candidate per step the slack is pinned to zero, so strip it.
    rows += [replace(r, slack=None, slack_coeff=0.0) if r.slack is not None else r
             for r in reachability_rows(phases, scene, model, big_m)]
    rows += goal_rows(phases, meta)

    A_ub, b_ub, A_eq, b_eq, row_slack, ub_kind, eq_kind = _assemble(layout, rows, big_m)
    n = layout.n_vars
    cost = np.zeros(n)
    quad = None
    const = 0.0
    if quadratic:
        quad, cost, const = travel_cost_terms(layout, phases, meta)
    inst = ProblemInstance(QP_REFINE if quadratic else MIP_FEAS, layout,
                           A_ub, b_ub, A_eq, b_eq,
                           np.zeros(n, dtype=bool), np.zeros(n, dtype=bool),
                           cost, quad, const, big_m, row_slack, ub_kind, eq_kind, meta)
    inst.validate()
    return inst


def build_refinement(instance: ProblemInstance, selection, model: RobotModel | None = None) -> ProblemInstance:
    """Quadratic refinement of an instance under a fixed selection."""
    meta = instance.meta
    return build_fixed_instance(meta.schedule, meta.scene,
                                model if model is not None else meta.model,
                                selection, quadratic=True, big_m=instance.big_m)


def objective_cost(plan) -> float:
    """Sum of squared travel of each effector between its consecutive
    placements, anchored at the initial stance."""
    prev: dict[int, np.ndarray] = {k: np.asarray(p) for k, p in
                                   enumerate(plan.initial_stance)}
    total = 0.0
    for step in plan.steps:
        p = np.asarray(step.position)
        d = p - prev[step.effector]
        total += float(d @ d)
        prev[step.effector] = p
    return total


# ---------------------------------------------------------------------------
# Plain-text interchange dump


def dump_instance(inst: ProblemInstance) -> str:
    """Deterministic line-oriented listing for external cross-checking."""
    names = inst.layout.names()
    lines = ["footplan-lp 1", f"mode {inst.mode}", f"vars {inst.n_vars}"]
    for idx, name in enumerate(names):
        flags = "nonneg" if inst.nonneg[idx] else "free"
        if inst.integrality[idx]:
            flags += " integral"
        lines.append(f"var {idx} {name} {flags}")
    lines.append(f"minimize const {inst.obj_const:.17g}")
    lin = " ".join(f"{i}:{v:.17g}" for i, v in enumerate(inst.cost) if v != 0.0)
    lines.append(f"lin {lin}".rstrip())
    if inst.quad is not None:
        terms = []
        for i in range(inst.n_vars):
            for j in range(i, inst.n_vars):
                v = inst.quad[i, j]
                if v != 0.0:
                    terms.append(f"{i}:{j}:{v:.17g}")
        lines.append("quad " + " ".join(terms))
    for A, b, rel in ((inst.A_ub, inst.b_ub, "le"), (inst.A_eq, inst.b_eq, "eq")):
        for r in range(len(b)):
            nz = " ".join(f"{i}:{A[r, i]:.17g}" for i in np.flatnonzero(A[r]))
            lines.append(f"row {rel} {b[r]:.17g} {nz}")
    return "\n".join(lines) + "\n"
