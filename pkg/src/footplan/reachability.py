"""Feasibility constraint rows: candidate pruning, support, reach, stride.

Rows are emitted symbolically against variable references so the assembly
into a concrete matrix (and the big-M slack wiring) stays in one place.
A reference is a tuple: ("p", i) for footstep i, ("c", i, m) for the two
per-phase com points, ("sel", i, j) for the selection slack of surface j
at step i, ("dev", i, j) for the plane deviation. Constant support
positions (the initial stance) are folded into the right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCandidates
from .geometry import (Polytope, RigidTransform, Scene, frame_rotation,
                       polytope_surface_intersects, yaw_rotation, _freeze)
from .scenario import RobotModel

VarRef = tuple


@dataclass(frozen=True)
class Row:
    """One affine constraint: sum(coeff . var) REL rhs + slack_coeff * slack."""

    coeffs: tuple[tuple[VarRef, np.ndarray], ...]
    rel: str                      # "le" or "eq"
    rhs: float
    slack: VarRef | None = None
    slack_coeff: float = 0.0
    kind: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coeffs",
                           tuple((ref, _freeze(np.atleast_1d(np.asarray(v, float))))
                                 for ref, v in self.coeffs))
        for _, v in self.coeffs:
            if not np.all(np.isfinite(v)):
                raise ValueError("non-finite row coefficient")

    def residual(self, lookup) -> float:
        """lhs - rhs - slack term; <= 0 satisfied for 'le', == 0 for 'eq'."""
        lhs = 0.0
        for ref, v in self.coeffs:
            lhs += float(v @ np.atleast_1d(lookup(ref)))
        rhs = self.rhs
        if self.slack is not None:
            rhs += self.slack_coeff * float(lookup(self.slack))
        return lhs - rhs


ConstraintRows = list


@dataclass(frozen=True)
class Support:
    """A foot already on the ground: either a planned step or a constant."""

    effector: int
    yaw: float
    ref: VarRef | None = None
    position: np.ndarray | None = None
    candidates: tuple[int, ...] = ()
    normal: np.ndarray | None = None  # support-surface normal when constant

    def __post_init__(self):
        if self.position is not None:
            object.__setattr__(self, "position", _freeze(self.position))
        if self.normal is not None:
            object.__setattr__(self, "normal", _freeze(self.normal))

    @property
    def fixed(self) -> bool:
        return self.ref is None


@dataclass(frozen=True)
class PhaseVars:
    """Variable references and context for one step/phase."""

    index: int
    effector: int
    yaw: float
    candidates: tuple[int, ...]
    foot: VarRef
    com0: VarRef
    com1: VarRef
    prev: Support
    # Per-effector latest placements just before / after this step
    # (used by the quadruped com coupling; empty for bipeds).
    supports_before: tuple[Support, ...] = ()
    supports_after: tuple[Support, ...] = ()

    def slack(self, surface_id: int) -> VarRef:
        return ("sel", self.index, surface_id)


def candidate_surfaces(root_pose: RigidTransform, effector: int,
                       scene: Scene, model: RobotModel,
                       step_index: int | None = None) -> tuple[int, ...]:
    """Surface ids whose polygon meets the effector's posed reach volume."""
    rom = model.rom[effector]
    ids = tuple(s.id for s in scene.surfaces
                if polytope_surface_intersects(rom, root_pose, s))
    if not ids:
        raise EmptyCandidates(effector, step_index)
    return ids


def _emit(rows, poly: Polytope, target_ref, target_const, base: Support | None,
          base_ref, base_const, slack, slack_coeff, kind):
    """Rows poly.A (target - base) <= poly.b (+ slack), constants folded."""
    for a, rhs in zip(poly.A, poly.b):
        coeffs = []
        r = float(rhs)
        if target_ref is not None:
            coeffs.append((target_ref, a))
        else:
            r -= float(a @ target_const)
        if base_ref is not None:
            coeffs.append((base_ref, -a))
        elif base_const is not None:
            r += float(a @ base_const)
        rows.append(Row(tuple(coeffs), "le", r, slack, slack_coeff, kind))


def _oriented(poly: Polytope, yaw: float, normal) -> Polytope:
    return poly.rotate(frame_rotation(yaw, normal))


def _support_orientations(support: Support, scene: Scene):
    """(slack-or-None, rotation normal, yaw) per active candidate of a support."""
    if support.fixed:
        yield None, support.normal, support.yaw
    else:
        for j in support.candidates:
            yield ("sel", None, j), scene.surfaces[j].normal, support.yaw


def equilibrium_rows(phase: PhaseVars, model: RobotModel, scene: Scene,
                     big_m: float = 100.0) -> ConstraintRows:
    """Keep each phase's two com points above the supporting foot polygon.

    The support polygon is rotated by the support yaw only, so the rows
    touch just the xy coordinates of com and foot.
    """
    rows: ConstraintRows = []
    prev = phase.prev
    shape_prev = model.foot_shape[prev.effector].rotate(yaw_rotation(prev.yaw))
    if prev.fixed:
        _emit(rows, shape_prev, phase.com0, None, None, None, prev.position,
              None, 0.0, "support-entry")
    else:
        for j in prev.candidates:
            _emit(rows, shape_prev, phase.com0, None, None, prev.ref, None,
                  ("sel", prev_index(phase), j), big_m, "support-entry")
    shape_self = model.foot_shape[phase.effector].rotate(yaw_rotation(phase.yaw))
    for j in phase.candidates:
        _emit(rows, shape_self, phase.com1, None, None, phase.foot, None,
              phase.slack(j), big_m, "support-exit")
    return rows


def prev_index(phase: PhaseVars) -> int:
    return phase.index - 1


def com_kinematic_rows(phase: PhaseVars, model: RobotModel, scene: Scene,
                       big_m: float = 100.0) -> ConstraintRows:
    """Bound both com points relative to the two active contacts."""
    rows: ConstraintRows = []
    contacts = [(phase.prev, prev_index(phase)),
                (Support(phase.effector, phase.yaw, ref=phase.foot,
                         candidates=phase.candidates), phase.index)]
    for support, step_idx in contacts:
        reach = model.com_kin[support.effector]
        for slack_proto, normal, yaw in _support_orientations(support, scene):
            poly = _oriented(reach, yaw, normal)
            slack = ("sel", step_idx, slack_proto[2]) if slack_proto else None
            coeff = big_m if slack else 0.0
            for com_ref in (phase.com0, phase.com1):
                if support.fixed:
                    _emit(rows, poly, com_ref, None, None, None, support.position,
                          slack, coeff, "com-reach")
                else:
                    _emit(rows, poly, com_ref, None, None, support.ref, None,
                          slack, coeff, "com-reach")
    return rows


def relative_foot_rows(phase: PhaseVars, model: RobotModel, scene: Scene,
                       big_m: float = 100.0) -> ConstraintRows:
    """Stride rows: this footstep relative to the previous one."""
    rows: ConstraintRows = []
    prev = phase.prev
    stride = model.rel_foot[prev.effector]
    for slack_proto, normal, yaw in _support_orientations(prev, scene):
        poly = _oriented(stride, yaw, normal)
        slack = ("sel", prev_index(phase), slack_proto[2]) if slack_proto else None
        coeff = big_m if slack else 0.0
        if prev.fixed:
            _emit(rows, poly, phase.foot, None, None, None, prev.position,
                  slack, coeff, "stride")
        else:
            _emit(rows, poly, phase.foot, None, None, prev.ref, None,
                  slack, coeff, "stride")
    return rows


def quadruped_com_substitution(phase: PhaseVars, model: RobotModel) -> ConstraintRows:
    """Pin com xy to the fixed-weight average of the active contact feet.

    Emitted as equality rows for both per-phase com points; com z stays a
    free variable bounded by the reach rows.
    """
    rows: ConstraintRows = []
    axes = (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    for com_ref, supports in ((phase.com0, phase.supports_before),
                              (phase.com1, phase.supports_after)):
        weights = model.phase_weights(phase.index)
        active = [s for s in supports]
        for axis in axes:
            coeffs = [(com_ref, axis)]
            rhs = 0.0
            for sup in active:
                w = weights[sup.effector]
                if sup.fixed:
                    rhs += w * float(axis @ sup.position)
                else:
                    coeffs.append((sup.ref, -w * axis))
            rows.append(Row(tuple(coeffs), "eq", rhs, None, 0.0, "com-average"))
    return rows
