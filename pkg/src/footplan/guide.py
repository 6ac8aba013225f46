"""Root-trajectory guide planner.

A sampling-based planner grows a tree of root states connected by
per-axis minimum-time double-integrator profiles under symmetric velocity
and acceleration bounds. Axes are synchronized to the slowest one by
searching a reduced acceleration limit whose minimum time matches the
target duration, so endpoint positions and velocities interpolate
exactly. Validated trajectories are discretized into a step schedule that
fixes the step count, per-step yaw, and the pruned candidate surfaces.
"""

from __future__ import annotations

import io
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCandidates, GuideNotFound, SteeringInfeasible
from .geometry import RigidTransform, Scene, _freeze
from .reachability import candidate_surfaces
from .scenario import Pose, RobotModel

GRAVITY = 9.81
SAMPLE_DT = 0.02
GOAL_POS_TOL = 0.05
GOAL_YAW_TOL = 0.1


@dataclass(frozen=True)
class RootState:
    """Root pose plus com velocity; the com is colocated with the root."""

    position: np.ndarray
    yaw: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "position", _freeze(np.asarray(self.position, float).reshape(3)))
        object.__setattr__(self, "velocity", _freeze(np.asarray(self.velocity, float).reshape(3)))

    def pose(self) -> RigidTransform:
        return RigidTransform.from_yaw(self.yaw, self.position)


def _wrap_angle(a: float) -> float:
    return float(np.arctan2(np.sin(a), np.cos(a)))


# ---------------------------------------------------------------------------
# Per-axis bang-bang / trapezoid profiles


@dataclass(frozen=True)
class AxisProfile:
    """Piecewise-constant-acceleration profile for one axis."""

    x0: float
    v0: float
    pieces: tuple[tuple[float, float], ...]  # (duration, acceleration)

    def duration(self) -> float:
        return sum(d for d, _ in self.pieces)

    def state_at(self, t: float) -> tuple[float, float, float]:
        x, v = self.x0, self.v0
        remaining = t
        for dur, acc in self.pieces:
            if remaining <= dur:
                return (x + v * remaining + 0.5 * acc * remaining ** 2,
                        v + acc * remaining, acc)
            x += v * dur + 0.5 * acc * dur ** 2
            v += acc * dur
            remaining -= dur
        return x, v, 0.0

    def end_state(self) -> tuple[float, float]:
        x, v, _ = self.state_at(self.duration())
        return x, v

    def peak_abs(self) -> tuple[float, float]:
        """(max |velocity|, max |acceleration|) over the profile."""
        vmax = abs(self.v0)
        amax = 0.0
        v = self.v0
        for dur, acc in self.pieces:
            v_end = v + acc * dur
            vmax = max(vmax, abs(v), abs(v_end))
            amax = max(amax, abs(acc))
            v = v_end
        return vmax, amax


def _branch_profile(dx, v0, v1, vmax, amax, sign):
    """Min-time accelerate(sign)-[cruise]-decelerate profile, or None."""
    if amax <= 0.0:
        return None
    arg = sign * amax * dx + 0.5 * (v0 * v0 + v1 * v1)
    if arg < -1e-15:
        return None
    root = np.sqrt(max(arg, 0.0))
    if root + 1e-12 < max(sign * v0, sign * v1):
        return None
    vp = sign * root
    if abs(vp) <= vmax + 1e-12:
        t1 = (vp - v0) / (sign * amax)
        t2 = (vp - v1) / (sign * amax)
        t1, t2 = max(t1, 0.0), max(t2, 0.0)
        return (t1 + t2, ((t1, sign * amax), (t2, -sign * amax)))
    # Velocity-saturated trapezoid.
    vc = sign * vmax
    t1 = (vc - v0) / (sign * amax)
    t3 = (vc - v1) / (sign * amax)
    if t1 < -1e-12 or t3 < -1e-12:
        return None
    d1 = v0 * t1 + 0.5 * sign * amax * t1 * t1
    d3 = vc * t3 - 0.5 * sign * amax * t3 * t3
    tc = (dx - d1 - d3) / vc
    if tc < -1e-12:
        return None
    return (t1 + max(tc, 0.0) + t3, ((t1, sign * amax), (max(tc, 0.0), 0.0), (t3, -sign * amax)))


def _axis_min_time(dx, v0, v1, vmax, amax):
    """Minimum duration and its profile pieces over both branch signs."""
    best = None
    for sign in (1.0, -1.0):
        cand = _branch_profile(dx, v0, v1, vmax, amax, sign)
        if cand is not None and (best is None or cand[0] < best[0] - 1e-15):
            best = cand
    return best


def _axis_timed_profile(dx, v0, v1, vmax, amax, duration):
    """Profile of exactly `duration` respecting the bounds, or None.

    Searches a reduced acceleration limit per branch sign: the branch
    minimum time is continuous and non-increasing in the limit, so a
    bracketing grid plus bisection lands on the requested duration.
    """
    if abs(dx) < 1e-15 and abs(v0) < 1e-15 and abs(v1) < 1e-15:
        return ((duration, 0.0),)
    best = _axis_min_time(dx, v0, v1, vmax, amax)
    if best is not None and abs(best[0] - duration) <= 1e-9:
        return best[1]
    if best is not None and best[0] > duration + 1e-9:
        return None
    for sign in (1.0, -1.0):
        grid = amax * np.logspace(0.0, -8.0, 60)
        prev_a = None
        bracket = None
        for a in grid:
            cand = _branch_profile(dx, v0, v1, vmax, a, sign)
            if cand is None:
                prev_a = None
                continue
            if cand[0] >= duration - 1e-12:
                if prev_a is not None:
                    bracket = (a, prev_a)
                elif abs(cand[0] - duration) <= 1e-9:
                    return cand[1]
                break
            prev_a = a
        if bracket is None:
            continue
        lo, hi = bracket  # T(lo) >= duration >= T(hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            cand = _branch_profile(dx, v0, v1, vmax, mid, sign)
            if cand is None or cand[0] >= duration:
                lo = mid
            else:
                hi = mid
        cand = _branch_profile(dx, v0, v1, vmax, lo, sign)
        if cand is not None and abs(cand[0] - duration) <= 1e-7:
            return cand[1]
    return None


# ---------------------------------------------------------------------------
# Trajectories


@dataclass(frozen=True)
class TrajectorySegment:
    duration: float
    axes: tuple[AxisProfile, AxisProfile, AxisProfile]
    yaw0: float
    yaw1: float

    def com_at(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = [ax.state_at(t) for ax in self.axes]
        return (np.array([q[0] for q in s]), np.array([q[1] for q in s]),
                np.array([q[2] for q in s]))

    def yaw_at(self, t: float) -> float:
        if self.duration <= 0.0:
            return self.yaw1
        f = min(max(t / self.duration, 0.0), 1.0)
        return self.yaw0 + f * _wrap_angle(self.yaw1 - self.yaw0)


@dataclass(frozen=True)
class RootTrajectory:
    """Chained steering segments; evaluation is continuous in time."""

    start: RootState
    segments: tuple[TrajectorySegment, ...] = ()

    def __post_init__(self):
        starts = []
        acc = 0.0
        for seg in self.segments:
            starts.append(acc)
            acc += seg.duration
        object.__setattr__(self, "_starts", tuple(starts))
        object.__setattr__(self, "_duration", acc)

    @property
    def duration(self) -> float:
        return self._duration

    def _locate(self, t: float) -> tuple[TrajectorySegment, float]:
        idx = bisect_right(self._starts, t) - 1
        idx = min(max(idx, 0), len(self.segments) - 1)
        return self.segments[idx], t - self._starts[idx]

    def state_at(self, t: float) -> RootState:
        if not self.segments:
            return self.start
        t = min(max(t, 0.0), self.duration)
        seg, local = self._locate(t)
        pos, vel, _ = seg.com_at(local)
        return RootState(pos, _wrap_angle(seg.yaw_at(local)), vel)

    def acceleration_at(self, t: float) -> np.ndarray:
        if not self.segments:
            return np.zeros(3)
        t = min(max(t, 0.0), self.duration)
        seg, local = self._locate(t)
        return seg.com_at(local)[2]

    def end_state(self) -> RootState:
        return self.state_at(self.duration)

    def truncated(self, new_duration: float) -> "RootTrajectory":
        new_duration = min(max(new_duration, 0.0), self.duration)
        if new_duration <= 0.0:
            return RootTrajectory(self.start)
        kept = []
        acc = 0.0
        for seg in self.segments:
            if acc + seg.duration <= new_duration + 1e-12:
                kept.append(seg)
                acc += seg.duration
                continue
            local = new_duration - acc
            if local > 1e-12:
                axes = tuple(_cut_axis(ax, local) for ax in seg.axes)
                kept.append(TrajectorySegment(local, axes, seg.yaw0, seg.yaw_at(local)))
            break
        return RootTrajectory(self.start, tuple(kept))

    def concatenated(self, other: "RootTrajectory") -> "RootTrajectory":
        return RootTrajectory(self.start, self.segments + other.segments)


def _cut_axis(ax: AxisProfile, duration: float) -> AxisProfile:
    pieces = []
    remaining = duration
    for dur, acc in ax.pieces:
        if remaining <= dur:
            pieces.append((remaining, acc))
            break
        pieces.append((dur, acc))
        remaining -= dur
    return AxisProfile(ax.x0, ax.v0, tuple(pieces))


def dimt_steer(s0: RootState, s1: RootState, vel_max, acc_max) -> RootTrajectory:
    """Minimum-time synchronized steering between two root states.

    Raises SteeringInfeasible when an axis cannot be slowed to match the
    limiting axis; callers treat that as a failed tree edge.
    """
    vel_max = np.asarray(vel_max, dtype=float)
    acc_max = np.asarray(acc_max, dtype=float)
    if np.any(vel_max <= 0) or np.any(acc_max <= 0):
        raise SteeringInfeasible("velocity/acceleration bounds must be positive")
    if np.any(np.abs(s0.velocity) > vel_max + 1e-9) or np.any(np.abs(s1.velocity) > vel_max + 1e-9):
        raise SteeringInfeasible("endpoint velocity outside bounds")

    dx = s1.position - s0.position
    mins = []
    for k in range(3):
        cand = _axis_min_time(dx[k], s0.velocity[k], s1.velocity[k], vel_max[k], acc_max[k])
        if cand is None:
            raise SteeringInfeasible(f"axis {k} admits no profile")
        mins.append(cand)
    duration = max(c[0] for c in mins)
    if duration <= 1e-12:
        return RootTrajectory(s0)

    axes = []
    for k in range(3):
        if abs(mins[k][0] - duration) <= 1e-9:
            pieces = mins[k][1]
        else:
            pieces = _axis_timed_profile(dx[k], s0.velocity[k], s1.velocity[k],
                                         vel_max[k], acc_max[k], duration)
            if pieces is None:
                raise SteeringInfeasible(f"axis {k} cannot be synchronized to {duration:.3f}s")
        total = sum(d for d, _ in pieces)
        if pieces and abs(total - duration) > 0.0:
            last_d, last_a = pieces[-1]
            pieces = pieces[:-1] + ((max(last_d + duration - total, 0.0), last_a),)
        axes.append(AxisProfile(s0.position[k], s0.velocity[k], tuple(pieces)))
    seg = TrajectorySegment(duration, tuple(axes), s0.yaw, s0.yaw + _wrap_angle(s1.yaw - s0.yaw))
    return RootTrajectory(s0, (seg,))


# ---------------------------------------------------------------------------
# Validation


def _candidates_nonempty(state: RootState, scene: Scene, model: RobotModel,
                         hint: list) -> bool:
    from .geometry import polytope_surface_intersects
    pose = state.pose()
    for k in range(model.n_feet):
        rom = model.rom[k]
        j = hint[k]
        if j is not None and polytope_surface_intersects(rom, pose, scene.surfaces[j]):
            continue
        found = None
        for s in scene.surfaces:
            if polytope_surface_intersects(rom, pose, s):
                found = s.id
                break
        if found is None:
            return False
        hint[k] = found
    return True


def validate_trajectory(traj: RootTrajectory, scene: Scene, model: RobotModel,
                        sample_dt: float = SAMPLE_DT) -> RootTrajectory:
    """Longest prefix whose sampled states keep every effector's reach on
    the terrain and respect the quasi-static acceleration bounds."""
    total = traj.duration
    times = np.arange(0.0, total + sample_dt * 0.5, sample_dt)
    if not len(times) or times[-1] < total - 1e-12:
        times = np.append(times, total)
    acc_limit = np.asarray(model.com_acc_max, dtype=float)
    vel_limit = np.asarray(model.com_vel_max, dtype=float)
    lateral_cap = scene.friction * GRAVITY
    hint: list = [None] * model.n_feet
    last_good = None
    for t in times:
        state = traj.state_at(t)
        acc = traj.acceleration_at(t)
        if (np.hypot(acc[0], acc[1]) > lateral_cap + 1e-9
                or np.any(np.abs(acc) > acc_limit + 1e-9)
                or np.any(np.abs(state.velocity) > vel_limit + 1e-9)):
            break
        if not _candidates_nonempty(state, scene, model, hint):
            break
        last_good = t
    if last_good is None:
        return RootTrajectory(traj.start)
    if last_good >= total - 1e-12:
        return traj
    return traj.truncated(float(last_good))


# ---------------------------------------------------------------------------
# Tree planner


@dataclass(frozen=True)
class GuideConfig:
    seed: int = 0
    max_iters: int = 400
    goal_bias: float = 0.1
    yaw_weight: float = 0.5         # meters per radian in the distance metric
    inflate: float = 0.5            # sampling margin around the scene box
    min_edge_duration: float = 0.05
    edge_keep_fraction: float = 0.99


def root_state_at(scene: Scene, model: RobotModel, x: float, y: float,
                  yaw: float = 0.0) -> RootState | None:
    """Root state at nominal height above the terrain under the stance."""
    c, s = np.cos(yaw), np.sin(yaw)
    heights = []
    for ox, oy in np.vstack([[0.0, 0.0], model.stance_offsets]):
        px, py = x + c * ox - s * oy, y + s * ox + c * oy
        surf = scene.surface_below(px, py)
        if surf is not None:
            heights.append(surf.height_at(px, py))
    if not heights:
        return None
    return RootState(np.array([x, y, max(heights) + model.nominal_root_height]), yaw)


def state_from_pose(scene: Scene, model: RobotModel, pose: Pose) -> RootState:
    state = root_state_at(scene, model, pose.position[0], pose.position[1], pose.yaw)
    if state is None:
        raise EmptyCandidates(-1, None)
    return state


def _goal_reached(state: RootState, goal: RootState) -> bool:
    return (np.linalg.norm(state.position - goal.position) <= GOAL_POS_TOL
            and abs(_wrap_angle(state.yaw - goal.yaw)) <= GOAL_YAW_TOL
            and np.all(np.abs(state.velocity) <= 1e-6))


def rrt_plan(start: RootState, goal: RootState, scene: Scene, model: RobotModel,
             config: GuideConfig = GuideConfig()) -> RootTrajectory:
    """Grow a steering tree from start until the goal state is connected.

    Deterministic for a fixed seed. The returned trajectory validates
    end-to-end and reaches the goal within the module tolerances.
    """
    rng = np.random.default_rng(config.seed)
    hint: list = [None] * model.n_feet
    if not _candidates_nonempty(start, scene, model, list(hint)):
        raise EmptyCandidates(-1, None)
    if _goal_reached(start, goal):
        return RootTrajectory(start)

    lo, hi = scene.aabb()
    lo = lo[:2] - config.inflate
    hi = hi[:2] + config.inflate
    nodes: list[RootState] = [start]
    parents: list[int] = [-1]
    edges: list[RootTrajectory | None] = [None]
    positions = [start.position]
    yaws = [start.yaw]

    def nearest(target: RootState) -> int:
        pos = np.asarray(positions)
        d = np.linalg.norm(pos - target.position, axis=1)
        dy = np.abs(np.arctan2(np.sin(np.asarray(yaws) - target.yaw),
                               np.cos(np.asarray(yaws) - target.yaw)))
        return int(np.argmin(d + config.yaw_weight * dy))

    for _ in range(config.max_iters):
        if rng.uniform() < config.goal_bias:
            target = goal
        else:
            x, y = rng.uniform(lo, hi)
            yaw = rng.uniform(-np.pi, np.pi)
            target = root_state_at(scene, model, float(x), float(y), float(yaw))
            if target is None:
                continue
        near_idx = nearest(target)
        try:
            edge = dimt_steer(nodes[near_idx], target, model.com_vel_max, model.com_acc_max)
        except SteeringInfeasible:
            continue
        if edge.duration <= 1e-12:
            continue
        prefix = validate_trajectory(edge, scene, model)
        if prefix.duration < config.min_edge_duration:
            continue
        new_state = prefix.end_state()
        nodes.append(new_state)
        parents.append(near_idx)
        edges.append(prefix)
        positions.append(new_state.position)
        yaws.append(new_state.yaw)

        full_edge = prefix.duration >= config.edge_keep_fraction * edge.duration - 1e-12
        if target is goal and full_edge and _goal_reached(new_state, goal):
            chain = []
            idx = len(nodes) - 1
            while parents[idx] >= 0:
                chain.append(edges[idx])
                idx = parents[idx]
            path = RootTrajectory(start)
            for e in reversed(chain):
                path = path.concatenated(e)
            checked = validate_trajectory(path, scene, model)
            if checked.duration >= path.duration - 1e-9:
                return path
    raise GuideNotFound(f"no guide trajectory after {config.max_iters} iterations")


# ---------------------------------------------------------------------------
# Discretization


@dataclass(frozen=True)
class ScheduleStep:
    index: int
    time: float
    position: np.ndarray
    yaw: float
    effector: int
    candidates: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "position", _freeze(self.position))


@dataclass(frozen=True)
class StepSchedule:
    dt: float
    steps: tuple[ScheduleStep, ...]
    start: Pose
    goal: Pose

    @property
    def n(self) -> int:
        return len(self.steps)

    def mean_candidates(self) -> float:
        if not self.steps:
            return 0.0
        return float(np.mean([len(s.candidates) for s in self.steps]))


def discretize(traj: RootTrajectory, dt: float, scene: Scene, model: RobotModel,
               gait: tuple[int, ...] | None = None) -> StepSchedule:
    """One step per dt of trajectory time, last step at the trajectory end."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    gait = tuple(gait) if gait is not None else model.gait
    total = traj.duration
    n = int(np.ceil(total / dt - 1e-12)) if total > 1e-12 else 0
    steps = []
    for i in range(n):
        t = min((i + 1) * dt, total)
        state = traj.state_at(t)
        effector = gait[i % len(gait)]
        cands = candidate_surfaces(state.pose(), effector, scene, model, step_index=i)
        steps.append(ScheduleStep(i, float(t), state.position, state.yaw,
                                  effector, cands))
    s0 = traj.start
    s1 = traj.end_state()
    return StepSchedule(dt, tuple(steps),
                        Pose(s0.position, s0.yaw), Pose(s1.position, s1.yaw))


def trajectory_csv(traj: RootTrajectory, sample_dt: float = SAMPLE_DT) -> str:
    """Sampled trajectory table: root pose and com state per row."""
    out = io.StringIO()
    out.write("t,x,y,z,yaw,cx,cy,cz,cvx,cvy,cvz\n")
    times = np.arange(0.0, traj.duration + sample_dt * 0.5, sample_dt)
    if not len(times) or times[-1] < traj.duration - 1e-12:
        times = np.append(times, traj.duration)
    for t in times:
        st = traj.state_at(float(t))
        p, v = st.position, st.velocity
        vals = [t, p[0], p[1], p[2], st.yaw, p[0], p[1], p[2], v[0], v[1], v[2]]
        out.write(",".join(f"{x:.9g}" for x in vals) + "\n")
    return out.getvalue()
