import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from footplan.geometry import RigidTransform
from footplan.guide import ScheduleStep, StepSchedule
from footplan.reachability import candidate_surfaces
from footplan.scenario import (Pose, SceneSpec, default_biped,
                               default_quadruped, generate_scene)


@pytest.fixture(scope="session")
def biped():
    return default_biped()


@pytest.fixture(scope="session")
def quadruped():
    return default_quadruped()


@pytest.fixture(scope="session")
def stairs_scene():
    return generate_scene(SceneSpec(kind="stairs", count=7, rise=0.1, run=0.3))


@pytest.fixture(scope="session")
def bridge_scene():
    return generate_scene(SceneSpec(kind="bridge"))


def synthetic_schedule(scene, model, start: Pose, goal: Pose, n: int,
                       dt: float = 1.0, gait=None):
    """Straight-line schedule without running the tree planner.

    Root poses are interpolated between start and goal at the model's
    nominal height; candidates come from the real pruning predicate, so
    the schedule is exactly what a perfectly straight guide would give.
    """
    gait = tuple(gait) if gait is not None else model.gait
    steps = []
    for i in range(n):
        f = (i + 1) / n
        xy = (1 - f) * start.position[:2] + f * goal.position[:2]
        surf = scene.surface_below(xy[0], xy[1])
        z = (surf.height_at(*xy) if surf is not None else 0.0) + model.nominal_root_height
        yaw = (1 - f) * start.yaw + f * goal.yaw
        pos = np.array([xy[0], xy[1], z])
        effector = gait[i % len(gait)]
        cands = candidate_surfaces(RigidTransform.from_yaw(yaw, pos), effector,
                                   scene, model, step_index=i)
        steps.append(ScheduleStep(i, (i + 1) * dt, pos, yaw, effector, cands))
    return StepSchedule(dt, tuple(steps), start, goal)


def desk_cases(n_cases: int = 30):
    """Small deterministic scene/schedule pairs for exact-solver checks.

    Mix of flat walks, short stairs, and mini pad fields; candidate
    products stay small enough for exhaustive enumeration.
    """
    cases = []
    k = 0
    while len(cases) < n_cases:
        kind = k % 3
        seed = k // 3
        if kind == 0:
            scene, start, goal = generate_scene(SceneSpec(
                kind="stairs", count=3, rise=0.08, run=0.34,
                goal=(1.35 + 0.05 * (seed % 3), 0.0, 0.0)))
            n = 3 + seed % 3
        elif kind == 1:
            scene, start, goal = generate_scene(SceneSpec(
                kind="rubbles", count=6, tilt=0.1, seed=seed,
                goal=(0.84, 0.0, 0.0)))
            n = 4 + seed % 2
        else:
            scene, start, goal = generate_scene(SceneSpec(kind="bridge"))
            start = Pose(np.array([-0.3, 0.0, 0.0]))
            goal = Pose(np.array([0.9 + 0.1 * (seed % 3), 0.0, 0.0]))
            n = 4 + seed % 3
        cases.append((scene, start, goal, n, f"desk-{k}"))
        k += 1
    return cases
