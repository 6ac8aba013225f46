"""Benchmark matrix runner: scenarios x methods x pruning x repetitions.

Each cell runs R seeded queries and aggregates cost, solver statistics,
and wall times (trajectory / build / solve / refine). Failed runs are
recorded, never dropped, so a report row exists for every configured
cell. Non-timing columns are deterministic for fixed seeds.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PlanningFailed
from .pipeline import PlanQuery, plan_footsteps
from .scenario import named_scene

CSV_COLUMNS = (
    "scenario", "method", "pruning", "runs", "successes", "success_rate",
    "n_steps", "m_surfaces", "avg_candidates", "cost_mean", "cost_std",
    "node_count_mean", "trials_mean", "trajectory_ms_mean", "build_ms_mean",
    "solve_ms_mean", "refine_ms_mean", "total_ms_mean", "solve_ms_std",
    "workers", "status",
)


@dataclass(frozen=True)
class BenchConfig:
    scenarios: tuple[str, ...]
    methods: tuple[str, ...]
    pruning: tuple[str, ...] = ("trajectory",)
    runs: int = 5
    seed: int = 0
    dt: float = 1.0
    robot: str = "biped"
    presolve: bool = True
    workers: int = 1


@dataclass
class BenchCell:
    scenario: str
    method: str
    pruning: str
    runs: int
    successes: int
    n_steps: float
    m_surfaces: int
    avg_candidates: float
    cost_mean: float
    cost_std: float
    node_count_mean: float
    trials_mean: float
    trajectory_ms_mean: float
    build_ms_mean: float
    solve_ms_mean: float
    refine_ms_mean: float
    total_ms_mean: float
    solve_ms_std: float
    workers: int
    status: str

    @property
    def success_rate(self) -> float:
        return self.successes / self.runs if self.runs else 0.0


@dataclass(frozen=True)
class BenchmarkReport:
    cells: tuple[BenchCell, ...]

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for c in self.cells:
            writer.writerow([
                c.scenario, c.method, c.pruning, c.runs, c.successes,
                _fmt(c.success_rate), _fmt(c.n_steps), c.m_surfaces,
                _fmt(c.avg_candidates), _fmt(c.cost_mean), _fmt(c.cost_std),
                _fmt(c.node_count_mean), _fmt(c.trials_mean),
                _fmt(c.trajectory_ms_mean), _fmt(c.build_ms_mean),
                _fmt(c.solve_ms_mean), _fmt(c.refine_ms_mean),
                _fmt(c.total_ms_mean), _fmt(c.solve_ms_std),
                c.workers, c.status,
            ])
        return out.getvalue()


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    return f"{v:.9g}"


def _run_one(args):
    scenario, method, pruning, robot, dt, seed, presolve = args
    from .scenario import named_robot
    scene, start, goal = named_scene(scenario)
    model = named_robot(robot)
    query = PlanQuery(scene, model, start, goal, method=method, pruning=pruning,
                      dt=dt, seed=seed, presolve=presolve)
    t0 = time.perf_counter()
    try:
        plan = plan_footsteps(query)
    except PlanningFailed as exc:
        return {"ok": False, "stage": exc.stage, "cause": exc.cause,
                "total_ms": 1e3 * (time.perf_counter() - t0)}
    s = plan.stats
    return {
        "ok": True,
        "cost": plan.cost,
        "n_steps": s.n_steps,
        "avg_candidates": s.mean_candidates,
        "node_count": s.node_count,
        "trials": s.trials_used,
        "trajectory_ms": s.trajectory_ms,
        "build_ms": s.build_ms,
        "solve_ms": s.solve_ms,
        "refine_ms": s.refine_ms,
        "total_ms": 1e3 * (time.perf_counter() - t0),
    }


def run_benchmark(config: BenchConfig) -> BenchmarkReport:
    jobs = []
    for scenario in config.scenarios:
        for method in config.methods:
            for pruning in config.pruning:
                for r in range(config.runs):
                    jobs.append(((scenario, method, pruning), (
                        scenario, method, pruning, config.robot, config.dt,
                        config.seed + r, config.presolve)))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_one, [a for _, a in jobs]))
    else:
        results = [_run_one(a) for _, a in jobs]

    grouped: dict[tuple, list[dict]] = {}
    for (key, _), res in zip(jobs, results):
        grouped.setdefault(key, []).append(res)

    cells = []
    for scenario in config.scenarios:
        m_surfaces = named_scene(scenario)[0].m
        for method in config.methods:
            for pruning in config.pruning:
                runs = grouped[(scenario, method, pruning)]
                ok = [r for r in runs if r["ok"]]
                fails = [r for r in runs if not r["ok"]]

                def mean(key, rows=ok):
                    vals = [r[key] for r in rows if r.get(key) is not None]
                    return float(np.mean(vals)) if vals else np.nan

                def std(key, rows=ok):
                    vals = [r[key] for r in rows if r.get(key) is not None]
                    return float(np.std(vals)) if vals else np.nan

                status = "ok" if not fails else (
                    "failed:" + fails[0]["stage"] + "/" + fails[0]["cause"]
                    if not ok else "partial")
                cells.append(BenchCell(
                    scenario=scenario, method=method, pruning=pruning,
                    runs=len(runs), successes=len(ok),
                    n_steps=mean("n_steps"), m_surfaces=m_surfaces,
                    avg_candidates=mean("avg_candidates"),
                    cost_mean=mean("cost"), cost_std=std("cost"),
                    node_count_mean=mean("node_count"),
                    trials_mean=mean("trials"),
                    trajectory_ms_mean=mean("trajectory_ms"),
                    build_ms_mean=mean("build_ms"),
                    solve_ms_mean=mean("solve_ms"),
                    refine_ms_mean=mean("refine_ms"),
                    total_ms_mean=mean("total_ms", runs),
                    solve_ms_std=std("solve_ms"),
                    workers=config.workers, status=status))
    return BenchmarkReport(tuple(cells))
