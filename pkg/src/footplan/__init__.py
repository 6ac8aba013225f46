"""Footstep planning on piecewise-planar terrain.

Selects contact surfaces and footstep positions for biped/quadruped gaits
using either an exact mixed-integer formulation or its L1 relaxation, with
candidate-surface pruning from a kinodynamic root-trajectory planner and a
quadratic refinement of the final positions. Ships with scene generators,
in-house LP/QP/branch-and-bound solvers, an exhaustive verification
oracle, and a benchmark CLI.
"""

from .errors import (BigMTooSmall, EmptyCandidates, FootplanError,
                     GuideNotFound, InfeasibleSelection, InvalidParams,
                     NumericalBreakdown, OverflowGuard, ParseError,
                     PlanningFailed, SteeringInfeasible, TooLarge,
                     ValidationError)
from .geometry import (ContactSurface, Polytope, RigidTransform, Scene,
                       polytope_surface_intersects, quasi_flat,
                       rotated_polytope, surface_contains)
from .scenario import (Pose, RobotModel, SceneSpec, default_biped,
                       default_quadruped, generate_scene, load_robot,
                       load_scene, named_robot, named_scene, palette_scene,
                       save_robot, save_scene, stance_positions)
from .reachability import (ConstraintRows, PhaseVars, Row, Support,
                           candidate_surfaces, com_kinematic_rows,
                           equilibrium_rows, quadruped_com_substitution,
                           relative_foot_rows)
from .guide import (GuideConfig, RootState, RootTrajectory, ScheduleStep,
                    StepSchedule, dimt_steer, discretize, rrt_plan,
                    state_from_pose, trajectory_csv, validate_trajectory)
from .formulation import (MIP_FEAS, MIP_OPT, QP_REFINE, SL1M, ProblemInstance,
                          VariableLayout, build_fixed_instance, build_instance,
                          build_refinement, dump_instance, objective_cost)
from .solve import (MipStats, Sl1mOutcome, SolveResult, assert_big_m_margin,
                    big_m_margin_violations, branch_and_bound, reweighted_l1,
                    sl1m_solve, solve_lp, solve_qp)
from .pipeline import (SL1M_REWEIGHTED, FootstepPlan, OracleResult, PlanQuery,
                       PlanStep, VerifyReport, brute_force_oracle,
                       plan_footsteps, save_plan, verify_plan)
from .bench import BenchConfig, BenchmarkReport, run_benchmark

__version__ = "0.1.0"
