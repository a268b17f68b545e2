"""Sampling-based trajectory planning in the Frenet frame.

The planner samples quintic lateral and quintic or quartic longitudinal
profiles for the active driving mode, realises every pair along a
reference line, filters them for comfort and collisions against
predicted obstacles and returns the cheapest.  A small deterministic 2-D
simulator closes the loop around it.
"""

from .collision import batch_collision_free, disk_model, filter_collision_free, pairwise_collides, rectangles_overlap
from .config import Config, load_config
from .errors import (ConversionError, DegenerateInputError, DomainError, FrenetRangeError, HorizonError,
                     InputError, NoFeasibleTrajectory, PlanningError, ScenarioError)
from .frenet import (CandidateSet, FrenetState, ReferenceLine, Trajectory, build_reference, cartesian_to_frenet,
                     frenet_to_cartesian)
from .localization import EgoEstimate, LocalizationFilter, NavSignals, estimate_to_frenet, kf_predict, kf_update
from .planner import (ComfortLimits, CostWeights, ModeInputs, SamplingGrid, TerminalCondition, assemble_candidates,
                      gen_following, gen_lateral, gen_merging, gen_stopping, gen_velocity_keeping, plan_tick,
                      select_optimal)
from .polynomial import MotionPoly, eval_poly, jerk_integral, max_abs_jerk, solve_quartic, solve_quintic
from .prediction import ObstacleState, PredictedTrajectory, RoadGraph, build_dense_graph, extract_paths, predict_all

__version__ = "0.1.0"
