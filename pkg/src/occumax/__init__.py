"""Tabular average-reward MDPs regularized by a mixture of action and state entropy."""

__version__ = "0.1.0"

from .dual import (DualSolution, SolverConfig, advantage, dual_gradient, dual_value,
                   extract_solution, joint_from_values, minimize_dual)
from .environments import (GridSpec, ToySolution, grid_spec, make_gridworld, make_ring,
                           make_toy, toy_closed_form)
from .exceptions import (BracketFailure, DeterminismViolation, DimensionMismatch, InvalidMdp,
                         InvalidWeights, NonConvergence, NonzeroReward, NotCommunicating,
                         OccumaxError, TooLarge)
from .fixed_point import iterate_z, solve_fixed_point
from .limits import LimitSolution, solve_alpha_zero, solve_beta_zero, solve_unregularized
from .mdp import (LOG_FLOOR, DefaultDistributions, Mdp, Reachability, Violation, apply_kl_shift,
                  reachability_check, validate_mdp)
from .oracle import OracleResult, best_deterministic_gain, brute_force_primal, finite_difference_gradient
from .primal import (average_total_reward, directional_second_derivative, occupancy_from_policy,
                     policy_from_joint, stationary_distribution)
from .simulator import (IntervalEstimate, TrajectoryStats, corridor_fraction, occupancy_heatmap,
                        sample_trajectory)
