"""Minimax dual control with finite-dimensional information states.

Exact hypothesis-cost recursions for systems whose measurement map has a
bounded-cardinality preimage, grid value iteration over the normalized
information state, a closed-form gain certificate, and a closed-loop
simulator with l2-gain accounting.
"""

from .certify import (Certificate, DissipationReport, check_dissipation,
                      check_inequalities, closed_form_bellman,
                      default_certificate, numeric_bellman_u, vbar)
from .control import (Policy, alternating_policy, ce_sign_policy, make_policy,
                      myopic_literal_policy, myopic_policy,
                      proportional_policy)
from .errors import (DivergenceError, DualctlError, GridStateError,
                     InfeasibleObservationError, InfeasibleStateError,
                     PolicyFaultError, ResourceLimitError)
from .istate import (InfoState, initial_state, normalize_shift,
                     update_generic, update_magnitude)
from .oracle import (brute_force_r, enumerate_histories, evaluate_cost,
                     sup_objective_grid, worst_case_history)
from .sim import (DisturbanceSpec, SearchSettings, Trajectory,
                  adversarial_search, empirical_gain, generate_disturbance,
                  peak_prefix_gain, read_disturbance_file, simulate,
                  write_trajectory_csv)
from .system import (IORealization, LinearModelSet, SystemModel,
                     build_io_realization, integrator_step,
                     make_integrator, make_linear_model_set,
                     measure_magnitude, preimage, stage_cost)
from .vi import (ValueGrid, bellman_step, bellman_u, extract_policy,
                 homogeneity_report, make_value_grid, query_value,
                 value_iterate, write_grid_csv)

__version__ = "0.1.0"
