"""Optimal multi-selection mechanisms under geographic and local differential privacy."""

__version__ = "0.1.0"

from .common import LINE, RING, DisutilityFn, Domain, OffsetSet
from .density import (ExpSegment, PiecewiseExpDensity, PrivacyReport, check_privacy,
                      expected_min_disutility, normalize, pieceexp_project, space_removal)
from .dual import DualProblem, DualTrace, dual_threshold, phase_crossing, solve_dual_ode
from .line_mech import (closed_form_cost, effective_epsilon, laplace_density, median_condition,
                        optimal_offsets_closed, optimal_offsets_recurrence)
from .mechanism import MechanismConfig, line_mechanism, ring_geo_mechanism, ring_local_mechanism
from .mhr import SurvivalFn, mhr_bound_check, mhr_cost, quantile_offsets
from .oracle import CostEstimate, SearchBudget, brute_force_offsets, mc_cost
from .protocol import (ResponseMsg, SelectionRecord, SignalMsg, client_signal, empirical_privacy_audit,
                       parse, pick_best, serialize, server_respond, simulate)
from .ring_mech import (RingMechanism, geo_ring_laplace_cost_k2, geo_ring_optimize_k2,
                        local_ring_mechanism)
