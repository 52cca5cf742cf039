"""Distributed slot-by-slot power allocation on interfering wireless links.

Simulation library and CLI for packing-style best responses, their
sequential and randomized multi-link dynamics, exhaustive rate-region
oracles, and queue-driven target selection.
"""

from .core import (
    NetworkConfig,
    PowerAllocation,
    RATE_TOL,
    POWER_TOL,
    interference,
    interference_matrix,
    link_rate_given_interference,
    link_rates,
    shannon_rate,
    shannon_rate_inverse,
)
from .packing import LinkView, UtilityParams, bpp_allocate, pp_allocate, utility
from .iterative import (
    IterationResult,
    SimTrace,
    UpdateSchedule,
    ibpp_run,
    ipp_run,
    is_repulsive,
    sample_repulsive_allocation,
)
from .perturbed import (
    AgentState,
    PerturbParams,
    check_a1,
    check_a2,
    ipbpp_run,
    itipbpp_run,
    random_binary_row,
)
from .region import (
    RegionSample,
    boundary_grid,
    compose_frame_from_mixture,
    conv_hull_weights,
    coverage_deficit,
    enumerate_s1,
    enumerate_sm,
    hull_pareto_polyline,
    in_conv_hull,
    in_coord_convex,
    pareto_boundary,
    sample_feasible_target,
    sample_from_closure,
    sample_pc_region,
)
from .queueing import (
    ArrivalProcess,
    EstimatorState,
    QueueState,
    run_stability_experiment,
    step_queues,
    target_from_estimate,
)
from .harness import (
    ExperimentReport,
    ScenarioConfig,
    ScenarioError,
    TopologySpec,
    random_topology,
    run_scenario,
    shared_receiver_targets,
    sweep_alpha,
    sweep_frame_size,
    three_link_shared_receiver_network,
    two_link_asymmetric_network,
    two_link_symmetric_network,
)

__version__ = "0.1.0"
