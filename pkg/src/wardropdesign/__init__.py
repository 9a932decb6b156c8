"""Information design for nonatomic congestion games with an unknown state.

Typical pipeline: optimize a BCWE over a flow grid, round its support to a
rotation-symmetric direct structure, then certify that the induced Bayesian
Wardrop equilibria implement it.
"""
from .bcwe import FlowGrid, ObedienceReport, fully_revealing_bcwe, non_revealing_bcwe, optimize_bcwe, verify_bcwe
from .bwe import (
    InterimCostReport,
    project_outcome,
    solve_bwe,
    total_cost,
    verify_eps_bwe,
)
from .descent import DescentConfig
from .design import (
    LipschitzEstimate,
    RationalApproximation,
    build_direct_structure,
    epsilon_bound,
    estimate_modulus,
    obedient_profile,
    rational_approximation,
)
from .full import FullCheckConfig, FullImplementationCertificate, ProbeConfig, adversarial_probe, full_check
from .model import (
    CongestionGame,
    ConvexityClass,
    FiniteOutcome,
    FlowProfile,
    PiecewiseCostCurve,
    action_cost,
    classify_potential,
    potential_value,
    singleton_game,
    social_cost,
)
from .structure import InformationStructure, InterimFlowProfile, null_structure
from .wardrop import EquilibriumGapReport, solve_average_wardrop, solve_wardrop, verify_wardrop

__version__ = "0.1.0"
