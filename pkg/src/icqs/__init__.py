"""Solver toolkit for integer convex quadratic simultaneous games.

Pipeline: build or load an instance (`game`, `instgen`), classify its
interaction matrices (`game.classify`), run certified best-response
iteration (`dynamics.run_br`), restrict to the cycle and solve the finite
game (`finite`), then measure deviation gains against the a-priori bounds
(`finite.verify_delta`, `bounds`).
"""

from .bounds import GuaranteePack, cycle_diameter, delta_a_posteriori, delta_a_priori, guarantee_pack, l_bound_theoretical
from .dynamics import (
    BrTrace,
    CycleSets,
    cycle_sets,
    cycle_telemetry,
    divergence_radius,
    run_br,
    termination_radius,
)
from .errors import (
    DimensionMismatch,
    EnumerationBudgetExceeded,
    IcqsError,
    InvalidM,
    NoCycle,
    NoEquilibriumFound,
    NonConvergence,
    NotPositiveDefinite,
    OracleBudgetExceeded,
    RejectionBudgetExceeded,
    ToleranceNotReached,
)
from .finite import (
    DeltaReport,
    FiniteGame,
    MixedProfile,
    mne_k_player,
    mne_two_player,
    pne_search,
    restrict,
    solve_equilibrium,
    verify_delta,
)
from .game import (
    Adequacy,
    AdequacyReport,
    IcqsInstance,
    PlayerProblem,
    best_response,
    classify,
    interaction_matrix,
    load_instance,
    make_instance,
    objective,
    save_instance,
)
from .instgen import NegativeSpec, PricingSpec, RandomSpec, builtin, gen_negative, gen_pricing, gen_random
from .iqp import ProxBound, Quadratic, brute_force_min, continuous_min, flatness_constant, integer_min, prox_bound

__version__ = "0.1.0"
