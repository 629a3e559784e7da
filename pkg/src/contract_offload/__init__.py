"""Contract menus for mobile data offloading under hidden access-point types."""

from .economy import (
    ContractBundle,
    ContractMenu,
    EconomyConfig,
    Mechanism,
    ValuationKind,
    ap_payoff,
    bs_payoff,
    inverse_marginal_valuation,
    social_welfare,
    valuation,
    valuation_derivative,
)
from .estimators import AntiAdverseSelection, LinearPricing, PerfectDiscrimination
from .exceptions import (
    ContractError,
    DegenerateMarketError,
    DomainError,
    InfeasibleMenuError,
    NonregularInstanceError,
    NoSolutionError,
)
from .solvers import (
    solve_anti_adverse_selection,
    solve_linear_pricing,
    solve_perfect_discrimination,
)
from .verifier import FeasibilityReport, verify_menu

__all__ = [
    "AntiAdverseSelection",
    "ContractBundle",
    "ContractError",
    "ContractMenu",
    "DegenerateMarketError",
    "DomainError",
    "EconomyConfig",
    "FeasibilityReport",
    "InfeasibleMenuError",
    "LinearPricing",
    "Mechanism",
    "NoSolutionError",
    "NonregularInstanceError",
    "PerfectDiscrimination",
    "ValuationKind",
    "ap_payoff",
    "bs_payoff",
    "inverse_marginal_valuation",
    "social_welfare",
    "solve_anti_adverse_selection",
    "solve_linear_pricing",
    "solve_perfect_discrimination",
    "valuation",
    "valuation_derivative",
    "verify_menu",
]
