"""Preset FBSDEs: epidemic intervention and carbon allowance pricing."""
from .carbon import (
    AllowancePrice,
    CarbonModel,
    abatement_multiplier,
    aggregate_abatement,
    carbon_coefficients,
    carbon_picard_config,
    price_allowance,
)
from .pandemic import (
    PANDEMIC_BASIS,
    CostEstimate,
    PandemicModel,
    benchmark_model,
    compare_policies,
    comparison_suite,
    cutoff,
    evaluate_policy_cost,
    optimal_policy,
    pandemic_coefficients,
    solve_pandemic,
)

__all__ = [
    "AllowancePrice",
    "CarbonModel",
    "CostEstimate",
    "PANDEMIC_BASIS",
    "PandemicModel",
    "abatement_multiplier",
    "aggregate_abatement",
    "benchmark_model",
    "carbon_coefficients",
    "carbon_picard_config",
    "compare_policies",
    "comparison_suite",
    "cutoff",
    "evaluate_policy_cost",
    "optimal_policy",
    "pandemic_coefficients",
    "price_allowance",
    "solve_pandemic",
]
