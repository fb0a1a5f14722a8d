"""Stackelberg menus of excess-of-loss insurance contracts under private information.

Two screening pipelines: hidden risk attitude (constant optimal loading) and
hidden risk type (loading curve solving a screening ODE), plus compound-Poisson
Monte Carlo validation and a config-driven CLI reproducing the five reference
experiments.
"""

from .attitude import (
    AttitudeProblem,
    AttitudeSolution,
    build_menu as build_menu_attitude,
    customer_value as customer_value_attitude,
    insurer_objective as insurer_objective_attitude,
    insurer_value as insurer_value_attitude,
    no_uncertainty_contract,
    solve_loading as solve_loading_attitude,
    verify_truth_telling as verify_truth_telling_attitude,
)
from .contracts import Contract, ContractMenu, make_contract
from .distributions import ClaimDistribution, RiskAversionSpec, TypeDistribution
from .errors import (
    ConfigError,
    InfeasibleCError,
    NoContractError,
    NumericsError,
    ParameterError,
    XolMenuError,
)
from .numerics import SolverConfig
from .screening import (
    AssumptionBounds,
    CStarSolution,
    FeasibleCInterval,
    LoadingCurve,
    TypeProblem,
    build_menu as build_menu_type,
    check_assumptions,
    customer_value_type,
    feasible_C_interval,
    general_coverage,
    H_objective,
    misreport_deductible,
    ode_residual,
    phi,
    psi,
    psi_theta,
    solve_Cstar,
    solve_loading_curve,
    verify_truth_telling_type,
)
from .simulate import SimConfig, SimResult, simulate, validate_analytic

__version__ = "0.1.0"

__all__ = [
    "AttitudeProblem",
    "AttitudeSolution",
    "AssumptionBounds",
    "CStarSolution",
    "ClaimDistribution",
    "ConfigError",
    "Contract",
    "ContractMenu",
    "FeasibleCInterval",
    "H_objective",
    "InfeasibleCError",
    "LoadingCurve",
    "NoContractError",
    "NumericsError",
    "ParameterError",
    "RiskAversionSpec",
    "SimConfig",
    "SimResult",
    "SolverConfig",
    "TypeDistribution",
    "TypeProblem",
    "XolMenuError",
    "build_menu_attitude",
    "build_menu_type",
    "check_assumptions",
    "customer_value_attitude",
    "customer_value_type",
    "feasible_C_interval",
    "general_coverage",
    "insurer_objective_attitude",
    "insurer_value_attitude",
    "make_contract",
    "misreport_deductible",
    "no_uncertainty_contract",
    "ode_residual",
    "phi",
    "psi",
    "psi_theta",
    "simulate",
    "solve_Cstar",
    "solve_loading_attitude",
    "solve_loading_curve",
    "validate_analytic",
    "verify_truth_telling_attitude",
    "verify_truth_telling_type",
]
