"""Screening under hidden risk aversion.

The truth-telling first-order condition forces a loading that is constant
across reported risk aversions, so the insurer solves a one-dimensional
maximization for the common loading and the menu varies only through the
deductible xi_hat / gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .contracts import Contract, ContractMenu, make_contract
from .distributions import POINT_MASS, ClaimDistribution, TypeDistribution
from .errors import ParameterError, UnsupportedOperationError


@dataclass(frozen=True)
class AttitudeProblem:
    """Market with a known claim law and a prior over the customer's risk aversion."""

    claim: ClaimDistribution
    prior_gamma: TypeDistribution
    lam: float = 1.0
    horizon: float = 1.0
    gamma_insurer: float = 1.0
    x_customer: float = 0.0
    x_insurer: float = 0.0  # unused analytically; kept for the simulator

    def __post_init__(self):
        if self.prior_gamma.low <= 0.0:
            raise ParameterError("risk aversion support must be positive")
        if self.lam <= 0.0 or self.horizon <= 0.0 or self.gamma_insurer < 0.0:
            raise ParameterError("lambda and horizon must be positive, gamma_I nonnegative")
        self.claim.second_moment()  # raises MomentError if infinite


@dataclass
class AttitudeSolution:
    xi_hat: float
    value: float  # insurer objective at xi_hat, per unit lambda*T
    degenerate_market: bool
    nfev: int


def insurer_objective(problem: AttitudeProblem, xi: float) -> float:
    """Prior-weighted profit density: xi E[(Y - xi/g)_+] - (gamma_I/2) E[(Y - xi/g)_+^2]."""
    if xi < 0.0:
        raise ParameterError("loading must be nonnegative")
    claim = problem.claim
    gi = problem.gamma_insurer

    def per_type(g: float) -> float:
        d = xi / g
        return xi * claim.stop_loss(d) - 0.5 * gi * claim.stop_loss_sq(d)

    return problem.prior_gamma.expectation(per_type)


def solve_loading(problem: AttitudeProblem, opt_tol: float = 1e-9) -> AttitudeSolution:
    """Maximize the insurer objective over the constant loading xi >= 0.

    The search interval starts at [0, 10 gamma_H E[Y]] and doubles while the
    objective is still rising at the right endpoint.
    """
    hi = 10.0 * problem.prior_gamma.high * problem.claim.mean()
    obj = lambda xi: insurer_objective(problem, xi)
    for _ in range(60):
        if obj(hi) < obj(hi * (1.0 - 1e-6)):
            break
        hi *= 2.0
    res = numerics.maximize_scalar(obj, 0.0, hi, tol=opt_tol)
    degenerate = res.value <= 0.0
    return AttitudeSolution(res.x, res.value, degenerate, res.nfev)


def insurer_value(problem: AttitudeProblem, xi_hat: float) -> float:
    """Equilibrium mean-variance value of the insurer, lambda T times the objective."""
    return problem.lam * problem.horizon * insurer_objective(problem, xi_hat)


def build_menu(problem: AttitudeProblem, xi_hat: float, n: int) -> ContractMenu:
    """Menu over a gamma grid: deductible xi_hat/gamma, expected-value premium."""
    if xi_hat < 0.0:
        raise ParameterError("loading must be nonnegative")
    lo, hi = problem.prior_gamma.low, problem.prior_gamma.high
    grid = np.array([lo]) if lo == hi else np.linspace(lo, hi, n)
    contracts = tuple(
        make_contract(xi_hat, xi_hat / g, problem.lam, problem.claim) for g in grid
    )
    return ContractMenu("gamma", grid, contracts)


def no_uncertainty_contract(problem: AttitudeProblem, opt_tol: float = 1e-9) -> Contract:
    """Single optimal contract when the risk aversion is known (point-mass prior)."""
    if problem.prior_gamma.family != POINT_MASS:
        raise UnsupportedOperationError("no_uncertainty_contract requires a point-mass prior")
    sol = solve_loading(problem, opt_tol)
    return make_contract(sol.xi_hat, sol.xi_hat / problem.prior_gamma.atom, problem.lam, problem.claim)


# ---------------------------------------------------------------------------
# Customer values and truth-telling
# ---------------------------------------------------------------------------


def menu_value(problem: AttitudeProblem, gamma: float, gamma_tilde, loading) -> float | np.ndarray:
    """Value to a type-gamma customer of picking the contract designed for gamma_tilde.

    ``loading`` is the constant equilibrium loading or a callable
    loading(gamma_tilde) for perturbed (off-equilibrium) menus.
    """
    gt = np.asarray(gamma_tilde, dtype=float)
    xi = np.asarray(loading(gt) if callable(loading) else np.full_like(gt, float(loading)), dtype=float)
    claim = problem.claim
    lam_t = problem.lam * problem.horizon
    d = np.where(gt > 0.0, xi / gt, np.inf)
    body = claim.mean() + xi * np.asarray(claim.stop_loss(d)) + 0.5 * gamma * np.asarray(
        claim.capped_sq_moment(d)
    )
    out = problem.x_customer - lam_t * body
    if np.isscalar(gamma_tilde):
        return float(out)
    return out


def customer_value(problem: AttitudeProblem, gamma: float, gamma_tilde: float, xi_hat: float) -> float:
    """J^gamma(gamma_tilde) for the equilibrium (constant-loading) menu."""
    return float(menu_value(problem, gamma, gamma_tilde, xi_hat))


def no_insurance_value(problem: AttitudeProblem, gamma: float) -> float:
    claim = problem.claim
    lam_t = problem.lam * problem.horizon
    return problem.x_customer - lam_t * (claim.mean() + 0.5 * gamma * claim.second_moment())


@dataclass
class TruthTellingReport:
    passed: bool
    max_deviation: float
    fine_spacing: float
    violations: list[tuple[float, float]]  # (true type, preferred report)


def verify_truth_telling(problem: AttitudeProblem, loading, n: int) -> TruthTellingReport:
    """Audit the menu: every true type's best report must sit within one fine-grid cell.

    Ties within numerical noise are broken toward the true type; a flat value
    curve (zero coverage) therefore passes by convention.
    """
    if n < 3:
        raise ParameterError("audit needs at least 3 true types")
    lo, hi = problem.prior_gamma.low, problem.prior_gamma.high
    if lo == hi:
        return TruthTellingReport(True, 0.0, 0.0, [])
    truths = np.linspace(lo, hi, n)
    reports = np.linspace(lo, hi, 5 * n)
    spacing = reports[1] - reports[0]
    max_dev = 0.0
    violations: list[tuple[float, float]] = []
    for g in truths:
        vals = np.asarray(menu_value(problem, g, reports, loading))
        best = vals.max()
        near = np.abs(vals - best) <= 1e-11 * max(1.0, abs(best))
        cand = reports[near]
        pick = cand[np.argmin(np.abs(cand - g))]
        dev = abs(pick - g)
        max_dev = max(max_dev, dev)
        if dev > spacing + 1e-12:
            violations.append((float(g), float(pick)))
    return TruthTellingReport(not violations, max_dev, float(spacing), violations)
