"""Screening under hidden risk type: the loading ODE, its fixed point, and the menu.

The truth-telling first-order condition forces the loading curve to solve
``xi' Psi + (1 + xi) Psi_theta = 0`` where ``Psi`` is the integrated survival
beyond the equilibrium deductible and ``Psi_theta`` its risk-type sensitivity.
The curve is pinned down by an integration constant C; the insurer then
maximizes the expected profit density H(C) over the феasible constants.

Parametrization of C
--------------------
For the exponential-mean family with constant risk aversion the curve has the
closed form ``xi(theta, C) = 1/(1 + g theta - C theta e^{1/(g theta)}) - 1``
and C is that formula's constant, matching the published feasibility bounds.
For every other family C = 1 + xi(theta_L), the constant of the equivalent
integral equation. Both identify the same one-parameter solution family of
the ODE; they are reconciled at the solver boundary (see decisions ledger).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .contracts import ContractMenu, make_contract
from .distributions import (
    EXPONENTIAL_MEAN,
    PARETO_INV_THETA,
    THETA_INDEXED_FAMILIES,
    UNIFORM_ON_ZERO_THETA,
    ClaimDistribution,
    RiskAversionSpec,
    TypeDistribution,
)
from .errors import (
    InfeasibleCError,
    NoContractError,
    NumericsError,
    ParameterError,
    SingularityError,
    UndefinedCoverageError,
)
from .numerics import SolverConfig

logger = logging.getLogger(__name__)

PARETO_THETA_CAP = 0.499  # shape 1/theta <= 2 has infinite variance; clamp just below

ODE = "ode"
FIXED_POINT = "fixed_point"
CLOSED_FORM = "closed_form"
EXTERNAL = "external"


@dataclass(frozen=True)
class TypeProblem:
    """Market with a theta-indexed claim family and a prior over the risk type."""

    claim_family: str
    prior_theta: TypeDistribution
    gamma_spec: RiskAversionSpec
    claim_params: tuple[float, ...] = ()
    lam: float = 1.0
    horizon: float = 1.0
    gamma_insurer: float = 1.0
    x_customer: float = 0.0
    x_insurer: float = 0.0

    def __post_init__(self):
        if self.claim_family not in THETA_INDEXED_FAMILIES:
            raise ParameterError(f"{self.claim_family} is not indexed by theta")
        if self.prior_theta.low <= 0.0:
            raise ParameterError("risk-type support must be positive")
        if self.lam <= 0.0 or self.horizon <= 0.0 or self.gamma_insurer < 0.0:
            raise ParameterError("lambda and horizon must be positive, gamma_I nonnegative")
        if self.claim_family == PARETO_INV_THETA and self.prior_theta.high > PARETO_THETA_CAP:
            if self.prior_theta.low > PARETO_THETA_CAP:
                raise ParameterError(
                    f"Pareto risk types need theta <= {PARETO_THETA_CAP} for finite variance"
                )
            logger.warning(
                "clamping Pareto type support from %.4g to %.4g (finite second moment)",
                self.prior_theta.high,
                PARETO_THETA_CAP,
            )
            p = self.prior_theta
            clamped = TypeDistribution(p.family, p.low, PARETO_THETA_CAP, p.loc, p.scale)
            object.__setattr__(self, "prior_theta", clamped)
        # risk aversion must stay positive on the support
        for th in (self.prior_theta.low, self.prior_theta.high):
            if self.gamma_spec.gamma(th) <= 0.0:
                raise ParameterError("gamma(theta) must be positive on the type support")
        self._check_dominance()

    def _check_dominance(self, n: int = 25) -> None:
        """Grid check that larger theta means stochastically larger losses."""
        lo, hi = self.prior_theta.low, self.prior_theta.high
        thetas = np.linspace(lo, hi, n) if hi > lo else np.array([lo])
        for th in thetas:
            dist = self.claim_at(float(th))
            s_lo, s_hi = dist.support
            ys = np.linspace(s_lo, s_hi if math.isfinite(s_hi) else s_lo + 20.0 * dist.mean(), n)
            if np.any(np.asarray(dist.dtheta_cdf(ys)) > 1e-12):
                raise ParameterError(
                    f"claim family violates first-order dominance at theta={th}"
                )

    def claim_at(self, theta: float) -> ClaimDistribution:
        if self.claim_family == PARETO_INV_THETA:
            return ClaimDistribution.pareto_inv_theta(theta, self.claim_params[0])
        if self.claim_family == EXPONENTIAL_MEAN:
            return ClaimDistribution.exponential_mean(theta)
        return ClaimDistribution.uniform_on_zero_theta(theta)

    def gamma_of(self, theta):
        return self.gamma_spec.gamma(theta)

    def gamma_scalar(self):
        """Plain-float gamma(theta) closure for hot scalar loops."""
        a = self.gamma_spec.coefficient
        form = self.gamma_spec.form
        if form == "constant":
            return lambda th: a
        if form == "linear_in_theta":
            return lambda th: a * th
        return lambda th: a / th

    def theta_grid(self, n: int) -> np.ndarray:
        lo, hi = self.prior_theta.low, self.prior_theta.high
        if lo == hi:
            return np.full(n, lo)
        return np.linspace(lo, hi, n)

    @property
    def has_exp_closed_form(self) -> bool:
        return self.claim_family == EXPONENTIAL_MEAN and self.gamma_spec.form == "constant"


# ---------------------------------------------------------------------------
# The screening kernel: Psi, Psi_theta, phi
# ---------------------------------------------------------------------------


def psi(problem: TypeProblem, theta: float, xi: float) -> float:
    """Integrated survival beyond the deductible xi / gamma(theta)."""
    d = xi / problem.gamma_of(theta)
    return float(problem.claim_at(theta).stop_loss(d))


def psi_theta_quad(problem: TypeProblem, theta: float, xi: float, tol: float = 1e-10) -> float:
    """Quadrature of -d/dtheta F(y; theta) beyond the deductible; generic fallback and oracle."""
    dist = problem.claim_at(theta)
    d = max(xi / problem.gamma_of(theta), 0.0)
    lo, hi = dist.support
    if d >= hi:
        return 0.0
    return numerics.integrate(
        lambda y: -float(dist.dtheta_cdf(y)), max(d, lo * 0.0), hi, tol=tol, points=(lo,)
    )


def _psi_arrays(problem: TypeProblem, thetas: np.ndarray, ds: np.ndarray) -> np.ndarray:
    """Vectorized Psi over paired (theta, deductible) arrays."""
    th = np.asarray(thetas, dtype=float)
    d = np.asarray(ds, dtype=float)
    if problem.claim_family == EXPONENTIAL_MEAN:
        return np.where(d >= 0.0, th * np.exp(-np.maximum(d, 0.0) / th), th - d)
    if problem.claim_family == PARETO_INV_THETA:
        ym = problem.claim_params[0]
        below = ym / (1.0 - th) - d
        safe = np.maximum(d, ym)
        above = safe * (ym / safe) ** (1.0 / th) * th / (1.0 - th)
        return np.where(d <= ym, below, above)
    # uniform on (0, theta)
    out = np.where(d >= th, 0.0, (th - np.maximum(d, 0.0)) ** 2 / (2.0 * th))
    return np.where(d < 0.0, 0.5 * th - d, out)


def _psi_theta_arrays(problem: TypeProblem, thetas: np.ndarray, ds: np.ndarray) -> np.ndarray:
    """Vectorized Psi_theta over paired (theta, deductible) arrays."""
    th = np.asarray(thetas, dtype=float)
    d = np.maximum(np.asarray(ds, dtype=float), 0.0)
    if problem.claim_family == EXPONENTIAL_MEAN:
        return (1.0 + d / th) * np.exp(-d / th)
    if problem.claim_family == PARETO_INV_THETA:
        ym = problem.claim_params[0]
        below = ym / (1.0 - th) ** 2
        c = np.maximum(d, ym) / ym
        above = ym * c ** (1.0 - 1.0 / th) * (
            np.log(c) / (th * (1.0 - th)) + 1.0 / (1.0 - th) ** 2
        )
        return np.where(d <= ym, below, above)
    return np.where(d >= th, 0.0, (th**2 - d**2) / (2.0 * th**2))


def psi_theta(problem: TypeProblem, theta: float, xi: float) -> float:
    """Risk-type sensitivity of Psi (the part through F only), closed form."""
    d = xi / problem.gamma_of(theta)
    return float(_psi_theta_arrays(problem, np.asarray(theta, float), np.asarray(d, float)))


def _phi_scalar(problem: TypeProblem, theta: float, d: float) -> float:
    """phi = Psi_theta / Psi at deductible d, analytically continued closed forms."""
    fam = problem.claim_family
    if fam == EXPONENTIAL_MEAN:
        if d >= 0.0:
            return (theta + d) / (theta * theta)
        return 1.0 / (theta - d)
    if fam == PARETO_INV_THETA:
        ym = problem.claim_params[0]
        if d <= ym:
            return ym / ((1.0 - theta) * (ym - d * (1.0 - theta)))
        return math.log(d / ym) / theta**2 + 1.0 / (theta * (1.0 - theta))
    # uniform on (0, theta): zero coverage beyond the support end
    if d >= theta:
        return 0.0
    if d >= 0.0:
        return (theta + d) / (theta * (theta - d))
    return 0.5 / (0.5 * theta - d)


def phi(problem: TypeProblem, theta: float, xi: float) -> float:
    """Screening ratio phi(theta, xi) with the 0/0 -> 0 convention."""
    g = problem.gamma_of(theta)
    d = xi / g
    fam = problem.claim_family
    if fam in (EXPONENTIAL_MEAN, PARETO_INV_THETA, UNIFORM_ON_ZERO_THETA):
        return _phi_scalar(problem, theta, d)
    p = psi(problem, theta, xi)
    pt = psi_theta_quad(problem, theta, xi)
    if p < 1e-14:
        if pt > 1e-10:
            raise SingularityError(f"Psi vanished with Psi_theta={pt:.3e} at theta={theta}")
        return 0.0
    return pt / p


def _phi_arrays(problem: TypeProblem, thetas: np.ndarray, xis: np.ndarray) -> np.ndarray:
    th = np.asarray(thetas, dtype=float)
    d = np.asarray(xis, dtype=float) / np.asarray(problem.gamma_of(th))
    fam = problem.claim_family
    if fam == EXPONENTIAL_MEAN:
        return np.where(d >= 0.0, (th + d) / th**2, 1.0 / (th - np.minimum(d, 0.0)))
    if fam == PARETO_INV_THETA:
        ym = problem.claim_params[0]
        below = ym / ((1.0 - th) * (ym - np.minimum(d, ym) * (1.0 - th)))
        above = np.log(np.maximum(d, ym) / ym) / th**2 + 1.0 / (th * (1.0 - th))
        return np.where(d <= ym, below, above)
    inside = (d >= 0.0) & (d < th)
    out = np.zeros_like(th)
    out = np.where(inside, (th + np.minimum(d, th)) / (th * np.maximum(th - d, 1e-300)), out)
    return np.where(d < 0.0, 0.5 / (0.5 * th - np.minimum(d, 0.0)), out)


# ---------------------------------------------------------------------------
# Loading curves
# ---------------------------------------------------------------------------


@dataclass
class LoadingCurve:
    """Solved risk-loading schedule xi(theta) for one integration constant C."""

    theta_grid: np.ndarray
    xi: np.ndarray
    C: float
    xi_left: float  # loading at theta_L implied by C
    method: str
    feasible: bool
    diagnostics: dict = field(default_factory=dict)

    def loading_at(self, theta):
        return np.interp(theta, self.theta_grid, self.xi)

    def deductible_at(self, problem: TypeProblem, theta):
        return self.loading_at(theta) / problem.gamma_of(theta)


def _closed_form_denominator(problem: TypeProblem, C: float, thetas: np.ndarray) -> np.ndarray:
    g = problem.gamma_spec.coefficient
    th = np.asarray(thetas, dtype=float)
    return 1.0 + g * th - C * th * np.exp(1.0 / (g * th))


def closed_form_xi(problem: TypeProblem, C: float, thetas) -> np.ndarray:
    """Exponential-family loading curve 1/(1 + g theta - C theta e^{1/(g theta)}) - 1."""
    if not problem.has_exp_closed_form:
        raise ParameterError("closed form requires the exponential family with constant gamma")
    den = _closed_form_denominator(problem, C, np.asarray(thetas, dtype=float))
    if np.any(den <= 0.0):
        raise InfeasibleCError(f"closed-form denominator nonpositive for C={C}")
    return 1.0 / den - 1.0


def _xi_left(problem: TypeProblem, C: float) -> float:
    """Loading at theta_L implied by the integration constant."""
    if problem.has_exp_closed_form:
        return float(closed_form_xi(problem, C, np.array([problem.prior_theta.low]))[0])
    if C < 1.0:
        raise ParameterError("C must be at least 1 (xi(theta_L) = C - 1 must be nonnegative)")
    return C - 1.0


_FEAS_TOL = 1e-9


def solve_loading_curve(
    problem: TypeProblem,
    C: float,
    method: str = ODE,
    config: SolverConfig | None = None,
    grid_points: int | None = None,
) -> LoadingCurve:
    """Solve the loading curve for one integration constant.

    method: "ode" marches xi' = -(1 + xi) phi(theta, xi) from theta_L;
    "fixed_point" iterates the damped Picard map of the equivalent integral
    equation on an internally refined grid; "closed_form" evaluates the
    exponential-family solution. A curve that crosses zero before theta_H is
    clipped at zero and flagged infeasible.
    """
    cfg = config or SolverConfig()
    n = grid_points or cfg.grid_points
    grid = problem.theta_grid(n)
    xi_left = _xi_left(problem, C)
    diagnostics: dict = {}

    if problem.prior_theta.is_degenerate:
        xi = np.full(n, max(xi_left, 0.0))
        return LoadingCurve(grid, xi, C, xi_left, method, xi_left >= -_FEAS_TOL, diagnostics)

    if method == CLOSED_FORM:
        raw = closed_form_xi(problem, C, grid)
    elif method == ODE:
        gm = problem.gamma_scalar()
        rhs = lambda th, x: -(1.0 + x) * _phi_scalar(problem, th, x / gm(th))
        res = numerics.solve_ivp(
            rhs, grid[0], xi_left, grid, tol=cfg.ode_tol, step_init=cfg.ode_step_init
        )
        raw = res.values
        diagnostics.update(substeps_max=int(res.substeps.max()), verify_gap=res.verify_gap)
    elif method == FIXED_POINT:
        raw, fp_diag = _solve_picard(problem, C, xi_left, grid, cfg)
        diagnostics.update(fp_diag)
    else:
        raise ParameterError(f"unknown curve method {method!r}")

    feasible = bool(np.min(raw) >= -max(cfg.ode_tol, _FEAS_TOL))
    diagnostics["min_xi_raw"] = float(np.min(raw))
    return LoadingCurve(grid, np.maximum(raw, 0.0), C, xi_left, method, feasible, diagnostics)


def _solve_picard(
    problem: TypeProblem,
    C: float,
    xi_left: float,
    grid: np.ndarray,
    cfg: SolverConfig,
) -> tuple[np.ndarray, dict]:
    """Damped Picard iteration of (T xi)(theta) = (1 + xi_L) exp(-int phi) - 1.

    The operator is evaluated on an internally refined uniform grid (the output
    nodes stay a subset) and the refinement doubles until the restricted fixed
    point stabilizes within the ODE tolerance. Iterates are clipped at zero;
    feasibility is judged from the unclipped image of the converged curve.
    """
    c_int = 1.0 + xi_left
    ncell = grid.size - 1
    fp_tol = 0.1 * cfg.ode_tol
    target = max(cfg.ode_tol, 1e-12)
    prev: np.ndarray | None = None
    last: dict = {}
    refine = 1
    while refine <= 4096:
        fine = np.linspace(grid[0], grid[-1], ncell * refine + 1)
        h = fine[1] - fine[0]

        def raw_map(x: np.ndarray) -> np.ndarray:
            integral = numerics.cumulative_simpson(_phi_arrays(problem, fine, x), h)
            return c_int * np.exp(-integral) - 1.0

        def op(x: np.ndarray) -> np.ndarray:
            return np.maximum(raw_map(x), 0.0)

        # phi increases in xi, so T is antitone: starting from zero the iterates
        # bracket the fixed point and the damping auto-halving settles them
        result = numerics.fixed_point(
            op, np.zeros(fine.size), damping=cfg.fp_damping, max_iter=cfg.fp_max_iter, tol=fp_tol
        )
        restricted = result.curve[::refine].copy()
        raw_final = raw_map(result.curve)[::refine]
        last = {
            "iterations": result.iterations,
            "residual": result.residual,
            "contraction_estimate": result.contraction_estimate,
            "fine_refine": refine,
        }
        if prev is not None and float(np.max(np.abs(restricted - prev))) <= target:
            return raw_final, last
        prev = restricted
        refine *= 2
    raise NumericsError("Picard grid refinement did not stabilize at 4096x")


def ode_residual(problem: TypeProblem, curve: LoadingCurve) -> float:
    """Sup norm of xi' Psi + (1 + xi) Psi_theta with xi' from finite differences.

    Only meaningful on feasible (unclipped) curves; fourth-order one-sided
    stencils are used at the boundary nodes.
    """
    grid = curve.theta_grid
    if grid[-1] == grid[0]:
        return 0.0
    h = grid[1] - grid[0]
    xi = curve.xi
    d = xi / np.asarray(problem.gamma_of(grid))
    dxi = numerics.derivative_on_grid(xi, h)
    resid = dxi * _psi_arrays(problem, grid, d) + (1.0 + xi) * _psi_theta_arrays(problem, grid, d)
    return float(np.max(np.abs(resid)))


# ---------------------------------------------------------------------------
# Feasible constants and the outer maximization
# ---------------------------------------------------------------------------


@dataclass
class FeasibleCInterval:
    lo: float
    hi: float
    empty: bool
    closed_form_bounds: tuple[float, float] | None = None
    remark_theta_bound: float | None = None


def exp_closed_form_bounds(problem: TypeProblem) -> tuple[float, float]:
    """[C_under, C_over] for the exponential family with constant gamma."""
    g = problem.gamma_spec.coefficient
    lo, hi = problem.prior_theta.low, problem.prior_theta.high
    c_under = g * math.exp(-1.0 / (g * hi))
    c_over = (1.0 + g * lo) / lo * math.exp(-1.0 / (g * lo))
    return c_under, c_over


def remark_theta_bound(gamma: float, theta_low: float) -> float:
    """Largest theta_H for which a nonnegative exponential-family curve exists."""
    den = 1.0 - gamma * theta_low * math.log((1.0 + gamma * theta_low) / (gamma * theta_low))
    if den <= 0.0:
        return math.inf
    return theta_low / den


def feasible_C_interval(problem: TypeProblem, config: SolverConfig | None = None) -> FeasibleCInterval:
    """Validated interval of integration constants with a nonnegative curve.

    Exponential family with constant gamma: the closed-form bounds, re-checked
    pointwise on the grid and shrunk by bisection if violated. Other families:
    the lower endpoint is bracketed and bisected on the solver's feasibility
    flag; the upper endpoint is a pragmatic search cap at which the lowest
    type's coverage probability falls below 1e-6.
    """
    cfg = config or SolverConfig()
    lo_t, hi_t = problem.prior_theta.low, problem.prior_theta.high

    if problem.has_exp_closed_form:
        c_under, c_over = exp_closed_form_bounds(problem)
        bound = remark_theta_bound(problem.gamma_spec.coefficient, lo_t)
        if problem.prior_theta.is_degenerate:
            return FeasibleCInterval(c_under, c_over * (1.0 - 1e-12), False, (c_under, c_over), bound)
        if c_over <= c_under:
            return FeasibleCInterval(math.nan, math.nan, True, (c_under, c_over), bound)
        grid = problem.theta_grid(cfg.grid_points)

        def valid(c: float) -> bool:
            den = _closed_form_denominator(problem, c, grid)
            if np.any(den <= 0.0):
                return False
            return bool(np.min(1.0 / den - 1.0) >= -_FEAS_TOL)

        hi = c_over - 1e-10 * max(1.0, c_over)
        if not valid(hi):
            hi = numerics.bisect(lambda c: 1.0 if valid(c) else -1.0, c_under, hi, tol=1e-12)
            hi -= 1e-10 * max(1.0, hi)
        lo = c_under
        if not valid(lo):
            lo = numerics.bisect(lambda c: -1.0 if valid(c) else 1.0, lo, hi, tol=1e-12)
            lo += 1e-10 * max(1.0, lo)
        return FeasibleCInterval(lo, hi, False, (c_under, c_over), bound)

    if problem.prior_theta.is_degenerate:
        cap = 1.0 + float(problem.gamma_of(lo_t)) * float(problem.claim_at(lo_t).ppf(1.0 - 1e-6))
        return FeasibleCInterval(1.0, cap, False)

    def feasible(c: float) -> bool:
        return solve_loading_curve(problem, c, ODE, cfg).feasible

    c_lo_bracket, c_hi_bracket = 1.0, 2.0
    found = feasible(c_hi_bracket)
    for _ in range(60):
        if found:
            break
        c_lo_bracket = c_hi_bracket
        c_hi_bracket *= 2.0
        found = feasible(c_hi_bracket)
    if not found:
        return FeasibleCInterval(math.nan, math.nan, True)
    if feasible(c_lo_bracket):
        c_min = c_lo_bracket
    else:
        c_min = numerics.bisect(
            lambda c: 1.0 if feasible(c) else -1.0, c_lo_bracket, c_hi_bracket, tol=cfg.opt_tol
        )
        if not feasible(c_min):
            c_min += 2.0 * cfg.opt_tol * max(1.0, c_min)
    cap = 1.0 + float(problem.gamma_of(lo_t)) * float(problem.claim_at(lo_t).ppf(1.0 - 1e-6))
    cap = max(cap, 2.0 * c_min)
    return FeasibleCInterval(c_min, cap, False)


def _auto_method(problem: TypeProblem, method: str) -> str:
    if method != "auto":
        return method
    return CLOSED_FORM if problem.has_exp_closed_form else ODE


def H_objective(
    problem: TypeProblem,
    C: float,
    config: SolverConfig | None = None,
    method: str = "auto",
    curve: LoadingCurve | None = None,
) -> float:
    """Expected insurer profit density under the curve for C.

    Integrates ``xi stop_loss(d) - (gamma_I/2) stop_loss_sq(d)`` against the
    type prior on the curve's grid.
    """
    cfg = config or SolverConfig()
    if curve is None:
        curve = solve_loading_curve(problem, C, _auto_method(problem, method), cfg)
    if not curve.feasible:
        raise InfeasibleCError(f"loading curve crosses zero before theta_H for C={C}")
    grid = curve.theta_grid
    xi = curve.xi
    d = xi / np.asarray(problem.gamma_of(grid))
    sl = _psi_arrays(problem, grid, d)
    slsq = _stop_loss_sq_arrays(problem, grid, d)
    values = xi * sl - 0.5 * problem.gamma_insurer * slsq
    return problem.prior_theta.expectation_on_grid(grid, values)


def _stop_loss_sq_arrays(problem: TypeProblem, thetas: np.ndarray, ds: np.ndarray) -> np.ndarray:
    th = np.asarray(thetas, dtype=float)
    d = np.asarray(ds, dtype=float)
    if problem.claim_family == EXPONENTIAL_MEAN:
        return 2.0 * th**2 * np.exp(-np.maximum(d, 0.0) / th) + np.where(
            d < 0.0, -2.0 * d * th + d**2 - 0.0, 0.0
        )
    if problem.claim_family == PARETO_INV_THETA:
        ym = problem.claim_params[0]
        m1 = ym / (1.0 - th)  # alpha ym/(alpha-1) at alpha = 1/theta
        m2 = ym**2 / (1.0 - 2.0 * th)  # alpha ym^2/(alpha-2)
        below = m2 - 2.0 * d * m1 + d**2
        alpha = 1.0 / th
        safe = np.maximum(d, ym)
        above = 2.0 * ym**alpha * safe ** (2.0 - alpha) / ((alpha - 1.0) * (alpha - 2.0))
        return np.where(d <= ym, below, above)
    out = np.empty(th.shape)
    flat_t, flat_d = np.atleast_1d(th), np.atleast_1d(d)
    res = [problem.claim_at(float(t)).stop_loss_sq(float(x)) for t, x in zip(flat_t, flat_d)]
    out = np.asarray(res).reshape(th.shape)
    return out


@dataclass
class CStarSolution:
    C_star: float
    curve: LoadingCurve
    H_star: float
    insurer_value: float
    interval: FeasibleCInterval


def solve_Cstar(
    problem: TypeProblem,
    config: SolverConfig | None = None,
    method: str = "auto",
    half_value: bool = False,
    prescan: int = 21,
) -> CStarSolution:
    """Maximize H over the feasible constants; returns the equilibrium curve.

    ``half_value`` switches the reported insurer value from lambda T H(C*) to
    (lambda T / 2) H(C*); see the decisions ledger for why the full factor is
    the default. A coarse prescan brackets the maximum before golden section.
    """
    cfg = config or SolverConfig()
    interval = feasible_C_interval(problem, cfg)
    if interval.empty:
        raise NoContractError(
            "no admissible integration constant: the insurer offers no contract"
        )
    mth = _auto_method(problem, method)

    def h_of(c: float) -> float:
        try:
            return H_objective(problem, c, cfg, mth)
        except InfeasibleCError:
            return -math.inf

    cs = np.linspace(interval.lo, interval.hi, prescan)
    hs = np.array([h_of(c) for c in cs])
    k = int(np.argmax(hs))
    lo = cs[max(k - 1, 0)]
    hi = cs[min(k + 1, prescan - 1)]
    if lo == hi:
        lo, hi = interval.lo, interval.hi
    res = numerics.maximize_scalar(h_of, lo, hi, tol=cfg.opt_tol)
    curve = solve_loading_curve(problem, res.x, mth, cfg)
    factor = 0.5 if half_value else 1.0
    value = factor * problem.lam * problem.horizon * res.value
    return CStarSolution(res.x, curve, res.value, value, interval)


def build_menu(problem: TypeProblem, curve: LoadingCurve) -> ContractMenu:
    """Menu over the curve's theta grid with expected-value premiums."""
    contracts = []
    for th, xi in zip(curve.theta_grid, curve.xi):
        g = float(problem.gamma_of(float(th)))
        contracts.append(make_contract(float(xi), float(xi) / g, problem.lam, problem.claim_at(float(th))))
    return ContractMenu("theta", curve.theta_grid, tuple(contracts))


# ---------------------------------------------------------------------------
# Misreports, customer values, truth-telling
# ---------------------------------------------------------------------------


def _dhat_vector(
    problem: TypeProblem,
    theta: float,
    theta_tilde: np.ndarray,
    xi_tilde: np.ndarray,
    n_scan: int = 200,
    max_extend: int = 40,
) -> np.ndarray:
    """Smallest nonnegative root of d = ((1+xi~)/g S~(d)/S(d) - 1/g)_+ per report.

    Reports whose premium schedule prices coverage out of the market entirely
    (no finite root, residual diverging to -inf) get d = +inf: the customer
    retains everything.
    """
    g = float(problem.gamma_of(theta))
    dist_true = problem.claim_at(theta)
    dists_rep = [problem.claim_at(float(t)) for t in np.atleast_1d(theta_tilde)]
    xi_t = np.atleast_1d(np.asarray(xi_tilde, dtype=float))
    m = xi_t.size

    def residual(d: np.ndarray) -> np.ndarray:
        # d has shape (k, m): k scan levels per report
        s_true = np.asarray(dist_true.sf(d))
        s_rep = np.column_stack([np.asarray(dr.sf(d[:, j])) for j, dr in enumerate(dists_rep)])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(s_true > 0.0, s_rep / np.maximum(s_true, 1e-300), np.inf)
        rhs = np.maximum((1.0 + xi_t) / g * ratio - 1.0 / g, 0.0)
        return d - rhs

    scale = max(
        2.0 * float(np.max(xi_t) + 1.0) / g * dist_true.mean(),
        10.0 * dist_true.mean(),
        2.0 * float(dist_true.ppf(0.999)),
    )
    d_hat = np.full(m, np.nan)
    d_max = scale
    todo = np.ones(m, dtype=bool)
    for _ in range(max_extend):
        grid = np.linspace(0.0, d_max, n_scan)
        dmat = np.broadcast_to(grid[:, None], (n_scan, m)).copy()
        r = residual(dmat)
        sign_change = (r[:-1, :] <= 0.0) & (r[1:, :] > 0.0)
        exact = np.abs(r) <= 1e-14 * max(1.0, d_max)
        for j in np.nonzero(todo)[0]:
            hits = np.nonzero(exact[:, j])[0]
            if hits.size:
                d_hat[j] = grid[hits[0]]
                todo[j] = False
                continue
            rows = np.nonzero(sign_change[:, j])[0]
            if rows.size:
                lo, hi = grid[rows[0]], grid[rows[0] + 1]
                d_hat[j] = _bisect_root(residual, lo, hi, j, m)
                todo[j] = False
        if not todo.any():
            break
        # no crossing yet: residual still falling at the end means no finite root
        tail_slope = r[-1, :] - r[-2, :]
        diverged = todo & (tail_slope <= 0.0) & (r[-1, :] < 0.0)
        d_hat[diverged] = np.inf
        todo &= ~diverged
        if not todo.any():
            break
        d_max *= 2.0
    if todo.any():
        raise NumericsError(
            f"misreport deductible scan found no root up to d={d_max:.3e}"
        )
    return d_hat


def _bisect_root(residual, lo: float, hi: float, j: int, m: int, iters: int = 80) -> float:
    a, b = lo, hi
    for _ in range(iters):
        mid = 0.5 * (a + b)
        r = residual(np.full((1, m), mid))[0, j]
        if r <= 0.0:
            a = mid
        else:
            b = mid
        if b - a <= 1e-14 * max(1.0, b):
            break
    return 0.5 * (a + b)


def misreport_deductible(
    problem: TypeProblem, curve: LoadingCurve, theta: float, theta_tilde: float
) -> float:
    """Optimal retention of a type-theta customer holding the type-theta~ contract.

    Solves the implicit first-order condition by scan plus bisection; with
    multiple sign changes the smallest nonnegative root is returned. A
    truthful report reproduces xi(theta)/gamma(theta) exactly.
    """
    xi_t = float(curve.loading_at(theta_tilde))
    out = _dhat_vector(problem, theta, np.array([theta_tilde]), np.array([xi_t]))[0]
    return float(out)


def no_insurance_value_type(problem: TypeProblem, theta: float) -> float:
    dist = problem.claim_at(theta)
    g = float(problem.gamma_of(theta))
    lam_t = problem.lam * problem.horizon
    return problem.x_customer - lam_t * (dist.mean() + 0.5 * g * dist.second_moment())


def _value_from_deductible(
    problem: TypeProblem, theta: float, theta_tilde: float, xi_tilde: float, d: float
) -> float:
    """Literal three-term value: premium side, retained-loss integral, boundary term."""
    if math.isinf(d):
        return no_insurance_value_type(problem, theta)
    g = float(problem.gamma_of(theta))
    lam_t = problem.lam * problem.horizon
    dist_true = problem.claim_at(theta)
    dist_rep = problem.claim_at(theta_tilde)
    s_true = float(dist_true.sf(d))
    premium_term = (1.0 + xi_tilde) * float(dist_rep.stop_loss(d))
    capped_mean = dist_true.mean() - float(dist_true.stop_loss(d))
    capped_sq = float(dist_true.capped_sq_moment(d))
    partial = (capped_mean - d * s_true) + 0.5 * g * (capped_sq - d * d * s_true)
    boundary = (d + 0.5 * g * d * d) * s_true
    return problem.x_customer - lam_t * (premium_term + partial + boundary)


def customer_value_type(
    problem: TypeProblem, curve: LoadingCurve, theta: float, theta_tilde: float
) -> float:
    """Value of reporting theta~ and then retaining optimally."""
    xi_t = float(curve.loading_at(theta_tilde))
    d = misreport_deductible(problem, curve, theta, theta_tilde)
    return _value_from_deductible(problem, theta, theta_tilde, xi_t, d)


def truthful_customer_value(problem: TypeProblem, curve: LoadingCurve, theta: float) -> float:
    """Equilibrium value at a truthful report, via the reduced moment identity."""
    xi = float(curve.loading_at(theta))
    g = float(problem.gamma_of(theta))
    d = xi / g
    dist = problem.claim_at(theta)
    lam_t = problem.lam * problem.horizon
    return problem.x_customer - lam_t * (
        dist.mean() + xi * float(dist.stop_loss(d)) + 0.5 * g * float(dist.capped_sq_moment(d))
    )


@dataclass
class TypeTruthTellingReport:
    passed: bool
    max_deviation: float
    fine_spacing: float
    violations: list[tuple[float, float]]


def verify_truth_telling_type(
    problem: TypeProblem, curve: LoadingCurve, n: int
) -> TypeTruthTellingReport:
    """Audit: each true type's best report on a 5n grid must sit within one cell."""
    if n < 3:
        raise ParameterError("audit needs at least 3 true types")
    lo, hi = problem.prior_theta.low, problem.prior_theta.high
    if lo == hi:
        return TypeTruthTellingReport(True, 0.0, 0.0, [])
    truths = np.linspace(lo, hi, n)
    reports = np.linspace(lo, hi, 5 * n)
    spacing = reports[1] - reports[0]
    xi_reports = np.asarray(curve.loading_at(reports))
    max_dev = 0.0
    violations: list[tuple[float, float]] = []
    for th in truths:
        ds = _dhat_vector(problem, float(th), reports, xi_reports)
        vals = np.array(
            [
                _value_from_deductible(problem, float(th), float(t), float(x), float(d))
                for t, x, d in zip(reports, xi_reports, ds)
            ]
        )
        best = vals.max()
        near = np.abs(vals - best) <= 1e-11 * max(1.0, abs(best))
        cand = reports[near]
        pick = cand[np.argmin(np.abs(cand - th))]
        dev = abs(pick - th)
        max_dev = max(max_dev, dev)
        if dev > spacing + 1e-12:
            violations.append((float(th), float(pick)))
    return TypeTruthTellingReport(not violations, max_dev, float(spacing), violations)


# ---------------------------------------------------------------------------
# Assumption diagnostics and the unrestricted coverage formula
# ---------------------------------------------------------------------------


@dataclass
class AssumptionBounds:
    K: float
    M: float
    contraction_ok: bool
    positivity_ok: bool


def check_assumptions(
    problem: TypeProblem, xi0: float, n_grid: int = 101
) -> AssumptionBounds:
    """Grid estimates of sup phi and sup |d phi / d xi| plus the two flags.

    The flags are the sufficient conditions for the Picard operator to be a
    contraction on [0, xi0]; they are reported, never enforced.
    """
    if xi0 < 0.0:
        raise ParameterError("xi0 must be nonnegative")
    lo, hi = problem.prior_theta.low, problem.prior_theta.high
    thetas = np.linspace(lo, hi, n_grid) if hi > lo else np.array([lo])
    xis = np.linspace(0.0, xi0, n_grid) if xi0 > 0.0 else np.array([0.0])
    tt, xx = np.meshgrid(thetas, xis, indexing="ij")
    pp = _phi_arrays(problem, tt.ravel(), xx.ravel())
    k_sup = float(np.max(pp))
    step = max(1e-6, 1e-7 * max(1.0, xi0))
    up = _phi_arrays(problem, tt.ravel(), xx.ravel() + step)
    dn = _phi_arrays(problem, tt.ravel(), xx.ravel() - step)
    m_sup = float(np.max(np.abs(up - dn) / (2.0 * step)))
    width = hi - lo
    contraction_ok = (1.0 + xi0) * m_sup * width < 1.0
    positivity_ok = (1.0 + xi0) * math.exp(-k_sup * width) - 1.0 >= 0.0
    return AssumptionBounds(k_sup, m_sup, contraction_ok, positivity_ok)


def general_coverage(
    problem: TypeProblem,
    y: float,
    theta: float,
    theta_tilde: float,
    xi_tilde: float,
) -> float:
    """Unrestricted pointwise-optimal coverage (diagnostic only).

    The equilibrium pipeline restricts to excess-of-loss coverage; this is the
    density-ratio formula the restriction is benchmarked against.
    """
    f_true = float(problem.claim_at(theta).pdf(y))
    if f_true <= 0.0:
        raise UndefinedCoverageError(f"true-type density vanishes at y={y}")
    f_rep = float(problem.claim_at(theta_tilde).pdf(y))
    g = float(problem.gamma_of(theta))
    raw = y + 1.0 / g - f_rep * (1.0 + xi_tilde) / (g * f_true)
    return float(min(max(raw, 0.0), y))
