"""Compound-Poisson Monte Carlo of terminal customer and insurer surplus.

Only terminal values matter for the mean-variance criterion, so each path
draws an exact Poisson claim count and i.i.d. claim sizes; there is no event
time discretization. Claim uniforms live in a counter-based layout (one fixed
block of the keyed Philox stream per path), so the draws for path i never
depend on the other paths and parallel or serial evaluation would agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contracts import Contract
from .distributions import ClaimDistribution
from .errors import ParameterError

_COUNT_STREAM = 0x636F756E74  # distinct key words for the two substreams
_CLAIM_STREAM = 0x636C61696D


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    seed: int
    horizon: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.n_paths < 1:
            raise ParameterError("n_paths must be at least 1")
        if self.horizon < 0.0 or self.lam < 0.0:
            raise ParameterError("horizon and lambda must be nonnegative")


@dataclass(frozen=True)
class SimResult:
    mean_xc: float
    var_xc: float
    mean_xi: float
    var_xi: float
    se_mean_xc: float
    se_var_xc: float
    se_mean_xi: float
    se_var_xi: float
    n_paths: int


@dataclass(frozen=True)
class PathTotals:
    """Per-path terminal quantities; conservation holds path-wise."""

    x_customer: np.ndarray
    x_insurer: np.ndarray
    total_claims: np.ndarray


def _claim_matrix(claim: ClaimDistribution, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Poisson counts and a masked claim matrix with per-path uniform blocks."""
    mean_count = cfg.lam * cfg.horizon
    counts_rng = np.random.Generator(np.random.Philox(key=[cfg.seed, _COUNT_STREAM]))
    counts = counts_rng.poisson(mean_count, size=cfg.n_paths)
    block = max(4, int(math.ceil(mean_count + 12.0 * math.sqrt(max(mean_count, 1.0)) + 24.0)))
    max_count = int(counts.max(initial=0))
    while max_count > block:  # astronomically rare; widen the per-path block
        block *= 2
    claims_rng = np.random.Generator(np.random.Philox(key=[cfg.seed, _CLAIM_STREAM]))
    u = claims_rng.random((cfg.n_paths, block))
    y = np.asarray(claim.ppf(u))
    mask = np.arange(block)[None, :] < counts[:, None]
    return counts, np.where(mask, y, 0.0)


def simulate_paths(
    contract: Contract,
    claim: ClaimDistribution,
    cfg: SimConfig,
    x_customer: float,
    x_insurer: float,
) -> PathTotals:
    premium_paid = contract.premium_rate * cfg.horizon
    if cfg.lam * cfg.horizon == 0.0:
        zeros = np.zeros(cfg.n_paths)
        return PathTotals(
            np.full(cfg.n_paths, x_customer - premium_paid),
            np.full(cfg.n_paths, x_insurer + premium_paid),
            zeros,
        )
    _, y = _claim_matrix(claim, cfg)
    d = contract.deductible
    retained = np.minimum(y, d).sum(axis=1)
    ceded = np.maximum(y - d, 0.0).sum(axis=1)
    total = y.sum(axis=1)
    xc = x_customer - premium_paid - retained
    xi = x_insurer + premium_paid - ceded
    return PathTotals(xc, xi, total)


def _moments(sample: np.ndarray) -> tuple[float, float, float, float]:
    """mean, variance, and their standard errors (delta method for the variance)."""
    n = sample.size
    mean = float(np.mean(sample))
    var = float(np.var(sample, ddof=1)) if n > 1 else 0.0
    se_mean = math.sqrt(var / n) if n > 1 else 0.0
    if n > 3:
        centered = sample - mean
        m4 = float(np.mean(centered**4))
        se_var = math.sqrt(max(m4 - (n - 3) / (n - 1) * var**2, 0.0) / n)
    else:
        se_var = 0.0
    return mean, var, se_mean, se_var


def simulate(
    contract: Contract,
    claim: ClaimDistribution,
    cfg: SimConfig,
    x_customer: float = 0.0,
    x_insurer: float = 0.0,
) -> SimResult:
    """Terminal-surplus moments with standard errors; deterministic per seed."""
    paths = simulate_paths(contract, claim, cfg, x_customer, x_insurer)
    mc, vc, se_mc, se_vc = _moments(paths.x_customer)
    mi, vi, se_mi, se_vi = _moments(paths.x_insurer)
    return SimResult(mc, vc, mi, vi, se_mc, se_vc, se_mi, se_vi, cfg.n_paths)


# ---------------------------------------------------------------------------
# Analytic cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MvComparison:
    analytic: float
    simulated: float
    std_error: float

    @property
    def z_score(self) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.analytic == self.simulated else math.inf
        return abs(self.analytic - self.simulated) / self.std_error


@dataclass(frozen=True)
class ValidationReport:
    customer: MvComparison
    insurer: MvComparison
    passed: bool


def analytic_customer_value(
    contract: Contract,
    claim: ClaimDistribution,
    gamma: float,
    lam: float,
    horizon: float,
    x_customer: float,
) -> float:
    lam_t = lam * horizon
    d = contract.deductible
    mean_retained = claim.mean() - claim.stop_loss(d)
    return (
        x_customer
        - contract.premium_rate * horizon
        - lam_t * mean_retained
        - 0.5 * gamma * lam_t * claim.capped_sq_moment(d)
    )


def analytic_insurer_value(
    contract: Contract,
    claim: ClaimDistribution,
    gamma_insurer: float,
    lam: float,
    horizon: float,
    x_insurer: float,
) -> float:
    lam_t = lam * horizon
    d = contract.deductible
    return (
        x_insurer
        + contract.premium_rate * horizon
        - lam_t * claim.stop_loss(d)
        - 0.5 * gamma_insurer * lam_t * claim.stop_loss_sq(d)
    )


def validate_analytic(
    contract: Contract,
    claim: ClaimDistribution,
    gamma: float,
    gamma_insurer: float,
    cfg: SimConfig,
    x_customer: float = 0.0,
    x_insurer: float = 0.0,
    z_threshold: float = 4.0,
) -> ValidationReport:
    """Compare closed-form mean-variance values against simulation.

    Passes when each side agrees within ``z_threshold`` combined standard
    errors (mean and variance errors combined in quadrature).
    """
    result = simulate(contract, claim, cfg, x_customer, x_insurer)
    sim_c = result.mean_xc - 0.5 * gamma * result.var_xc
    sim_i = result.mean_xi - 0.5 * gamma_insurer * result.var_xi
    se_c = math.hypot(result.se_mean_xc, 0.5 * gamma * result.se_var_xc)
    se_i = math.hypot(result.se_mean_xi, 0.5 * gamma_insurer * result.se_var_xi)
    ana_c = analytic_customer_value(contract, claim, gamma, cfg.lam, cfg.horizon, x_customer)
    ana_i = analytic_insurer_value(contract, claim, gamma_insurer, cfg.lam, cfg.horizon, x_insurer)
    cust = MvComparison(ana_c, sim_c, se_c)
    ins = MvComparison(ana_i, sim_i, se_i)
    return ValidationReport(cust, ins, cust.z_score <= z_threshold and ins.z_score <= z_threshold)
