"""Parametric claim-size laws, priors over hidden parameters, and risk-aversion curves.

Claim families carry closed-form CDF, density, theta-derivative of the CDF and
stop-loss moments wherever a closed form exists; the uniform-on-(0, theta)
family falls back to adaptive quadrature for its stop-loss moments so the
closed forms elsewhere can serve as independent oracles in tests.

All objects are immutable after construction and safe to share across threads;
sampling takes a caller-owned ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import (
    MomentError,
    NumericsError,
    ParameterError,
    UnsupportedOperationError,
)

# claim families
EXPONENTIAL_MEAN = "exponential_mean"
PARETO_INV_THETA = "pareto_inv_theta"
UNIFORM_ON_ZERO_THETA = "uniform_on_zero_theta"
EXPONENTIAL_FIXED = "exponential_fixed"
PARETO_FIXED = "pareto_fixed"

THETA_INDEXED_FAMILIES = (EXPONENTIAL_MEAN, PARETO_INV_THETA, UNIFORM_ON_ZERO_THETA)
CLAIM_FAMILIES = THETA_INDEXED_FAMILIES + (EXPONENTIAL_FIXED, PARETO_FIXED)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _match(x, value):
    """Return a float when the input was scalar, else the array."""
    if np.isscalar(x) or (isinstance(x, np.ndarray) and x.ndim == 0):
        return float(value)
    return np.asarray(value, dtype=float)


@dataclass(frozen=True)
class ClaimDistribution:
    """Single-claim law F(y; theta), possibly indexed by the hidden risk type."""

    family: str
    params: tuple[float, ...] = ()
    theta: float | None = None

    def __post_init__(self):
        if self.family not in CLAIM_FAMILIES:
            raise ParameterError(f"unknown claim family {self.family!r}")
        if self.family in THETA_INDEXED_FAMILIES:
            if self.theta is None:
                raise ParameterError(f"{self.family} requires theta")
            if self.theta <= 0.0:
                raise ParameterError("theta must be positive")
        elif self.theta is not None:
            raise ParameterError(f"{self.family} does not take theta")
        if self.family == PARETO_INV_THETA:
            if len(self.params) != 1 or self.params[0] <= 0.0:
                raise ParameterError("pareto_inv_theta requires a positive scale y_m")
            if self.theta >= 1.0:
                raise ParameterError("pareto_inv_theta requires theta < 1 for a finite mean")
        elif self.family == EXPONENTIAL_FIXED:
            if len(self.params) != 1 or self.params[0] <= 0.0:
                raise ParameterError("exponential_fixed requires a positive mean")
        elif self.family == PARETO_FIXED:
            if len(self.params) != 2 or self.params[0] <= 1.0 or self.params[1] <= 0.0:
                raise ParameterError("pareto_fixed requires shape > 1 and positive scale")
        elif self.params:
            raise ParameterError(f"{self.family} takes no extra parameters")

    # -- constructors -------------------------------------------------------

    @classmethod
    def exponential_mean(cls, theta: float) -> "ClaimDistribution":
        return cls(EXPONENTIAL_MEAN, (), theta)

    @classmethod
    def pareto_inv_theta(cls, theta: float, scale: float) -> "ClaimDistribution":
        return cls(PARETO_INV_THETA, (scale,), theta)

    @classmethod
    def uniform_on_zero_theta(cls, theta: float) -> "ClaimDistribution":
        return cls(UNIFORM_ON_ZERO_THETA, (), theta)

    @classmethod
    def exponential_fixed(cls, mean: float) -> "ClaimDistribution":
        return cls(EXPONENTIAL_FIXED, (mean,))

    @classmethod
    def pareto_fixed(cls, shape: float, scale: float) -> "ClaimDistribution":
        return cls(PARETO_FIXED, (shape, scale))

    # -- family parameters --------------------------------------------------

    @property
    def is_theta_indexed(self) -> bool:
        return self.family in THETA_INDEXED_FAMILIES

    def _exp_mean(self) -> float:
        return self.theta if self.family == EXPONENTIAL_MEAN else self.params[0]

    def _pareto(self) -> tuple[float, float]:
        """(shape alpha, scale y_m)."""
        if self.family == PARETO_INV_THETA:
            return 1.0 / self.theta, self.params[0]
        return self.params[0], self.params[1]

    @property
    def support(self) -> tuple[float, float]:
        if self.family in (EXPONENTIAL_MEAN, EXPONENTIAL_FIXED):
            return 0.0, math.inf
        if self.family in (PARETO_INV_THETA, PARETO_FIXED):
            return self._pareto()[1], math.inf
        return 0.0, self.theta

    # -- basic transforms ---------------------------------------------------

    def cdf(self, y):
        yv = np.asarray(y, dtype=float)
        if self.family in (EXPONENTIAL_MEAN, EXPONENTIAL_FIXED):
            out = np.where(yv > 0.0, -np.expm1(-np.maximum(yv, 0.0) / self._exp_mean()), 0.0)
        elif self.family in (PARETO_INV_THETA, PARETO_FIXED):
            alpha, ym = self._pareto()
            ratio = np.divide(ym, yv, out=np.ones_like(yv), where=yv > 0.0)
            out = np.where(yv >= ym, 1.0 - ratio**alpha, 0.0)
        else:
            out = np.clip(yv / self.theta, 0.0, 1.0)
            out = np.where(yv < 0.0, 0.0, out)
        return _match(y, out)

    def sf(self, y):
        yv = np.asarray(y, dtype=float)
        if self.family in (EXPONENTIAL_MEAN, EXPONENTIAL_FIXED):
            out = np.where(yv > 0.0, np.exp(-np.maximum(yv, 0.0) / self._exp_mean()), 1.0)
            return _match(y, out)
        return _match(y, 1.0 - np.asarray(self.cdf(yv)))

    def pdf(self, y):
        yv = np.asarray(y, dtype=float)
        if self.family in (EXPONENTIAL_MEAN, EXPONENTIAL_FIXED):
            m = self._exp_mean()
            out = np.where(yv >= 0.0, np.exp(-np.maximum(yv, 0.0) / m) / m, 0.0)
        elif self.family in (PARETO_INV_THETA, PARETO_FIXED):
            alpha, ym = self._pareto()
            safe = np.maximum(yv, ym)
            out = np.where(yv >= ym, alpha * ym**alpha / safe ** (alpha + 1.0), 0.0)
        else:
            out = np.where((yv >= 0.0) & (yv <= self.theta), 1.0 / self.theta, 0.0)
        return _match(y, out)

    def dtheta_cdf(self, y):
        """Closed-form sensitivity of the CDF to the risk type, nonpositive."""
        if not self.is_theta_indexed:
            raise UnsupportedOperationError(
                f"{self.family} is not indexed by theta"
            )
        yv = np.asarray(y, dtype=float)
        th = self.theta
        if self.family == EXPONENTIAL_MEAN:
            out = np.where(yv > 0.0, -(yv / th**2) * np.exp(-np.maximum(yv, 0.0) / th), 0.0)
        elif self.family == PARETO_INV_THETA:
            ym = self.params[0]
            safe = np.maximum(yv, ym)
            ratio = ym / safe
            out = np.where(
                yv >= ym,
                (1.0 / th**2) * ratio ** (1.0 / th) * np.log(ratio),
                0.0,
            )
        else:
            out = np.where((yv > 0.0) & (yv < th), -yv / th**2, 0.0)
        return _match(y, out)

    # -- moments ------------------------------------------------------------

    def mean(self) -> float:
        if self.family in (EXPONENTIAL_MEAN, EXPONENTIAL_FIXED):
            return self._exp_mean()
        if self.family in (PARETO_INV_THETA, PARETO_FIXED):
            alpha, ym = self._pareto()
            if alpha <= 1.0:
                raise MomentError(f"Pareto mean infinite for shape {alpha} <= 1")
            return alpha * ym / (alpha - 1.0)
        return 0.5 * self.theta

    def second_moment(self) -> float:
        if self.family in (EXPONENTIAL_MEAN, EXPONENTIAL_FIXED):
            return 2.0 * self._exp_mean() ** 2
        if self.family in (PARETO_INV_THETA, PARETO_FIXED):
            alpha, ym = self._pareto()
            if alpha <= 2.0:
                raise MomentError(f"Pareto second moment infinite for shape {alpha} <= 2")
            return alpha * ym**2 / (alpha - 2.0)
        return self.theta**2 / 3.0

    # -- stop-loss transforms -----------------------------------------------

    def stop_loss(self, d):
        """E[(Y - d)_+], the integrated survival beyond the retention d."""
        dv = np.asarray(d, dtype=float)
        if self.family in (EXPONENTIAL_MEAN, EXPONENTIAL_FIXED):
            m = self._exp_mean()
            out = np.where(dv >= 0.0, m * np.exp(-np.maximum(dv, 0.0) / m), m - dv)
        elif self.family in (PARETO_INV_THETA, PARETO_FIXED):
            alpha, ym = self._pareto()
            mean = self.mean()
            safe = np.maximum(dv, ym)
            tail = ym**alpha * safe ** (1.0 - alpha) / (alpha - 1.0)
            out = np.where(dv > ym, tail, mean - dv)
        else:
            out = self._quad_stop_loss(dv, power=1)
        return _match(d, out)

    def stop_loss_sq(self, d):
        """E[(Y - d)_+^2]; raises MomentError when the second moment is infinite."""
        dv = np.asarray(d, dtype=float)
        if self.family in (EXPONENTIAL_MEAN, EXPONENTIAL_FIXED):
            m = self._exp_mean()
            m2 = 2.0 * m**2
            out = np.where(
                dv >= 0.0,
                m2 * np.exp(-np.maximum(dv, 0.0) / m),
                m2 - 2.0 * dv * m + dv**2,
            )
        elif self.family in (PARETO_INV_THETA, PARETO_FIXED):
            alpha, ym = self._pareto()
            m1, m2 = self.mean(), self.second_moment()
            safe = np.maximum(dv, ym)
            tail = 2.0 * ym**alpha * safe ** (2.0 - alpha) / ((alpha - 1.0) * (alpha - 2.0))
            out = np.where(dv > ym, tail, m2 - 2.0 * dv * m1 + dv**2)
        else:
            out = self._quad_stop_loss(dv, power=2)
        return _match(d, out)

    def capped_sq_moment(self, d):
        """E[(Y ^ d)^2] via E[Y^2] - E[(Y-d)_+^2] - 2 d E[(Y-d)_+]."""
        dv = np.asarray(d, dtype=float)
        if np.any(dv < 0.0):
            raise ParameterError("capped_sq_moment requires d >= 0")
        out = self.second_moment() - np.asarray(self.stop_loss_sq(dv)) - 2.0 * dv * np.asarray(self.stop_loss(dv))
        return _match(d, np.maximum(out, 0.0))

    def _quad_stop_loss(self, dv: np.ndarray, power: int) -> np.ndarray:
        lo, hi = self.support
        flat = np.atleast_1d(dv).astype(float)
        out = np.empty(flat.shape)
        for i, d in enumerate(flat):
            if d >= hi:
                out[i] = 0.0
            elif d < 0.0:
                # Y > 0 almost surely, so the positive part never binds
                if power == 1:
                    out[i] = self.mean() - d
                else:
                    out[i] = self.second_moment() - 2.0 * d * self.mean() + d * d
            elif power == 1:
                out[i] = numerics.integrate(self.sf, d, hi, tol=1e-12, points=(lo,))
            else:
                out[i] = numerics.integrate(
                    lambda y, d=d: 2.0 * (y - d) * self.sf(y), d, hi, tol=1e-12, points=(lo,)
                )
        return out.reshape(np.shape(dv))

    # -- sampling -----------------------------------------------------------

    def ppf(self, u):
        """Inverse CDF; u = 0 maps to the infimum of the support."""
        uv = np.asarray(u, dtype=float)
        if np.any((uv < 0.0) | (uv >= 1.0)):
            raise ParameterError("ppf requires u in [0, 1)")
        if self.family in (EXPONENTIAL_MEAN, EXPONENTIAL_FIXED):
            out = -self._exp_mean() * np.log1p(-uv)
        elif self.family in (PARETO_INV_THETA, PARETO_FIXED):
            alpha, ym = self._pareto()
            out = ym * (1.0 - uv) ** (-1.0 / alpha)
        else:
            out = self.theta * uv
        return _match(u, out)

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-CDF sampling; deterministic given the generator state."""
        return self.ppf(rng.random(size))


# ---------------------------------------------------------------------------
# Priors over the hidden parameter
# ---------------------------------------------------------------------------

UNIFORM = "uniform"
TRUNCATED_NORMAL = "truncated_normal"
POINT_MASS = "point_mass"

_GL_NODES = 64


@dataclass(frozen=True)
class TypeDistribution:
    """Prior G over the hidden parameter (gamma or theta) on a compact support."""

    family: str
    low: float
    high: float
    loc: float | None = None
    scale: float | None = None

    def __post_init__(self):
        if self.family not in (UNIFORM, TRUNCATED_NORMAL, POINT_MASS):
            raise ParameterError(f"unknown prior family {self.family!r}")
        if self.low > self.high:
            raise ParameterError("prior support requires low <= high")
        if self.family == TRUNCATED_NORMAL:
            if self.loc is None or self.scale is None or self.scale <= 0.0:
                raise ParameterError("truncated_normal requires loc and positive scale")
            if self.low == self.high:
                raise ParameterError("truncated_normal requires a nondegenerate support")
        if self.family == UNIFORM and self.low == self.high:
            raise ParameterError("uniform prior requires low < high")

    @classmethod
    def uniform(cls, low: float, high: float) -> "TypeDistribution":
        return cls(UNIFORM, low, high)

    @classmethod
    def truncated_normal(cls, loc: float, scale: float, low: float, high: float) -> "TypeDistribution":
        return cls(TRUNCATED_NORMAL, low, high, loc, scale)

    @classmethod
    def point_mass(cls, atom: float) -> "TypeDistribution":
        return cls(POINT_MASS, atom, atom)

    @property
    def atom(self) -> float:
        if self.family != POINT_MASS:
            raise UnsupportedOperationError("atom only defined for point masses")
        return self.low

    @property
    def is_degenerate(self) -> bool:
        return self.low == self.high

    def _trunc_norm(self) -> float:
        """Probability mass of the untruncated normal inside [low, high]."""
        a = (self.low - self.loc) / self.scale
        b = (self.high - self.loc) / self.scale
        z = 0.5 * (math.erf(b / math.sqrt(2.0)) - math.erf(a / math.sqrt(2.0)))
        if z <= 0.0:
            raise ParameterError("truncation interval carries no normal mass")
        return z

    def pdf(self, x):
        if self.family == POINT_MASS:
            raise UnsupportedOperationError("point mass has no density")
        xv = np.asarray(x, dtype=float)
        inside = (xv >= self.low) & (xv <= self.high)
        if self.family == UNIFORM:
            out = np.where(inside, 1.0 / (self.high - self.low), 0.0)
        else:
            z = (xv - self.loc) / self.scale
            out = np.where(
                inside,
                np.exp(-0.5 * z * z) / (_SQRT_2PI * self.scale * self._trunc_norm()),
                0.0,
            )
        return _match(x, out)

    def expectation(self, h) -> float:
        """Integral of h against the prior, Gauss-Legendre for the continuous families."""
        if self.family == POINT_MASS:
            return float(h(self.atom))
        nodes, weights = numerics.gauss_legendre_nodes(_GL_NODES, self.low, self.high)
        vals = np.array([float(h(x)) for x in nodes])
        out = float(np.sum(weights * vals * np.asarray(self.pdf(nodes))))
        if not math.isfinite(out):
            raise NumericsError(f"prior expectation is non-finite ({out})")
        return out

    def expectation_on_grid(self, grid: np.ndarray, values: np.ndarray) -> float:
        """Prior expectation of values tabulated on a uniform grid (composite Simpson)."""
        if self.family == POINT_MASS or self.is_degenerate:
            return float(np.asarray(values).ravel()[0])
        g = np.asarray(grid, dtype=float)
        v = np.asarray(values, dtype=float) * np.asarray(self.pdf(g))
        h = g[1] - g[0]
        return float(numerics.cumulative_simpson(v, h)[-1])


# ---------------------------------------------------------------------------
# Risk aversion as a function of the risk type
# ---------------------------------------------------------------------------

CONSTANT = "constant"
LINEAR_IN_THETA = "linear_in_theta"
INVERSE_IN_THETA = "inverse_in_theta"


@dataclass(frozen=True)
class RiskAversionSpec:
    """gamma(theta): constant, a*theta, or a/theta with a > 0."""

    form: str = CONSTANT
    coefficient: float = 1.0

    def __post_init__(self):
        if self.form not in (CONSTANT, LINEAR_IN_THETA, INVERSE_IN_THETA):
            raise ParameterError(f"unknown risk-aversion form {self.form!r}")
        if self.coefficient <= 0.0:
            raise ParameterError("risk-aversion coefficient must be positive")

    @classmethod
    def constant(cls, gamma: float) -> "RiskAversionSpec":
        return cls(CONSTANT, gamma)

    @classmethod
    def linear(cls, a: float) -> "RiskAversionSpec":
        return cls(LINEAR_IN_THETA, a)

    @classmethod
    def inverse(cls, a: float) -> "RiskAversionSpec":
        return cls(INVERSE_IN_THETA, a)

    def gamma(self, theta):
        tv = np.asarray(theta, dtype=float)
        if self.form == CONSTANT:
            out = np.full_like(tv, self.coefficient)
        elif self.form == LINEAR_IN_THETA:
            out = self.coefficient * tv
        else:
            out = self.coefficient / tv
        return _match(theta, out)

    def is_nondecreasing(self) -> bool:
        return self.form in (CONSTANT, LINEAR_IN_THETA)
