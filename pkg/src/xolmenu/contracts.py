"""Contract and contract-menu value types shared by both screening pipelines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import ClaimDistribution
from .errors import ParameterError


@dataclass(frozen=True)
class Contract:
    """Excess-of-loss contract: retention, proportional loading, premium rate."""

    deductible: float
    loading: float
    premium_rate: float

    def __post_init__(self):
        if self.deductible < 0.0 or self.loading < 0.0 or self.premium_rate < 0.0:
            raise ParameterError("contract terms must be nonnegative")


def make_contract(loading: float, deductible: float, lam: float, claim: ClaimDistribution) -> Contract:
    """Price a contract under the expected-value premium principle."""
    premium = (1.0 + loading) * lam * claim.stop_loss(deductible)
    return Contract(deductible=deductible, loading=loading, premium_rate=premium)


@dataclass(frozen=True)
class ContractMenu:
    """Contracts indexed by a grid of hidden-parameter values."""

    index_name: str  # "gamma" or "theta"
    grid: np.ndarray
    contracts: tuple[Contract, ...]

    def __post_init__(self):
        if self.index_name not in ("gamma", "theta"):
            raise ParameterError("index_name must be 'gamma' or 'theta'")
        grid = np.asarray(self.grid, dtype=float)
        if grid.size != len(self.contracts):
            raise ParameterError("grid and contracts must have equal length")
        if np.any(np.diff(grid) < 0.0):
            raise ParameterError("menu grid must be nondecreasing")
        object.__setattr__(self, "grid", grid)

    def __len__(self) -> int:
        return len(self.contracts)

    @property
    def deductibles(self) -> np.ndarray:
        return np.array([c.deductible for c in self.contracts])

    @property
    def loadings(self) -> np.ndarray:
        return np.array([c.loading for c in self.contracts])

    @property
    def premium_rates(self) -> np.ndarray:
        return np.array([c.premium_rate for c in self.contracts])
