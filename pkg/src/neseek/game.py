"""Quadratic aggregative games with a linear inverse-demand price.

Player ``i`` pays

    J_i(y) = xi_i * y_i**2 + beta_i * y_i + alpha_i - (p0 - a * sigma) * y_i

with ``sigma = sum(y)``. Players are indexed from 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import linalg


@dataclass(frozen=True)
class AggregativeCost:
    xi: float
    beta: float
    alpha: float
    p0: float
    a: float

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError(f"quadratic coefficient must be positive, got {self.xi}")
        if self.a < 0:
            raise ValueError(f"price slope must be nonnegative, got {self.a}")


class Certificate(NamedTuple):
    mu: float
    theta: float

    @property
    def passed(self) -> bool:
        return self.mu > 0


@dataclass(frozen=True)
class GameModel:
    costs: tuple[AggregativeCost, ...]

    def __post_init__(self):
        if not self.costs:
            raise ValueError("game needs at least one player")
        object.__setattr__(self, "costs", tuple(self.costs))
        first = self.costs[0]
        for c in self.costs[1:]:
            if (c.p0, c.a) != (first.p0, first.a):
                raise ValueError("all players must share the price parameters (p0, a)")

    @classmethod
    def from_arrays(cls, xi, beta, alpha, p0: float, a: float) -> "GameModel":
        return cls(tuple(AggregativeCost(float(x), float(b), float(al), float(p0), float(a))
                         for x, b, al in zip(xi, beta, alpha, strict=True)))

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def p0(self) -> float:
        return self.costs[0].p0

    @property
    def a(self) -> float:
        return self.costs[0].a

    @property
    def xi(self) -> np.ndarray:
        return np.array([c.xi for c in self.costs])

    @property
    def beta(self) -> np.ndarray:
        return np.array([c.beta for c in self.costs])

    @property
    def alpha(self) -> np.ndarray:
        return np.array([c.alpha for c in self.costs])

    @property
    def jacobian(self) -> np.ndarray:
        """Constant Jacobian of the pseudo-gradient, ``diag(2 xi + a) + a 11^T``."""
        return np.diag(2 * self.xi + self.a) + self.a * np.ones((self.n, self.n))


def price_form(a_i: Sequence[float], b_i: Sequence[float], c0: float, slope: float) -> GameModel:
    """Game for costs ``a_i (y_i - b_i)^2 - (c0 - slope*sigma) y_i``."""
    a_i = np.asarray(a_i, dtype=float)
    b_i = np.asarray(b_i, dtype=float)
    return GameModel.from_arrays(a_i, -2 * a_i * b_i, a_i * b_i**2, c0, slope)


def _check_index(g: GameModel, i: int) -> None:
    if not 0 <= i < g.n:
        raise IndexError(f"player index {i} outside 0..{g.n - 1}")


def cost(g: GameModel, i: int, y) -> float:
    _check_index(g, i)
    y = np.asarray(y, dtype=float)
    c = g.costs[i]
    return c.xi * y[i] ** 2 + c.beta * y[i] + c.alpha - (c.p0 - c.a * y.sum()) * y[i]


def gradient(g: GameModel, i: int, y) -> float:
    """Derivative of player ``i``'s cost with respect to its own strategy."""
    _check_index(g, i)
    y = np.asarray(y, dtype=float)
    return partial_map(g, i, y[i], y.sum())


def partial_map(g: GameModel, i: int, y_i: float, eta_i: float) -> float:
    """Own-strategy gradient with the aggregate replaced by the estimate ``eta_i``."""
    _check_index(g, i)
    c = g.costs[i]
    return 2 * c.xi * y_i + c.beta - c.p0 + c.a * eta_i + c.a * y_i


def partial_map_vec(g: GameModel, y, eta) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return (2 * g.xi + g.a) * y + g.beta - g.p0 + g.a * np.asarray(eta, dtype=float)


def pseudo_gradient(g: GameModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (g.n,):
        raise ValueError(f"expected {g.n} strategies, got shape {y.shape}")
    return partial_map_vec(g, y, np.full(g.n, y.sum()))


def monotonicity_certificate(g: GameModel) -> Certificate:
    """Strong-monotonicity modulus and Lipschitz constant of the partial map in eta."""
    jac = g.jacobian
    mu = float(np.linalg.eigvalsh(0.5 * (jac + jac.T)).min())
    return Certificate(mu=mu, theta=g.a)


def nash_equilibrium(g: GameModel) -> np.ndarray:
    """Unique Nash equilibrium from the linear stationarity system."""
    cert = monotonicity_certificate(g)
    if not cert.passed:
        raise ValueError(f"pseudo-gradient is not strongly monotone (mu={cert.mu:.3e})")
    return linalg.solve(g.jacobian, g.p0 - g.beta)
