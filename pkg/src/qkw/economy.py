"""Storage costs, consumption probabilities and discounted profits."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .channel import BASIS, FIXED_POINT_TOL, TransitionChannel, as_density, population_series
from .circuit import round_branches
from .strategies import AGENTS, CoalitionProfile, StrategyProfile

Profile = Union[StrategyProfile, CoalitionProfile]


@dataclass(frozen=True)
class EconomyParams:
    """Utility ``u`` per consumption, discount ``delta`` and storage costs ``c = (c1, c2, c3)``."""

    u: float = 100.0
    delta: float = 0.9
    c: tuple[float, float, float] = (1.0, 4.0, 9.0)

    def __post_init__(self):
        c = tuple(float(v) for v in self.c)
        if len(c) != 3:
            raise ValueError("need exactly three storage costs")
        object.__setattr__(self, "c", c)
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not c[0] < c[1] < c[2]:
            raise ValueError("storage costs must satisfy c1 < c2 < c3")
        if not self.u > c[2]:
            raise ValueError("utility must exceed every storage cost")

    @classmethod
    def from_coordinates(cls, x: float, y: float, u: float = 100.0, delta: float = 0.9,
                         c1: float = 1.0) -> "EconomyParams":
        """Costs from x = (c2 - c1)/(u delta) and y = (c3 - c2)/(u delta)."""
        c2 = c1 + x * u * delta
        c3 = c2 + y * u * delta
        return cls(u, delta, (c1, c2, c3))

    @property
    def x(self) -> float:
        return (self.c[1] - self.c[0]) / (self.u * self.delta)

    @property
    def y(self) -> float:
        return (self.c[2] - self.c[1]) / (self.u * self.delta)

    def cost(self, good: int) -> float:
        return self.c[good - 1]


def holdings_matrix(agent: str) -> np.ndarray:
    """H[g-1, k] = 1 when the agent holds good g in basis state k."""
    k = AGENTS.index(agent)
    h = np.zeros((3, 8))
    for idx, goods in enumerate(BASIS.labels):
        h[goods[k] - 1, idx] = 1.0
    return h


def cost_vector(agent: str, params: EconomyParams) -> np.ndarray:
    """Storage cost the agent pays in each basis state."""
    return np.asarray(params.c) @ holdings_matrix(agent)


def consumption_vectors(profile: Profile) -> np.ndarray:
    """w[i, k]: probability agent i consumes during a round started in basis state k.

    Shape (3, 8), or (n, 3, 8) for batched profiles.
    """
    if isinstance(profile, CoalitionProfile):
        p = np.asarray(profile.p, dtype=float)[..., None, None]
        return p * consumption_vectors(profile.first) + (1 - p) * consumption_vectors(profile.second)
    batch = profile.batch
    w = np.zeros((batch, 3, 8) if batch else (3, 8))
    for k, goods in enumerate(BASIS.labels):
        for b in round_branches(goods, profile):
            for i, flag in enumerate(b.flags):
                if flag:
                    w[..., i, k] += b.probability
    return w


def consumption_vector(agent: str, profile: Profile) -> np.ndarray:
    return consumption_vectors(profile)[..., AGENTS.index(agent), :]


def _populations(rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape == (8, 8):
        return np.real(np.diag(rho))
    if rho.shape[-1] != 8:
        raise ValueError("expected populations over the eight basis states")
    return rho.astype(float)


def profit_terms(agent: str, channel: TransitionChannel, rho0, t: int, params: EconomyParams,
                 w: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-round consumption probability f(tau) and storage cost for tau = 0..t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    p0 = _populations(rho0)
    if abs(p0.sum() - 1) > 1e-9:
        raise ValueError("initial state is not normalised")
    if w is None:
        w = consumption_vector(agent, channel.profile)
    pops = population_series(channel.t8, p0, t)
    v = cost_vector(agent, params)
    consume = np.concatenate([[0.0], pops[:-1] @ w])  # nothing consumed before the first round
    return consume, pops @ v


def finite_horizon_profit(agent: str, channel: TransitionChannel, rho0, t: int,
                          params: EconomyParams, w: np.ndarray | None = None) -> np.ndarray:
    """Cumulative discounted profit pi(0..t)."""
    consume, cost = profit_terms(agent, channel, rho0, t, params, w)
    disc = params.delta ** np.arange(t + 1)
    return np.cumsum((params.u * consume - cost) * disc)


def steady_payoff(agent: str, rho, params: EconomyParams, channel: TransitionChannel,
                  w: np.ndarray | None = None, tol: float = FIXED_POINT_TOL) -> float:
    """V_i = (-v_i + delta u w_i) . rho for a verified steady state."""
    p = _populations(rho)
    residual = float(np.sum(np.abs(channel.t8 @ p - p)))
    if residual > tol:
        raise ValueError(f"state is not steady (residual {residual:.3g})")
    if w is None:
        w = consumption_vector(agent, channel.profile)
    return float((-cost_vector(agent, params) + params.delta * params.u * w) @ p)


def marginal_holdings(rho) -> tuple[float, float, float]:
    """(P(Alice holds 2), P(Bob holds 3), P(Charlie holds 1))."""
    p = _populations(rho)
    if abs(p.sum() - 1) > 1e-9:
        raise ValueError("state is not normalised")
    p12 = holdings_matrix("A")[1] @ p
    p23 = holdings_matrix("B")[2] @ p
    p31 = holdings_matrix("C")[0] @ p
    return float(p12), float(p23), float(p31)


@dataclass(frozen=True)
class PayoffReport:
    values: dict[str, float]
    series: dict[str, np.ndarray] = field(repr=False)
    holdings: tuple[float, float, float]
    steady: np.ndarray


def payoff_report(channel: TransitionChannel, steady: np.ndarray, rho0, params: EconomyParams,
                  horizon: int = 100) -> PayoffReport:
    w = consumption_vectors(channel.profile)
    values, series = {}, {}
    for i, agent in enumerate(AGENTS):
        values[agent] = steady_payoff(agent, steady, params, channel, w[i])
        series[agent] = finite_horizon_profit(agent, channel, rho0, horizon, params, w[i])
    return PayoffReport(values, series, marginal_holdings(steady), np.asarray(steady))


def payoffs_from_summary(holdings: np.ndarray, consumption: np.ndarray,
                         params: EconomyParams) -> np.ndarray:
    """Vectorised V from per-agent expected holdings (.., 3 agents, 3 goods) and consumption (.., 3)."""
    return -holdings @ np.asarray(params.c) + params.delta * params.u * consumption


def steady_summary(limit: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Expected goods holdings and consumption probability per agent for steady populations."""
    h = np.stack([holdings_matrix(a) for a in AGENTS])  # (3, 3, 8)
    holdings = np.einsum("agk,...k->...ag", h, limit)
    consumption = np.einsum("...ak,...k->...a", w, limit)
    return holdings, consumption

