"""
Shared domain types of the pseudo-market: demand types, agents, market
configuration, bids and the mutable market state, plus the seeded random
streams every other module draws from.

Rounds are 1-indexed throughout, ``t`` runs over ``1..horizon``.
"""
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from pseudomarket import constants
from pseudomarket.exceptions import (
    FairShareRangeError,
    FairShareSumError,
    InvalidMarketParameter,
    InvalidTypeError,
    NonPositiveHorizon,
    ProbabilityMassError,
)

logger = logging.getLogger(__name__)


class TieBreak(enum.Enum):
    LOWEST_INDEX = "lowest_index"
    SEEDED_RANDOM = "seeded_random"


class Allocator(enum.Enum):
    PSEUDO_AUCTION = "pseudo_auction"
    ROUND_ROBIN = "round_robin"
    GREEDY_OMNISCIENT = "greedy_omniscient"


@dataclass(frozen=True)
class DemandType:
    """
    A demand type (V, K): per-round value V for holding a unit for the next
    K rounds, sampled with probability ``probability``.
    """

    value: float
    duration: int
    probability: float

    def __post_init__(self) -> None:
        if not self.value >= 0 or math.isinf(self.value):
            raise InvalidTypeError(f"value must be finite and >= 0, got {self.value}")
        if int(self.duration) != self.duration or self.duration < 1:
            raise InvalidTypeError(
                f"duration must be a positive integer, got {self.duration}"
            )
        if not 0.0 <= self.probability <= 1.0:
            raise InvalidTypeError(
                f"probability must lie in [0, 1], got {self.probability}"
            )


@dataclass(frozen=True)
class TypeSpace:
    """
    Finite demand-type distribution of one agent.
    """

    types: Tuple[DemandType, ...]

    def __post_init__(self) -> None:
        if not self.types:
            raise ProbabilityMassError("a type space needs at least one type")
        mass = math.fsum(t.probability for t in self.types)
        if abs(mass - 1.0) > constants.PROBABILITY_MASS_TOL:
            raise ProbabilityMassError(
                f"type probabilities sum to {mass!r}, expected 1"
            )

    @classmethod
    def from_triples(
        cls, triples: Sequence[Sequence[float]]
    ) -> "TypeSpace":
        """
        Build a type space from ``[value, duration, probability]`` triples.

        Examples
        --------
        TypeSpace.from_triples([(1, 2, 0.5), (0, 1, 0.5)])
        """
        return cls(
            tuple(
                DemandType(float(v), int(k), float(p)) for v, k, p in triples
            )
        )

    @property
    def k_max(self) -> int:
        return max(t.duration for t in self.types)

    @property
    def values(self) -> np.ndarray:
        return np.array([t.value for t in self.types], dtype=float)

    @property
    def durations(self) -> np.ndarray:
        return np.array([t.duration for t in self.types], dtype=np.int64)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([t.probability for t in self.types], dtype=float)

    def __len__(self) -> int:
        return len(self.types)


@dataclass(frozen=True)
class StrategySpec:
    name: str = "silent"
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class AgentSpec:
    fair_share: float
    type_space: TypeSpace
    strategy: StrategySpec = field(default_factory=StrategySpec)


@dataclass(frozen=True)
class MarketConfig:
    """
    Full description of one market: horizon T, L identical units, reserve r
    and the participating agents. Agent ids are positions in ``agents``.
    """

    horizon: int
    agents: Tuple[AgentSpec, ...]
    units: int = 1
    reserve: float = 0.0
    seed: int = 0
    tie_break: TieBreak = TieBreak.LOWEST_INDEX
    allocator: Allocator = Allocator.PSEUDO_AUCTION

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def fair_shares(self) -> np.ndarray:
        return np.array([a.fair_share for a in self.agents], dtype=float)

    @property
    def initial_budgets(self) -> np.ndarray:
        """Budget of agent i is alpha_i * L * T."""
        return self.fair_shares * self.units * self.horizon

    @property
    def k_max(self) -> int:
        """Longest duration any agent demands or any blocker reserves."""
        longest = max(a.type_space.k_max for a in self.agents)
        for agent in self.agents:
            if "k_max" in agent.strategy.params:
                longest = max(longest, int(agent.strategy.params["k_max"]))
        return longest


@dataclass(frozen=True)
class Bid:
    agent: int
    per_round_bid: float = 0.0
    duration: int = 1
    present: bool = True

    @classmethod
    def absent(cls, agent: int) -> "Bid":
        return cls(agent=agent, present=False)

    @property
    def total(self) -> float:
        return self.per_round_bid * self.duration


@dataclass
class MarketState:
    """
    Mutable state of one trial, owned by the engine.

    ``item_free_at[u]`` is the first round unit u is available again,
    ``holder[u]`` is -1 for a free unit and ``holder_price[u]`` the per-round
    price the holder paid. ``blocked_ledger`` has shape (n_agents, horizon).
    """

    round: int
    budgets: np.ndarray
    item_free_at: np.ndarray
    holder: np.ndarray
    holder_price: np.ndarray
    blocked_ledger: np.ndarray

    @classmethod
    def initial(cls, config: MarketConfig) -> "MarketState":
        return cls(
            round=1,
            budgets=config.initial_budgets.copy(),
            item_free_at=np.ones(config.units, dtype=np.int64),
            holder=np.full(config.units, -1, dtype=np.int64),
            holder_price=np.zeros(config.units, dtype=float),
            blocked_ledger=np.zeros(
                (config.n_agents, config.horizon), dtype=bool
            ),
        )

    def free_units(self) -> np.ndarray:
        return np.flatnonzero(self.item_free_at <= self.round)

    def is_holding(self, agent: int) -> bool:
        held = self.item_free_at > self.round
        return bool(np.any(self.holder[held] == agent))


def validate_config(config: MarketConfig) -> MarketConfig:
    """
    Check every invariant of a market configuration.

    Parameters
    ----------
    config : MarketConfig
        Configuration to check.

    Returns
    -------
    MarketConfig
        The same configuration, whose budgets are alpha_i * L * T.

    Raises
    ------
    NonPositiveHorizon
        When T < 1.
    FairShareRangeError
        When some fair share is not in (0, 1].
    FairShareSumError
        When the fair shares do not sum to one.
    ProbabilityMassError
        When a type space's masses do not sum to one.
    """
    if int(config.horizon) != config.horizon or config.horizon < 1:
        raise NonPositiveHorizon(
            f"horizon must be a positive integer, got {config.horizon}"
        )
    if int(config.units) != config.units or config.units < 1:
        raise InvalidMarketParameter(
            f"units must be a positive integer, got {config.units}"
        )
    if not config.reserve >= 0 or math.isinf(config.reserve):
        raise InvalidMarketParameter(
            f"reserve must be finite and >= 0, got {config.reserve}"
        )
    if not config.agents:
        raise FairShareSumError("a market needs at least one agent")
    for i, agent in enumerate(config.agents):
        if not 0.0 < agent.fair_share <= 1.0:
            raise FairShareRangeError(
                f"agent {i} has fair share {agent.fair_share}, expected (0, 1]"
            )
        mass = math.fsum(t.probability for t in agent.type_space.types)
        if abs(mass - 1.0) > constants.PROBABILITY_MASS_TOL:
            raise ProbabilityMassError(
                f"agent {i} type probabilities sum to {mass!r}"
            )
    total = math.fsum(a.fair_share for a in config.agents)
    if abs(total - 1.0) > constants.FAIR_SHARE_SUM_TOL:
        raise FairShareSumError(f"fair shares sum to {total!r}, expected 1")
    logger.debug(
        "validated market: T=%d L=%d r=%s n=%d",
        config.horizon,
        config.units,
        config.reserve,
        config.n_agents,
    )
    return config


def agent_stream(
    seed: int, trial: int, agent: int, purpose: int
) -> np.random.Generator:
    """
    Counter-based generator keyed by (seed, trial, agent, purpose).

    Entry t - 1 of any array drawn from this stream is the agent's draw for
    round t, so the order agents are evaluated in never changes a draw.
    """
    seq = np.random.SeedSequence(seed, spawn_key=(trial, agent, purpose))
    return np.random.Generator(np.random.Philox(seq))


def market_stream(seed: int, trial: int) -> np.random.Generator:
    seq = np.random.SeedSequence(
        seed, spawn_key=(trial, constants.MARKET_STREAM_KEY)
    )
    return np.random.Generator(np.random.Philox(seq))


def sample_type_indices(
    type_space: TypeSpace, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Draw ``size`` i.i.d. type indices, one per round."""
    cumulative = np.cumsum(type_space.probabilities)
    cumulative[-1] = 1.0
    draws = rng.random(size)
    indices = np.searchsorted(cumulative, draws, side="right")
    return np.minimum(indices, len(type_space) - 1)


def sample_type(
    type_space: TypeSpace, rng: np.random.Generator
) -> DemandType:
    """
    Draw one demand type, type theta with probability p_theta.

    Examples
    --------
    sample_type(TypeSpace.from_triples([(1, 1, 1.0)]), rng)
    >>> DemandType(value=1.0, duration=1, probability=1.0)
    """
    index = int(sample_type_indices(type_space, rng, 1)[0])
    return type_space.types[index]


def uniform_share_agents(
    n: int, type_space: TypeSpace, strategy: Optional[StrategySpec] = None
) -> Tuple[AgentSpec, ...]:
    """n symmetric agents with fair share 1/n each."""
    spec = strategy if strategy is not None else StrategySpec()
    return tuple(AgentSpec(1.0 / n, type_space, spec) for _ in range(n))
