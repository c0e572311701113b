"""
First-price pseudo-auction with multi-round reserves for L >= 1 identical
units, plus the round-robin and omniscient greedy allocators used as
baselines.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pseudomarket import constants
from pseudomarket.exceptions import (
    BidFromHolder,
    DuplicateBid,
    InvalidMarketParameter,
)
from pseudomarket.model import (
    Allocator,
    Bid,
    DemandType,
    MarketConfig,
    MarketState,
    TieBreak,
    agent_stream,
    market_stream,
    sample_type_indices,
    validate_config,
)
from pseudomarket.strategies import Bidder, StrategyContext, build_bidders

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Winner:
    agent: int
    per_round_bid: float
    duration: int
    total_payment: float


@dataclass(frozen=True)
class RoundOutcome:
    round: int
    winners: Tuple[Winner, ...]
    no_allocation: bool
    available_units: int


@dataclass
class Trace:
    """
    Per-agent record of one trial. Every matrix has shape (n_agents, T) and
    column t - 1 belongs to round t.
    """

    config: MarketConfig
    type_index: np.ndarray
    utility: np.ndarray
    payment: np.ndarray
    blocked: np.ndarray
    won: np.ndarray
    held: np.ndarray
    outcomes: List[RoundOutcome] = field(default_factory=list)

    def sampled_type(self, agent: int, round_: int) -> DemandType:
        index = int(self.type_index[agent, round_ - 1])
        return self.config.agents[agent].type_space.types[index]

    @property
    def total_utility(self) -> np.ndarray:
        return self.utility.sum(axis=1)

    @property
    def total_payment(self) -> np.ndarray:
        return self.payment.sum(axis=1)

    @property
    def utilization(self) -> np.ndarray:
        return self.held.sum(axis=1) / self.config.horizon

    @property
    def blocked_rounds(self) -> np.ndarray:
        return self.blocked.sum(axis=1)

    @property
    def allocated_fraction(self) -> float:
        """Held unit-rounds over L * T."""
        units = self.config.units
        return float(self.held.sum()) / (units * self.config.horizon)


def _is_valid(bid: Bid, budget: float, reserve: float) -> bool:
    return (
        bid.present
        and bid.duration >= 1
        and bid.per_round_bid >= 0
        and bid.total <= budget
        and (bid.duration == 1 or bid.per_round_bid >= reserve)
    )


def step(
    state: MarketState,
    bids: Sequence[Bid],
    config: MarketConfig,
    tie_rng: Optional[np.random.Generator] = None,
    jump: Optional[bool] = None,
) -> Tuple[MarketState, RoundOutcome]:
    """
    Run the auction of round ``state.round``.

    Valid bids satisfy b * d <= B and (d = 1 or b >= r); the top m valid
    per-round bids win the m free units, pay b * d at once and hold a unit for
    rounds [t, t + d - 1]. The blocked ledger is filled for every round the
    call covers.

    Parameters
    ----------
    state : MarketState
        Advanced in place and returned.
    bids : Sequence[Bid]
        At most one bid per agent; holders must not bid.
    config : MarketConfig
    tie_rng : np.random.Generator, optional
        Required for seeded random tie-breaking.
    jump : bool, optional
        Jump straight to t + d after a single-unit allocation, as the
        single-unit auction does. Defaults to ``config.units == 1``.

    Raises
    ------
    DuplicateBid
        When an agent bids twice.
    BidFromHolder
        When an agent currently holding a unit bids.
    """
    if jump is None:
        jump = config.units == 1
    if jump and config.units != 1:
        raise ValueError("jumping rounds is only defined for a single unit")
    t = state.round
    reserve = config.reserve
    held_before = state.item_free_at > t
    holder_before = state.holder.copy()
    price_before = state.holder_price.copy()
    holding = set(holder_before[held_before].tolist())

    seen = set()
    for bid in bids:
        if bid.agent in seen:
            raise DuplicateBid(f"agent {bid.agent} bid twice in round {t}")
        seen.add(bid.agent)
        if bid.present and bid.agent in holding:
            raise BidFromHolder(f"agent {bid.agent} holds a unit in round {t}")

    free = np.flatnonzero(~held_before)
    valid = [b for b in bids if _is_valid(b, state.budgets[b.agent], reserve)]
    if config.tie_break is TieBreak.SEEDED_RANDOM and len(valid) > 1:
        if tie_rng is None:
            raise ValueError("seeded random tie-breaking needs tie_rng")
        keys = tie_rng.random(len(valid)).tolist()
        order = sorted(
            range(len(valid)), key=lambda j: (-valid[j].per_round_bid, keys[j])
        )
    else:
        order = sorted(
            range(len(valid)),
            key=lambda j: (-valid[j].per_round_bid, valid[j].agent),
        )

    winners = []
    won_unit = {}
    for j, unit in zip(order, free.tolist()):
        bid = valid[j]
        state.budgets[bid.agent] -= bid.total
        state.item_free_at[unit] = t + bid.duration
        state.holder[unit] = bid.agent
        state.holder_price[unit] = bid.per_round_bid
        won_unit[unit] = bid
        winners.append(
            Winner(bid.agent, bid.per_round_bid, bid.duration, bid.total)
        )

    horizon = config.horizon
    if t <= horizon:
        for i in range(config.n_agents):
            state.blocked_ledger[i, t - 1] = _blocked_this_round(
                i,
                held_before,
                holder_before,
                price_before,
                won_unit,
                reserve,
            )

    if jump and winners:
        # rounds t+1 .. t+d-1 are held by the single winner
        winner = winners[0]
        last = min(t + winner.duration - 1, horizon)
        if last > t:
            others_blocked = winner.per_round_bid >= reserve
            state.blocked_ledger[:, t:last] = others_blocked
            state.blocked_ledger[winner.agent, t:last] = True
        state.round = t + winner.duration
    else:
        state.round = t + 1

    outcome = RoundOutcome(
        round=t,
        winners=tuple(winners),
        no_allocation=not winners,
        available_units=int(free.size),
    )
    return state, outcome


def _blocked_this_round(
    agent: int,
    held_before: np.ndarray,
    holder_before: np.ndarray,
    price_before: np.ndarray,
    won_unit: dict,
    reserve: float,
) -> bool:
    """
    Agent is blocked when she holds a unit from an earlier reservation, or
    when every unit is either reserved by someone else at >= r or won this
    round by someone else bidding >= r.
    """
    for unit in range(held_before.size):
        if held_before[unit]:
            if holder_before[unit] == agent:
                return True
            if price_before[unit] < reserve:
                return False
        else:
            bid = won_unit.get(unit)
            if bid is None or bid.agent == agent:
                return False
            if bid.per_round_bid < reserve:
                return False
    return True


def _draw_types(config: MarketConfig, trial: int) -> np.ndarray:
    type_index = np.empty((config.n_agents, config.horizon), dtype=np.int32)
    for i, agent in enumerate(config.agents):
        rng = agent_stream(config.seed, trial, i, constants.TYPE_STREAM)
        type_index[i] = sample_type_indices(
            agent.type_space, rng, config.horizon
        )
    return type_index


def _empty_trace(config: MarketConfig, type_index: np.ndarray) -> Trace:
    shape = (config.n_agents, config.horizon)
    return Trace(
        config=config,
        type_index=type_index,
        utility=np.zeros(shape),
        payment=np.zeros(shape),
        blocked=np.zeros(shape, dtype=bool),
        won=np.zeros(shape, dtype=bool),
        held=np.zeros(shape, dtype=bool),
    )


def _record_allocation(
    trace: Trace, agent: int, t: int, duration: int, payment: float
) -> None:
    demand = trace.sampled_type(agent, t)
    trace.won[agent, t - 1] = True
    trace.payment[agent, t - 1] = payment
    # utility only counts when the whole demand is served
    if duration >= demand.duration:
        trace.utility[agent, t - 1] = demand.value * demand.duration
    trace.held[agent, t - 1 : min(t - 1 + duration, trace.config.horizon)] = True


def run_mechanism(
    config: MarketConfig,
    bidders: Optional[Sequence[Bidder]] = None,
    trial: int = 0,
    jump: Optional[bool] = None,
) -> Trace:
    """
    Run the pseudo-auction over the whole horizon.

    Each round in which a unit is free, every agent not holding a unit is
    shown her sampled type and asked for a bid. Types and request coins come
    from the (seed, trial, agent) streams, so the trace is a pure function
    of ``config`` and ``trial``.

    Parameters
    ----------
    config : MarketConfig
    bidders : Sequence[Bidder], optional
        One strategy per agent; built from the config when omitted.
    trial : int
        Trial index used to key the random streams.
    jump : bool, optional
        Forwarded to ``step``.

    Returns
    -------
    Trace
    """
    validate_config(config)
    if bidders is None:
        bidders = build_bidders(config)
    n, horizon = config.n_agents, config.horizon
    type_index = _draw_types(config, trial)
    coins = [
        agent_stream(config.seed, trial, i, constants.REQUEST_STREAM)
        .random(horizon)
        .tolist()
        for i in range(n)
    ]
    type_lists = type_index.tolist()
    types = [agent.type_space.types for agent in config.agents]
    tie_rng = (
        market_stream(config.seed, trial)
        if config.tie_break is TieBreak.SEEDED_RANDOM
        else None
    )
    trace = _empty_trace(config, type_index)
    state = MarketState.initial(config)

    while state.round <= horizon:
        t = state.round
        free = state.item_free_at <= t
        bids: List[Bid] = []
        if free.any():
            holding = set(state.holder[~free].tolist())
            for i in range(n):
                if i in holding:
                    continue
                theta = type_lists[i][t - 1]
                ctx = StrategyContext(
                    agent=i,
                    round=t,
                    own_budget=float(state.budgets[i]),
                    sampled_type=types[i][theta],
                    type_index=theta,
                    item_available=True,
                    reserve=config.reserve,
                )
                bids.append(bidders[i](ctx, coins[i][t - 1]))
        state, outcome = step(state, bids, config, tie_rng=tie_rng, jump=jump)
        trace.outcomes.append(outcome)
        for winner in outcome.winners:
            _record_allocation(
                trace, winner.agent, t, winner.duration, winner.total_payment
            )

    trace.blocked = state.blocked_ledger
    logger.debug("trial %d finished with budgets %s", trial, state.budgets)
    return trace


def run_round_robin(config: MarketConfig, trial: int = 0) -> Trace:
    """
    Give the free unit of round t to agent (t - 1) mod n for her sampled
    duration, whatever her value. Nobody pays.
    """
    validate_config(config)
    if config.units != 1:
        raise InvalidMarketParameter(
            "round-robin is defined for a single unit"
        )
    type_index = _draw_types(config, trial)
    trace = _empty_trace(config, type_index)
    n = config.n_agents
    t = 1
    while t <= config.horizon:
        agent = (t - 1) % n
        duration = trace.sampled_type(agent, t).duration
        _record_allocation(trace, agent, t, duration, 0.0)
        trace.outcomes.append(
            RoundOutcome(t, (Winner(agent, 0.0, duration, 0.0),), False, 1)
        )
        t += duration
    return trace


def run_greedy_omniscient(config: MarketConfig, trial: int = 0) -> Trace:
    """
    Whenever the unit is free, give it to the lowest-index agent with a
    positive sampled value for her sampled duration.
    """
    validate_config(config)
    if config.units != 1:
        raise InvalidMarketParameter(
            "the greedy allocator is defined for a single unit"
        )
    type_index = _draw_types(config, trial)
    trace = _empty_trace(config, type_index)
    positive = np.zeros(type_index.shape, dtype=bool)
    for i, agent in enumerate(config.agents):
        positive[i] = agent.type_space.values[type_index[i]] > 0
    any_positive = positive.any(axis=0).tolist()
    first = positive.argmax(axis=0).tolist()

    t = 1
    while t <= config.horizon:
        if not any_positive[t - 1]:
            trace.outcomes.append(RoundOutcome(t, (), True, 1))
            t += 1
            continue
        agent = first[t - 1]
        duration = trace.sampled_type(agent, t).duration
        _record_allocation(trace, agent, t, duration, 0.0)
        trace.outcomes.append(
            RoundOutcome(t, (Winner(agent, 0.0, duration, 0.0),), False, 1)
        )
        t += duration
    return trace


def run_allocator(config: MarketConfig, trial: int = 0) -> Trace:
    """Run the allocator the config names."""
    if config.allocator is Allocator.ROUND_ROBIN:
        return run_round_robin(config, trial)
    if config.allocator is Allocator.GREEDY_OMNISCIENT:
        return run_greedy_omniscient(config, trial)
    return run_mechanism(config, trial=trial)
