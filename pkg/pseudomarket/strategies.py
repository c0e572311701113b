"""
Bidding strategies: the robust bidding policy and the opponents used to stress
its guarantees.

A strategy only sees a StrategyContext; it never observes other agents' bids
or budgets.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List

from pseudomarket import constants
from pseudomarket.exceptions import ConfigError
from pseudomarket.ideal import (
    RequestPolicy,
    ideal_cap,
    optimal_request_policy,
)
from pseudomarket.model import AgentSpec, Bid, DemandType, MarketConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StrategyContext:
    agent: int
    round: int
    own_budget: float
    sampled_type: DemandType
    type_index: int
    item_available: bool
    reserve: float


def robust_bid(ctx: StrategyContext, policy: RequestPolicy, coin: float) -> Bid:
    """
    Robust bidding policy.

    Re-sample the request decision with the round's uniform ``coin``; when it
    says request, the unit is free and the budget covers r * K, bid the
    reserve per round for the sampled duration.
    """
    k = ctx.sampled_type.duration
    if (
        ctx.item_available
        and ctx.own_budget >= ctx.reserve * k
        and coin < policy.request_prob[ctx.type_index]
    ):
        return Bid(ctx.agent, ctx.reserve, k)
    return Bid.absent(ctx.agent)


def blocker_bid(ctx: StrategyContext, k_max: int) -> Bid:
    """
    Reserve k_max rounds at max{1, r} per round whenever the unit is free.

    Near the end of its budget the blocker buys the longest duration it can
    still afford at that price.
    """
    price = max(1.0, ctx.reserve)
    if not ctx.item_available:
        return Bid.absent(ctx.agent)
    affordable = min(k_max, int(math.floor(ctx.own_budget / price)))
    if affordable < 1:
        return Bid.absent(ctx.agent)
    return Bid(ctx.agent, price, affordable)


def sniper_bid(ctx: StrategyContext, price: float) -> Bid:
    """Buy a single round at ``price`` whenever the sampled value is positive."""
    if (
        ctx.sampled_type.value > 0
        and ctx.item_available
        and ctx.own_budget >= price
    ):
        return Bid(ctx.agent, price, 1)
    return Bid.absent(ctx.agent)


def silent_bid(ctx: StrategyContext) -> Bid:
    return Bid.absent(ctx.agent)


Bidder = Callable[[StrategyContext, float], Bid]


def _robust(agent: AgentSpec, config: MarketConfig) -> Bidder:
    policy = optimal_request_policy(
        agent.type_space, ideal_cap(agent.fair_share, config.units)
    )
    return lambda ctx, coin: robust_bid(ctx, policy, coin)


def _blocker(agent: AgentSpec, config: MarketConfig) -> Bidder:
    k_max = int(agent.strategy.params.get("k_max", agent.type_space.k_max))
    return lambda ctx, coin: blocker_bid(ctx, k_max)


def _sniper(agent: AgentSpec, config: MarketConfig) -> Bidder:
    default = max(1.0, config.reserve) + constants.SNIPER_MARKUP
    price = float(agent.strategy.params.get("price", default))
    if price <= 0:
        raise ConfigError(f"sniper price must be positive, got {price}")
    return lambda ctx, coin: sniper_bid(ctx, price)


def _silent(agent: AgentSpec, config: MarketConfig) -> Bidder:
    return lambda ctx, coin: silent_bid(ctx)


STRATEGY_FACTORIES: Dict[str, Callable[[AgentSpec, MarketConfig], Bidder]] = {
    "robust": _robust,
    "blocker": _blocker,
    "sniper": _sniper,
    "silent": _silent,
}


def build_bidders(config: MarketConfig) -> List[Bidder]:
    """
    Instantiate every agent's strategy; the robust policy's LP is solved here,
    once per market.

    Raises
    ------
    ConfigError
        When a strategy name is unknown.
    """
    bidders = []
    for i, agent in enumerate(config.agents):
        name = agent.strategy.name
        if name not in STRATEGY_FACTORIES:
            raise ConfigError(
                f"agent {i}: unknown strategy {name!r}, expected one of"
                f" {constants.STRATEGY_NAMES}"
            )
        bidders.append(STRATEGY_FACTORIES[name](agent, config))
    return bidders
