import unittest

import numpy as np
import pytest

from pseudomarket import exceptions
from pseudomarket.mechanism import (
    run_allocator,
    run_greedy_omniscient,
    run_mechanism,
    run_round_robin,
    step,
)
from pseudomarket.model import (
    AgentSpec,
    Allocator,
    Bid,
    MarketConfig,
    MarketState,
    StrategySpec,
    TieBreak,
    TypeSpace,
    market_stream,
    uniform_share_agents,
)
from pseudomarket.strategies import sniper_bid

UNIT = TypeSpace.from_triples([(1, 1, 1.0)])
TWO_ROUND = TypeSpace.from_triples([(1, 2, 0.5), (0, 1, 0.5)])


def _config(n=3, horizon=30, **kwargs) -> MarketConfig:
    return MarketConfig(
        horizon=horizon, agents=uniform_share_agents(n, UNIT), **kwargs
    )


class TestStepSingleUnit(unittest.TestCase):
    def setUp(self) -> None:
        self.config = _config(reserve=1.0)
        self.state = MarketState.initial(self.config)

    def test_highest_bid_wins_and_ties_go_to_lowest_index(self) -> None:
        bids = [Bid(0, 2.0, 1), Bid(1, 3.0, 2), Bid(2, 3.0, 1)]
        state, outcome = step(self.state, bids, self.config)
        self.assertEqual([w.agent for w in outcome.winners], [1])
        self.assertEqual(outcome.winners[0].total_payment, 6.0)
        self.assertAlmostEqual(state.budgets[1], 4.0)
        self.assertEqual(state.round, 3)
        self.assertEqual(state.item_free_at[0], 3)

    def test_ledger_after_jump(self) -> None:
        bids = [Bid(0, 2.0, 1), Bid(1, 3.0, 2), Bid(2, 3.0, 1)]
        state, _ = step(self.state, bids, self.config)
        expected = [[True, True], [False, True], [True, True]]
        np.testing.assert_array_equal(state.blocked_ledger[:, :2], expected)
        self.assertFalse(state.blocked_ledger[:, 2:].any())

    def test_multi_round_bid_below_reserve_is_ignored(self) -> None:
        bids = [Bid(0, 0.5, 2), Bid(1, 0.4, 1)]
        _, outcome = step(self.state, bids, self.config)
        self.assertEqual(outcome.winners[0].agent, 1)

    def test_single_round_bid_below_reserve_is_valid(self) -> None:
        _, outcome = step(self.state, [Bid(2, 0.1, 1)], self.config)
        self.assertEqual(outcome.winners[0].agent, 2)

    def test_bid_above_budget_is_ignored(self) -> None:
        state, outcome = step(self.state, [Bid(0, 11.0, 1)], self.config)
        self.assertTrue(outcome.no_allocation)
        self.assertEqual(state.round, 2)
        np.testing.assert_allclose(state.budgets, [10.0, 10.0, 10.0])

    def test_cheap_winner_does_not_block_others(self) -> None:
        state, _ = step(self.state, [Bid(0, 0.5, 1)], self.config)
        self.assertFalse(state.blocked_ledger[:, 0].any())

    def test_duplicate_bid(self) -> None:
        with self.assertRaises(exceptions.DuplicateBid):
            step(self.state, [Bid(0, 1.0, 1), Bid(0, 2.0, 1)], self.config)

    def test_bid_from_holder(self) -> None:
        state, _ = step(self.state, [Bid(0, 1.0, 3)], self.config, jump=False)
        with self.assertRaises(exceptions.BidFromHolder):
            step(state, [Bid(0, 1.0, 1)], self.config, jump=False)

    def test_seeded_tie_break_needs_generator(self) -> None:
        config = _config(reserve=1.0, tie_break=TieBreak.SEEDED_RANDOM)
        state = MarketState.initial(config)
        with self.assertRaises(ValueError):
            step(state, [Bid(0, 1.0, 1), Bid(1, 1.0, 1)], config)
        _, outcome = step(
            state,
            [Bid(0, 1.0, 1), Bid(1, 1.0, 1)],
            config,
            tie_rng=market_stream(0, 0),
        )
        self.assertIn(outcome.winners[0].agent, (0, 1))


class TestStepMultiUnit(unittest.TestCase):
    def setUp(self) -> None:
        self.config = _config(n=4, horizon=10, units=2, reserve=1.0)
        self.state = MarketState.initial(self.config)

    def test_top_bids_take_distinct_units(self) -> None:
        bids = [Bid(0, 1.0, 1), Bid(1, 2.0, 2), Bid(2, 1.5, 1), Bid(3, 1.0, 1)]
        state, outcome = step(self.state, bids, self.config)
        self.assertEqual([w.agent for w in outcome.winners], [1, 2])
        np.testing.assert_array_equal(state.holder, [1, 2])
        np.testing.assert_array_equal(state.item_free_at, [3, 2])
        self.assertEqual(state.round, 2)
        # both units went to bids >= r, so the losers are blocked
        np.testing.assert_array_equal(
            state.blocked_ledger[:, 0], [True, False, False, True]
        )

    def test_jump_is_single_unit_only(self) -> None:
        with self.assertRaises(ValueError):
            step(self.state, [], self.config, jump=True)


def _robust_market(horizon=400, **kwargs) -> MarketConfig:
    return MarketConfig(
        horizon=horizon,
        agents=(
            AgentSpec(0.5, TWO_ROUND, StrategySpec("robust")),
            AgentSpec(0.5, UNIT, StrategySpec("blocker", {"k_max": 3})),
        ),
        reserve=2.0,
        **kwargs,
    )


class TestRunMechanism(unittest.TestCase):
    def test_payments_and_budgets(self) -> None:
        config = _robust_market()
        trace = run_mechanism(config, trial=1)
        budgets = config.initial_budgets
        self.assertTrue(np.all(trace.total_payment <= budgets + 1e-9))
        # the robust bidder always pays r * K = 4 for a two-round request
        wins = trace.payment[0][trace.won[0]]
        np.testing.assert_allclose(wins, 4.0)
        np.testing.assert_allclose(
            trace.total_utility[0], 2.0 * trace.won[0].sum()
        )

    def test_unit_is_never_double_allocated(self) -> None:
        trace = run_mechanism(_robust_market(), trial=2)
        self.assertTrue(np.all(trace.held.sum(axis=0) <= 1))

    def test_jump_and_per_round_paths_agree(self) -> None:
        config = _robust_market()
        fast = run_mechanism(config, trial=3, jump=True)
        slow = run_mechanism(config, trial=3, jump=False)
        for name in ("utility", "payment", "blocked", "won", "held"):
            np.testing.assert_array_equal(
                getattr(fast, name), getattr(slow, name), err_msg=name
            )
        contested = [o for o in slow.outcomes if o.available_units > 0]
        self.assertEqual(fast.outcomes, contested)

    def test_same_seed_same_trace(self) -> None:
        config = _robust_market(seed=11)
        first = run_mechanism(config, trial=0)
        second = run_mechanism(config, trial=0)
        np.testing.assert_array_equal(first.utility, second.utility)
        np.testing.assert_array_equal(first.blocked, second.blocked)

    def test_short_reservation_earns_nothing(self) -> None:
        config = MarketConfig(
            horizon=50,
            agents=(AgentSpec(1.0, TypeSpace.from_triples([(1, 2, 1.0)])),),
        )
        trace = run_mechanism(
            config, bidders=[lambda ctx, coin: sniper_bid(ctx, 0.5)]
        )
        self.assertTrue(trace.won[0].any())
        self.assertEqual(trace.total_utility[0], 0.0)

    def test_sampled_type_lookup(self) -> None:
        trace = run_mechanism(_robust_market(horizon=20))
        self.assertIn(trace.sampled_type(0, 5), TWO_ROUND.types)


def test_round_robin_rotates() -> None:
    config = MarketConfig(
        horizon=10,
        agents=uniform_share_agents(2, UNIT),
        allocator=Allocator.ROUND_ROBIN,
    )
    trace = run_allocator(config)
    np.testing.assert_array_equal(trace.total_utility, [5.0, 5.0])
    assert trace.allocated_fraction == 1.0
    assert trace.total_payment.sum() == 0.0


def test_round_robin_ignores_value() -> None:
    types = TypeSpace.from_triples([(1, 1, 0.5), (0, 1, 0.5)])
    config = MarketConfig(horizon=1000, agents=uniform_share_agents(2, types))
    trace = run_round_robin(config)
    assert trace.held.sum() == 1000
    assert trace.total_utility.sum() < 1000


def test_greedy_serves_lowest_positive_agent() -> None:
    types = TypeSpace.from_triples([(1, 3, 0.1), (0, 1, 0.9)])
    config = MarketConfig(horizon=2000, agents=uniform_share_agents(3, types))
    trace = run_greedy_omniscient(config)
    assert np.all(trace.held.sum(axis=0) <= 1)
    for t in np.flatnonzero(trace.won.any(axis=0)):
        winner = int(np.flatnonzero(trace.won[:, t])[0])
        assert trace.sampled_type(winner, t + 1).value > 0
        earlier = [trace.sampled_type(i, t + 1).value for i in range(winner)]
        assert all(v == 0 for v in earlier)


def test_allocators_need_one_unit() -> None:
    config = MarketConfig(
        horizon=10, agents=uniform_share_agents(2, UNIT), units=2
    )
    with pytest.raises(exceptions.InvalidMarketParameter):
        run_round_robin(config)
    with pytest.raises(exceptions.InvalidMarketParameter):
        run_greedy_omniscient(config)
