import unittest

import numpy as np
import pytest

from pseudomarket import exceptions
from pseudomarket.ideal import (
    LPSolution,
    LPStatus,
    build_ideal_lp,
    epoch_stats,
    f_to_x,
    ideal_cap,
    optimal_request_policy,
    simulate_no_competition,
    solve_lp,
    vertex_enumeration_oracle,
    welfare_upper_bound,
    x_to_f,
)
from pseudomarket.model import TypeSpace, agent_stream

EPSILON = 0.001


class TestPointMass(unittest.TestCase):
    def test_ideal_utility_equals_fair_share(self) -> None:
        types = TypeSpace.from_triples([(1, 1, 1.0)])
        for alpha in np.arange(1, 10) / 10:
            policy = optimal_request_policy(types, float(alpha))
            self.assertAlmostEqual(policy.stats.v_star, alpha, delta=1e-9)
            self.assertAlmostEqual(policy.stats.beta, alpha, delta=1e-9)


class TestTwoTypeInstance(unittest.TestCase):
    def setUp(self) -> None:
        self.types = TypeSpace.from_triples([(1, 2, 0.5), (0, 1, 0.5)])
        self.lp = build_ideal_lp(self.types, 0.5)

    def test_lp_shape(self) -> None:
        self.assertEqual(self.lp.constraint_matrix.shape, (3, 2))
        np.testing.assert_allclose(self.lp.rhs, [0.5, 0.5, 0.5])
        np.testing.assert_allclose(self.lp.objective, [2.0, 0.0])

    def test_solution(self) -> None:
        solution = solve_lp(self.lp)
        np.testing.assert_allclose(solution.f, [0.25, 0.0], atol=1e-12)
        self.assertAlmostEqual(solution.objective_value, 0.5)
        self.assertLessEqual(self.lp.max_violation(solution.f), 1e-12)

    def test_status(self) -> None:
        self.assertIs(solve_lp(self.lp).status, LPStatus.OPTIMAL)
        idle = TypeSpace.from_triples([(0, 1, 1.0)])
        self.assertIs(
            solve_lp(build_ideal_lp(idle, 0.5)).status, LPStatus.DEGENERATE
        )

    def test_request_policy(self) -> None:
        policy = f_to_x(solve_lp(self.lp), self.types)
        np.testing.assert_allclose(policy.x, [1 / 3, 0.0], atol=1e-12)
        np.testing.assert_allclose(
            policy.request_prob, [2 / 3, 0.0], atol=1e-12
        )
        self.assertAlmostEqual(policy.stats.v_star, 0.5)
        self.assertAlmostEqual(policy.stats.beta, 0.5)
        self.assertAlmostEqual(policy.stats.q, 1 / 3)
        self.assertAlmostEqual(policy.stats.kappa, 2.0)

    def test_oracle_agrees(self) -> None:
        oracle = vertex_enumeration_oracle(self.lp)
        self.assertAlmostEqual(oracle.objective_value, 0.5, delta=1e-9)


class TestSmallValueTypes(unittest.TestCase):
    def test_long_low_value_type_is_never_requested(self) -> None:
        types = TypeSpace.from_triples(
            [(1, 1, 0.1), (EPSILON, 2, 0.1), (EPSILON**2, 1, 0.8)]
        )
        solution = solve_lp(build_ideal_lp(types, 0.2))
        self.assertAlmostEqual(solution.f[1], 0.0, delta=1e-9)
        policy = f_to_x(solution, types)
        self.assertLessEqual(policy.stats.beta, 0.2 + 1e-9)

    def test_utilization_below_fair_share(self) -> None:
        alpha = 0.2
        types = TypeSpace.from_triples(
            [(1, 1, alpha / 2), (EPSILON, 2, 1 - alpha / 2)]
        )
        solution = solve_lp(build_ideal_lp(types, alpha))
        self.assertAlmostEqual(solution.f[1], 0.0, delta=1e-9)
        stats = f_to_x(solution, types).stats
        self.assertAlmostEqual(stats.beta, alpha / 2, delta=1e-9)
        self.assertLess(stats.beta, alpha)


class TestErrors(unittest.TestCase):
    def test_cap_out_of_range(self) -> None:
        types = TypeSpace.from_triples([(1, 1, 1.0)])
        with self.assertRaises(exceptions.CapOutOfRange):
            build_ideal_lp(types, 0.0)
        with self.assertRaises(exceptions.CapOutOfRange):
            build_ideal_lp(types, 1.5)

    def test_degenerate_denominator(self) -> None:
        types = TypeSpace.from_triples([(1, 2, 1.0)])
        solution = LPSolution(np.array([1.0]), 2.0, LPStatus.OPTIMAL)
        with self.assertRaises(exceptions.DegenerateDenominator):
            f_to_x(solution, types)

    def test_oracle_refuses_large_instances(self) -> None:
        types = TypeSpace.from_triples([(1, 1, 1 / 7)] * 7)
        with self.assertRaises(exceptions.TooManyTypes):
            vertex_enumeration_oracle(build_ideal_lp(types, 0.5))

    def test_solver_errors_are_arithmetic_errors(self) -> None:
        self.assertTrue(issubclass(exceptions.SolverError, ArithmeticError))


def _random_type_space(rng: np.random.Generator) -> TypeSpace:
    n = int(rng.integers(1, 5))
    probs = rng.dirichlet(np.ones(n))
    probs[-1] = 1.0 - probs[:-1].sum()
    return TypeSpace.from_triples(
        [
            (float(rng.uniform(0, 2)), int(rng.integers(1, 6)), float(p))
            for p in probs
        ]
    )


def test_simplex_matches_vertex_enumeration() -> None:
    rng = np.random.default_rng(2024)
    for _ in range(100):
        types = _random_type_space(rng)
        lp = build_ideal_lp(types, float(rng.uniform(0.05, 1.0)))
        simplex = solve_lp(lp)
        oracle = vertex_enumeration_oracle(lp)
        assert simplex.objective_value == pytest.approx(
            oracle.objective_value, abs=1e-7
        )
        assert lp.max_violation(simplex.f) <= 1e-9


def test_x_to_f_inverts_f_to_x() -> None:
    types = TypeSpace.from_triples([(1, 3, 0.3), (0.5, 2, 0.3), (2, 1, 0.4)])
    solution = solve_lp(build_ideal_lp(types, 0.6))
    policy = f_to_x(solution, types)
    np.testing.assert_allclose(x_to_f(policy.x, types), solution.f, atol=1e-12)


def test_idle_policy_has_zero_stats() -> None:
    types = TypeSpace.from_triples([(0, 1, 1.0)])
    stats = epoch_stats([0.0], types)
    assert stats.idle
    assert stats.v_star == 0.0 and stats.beta == 0.0


def test_ideal_cap_is_clamped() -> None:
    assert ideal_cap(0.2, 4) == pytest.approx(0.8)
    assert ideal_cap(0.5, 4) == 1.0


def test_no_competition_renewal_matches_stats() -> None:
    types = TypeSpace.from_triples([(1, 2, 0.5), (0, 1, 0.5)])
    policy = optimal_request_policy(types, 0.5)
    rate, held = simulate_no_competition(
        policy, types, 200_000, agent_stream(0, 0, 0, 0)
    )
    assert rate == pytest.approx(0.5, rel=0.02)
    assert held == pytest.approx(0.5, rel=0.02)


@pytest.mark.parametrize("horizon", [1, 3, 5, 101])
def test_reservation_cut_at_odd_horizon(horizon) -> None:
    types = TypeSpace.from_triples([(1, 2, 1.0)])
    policy = optimal_request_policy(types, 1.0)
    assert policy.request_prob == (1.0,)
    rate, held = simulate_no_competition(
        policy, types, horizon, agent_stream(0, 0, 0, 0)
    )
    assert rate == pytest.approx(1.0)
    assert held == pytest.approx(1.0)


def test_welfare_upper_bound() -> None:
    assert welfare_upper_bound(0.1, 10, 1000) == pytest.approx(1000.0)
