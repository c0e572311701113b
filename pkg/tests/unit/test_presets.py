import logging
import unittest

import pytest

from pseudomarket import exceptions
from pseudomarket.model import Allocator, validate_config
from pseudomarket.presets import PRESET_NAMES, build_preset
from pseudomarket.simulator import reference_bounds


class TestDefaults(unittest.TestCase):
    def test_every_preset_is_a_valid_market(self) -> None:
        for name in PRESET_NAMES:
            config, trials = build_preset(name)
            validate_config(config)
            self.assertGreater(trials, 0)

    def test_guarantee(self) -> None:
        config, trials = build_preset("guarantee")
        self.assertEqual(trials, 200)
        self.assertEqual(config.horizon, 10_000)
        self.assertEqual(config.reserve, 2.0)
        self.assertEqual(config.agents[0].fair_share, 0.2)
        self.assertEqual(config.agents[0].strategy.name, "robust")
        self.assertEqual(config.agents[0].type_space.k_max, 5)
        self.assertEqual(config.agents[1].strategy.name, "blocker")
        references = reference_bounds(config)
        self.assertAlmostEqual(references["v_star"], 0.2)
        self.assertAlmostEqual(references["beta"], 0.2)

    def test_impossibility(self) -> None:
        config, _ = build_preset("impossibility")
        self.assertEqual(config.agents[0].strategy.name, "sniper")
        self.assertEqual(config.k_max, 20)
        self.assertAlmostEqual(
            reference_bounds(config)["impossibility_ub"], 601.9
        )

    def test_hardness(self) -> None:
        config, trials = build_preset("hardness")
        self.assertEqual(config.n_agents, 50)
        self.assertEqual(trials, 50)
        self.assertIs(config.allocator, Allocator.GREEDY_OMNISCIENT)

    def test_multi(self) -> None:
        config, _ = build_preset("multi")
        self.assertEqual(config.units, 4)
        self.assertAlmostEqual(config.reserve, 1.8)
        self.assertEqual(config.n_agents, 5)
        references = reference_bounds(config)
        self.assertAlmostEqual(references["v_star"], 0.8)

    def test_roundrobin(self) -> None:
        config, _ = build_preset("roundrobin")
        self.assertEqual(config.n_agents, 10)
        self.assertIs(config.allocator, Allocator.ROUND_ROBIN)
        self.assertAlmostEqual(reference_bounds(config)["v_star"], 0.1)


def test_overrides() -> None:
    config, trials = build_preset("hardness", n=100, kmax=50, trials=3)
    assert config.n_agents == 100
    assert config.k_max == 50
    assert trials == 3


def test_reserve_override_changes_leading_factor() -> None:
    config, _ = build_preset("guarantee", reserve=1.2)
    references = reference_bounds(config, slack_const=0.0)
    expected = 0.2 * 10_000 / 6
    assert references["guarantee_lb"] == pytest.approx(expected)


def test_inapplicable_override_is_ignored(caplog) -> None:
    with caplog.at_level(logging.WARNING):
        config, _ = build_preset("roundrobin", reserve=3.0)
    assert config.reserve == 0.0
    assert "ignores override reserve" in caplog.text


def test_unknown_preset() -> None:
    with pytest.raises(exceptions.UnknownPreset):
        build_preset("auction")


def test_unknown_strategy_override() -> None:
    with pytest.raises(exceptions.ConfigError):
        build_preset("guarantee", strategy="oracle")
