"""
Ready-made experiments. Each preset materialises a MarketConfig with the
defaults in ``constants.PRESET_DEFAULTS``; command-line overrides replace
single defaults.
"""
import logging
from typing import Any, Callable, Dict, Optional, Tuple

from pseudomarket import constants
from pseudomarket.exceptions import ConfigError, UnknownPreset
from pseudomarket.model import (
    AgentSpec,
    Allocator,
    MarketConfig,
    StrategySpec,
    TypeSpace,
    uniform_share_agents,
)
from pseudomarket.simulator import hardness_instance

logger = logging.getLogger(__name__)

PRESET_NAMES = sorted(constants.PRESET_DEFAULTS)

# Overrides each preset understands, besides ``trials`` and ``seed``.
_APPLICABLE = {
    "guarantee": {"horizon", "reserve", "alpha", "kmax", "strategy", "blockers"},
    "impossibility": {
        "horizon",
        "reserve",
        "alpha",
        "kmax",
        "strategy",
        "blockers",
    },
    "hardness": {"horizon", "n", "kmax"},
    "multi": {
        "horizon",
        "reserve",
        "alpha",
        "units",
        "kmax",
        "strategy",
        "blockers",
    },
    "roundrobin": {"horizon", "n"},
}


def _blockers(
    count: int, total_share: float, k_max: int
) -> Tuple[AgentSpec, ...]:
    if count < 1:
        raise ConfigError(f"need at least one blocker, got {count}")
    idle = TypeSpace.from_triples([(0.0, 1, 1.0)])
    spec = StrategySpec("blocker", {"k_max": k_max})
    return tuple(
        AgentSpec(total_share / count, idle, spec) for _ in range(count)
    )


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")


def _guarantee(p: Dict[str, Any]) -> MarketConfig:
    alpha, k_max = float(p["alpha"]), int(p["kmax"])
    _check_alpha(alpha)
    types = TypeSpace.from_triples([(1.0, k_max, 0.5), (0.0, 1, 0.5)])
    focus = AgentSpec(alpha, types, StrategySpec(p.get("strategy", "robust")))
    return MarketConfig(
        horizon=int(p["horizon"]),
        agents=(focus,) + _blockers(int(p["blockers"]), 1.0 - alpha, k_max),
        reserve=float(p["reserve"]),
        seed=int(p["seed"]),
    )


def _impossibility(p: Dict[str, Any]) -> MarketConfig:
    alpha, k_max = float(p["alpha"]), int(p["kmax"])
    _check_alpha(alpha)
    types = TypeSpace.from_triples([(1.0, 1, alpha), (0.0, 1, 1.0 - alpha)])
    focus = AgentSpec(alpha, types, StrategySpec(p["strategy"]))
    return MarketConfig(
        horizon=int(p["horizon"]),
        agents=(focus,) + _blockers(int(p["blockers"]), 1.0 - alpha, k_max),
        reserve=float(p["reserve"]),
        seed=int(p["seed"]),
    )


def _hardness(p: Dict[str, Any]) -> MarketConfig:
    config, _, _, _ = hardness_instance(
        int(p["n"]), int(p["kmax"]), int(p["horizon"]), int(p["seed"])
    )
    return config


def _multi(p: Dict[str, Any]) -> MarketConfig:
    alpha, k_max, units = float(p["alpha"]), int(p["kmax"]), int(p["units"])
    _check_alpha(alpha)
    reserve = float(p["reserve"]) if "reserve" in p else 2.0 - alpha
    types = TypeSpace.from_triples([(1.0, k_max, 0.5), (0.0, 1, 0.5)])
    focus = AgentSpec(alpha, types, StrategySpec(p.get("strategy", "robust")))
    count = int(p.get("blockers", units))
    return MarketConfig(
        horizon=int(p["horizon"]),
        agents=(focus,) + _blockers(count, 1.0 - alpha, k_max),
        units=units,
        reserve=reserve,
        seed=int(p["seed"]),
    )


def _roundrobin(p: Dict[str, Any]) -> MarketConfig:
    n = int(p["n"])
    if n < 2:
        raise ConfigError(f"round-robin needs n >= 2, got {n}")
    types = TypeSpace.from_triples([(1.0, 1, 1.0 / n), (0.0, 1, 1.0 - 1.0 / n)])
    return MarketConfig(
        horizon=int(p["horizon"]),
        agents=uniform_share_agents(n, types),
        seed=int(p["seed"]),
        allocator=Allocator.ROUND_ROBIN,
    )


_BUILDERS: Dict[str, Callable[[Dict[str, Any]], MarketConfig]] = {
    "guarantee": _guarantee,
    "impossibility": _impossibility,
    "hardness": _hardness,
    "multi": _multi,
    "roundrobin": _roundrobin,
}


def build_preset(
    name: str, **overrides: Optional[Any]
) -> Tuple[MarketConfig, int]:
    """
    Materialise a preset.

    Parameters
    ----------
    name : str
        One of PRESET_NAMES.
    **overrides
        horizon, trials, seed, reserve, alpha, units, n, kmax, strategy,
        blockers. None means keep the default; overrides the preset does not
        use are logged and ignored.

    Returns
    -------
    Tuple[MarketConfig, int]
        The market and the number of trials to run.

    Raises
    ------
    UnknownPreset
        When ``name`` is not a preset.

    Examples
    --------
    build_preset("guarantee", reserve=1.2)
    """
    if name not in _BUILDERS:
        raise UnknownPreset(
            f"unknown preset {name!r}, expected one of {PRESET_NAMES}"
        )
    params: Dict[str, Any] = {"seed": 0}
    params.update(constants.PRESET_DEFAULTS[name])
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _APPLICABLE[name] | {"trials", "seed"}:
            logger.warning("preset %s ignores override %s=%r", name, key, value)
            continue
        params[key] = value
    if "strategy" in params and params["strategy"] not in constants.STRATEGY_NAMES:
        raise ConfigError(
            f"unknown strategy {params['strategy']!r}, expected one of"
            f" {constants.STRATEGY_NAMES}"
        )
    config = _BUILDERS[name](params)
    logger.info(
        "preset %s: T=%d L=%d r=%s n=%d",
        name,
        config.horizon,
        config.units,
        config.reserve,
        config.n_agents,
    )
    return config, int(params["trials"])
