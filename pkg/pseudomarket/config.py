"""
Experiment files: JSON documents describing one market.

    {
        "horizon": 10000,
        "units": 1,
        "reserve": 2.0,
        "trials": 200,
        "seed": 0,
        "tie_break": "lowest_index",
        "agents": [
            {"fair_share": 0.5, "types": [[1, 2, 0.5], [0, 1, 0.5]],
             "strategy": "robust", "params": {}},
            ...
        ],
        "preset": "ideal"
    }
"""
import json
import logging
import numbers
from dataclasses import dataclass
from typing import Any, Dict, Optional, Set

from pseudomarket import constants
from pseudomarket.exceptions import (
    FairShareRangeError,
    ParseError,
    SchemaError,
)
from pseudomarket.model import (
    AgentSpec,
    Allocator,
    MarketConfig,
    StrategySpec,
    TieBreak,
    TypeSpace,
)

logger = logging.getLogger(__name__)

REQUIRED_KEYS = {"horizon", "agents"}
OPTIONAL_KEYS = {
    "units",
    "reserve",
    "trials",
    "seed",
    "tie_break",
    "allocator",
    "preset",
}
REQUIRED_AGENT_KEYS = {"fair_share", "types"}
OPTIONAL_AGENT_KEYS = {"strategy", "params"}
STRATEGY_PARAMS: Dict[str, Dict[str, str]] = {
    "robust": {},
    "blocker": {"k_max": "integer"},
    "sniper": {"price": "number"},
    "silent": {},
}


@dataclass(frozen=True)
class ExperimentFile:
    config: MarketConfig
    trials: int
    preset: Optional[str]


def _check_keys(
    document: Dict[str, Any], required: Set[str], optional: Set[str], where: str
) -> None:
    missing = required.difference(document.keys())
    if missing:
        raise SchemaError(f"{where}: missing keys {sorted(missing)}")
    unknown = set(document.keys()).difference(required | optional)
    if unknown:
        raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise SchemaError(f"{where}: expected an integer, got {value!r}")
    return int(value)


def _choice(value: Any, choices: list, where: str) -> str:
    if value not in choices:
        raise SchemaError(f"{where}: expected one of {choices}, got {value!r}")
    return str(value)


def _type_space(types: Any, where: str) -> TypeSpace:
    if not isinstance(types, list) or not types:
        raise SchemaError(
            f"{where}: only finite type lists are supported, expected a"
            " non-empty list of [value, duration, probability] triples"
        )
    triples = []
    for j, triple in enumerate(types):
        if not isinstance(triple, list) or len(triple) != 3:
            raise SchemaError(
                f"{where}[{j}]: expected [value, duration, probability]"
            )
        triples.append(
            (
                _number(triple[0], f"{where}[{j}] value"),
                _integer(triple[1], f"{where}[{j}] duration"),
                _number(triple[2], f"{where}[{j}] probability"),
            )
        )
    return TypeSpace.from_triples(triples)


def _strategy_params(strategy: str, params: Any, where: str) -> Dict[str, Any]:
    if not isinstance(params, dict):
        raise SchemaError(f"{where}: expected an object")
    _check_keys(params, set(), set(STRATEGY_PARAMS[strategy]), where)
    checked: Dict[str, Any] = {}
    for key, value in params.items():
        if STRATEGY_PARAMS[strategy][key] == "integer":
            checked[key] = _integer(value, f"{where}.{key}")
        else:
            checked[key] = _number(value, f"{where}.{key}")
        if not checked[key] > 0:
            raise SchemaError(f"{where}.{key}: expected > 0, got {value!r}")
    return checked


def _agent(document: Any, index: int) -> AgentSpec:
    where = f"agents[{index}]"
    if not isinstance(document, dict):
        raise SchemaError(f"{where}: expected an object")
    _check_keys(document, REQUIRED_AGENT_KEYS, OPTIONAL_AGENT_KEYS, where)
    fair_share = _number(document["fair_share"], f"{where}.fair_share")
    if not 0.0 < fair_share <= 1.0:
        raise FairShareRangeError(
            f"{where}: fair share {fair_share} is not in (0, 1]"
        )
    strategy = _choice(
        document.get("strategy", "silent"),
        constants.STRATEGY_NAMES,
        f"{where}.strategy",
    )
    params = _strategy_params(
        strategy, document.get("params", {}), f"{where}.params"
    )
    return AgentSpec(
        fair_share=fair_share,
        type_space=_type_space(document["types"], f"{where}.types"),
        strategy=StrategySpec(strategy, params),
    )


def parse_experiment(document: Any) -> ExperimentFile:
    """
    Validate a decoded experiment document and build its market.

    Fair shares are only range-checked here; whether they sum to one is left
    to the simulator, so single-agent files can be used for ideal reports.

    Raises
    ------
    SchemaError
        For missing or unknown keys and wrongly typed values.
    """
    if not isinstance(document, dict):
        raise SchemaError("an experiment file must hold a JSON object")
    _check_keys(document, REQUIRED_KEYS, OPTIONAL_KEYS, "experiment")
    agents = document["agents"]
    if not isinstance(agents, list) or not agents:
        raise SchemaError("experiment.agents: expected a non-empty list")
    preset = document.get("preset")
    if preset is not None:
        preset = _choice(
            preset, constants.FILE_PRESET_NAMES, "experiment.preset"
        )
    config = MarketConfig(
        horizon=_integer(document["horizon"], "experiment.horizon"),
        agents=tuple(_agent(a, i) for i, a in enumerate(agents)),
        units=_integer(document.get("units", 1), "experiment.units"),
        reserve=_number(document.get("reserve", 0.0), "experiment.reserve"),
        seed=_integer(document.get("seed", 0), "experiment.seed"),
        tie_break=TieBreak(
            _choice(
                document.get("tie_break", TieBreak.LOWEST_INDEX.value),
                constants.TIE_BREAK_NAMES,
                "experiment.tie_break",
            )
        ),
        allocator=Allocator(
            _choice(
                document.get("allocator", Allocator.PSEUDO_AUCTION.value),
                constants.ALLOCATOR_NAMES,
                "experiment.allocator",
            )
        ),
    )
    if config.allocator is not Allocator.PSEUDO_AUCTION and config.units != 1:
        raise SchemaError(
            f"experiment.allocator: {config.allocator.value} needs units = 1,"
            f" got {config.units}"
        )
    trials = _integer(document.get("trials", 1), "experiment.trials")
    if trials < 1:
        raise SchemaError(f"experiment.trials: expected >= 1, got {trials}")
    return ExperimentFile(config=config, trials=trials, preset=preset)


def load_experiment_file(file_path: str) -> ExperimentFile:
    """
    Read and validate an experiment file.

    Raises
    ------
    OSError
        When the file cannot be read.
    ParseError
        When the file is not UTF-8 encoded JSON.
    SchemaError
        When the document does not follow the schema.
    """
    with open(file_path, "rb") as fp:
        raw = fp.read()
    try:
        document = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as err:
        raise ParseError(f"{file_path}: not UTF-8 text ({err})") from err
    except json.JSONDecodeError as err:
        raise ParseError(f"{file_path}: {err}") from err
    experiment = parse_experiment(document)
    logger.info(
        "loaded %s: %d agents, %d trials",
        file_path,
        experiment.config.n_agents,
        experiment.trials,
    )
    return experiment
