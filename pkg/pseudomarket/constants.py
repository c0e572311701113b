from typing import Any, Dict

# Numerical tolerances
PROBABILITY_MASS_TOL = 1e-12
FAIR_SHARE_SUM_TOL = 1e-9
FEASIBILITY_TOL = 1e-9
OPTIMALITY_TOL = 1e-10
ORACLE_TOL = 1e-7
DENOMINATOR_TOL = 1e-9
MAX_ORACLE_TYPES = 6
MAX_SIMPLEX_ITERATIONS = 10_000

# Random stream purposes, see model.agent_stream
TYPE_STREAM = 0
REQUEST_STREAM = 1
MARKET_STREAM_KEY = 2**32 - 1

SNIPER_MARKUP = 1e-2
DEFAULT_SLACK_CONST = 3.0
STATISTICAL_MARGIN_SE = 3.0
FRACTION_TOLERANCE = 0.01

# CSV output
CSV_COLUMNS = [
    "trial",
    "agent",
    "total_utility",
    "total_payment",
    "utilization",
    "blocked_rounds",
]
FLOAT_FORMAT = ".9g"

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_ERROR = 3
EXIT_IO_ERROR = 4
JOBS_ENV_VAR = "PSEUDOMARKET_JOBS"

STRATEGY_NAMES = ["robust", "blocker", "sniper", "silent"]
TIE_BREAK_NAMES = ["lowest_index", "seeded_random"]
ALLOCATOR_NAMES = ["pseudo_auction", "round_robin", "greedy_omniscient"]
FILE_PRESET_NAMES = [
    "ideal",
    "guarantee",
    "impossibility",
    "hardness",
    "multi",
    "roundrobin",
]

PRESET_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "guarantee": {
        "alpha": 0.2,
        "reserve": 2.0,
        "horizon": 10_000,
        "kmax": 5,
        "trials": 200,
        "blockers": 1,
    },
    "impossibility": {
        "alpha": 0.1,
        "reserve": 2.0,
        "horizon": 10_000,
        "kmax": 20,
        "trials": 200,
        "blockers": 1,
        "strategy": "sniper",
    },
    "hardness": {
        "n": 50,
        "kmax": 20,
        "horizon": 100_000,
        "trials": 50,
    },
    "multi": {
        "alpha": 0.2,
        "units": 4,
        "horizon": 10_000,
        "kmax": 5,
        "trials": 200,
    },
    "roundrobin": {
        "n": 10,
        "horizon": 10_000,
        "trials": 100,
    },
}
