"""
Monte-Carlo harness: repeated independent trials, mean and standard error
aggregation, and the analytic bounds the experiments are compared with.
"""
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pseudomarket import constants
from pseudomarket.exceptions import (
    InvalidMarketParameter,
    KmaxTooSmall,
    ReserveBelowOne,
    ZeroPaymentAggregate,
)
from pseudomarket.ideal import (
    ideal_cap,
    optimal_request_policy,
    welfare_upper_bound,
)
from pseudomarket.mechanism import Trace, run_allocator
from pseudomarket.model import (
    AgentSpec,
    Allocator,
    MarketConfig,
    StrategySpec,
    TypeSpace,
    uniform_share_agents,
    validate_config,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrialSummary:
    trial: int
    total_utility: np.ndarray
    total_payment: np.ndarray
    utilization: np.ndarray
    blocked_rounds: np.ndarray
    allocated_fraction: float

    @classmethod
    def from_trace(cls, trial: int, trace: Trace) -> "TrialSummary":
        return cls(
            trial=trial,
            total_utility=trace.total_utility,
            total_payment=trace.total_payment,
            utilization=trace.utilization,
            blocked_rounds=trace.blocked_rounds,
            allocated_fraction=trace.allocated_fraction,
        )


class _Moments:
    """Running sums and sums of squares of a vector metric."""

    def __init__(self, size: int) -> None:
        self.count = 0
        self.total = np.zeros(size)
        self.total_sq = np.zeros(size)

    def add(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        self.count += 1
        self.total += values
        self.total_sq += values * values

    @property
    def mean(self) -> np.ndarray:
        return self.total / self.count

    @property
    def standard_error(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.total)
        variance = (self.total_sq - self.total**2 / self.count) / (
            self.count - 1
        )
        return np.sqrt(np.maximum(variance, 0.0) / self.count)


METRICS = ["utility", "payment", "utilization", "blocked_rounds"]


@dataclass
class ExperimentSummary:
    """
    Aggregate of ``trials`` independent trials. Per-agent means and standard
    errors are keyed by metric name, see METRICS.
    """

    trials: int
    base_seed: int
    horizon: int
    means: Dict[str, np.ndarray]
    standard_errors: Dict[str, np.ndarray]
    mean_allocated_fraction: float
    se_allocated_fraction: float
    references: Dict[str, Optional[float]] = field(default_factory=dict)
    checks: Dict[str, str] = field(default_factory=dict)
    rows: List[TrialSummary] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        agents = []
        for i in range(len(self.means["utility"])):
            record: Dict[str, Any] = {"agent": i}
            for metric in METRICS:
                record[f"mean_{metric}"] = float(self.means[metric][i])
                record[f"se_{metric}"] = float(self.standard_errors[metric][i])
            record["mean_utility_rate"] = (
                record["mean_utility"] / self.horizon
            )
            agents.append(record)
        return {
            "trials": self.trials,
            "base_seed": self.base_seed,
            "horizon": self.horizon,
            "agents": agents,
            "mean_allocated_fraction": self.mean_allocated_fraction,
            "se_allocated_fraction": self.se_allocated_fraction,
            "references": dict(self.references),
            "checks": dict(self.checks),
        }


def _run_trial(config: MarketConfig, trial: int) -> TrialSummary:
    trace = run_allocator(config, trial)
    logger.debug("trial %d done", trial)
    return TrialSummary.from_trace(trial, trace)


def monte_carlo(
    config: MarketConfig,
    trials: int,
    base_seed: Optional[int] = None,
    jobs: int = 1,
    focus: int = 0,
    slack_const: float = constants.DEFAULT_SLACK_CONST,
) -> ExperimentSummary:
    """
    Run ``trials`` independent trials and aggregate them.

    Trial k draws from the streams keyed by (base_seed, k, ...), so the result
    does not depend on how trials are spread over workers. Trial summaries are
    merged in trial order, which keeps the output bit-for-bit reproducible.

    Parameters
    ----------
    config : MarketConfig
    trials : int
        Number of trials, at least one.
    base_seed : int, optional
        Defaults to ``config.seed``.
    jobs : int
        Worker processes; 1 runs in the calling process.
    focus : int
        Agent the analytic references and checks refer to.
    slack_const : float
        Constant of the guarantee's additive loss term.

    Returns
    -------
    ExperimentSummary
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    seed = config.seed if base_seed is None else base_seed
    config = validate_config(dataclasses.replace(config, seed=seed))
    logger.info(
        "running %d trials of T=%d with %d agents (jobs=%d)",
        trials,
        config.horizon,
        config.n_agents,
        jobs,
    )
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(
                pool.map(
                    _run_trial,
                    [config] * trials,
                    range(trials),
                    chunksize=max(1, trials // (4 * jobs)),
                )
            )
    else:
        rows = [_run_trial(config, k) for k in range(trials)]
    rows.sort(key=lambda row: row.trial)
    summary = aggregate(rows, config, seed)
    summary.references = reference_bounds(config, focus, slack_const)
    summary.checks = evaluate_checks(summary, config, focus)
    return summary


def aggregate(
    rows: Sequence[TrialSummary], config: MarketConfig, base_seed: int
) -> ExperimentSummary:
    n = config.n_agents
    moments = {metric: _Moments(n) for metric in METRICS}
    fraction = _Moments(1)
    for row in rows:
        moments["utility"].add(row.total_utility)
        moments["payment"].add(row.total_payment)
        moments["utilization"].add(row.utilization)
        moments["blocked_rounds"].add(row.blocked_rounds)
        fraction.add(np.array([row.allocated_fraction]))
    return ExperimentSummary(
        trials=len(rows),
        base_seed=base_seed,
        horizon=config.horizon,
        means={m: moments[m].mean for m in METRICS},
        standard_errors={m: moments[m].standard_error for m in METRICS},
        mean_allocated_fraction=float(fraction.mean[0]),
        se_allocated_fraction=float(fraction.standard_error[0]),
        rows=list(rows),
    )


def guarantee_lower_bound(
    v_star: float,
    T: int,
    r: float,
    alpha: float,
    beta: float,
    k_max: int,
    multi: bool = False,
    slack_const: float = constants.DEFAULT_SLACK_CONST,
) -> float:
    """
    Utility a robust bidder can guarantee against any opponents:

        v* T (min{1/r, 1 - c/r} - slack_const k_max / (beta sqrt(T)))

    with c = 1 for one unit and c = 1 - alpha for the multi-unit bound.

    Examples
    --------
    r = 2 gives the leading factor 1/2; r = 2 - alpha with multi=True gives
    1 / (2 - alpha).

    Raises
    ------
    ReserveBelowOne
        When r < 1.
    """
    if r < 1:
        raise ReserveBelowOne(f"the guarantee needs r >= 1, got {r}")
    if beta <= 0:
        return 0.0
    c = 1.0 - alpha if multi else 1.0
    leading = min(1.0 / r, 1.0 - c / r)
    slack = slack_const * k_max / (beta * math.sqrt(T))
    return v_star * T * (leading - slack)


def impossibility_upper_bound(
    v_star: float, T: int, r: float, alpha: float, k_max: int
) -> float:
    """
    Utility cap under blocking opponents:

        v* T (1 - (1 - alpha) / max{1, r} + 1/k_max) + v* (k_max - 1)

    Raises
    ------
    KmaxTooSmall
        When k_max < 2.
    """
    if k_max < 2:
        raise KmaxTooSmall(f"the bound needs k_max >= 2, got {k_max}")
    price = max(1.0, r)
    return v_star * T * (1.0 - (1.0 - alpha) / price + 1.0 / k_max) + v_star * (
        k_max - 1
    )


def allocated_fraction(k_max: int, p_prime: float) -> float:
    """Fraction of rounds held when a k_max demand starts w.p. p' per free round."""
    return k_max / (k_max - 1.0 + 1.0 / p_prime)


def hardness_instance(
    n: int, k_max: int, horizon: int = 100_000, seed: int = 0
) -> Tuple[MarketConfig, float, float, float]:
    """
    Symmetric instance on which no mechanism serves everyone's ideal utility.

    Every agent has fair share 1/n and type (1, k_max) with probability
    p = 1 / (k_max (n - 1) + 1), else (0, 1). Some agent has positive value
    in a free round with probability p' = 1 - (1 - p)^n.

    Returns
    -------
    Tuple[MarketConfig, float, float, float]
        Greedy-allocator config, p, p' and the analytic allocated fraction.
    """
    if n < 2 or k_max < 1:
        raise InvalidMarketParameter(
            f"the hardness instance needs n >= 2 and k_max >= 1, got n={n}"
            f" k_max={k_max}"
        )
    p = 1.0 / (k_max * (n - 1) + 1)
    p_prime = 1.0 - (1.0 - p) ** n
    types = TypeSpace.from_triples([(1.0, k_max, p), (0.0, 1, 1.0 - p)])
    config = MarketConfig(
        horizon=horizon,
        agents=uniform_share_agents(n, types),
        seed=seed,
        allocator=Allocator.GREEDY_OMNISCIENT,
    )
    return config, p, p_prime, allocated_fraction(k_max, p_prime)


def single_round_welfare_bound(n: int, horizon: int) -> float:
    """
    Welfare cap for n symmetric single-round agents with value 1 w.p. 1/n:
    only rounds where someone has value can produce welfare.
    """
    return (1.0 - (1.0 - 1.0 / n) ** n) * horizon


def bpb_ratio(
    traces: Sequence[Union[TrialSummary, Trace]], agent: int
) -> float:
    """
    Aggregate utility over aggregate payment of ``agent``.

    For a robust bidder this estimates v* / (beta r).

    Raises
    ------
    ZeroPaymentAggregate
        When the agent paid nothing over all trials.
    """
    rows = [
        t if isinstance(t, TrialSummary) else TrialSummary.from_trace(k, t)
        for k, t in enumerate(traces)
    ]
    utility = math.fsum(float(row.total_utility[agent]) for row in rows)
    payment = math.fsum(float(row.total_payment[agent]) for row in rows)
    if payment <= 0:
        raise ZeroPaymentAggregate(f"agent {agent} paid nothing")
    return utility / payment


def _is_symmetric(config: MarketConfig) -> bool:
    first = config.agents[0]
    return all(
        a.type_space == first.type_space
        and abs(a.fair_share - first.fair_share) <= constants.FAIR_SHARE_SUM_TOL
        for a in config.agents
    )


def reference_bounds(
    config: MarketConfig,
    focus: int = 0,
    slack_const: float = constants.DEFAULT_SLACK_CONST,
) -> Dict[str, Optional[float]]:
    """
    Analytic references applicable to ``config``, computed for agent
    ``focus``. Inapplicable references are None.
    """
    agent = config.agents[focus]
    policy = optimal_request_policy(
        agent.type_space, ideal_cap(agent.fair_share, config.units)
    )
    v_star, beta = policy.stats.v_star, policy.stats.beta
    T, r = config.horizon, config.reserve
    references: Dict[str, Optional[float]] = {
        "v_star": v_star,
        "beta": beta,
        "guarantee_lb": None,
        "impossibility_ub": None,
        "welfare_ub": None,
        "fraction": None,
    }
    if r >= 1:
        references["guarantee_lb"] = guarantee_lower_bound(
            v_star,
            T,
            r,
            agent.fair_share,
            beta,
            agent.type_space.k_max,
            multi=config.units > 1,
            slack_const=slack_const,
        )
    if config.k_max >= 2:
        references["impossibility_ub"] = impossibility_upper_bound(
            v_star, T, r, agent.fair_share, config.k_max
        )
    if _is_symmetric(config):
        references["welfare_ub"] = welfare_upper_bound(
            v_star, config.n_agents, T
        )
        positive = [t for t in agent.type_space.types if t.value > 0]
        if (
            config.allocator is Allocator.GREEDY_OMNISCIENT
            and len(positive) == 1
        ):
            p_prime = 1.0 - (1.0 - positive[0].probability) ** config.n_agents
            references["fraction"] = allocated_fraction(
                positive[0].duration, p_prime
            )
    return references


def evaluate_checks(
    summary: ExperimentSummary, config: MarketConfig, focus: int = 0
) -> Dict[str, str]:
    """PASS/FAIL flags for the references that apply to this experiment."""
    checks: Dict[str, str] = {}
    refs = summary.references
    mean = float(summary.means["utility"][focus])
    se = float(summary.standard_errors["utility"][focus])
    strategies = [a.strategy.name for a in config.agents]
    auction = config.allocator is Allocator.PSEUDO_AUCTION
    opponents = strategies[:focus] + strategies[focus + 1 :]

    lower = refs.get("guarantee_lb")
    if auction and lower is not None and strategies[focus] == "robust":
        checks["guarantee"] = "PASS" if mean >= lower else "FAIL"
    upper = refs.get("impossibility_ub")
    if auction and upper is not None and "blocker" in opponents:
        margin = constants.STATISTICAL_MARGIN_SE * se
        checks["impossibility"] = "PASS" if mean <= upper + margin else "FAIL"
    fraction = refs.get("fraction")
    if fraction is not None:
        gap = abs(summary.mean_allocated_fraction - fraction)
        checks["fraction"] = (
            "PASS" if gap <= constants.FRACTION_TOLERANCE else "FAIL"
        )
    return checks


def robust_against(
    type_space: TypeSpace,
    alpha: float,
    opponent: StrategySpec,
    reserve: float,
    horizon: int,
    opponent_types: Optional[TypeSpace] = None,
    seed: int = 0,
) -> MarketConfig:
    """
    Two-agent market: a robust bidder with fair share ``alpha`` against one
    opponent holding the remaining 1 - alpha.
    """
    return MarketConfig(
        horizon=horizon,
        agents=(
            AgentSpec(alpha, type_space, StrategySpec("robust")),
            AgentSpec(
                1.0 - alpha,
                opponent_types if opponent_types is not None else type_space,
                opponent,
            ),
        ),
        reserve=reserve,
        seed=seed,
    )
