"""
Ideal utility of a single agent: the best long-run utility rate she can reach
with no competition while holding a unit at most a ``cap`` fraction of rounds.

For a finite type space the control problem becomes the linear program

    max   sum_theta v_theta k_theta f_theta
    s.t.  sum_theta k_theta f_theta <= cap
          0 <= f_theta <= p_theta (1 - sum_theta' (k_theta' - 1) f_theta')

where f_theta is the fraction of rounds in which the unit is free, the agent
has type theta and requests it. The request probabilities follow from
x_theta = f_theta / (1 - sum (k - 1) f).
"""
import enum
import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from pseudomarket import constants
from pseudomarket.exceptions import (
    CapOutOfRange,
    DegenerateDenominator,
    NumericalFailure,
    TooManyTypes,
)
from pseudomarket.model import TypeSpace

logger = logging.getLogger(__name__)


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class LPInstance:
    """
    Ideal-utility LP in inequality form ``A f <= b, f >= 0``.

    Row 0 of ``A`` is the share row, rows 1..n are the box rows
    f_theta + p_theta * sum (k - 1) f <= p_theta.
    """

    objective: np.ndarray
    share_row: np.ndarray
    cap: float
    box_matrix: np.ndarray
    box_rhs: np.ndarray

    @property
    def n_variables(self) -> int:
        return int(self.objective.shape[0])

    @property
    def constraint_matrix(self) -> np.ndarray:
        return np.vstack([self.share_row[None, :], self.box_matrix])

    @property
    def rhs(self) -> np.ndarray:
        return np.concatenate([[self.cap], self.box_rhs])

    def max_violation(self, f: np.ndarray) -> float:
        """Largest violation of any row, nonnegativity included."""
        slack = self.constraint_matrix @ f - self.rhs
        return float(max(np.max(slack), np.max(-f), 0.0))


@dataclass(frozen=True)
class LPSolution:
    f: np.ndarray
    objective_value: float
    status: LPStatus


@dataclass(frozen=True)
class EpochStats:
    """
    Renewal statistics of a stationary request policy.

    ``q`` is the request probability when the unit is free, ``kappa`` the
    expected duration of a request, ``v_star`` the utility rate and ``beta``
    the utilization. ``idle`` marks the q = 0 policy, whose stats are zero.
    """

    v_star: float
    beta: float
    q: float
    kappa: float
    idle: bool = False


@dataclass(frozen=True)
class RequestPolicy:
    request_prob: Tuple[float, ...]
    x: Tuple[float, ...]
    stats: EpochStats


def ideal_cap(fair_share: float, units: int = 1) -> float:
    """Utilization cap alpha * L, clamped at 1."""
    return min(fair_share * units, 1.0)


def build_ideal_lp(type_space: TypeSpace, cap: float) -> LPInstance:
    """
    Encode the ideal-utility LP of ``type_space`` under utilization ``cap``.

    Parameters
    ----------
    type_space : TypeSpace
        Finite type distribution of the agent.
    cap : float
        Utilization cap, alpha for one unit and min(alpha * L, 1) for L units.

    Returns
    -------
    LPInstance

    Raises
    ------
    CapOutOfRange
        When cap is not in (0, 1].
    """
    if not 0.0 < cap <= 1.0:
        raise CapOutOfRange(f"cap must lie in (0, 1], got {cap}")
    values = type_space.values
    durations = type_space.durations.astype(float)
    probs = type_space.probabilities
    box_matrix = np.eye(len(type_space)) + np.outer(probs, durations - 1.0)
    return LPInstance(
        objective=values * durations,
        share_row=durations,
        cap=float(cap),
        box_matrix=box_matrix,
        box_rhs=probs.copy(),
    )


def solve_lp(lp: LPInstance) -> LPSolution:
    """
    Solve ``lp`` with a dense primal simplex using Bland's rule.

    The right-hand side is nonnegative, so the slack basis at f = 0 is a
    feasible start and no phase one is needed.

    Raises
    ------
    NumericalFailure
        On a non-finite tableau, an unbounded direction or when the
        iteration limit is exceeded.
    """
    A = lp.constraint_matrix
    b = lp.rhs
    m, n = A.shape
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = A
    tableau[:m, n : n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[-1, :n] = -lp.objective
    basis = list(range(n, n + m))

    for iteration in range(constants.MAX_SIMPLEX_ITERATIONS):
        reduced = tableau[-1, :-1]
        if not np.all(np.isfinite(tableau)):
            raise NumericalFailure("non-finite entry in simplex tableau")
        candidates = np.flatnonzero(reduced < -constants.OPTIMALITY_TOL)
        if candidates.size == 0:
            break
        entering = int(candidates[0])
        column = tableau[:m, entering]
        rows = np.flatnonzero(column > constants.OPTIMALITY_TOL)
        if rows.size == 0:
            raise NumericalFailure("unbounded direction in a bounded LP")
        ratios = tableau[rows, -1] / column[rows]
        best = np.min(ratios)
        ties = rows[ratios <= best + constants.OPTIMALITY_TOL]
        leaving = int(min(ties, key=lambda r: basis[r]))
        _pivot(tableau, leaving, entering)
        logger.debug(
            "simplex pivot %d: x%d enters, x%d leaves",
            iteration,
            entering,
            basis[leaving],
        )
        basis[leaving] = entering
    else:
        raise NumericalFailure("simplex iteration limit exceeded")

    solution = np.zeros(n + m)
    solution[basis] = tableau[:m, -1]
    f = np.maximum(solution[:n], 0.0)
    nonbasic = [j for j in range(n + m) if j not in basis]
    status = LPStatus.OPTIMAL
    if any(
        abs(tableau[-1, j]) <= constants.OPTIMALITY_TOL for j in nonbasic
    ):
        status = LPStatus.DEGENERATE
    return LPSolution(
        f=f, objective_value=float(lp.objective @ f), status=status
    )


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for r in range(tableau.shape[0]):
        if r != row and tableau[r, col] != 0.0:
            tableau[r] -= tableau[r, col] * tableau[row]


def vertex_enumeration_oracle(lp: LPInstance) -> LPSolution:
    """
    Brute-force optimum over every vertex of the feasible polytope.

    Each choice of n tight rows among the 2n + 1 constraints (box, share and
    nonnegativity rows) that yields a nonsingular system is solved; feasible
    solutions are kept and the best objective wins.

    Raises
    ------
    TooManyTypes
        When the instance has more than six variables.
    """
    n = lp.n_variables
    if n > constants.MAX_ORACLE_TYPES:
        raise TooManyTypes(
            f"vertex enumeration supports at most"
            f" {constants.MAX_ORACLE_TYPES} types, got {n}"
        )
    G = np.vstack([lp.constraint_matrix, -np.eye(n)])
    h = np.concatenate([lp.rhs, np.zeros(n)])
    best: Optional[np.ndarray] = None
    best_value = -math.inf
    for rows in itertools.combinations(range(G.shape[0]), n):
        sub = G[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        vertex = np.linalg.solve(sub, h[list(rows)])
        if np.max(G @ vertex - h) > constants.FEASIBILITY_TOL:
            continue
        value = float(lp.objective @ vertex)
        if value > best_value:
            best, best_value = vertex, value
    if best is None:
        # f = 0 is always feasible, so this only happens on broken input
        raise NumericalFailure("no feasible vertex found")
    return LPSolution(
        f=np.maximum(best, 0.0),
        objective_value=best_value,
        status=LPStatus.OPTIMAL,
    )


def f_to_x(solution: LPSolution, type_space: TypeSpace) -> RequestPolicy:
    """
    Convert LP fractions f into request probabilities.

    x_theta = f_theta / (1 - sum (k - 1) f) and
    Pr[Req = 1 | theta] = x_theta / p_theta (0 when p_theta = 0).

    Examples
    --------
    f = (0.25, 0) on types {(1, 2, 0.5), (0, 1, 0.5)}
    >>> x = (1/3, 0), request_prob = (2/3, 0)

    Raises
    ------
    DegenerateDenominator
        When 1 - sum (k - 1) f <= 1e-9.
    """
    f = np.asarray(solution.f, dtype=float)
    denominator = 1.0 - float((type_space.durations - 1) @ f)
    if denominator <= constants.DENOMINATOR_TOL:
        raise DegenerateDenominator(
            f"1 - sum((k - 1) f) = {denominator} is not positive"
        )
    x = f / denominator
    probs = type_space.probabilities
    request_prob = np.divide(
        x, probs, out=np.zeros_like(x), where=probs > 0
    )
    return RequestPolicy(
        request_prob=tuple(float(v) for v in np.clip(request_prob, 0.0, None)),
        x=tuple(float(v) for v in x),
        stats=epoch_stats(x, type_space),
    )


def x_to_f(x: Sequence[float], type_space: TypeSpace) -> np.ndarray:
    """Inverse of f_to_x: f = x / (1 + sum (k - 1) x)."""
    x_arr = np.asarray(x, dtype=float)
    return x_arr / (1.0 + float((type_space.durations - 1) @ x_arr))


def epoch_stats(x: Sequence[float], type_space: TypeSpace) -> EpochStats:
    """
    Renewal statistics of the policy with request masses ``x``.

    An epoch is the idle stretch before a request plus the K held rounds, so
    its expected length is 1/q - 1 + kappa.
    """
    x_arr = np.asarray(x, dtype=float)
    q = float(np.sum(x_arr))
    if q <= 0.0:
        return EpochStats(v_star=0.0, beta=0.0, q=0.0, kappa=0.0, idle=True)
    durations = type_space.durations.astype(float)
    kappa = float(durations @ x_arr) / q
    epoch_length = 1.0 / q - 1.0 + kappa
    value_per_epoch = float((type_space.values * durations) @ x_arr) / q
    return EpochStats(
        v_star=value_per_epoch / epoch_length,
        beta=kappa / epoch_length,
        q=q,
        kappa=kappa,
    )


@lru_cache(maxsize=256)
def optimal_request_policy(
    type_space: TypeSpace, cap: float
) -> RequestPolicy:
    """Solve the ideal-utility LP and return the optimal request policy."""
    solution = solve_lp(build_ideal_lp(type_space, cap))
    policy = f_to_x(solution, type_space)
    logger.info(
        "ideal policy at cap %.6g: v*=%.9g beta=%.9g q=%.9g",
        cap,
        policy.stats.v_star,
        policy.stats.beta,
        policy.stats.q,
    )
    return policy


def simulate_no_competition(
    policy: RequestPolicy,
    type_space: TypeSpace,
    horizon: int,
    rng: np.random.Generator,
) -> Tuple[float, float]:
    """
    Run the single-agent renewal process for ``horizon`` rounds.

    Whenever the unit is free the agent samples a type and requests it with
    the policy's probability; a request of (V, K) holds the unit for K rounds
    and earns V in each of them. A reservation running past the horizon only
    counts its rounds up to the horizon, so both averages stay within
    [0, max V] and [0, 1].

    Returns
    -------
    Tuple[float, float]
        Average utility per round and fraction of rounds held.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    indices = np.searchsorted(
        np.cumsum(type_space.probabilities), rng.random(horizon), side="right"
    )
    indices = np.minimum(indices, len(type_space) - 1).tolist()
    coins = rng.random(horizon).tolist()
    request_prob = list(policy.request_prob)
    values = type_space.values.tolist()
    durations = type_space.durations.tolist()

    utility = 0.0
    held = 0
    t = 0
    while t < horizon:
        theta = indices[t]
        if coins[t] < request_prob[theta]:
            rounds = min(durations[theta], horizon - t)
            utility += values[theta] * rounds
            held += rounds
            t += durations[theta]
        else:
            t += 1
    return utility / horizon, held / horizon


def welfare_upper_bound(v_star: float, n: int, horizon: int) -> float:
    """n * v* * T, the welfare bound for n symmetric agents."""
    return n * v_star * horizon
