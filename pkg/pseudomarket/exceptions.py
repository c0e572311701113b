class PseudoMarketError(Exception):
    "Base class for all errors raised by pseudomarket."


class ConfigError(PseudoMarketError, ValueError):
    "Raised when a market or experiment configuration is invalid."


class FairShareSumError(ConfigError):
    "Raised when the agents' fair shares do not sum to one."


class FairShareRangeError(ConfigError):
    "Raised when a fair share lies outside (0, 1]."


class ProbabilityMassError(ConfigError):
    "Raised when the type probabilities of a type space do not sum to one."


class NonPositiveHorizon(ConfigError):
    "Raised when the number of rounds is not a positive integer."


class InvalidTypeError(ConfigError):
    "Raised when a demand type has a negative value, duration < 1 or bad mass."


class InvalidMarketParameter(ConfigError):
    "Raised for a non-positive unit count or a negative reserve price."


class ParseError(ConfigError):
    "Raised when an experiment file is not valid JSON."


class SchemaError(ConfigError):
    "Raised when an experiment file does not follow the experiment schema."


class UnknownPreset(ConfigError):
    "Raised when a preset name is not defined."


class CapOutOfRange(ConfigError):
    "Raised when the utilization cap of the ideal-utility LP is not in (0, 1]."


class SolverError(PseudoMarketError, ArithmeticError):
    "Base class for linear programming failures."


class NumericalFailure(SolverError):
    "Raised when the simplex method breaks down."


class DegenerateDenominator(SolverError):
    "Raised when 1 - sum((k - 1) f) vanishes in the f to x conversion."


class TooManyTypes(SolverError):
    "Raised when vertex enumeration is asked for too many variables."


class MechanismError(PseudoMarketError, ValueError):
    "Base class for malformed bid collections."


class DuplicateBid(MechanismError):
    "Raised when an agent submits more than one bid in a round."


class BidFromHolder(MechanismError):
    "Raised when an agent that holds a unit submits a bid."


class BoundError(PseudoMarketError, ValueError):
    "Base class for invalid inputs to the analytic bounds."


class ReserveBelowOne(BoundError):
    "Raised when the guarantee bound is evaluated at a reserve below one."


class KmaxTooSmall(BoundError):
    "Raised when the impossibility bound is evaluated with k_max < 2."


class ZeroPaymentAggregate(BoundError):
    "Raised when a utility/payment ratio is taken over zero payment."
