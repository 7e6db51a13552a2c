"""Exception hierarchy.

Two branches matter for the CLI: ``ValidationError`` (bad inputs, exit
code 1) and ``NumericalError`` (a computation failed or a numerical
contract was violated, exit code 2). Every concrete class carries a
stable machine-readable ``tag``.
"""

from __future__ import annotations


class MfkError(Exception):
    """Base class for all package errors."""

    tag = "ERROR"


class ValidationError(MfkError, ValueError):
    """Invalid input or configuration."""

    tag = "VALIDATION"


class NumericalError(MfkError, ArithmeticError):
    """Numerical failure during an otherwise valid computation."""

    tag = "NUMERICAL"


# -- validation ---------------------------------------------------------

class DimensionMismatch(ValidationError):
    tag = "DIMENSION_MISMATCH"


class DimensionNotOne(ValidationError):
    tag = "DIMENSION_NOT_ONE"


class NegativeWeight(ValidationError):
    tag = "NEGATIVE_WEIGHT"


class WeightSumOffByMoreThanTolerance(ValidationError):
    tag = "WEIGHT_SUM_OFF"


class EmptySupport(ValidationError):
    tag = "EMPTY_SUPPORT"


class AtomOutsideDomain(ValidationError):
    tag = "ATOM_OUTSIDE_DOMAIN"


class SupportTooLarge(ValidationError):
    tag = "SUPPORT_TOO_LARGE"


class SupportTooLargeForBruteForce(ValidationError):
    tag = "SUPPORT_TOO_LARGE_FOR_BRUTE_FORCE"


class EmptyCandidates(ValidationError):
    tag = "EMPTY_CANDIDATES"


class ModulusNotConcave(ValidationError):
    tag = "MODULUS_NOT_CONCAVE"


class NonSymmetricInput(ValidationError):
    tag = "NON_SYMMETRIC_INPUT"


class KernelSpecMismatch(ValidationError):
    tag = "KERNEL_SPEC_MISMATCH"


class HeterogeneousConfigs(ValidationError):
    tag = "HETEROGENEOUS_CONFIGS"


class UnknownLimit(ValidationError):
    tag = "UNKNOWN_LIMIT"


class ConfigParseError(ValidationError):
    tag = "CONFIG_PARSE"


# -- numerical ----------------------------------------------------------

class NegativeRadicand(NumericalError):
    tag = "NEGATIVE_RADICAND"


class NegativeSquaredNorm(NumericalError):
    tag = "NEGATIVE_SQUARED_NORM"


class SingularSystem(NumericalError):
    tag = "SINGULAR_SYSTEM"


class SolverFailure(NumericalError):
    tag = "SOLVER_FAILURE"
