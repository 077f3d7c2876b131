"""Exception types shared across the package.

The CLI maps each class to a one-word error category, so keep the
hierarchy flat.
"""

from __future__ import annotations


class RelpathError(Exception):
    category = "error"


class DomainError(RelpathError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    category = "domain"


class ContractError(RelpathError, ValueError):
    """Inputs are individually valid but inconsistent with each other."""

    category = "contract"


class RefusalError(RelpathError, RuntimeError):
    """A guardrail (enumeration cap, memory cap) refused the computation."""

    category = "refusal"


class DegenerateStateError(RelpathError, ArithmeticError):
    """A density kernel has (near) zero trace and cannot be normalized."""

    category = "degenerate"


class ConfigError(RelpathError, ValueError):
    category = "config"
