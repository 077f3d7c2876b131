"""Lattice simulator for relational path-integral quantum mechanics."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    ContractError,
    DegenerateStateError,
    DomainError,
    RefusalError,
    RelpathError,
)
