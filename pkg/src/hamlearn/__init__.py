"""Learn neural potential-energy models from Hamiltonian trajectory data and
extract sparse closed-form algebraic potentials from them."""

__version__ = "0.1.0"

from .errors import (
    AllPrunedError,
    ConfigError,
    DivergenceError,
    DomainError,
    FormatError,
    HamlearnError,
    NoFitError,
)

__all__ = [
    "__version__",
    "HamlearnError",
    "ConfigError",
    "DomainError",
    "FormatError",
    "DivergenceError",
    "AllPrunedError",
    "NoFitError",
]
