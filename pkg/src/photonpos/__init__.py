"""Photon position operator with commuting components in momentum space.

Importing the package switches jax to 64-bit floats; every tolerance in the
library assumes double precision.
"""
import jax

jax.config.update("jax_enable_x64", True)

from .errors import (  # noqa: E402
    BasisError,
    ConfigError,
    ConvergenceError,
    DomainError,
    HermiticityError,
    InvariantError,
    PhotonPosError,
    StepError,
    TransversalityError,
)

__version__ = "0.1.0"

__all__ = [
    "BasisError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "HermiticityError",
    "InvariantError",
    "PhotonPosError",
    "StepError",
    "TransversalityError",
]
