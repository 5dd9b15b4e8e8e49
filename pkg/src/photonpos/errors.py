"""Exception hierarchy."""


class PhotonPosError(Exception):
    """Base class for all library errors."""


class DomainError(PhotonPosError, ValueError):
    """A wavevector lies outside the domain of a frame field or at the origin."""


class InvariantError(PhotonPosError, ValueError):
    """An input violates a structural invariant (a^2 + b^2 = 1, shared E3, ...)."""


class StepError(PhotonPosError, ValueError):
    """A finite-difference stencil leaves the domain of the differentiated field."""


class ConvergenceError(PhotonPosError, RuntimeError):
    """Quadrature refinement changed the result by more than the requested tolerance."""


class TransversalityError(PhotonPosError, ValueError):
    """A field expected to be transversal has a longitudinal component."""


class BasisError(PhotonPosError, ValueError):
    """A two-component section is expressed in the wrong fibre basis."""


class HermiticityError(PhotonPosError, RuntimeError):
    """An expectation value that must be real has a significant imaginary part."""


class ConfigError(PhotonPosError, ValueError):
    """Malformed or unknown configuration."""
