"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: configuration problems
exit 1, verification failures exit 2, numeric failures exit 3.
"""


class InvalidParameterError(ValueError):
    """A constructor or operation received an out-of-contract argument."""


class ConstructionFailureError(RuntimeError):
    """A randomized construction exhausted its retry budget."""


class EfficiencyError(RuntimeError):
    """A sampler's acceptance rate is below the usable floor."""


class NumericError(ArithmeticError):
    """A numeric routine produced NaN/inf or failed to converge."""


class VerificationError(AssertionError):
    """A self-check that must hold by construction failed."""


class ConfigError(ValueError):
    """An experiment configuration document is malformed."""
