"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A parameter or config file value is out of its legal range."""


class InputError(ValueError):
    """A runtime input (signal sample, stream, dimension) is unusable."""


class NumericError(RuntimeError):
    """A numerical routine failed to converge or hit a singular system."""
