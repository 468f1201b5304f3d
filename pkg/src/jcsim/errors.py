"""Exception types raised by jcsim."""


class JcsError(ValueError):
    """Base class for all jcsim errors."""


class DomainError(JcsError):
    """A time or frequency argument lies outside the waveform support."""


class ParameterError(JcsError):
    """Invalid or inconsistent numerical parameters."""


class ScenarioError(JcsError):
    """The channel geometry cannot be processed (e.g. echo outside the pulse)."""


class DegenerateSignalError(JcsError):
    """The input carries no usable energy."""


class InsufficientResolutionError(JcsError):
    """Too few samples to track the frequency within one step."""


class ConfigError(JcsError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
