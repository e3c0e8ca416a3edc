"""Exception hierarchy shared by all modules.

ConfigurationError maps to CLI exit code 2, everything else to 1.
"""


class GLVortexError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GLVortexError):
    """Invalid configuration, arguments, or incompatible inputs."""


class ComputationError(GLVortexError):
    """A numerical operation failed (non-finite input, empty reduction, ...)."""


class ModelError(GLVortexError):
    """Model preconditions violated (density not positive, degenerate point, ...)."""


class BlowUpError(ComputationError):
    """Time integration produced a non-finite value."""

    def __init__(self, t: float, node: tuple[int, int]):
        self.t = t
        self.node = node
        super().__init__(f"solution blew up at t={t!r}, node (i={node[0]}, j={node[1]})")


class WindingError(ComputationError):
    """Winding number undefined because the field vanishes on a loop corner."""
