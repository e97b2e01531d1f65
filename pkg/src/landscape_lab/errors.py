"""Exception hierarchy shared by every stage of the pipeline."""


class LandscapeError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InputError(LandscapeError, ValueError):
    """Arguments violate an operation's preconditions."""

    exit_code = 1


class ConfigurationError(LandscapeError):
    """A requested problem variant or option is not available."""

    exit_code = 1


class CapabilityError(LandscapeError):
    """The request is well-formed but beyond what the library can compute."""

    exit_code = 2


class InternalError(LandscapeError, RuntimeError):
    """An internal consistency check failed."""

    exit_code = 1


class MissingComponentError(LandscapeError):
    """A result bundle lacks a component needed downstream."""

    exit_code = 1

    def __init__(self, component: str, where: str = ""):
        self.component = component
        self.where = where
        msg = f"missing bundle component {component!r}"
        if where:
            msg += f" in {where}"
        super().__init__(msg)
