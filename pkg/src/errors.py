from __future__ import annotations


class NavigationError(Exception):
    """Base class for every error raised by the navigation stack."""


class ConfigError(NavigationError):
    pass


class ScenarioParseError(NavigationError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ScenarioValidationError(NavigationError):
    pass


class WorldDomainError(NavigationError, ValueError):
    pass


class SamplingExhaustedError(NavigationError):
    pass


class EpisodeStateError(NavigationError, RuntimeError):
    pass


class ShapeError(NavigationError, ValueError):
    pass


class TrainingError(NavigationError):
    pass


class CheckpointError(NavigationError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{message} (header field '{field}')")
        self.field = field
