"""Exception types raised by the generation engine."""

from __future__ import annotations


class PromptvidError(Exception):
    """Base class for all promptvid failures."""


class NumericError(PromptvidError):
    """A loss or gradient came out non-finite."""


class ScorerError(PromptvidError):
    """An embedding scorer adapter could not be constructed or used."""


class DenoiserError(PromptvidError):
    """A denoiser adapter could not be constructed or used."""


class ConfigError(PromptvidError, ValueError):
    """One or more configuration fields failed validation.

    Carries the full list of problems so callers can report everything
    at once instead of failing on the first field.
    """

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class CheckpointMismatchError(PromptvidError):
    """A resume was attempted with a config that does not match the checkpoint."""


class PipelineError(PromptvidError):
    """A frame could not be generated; carries the failing frame index."""

    def __init__(self, frame_index: int, message: str):
        self.frame_index = frame_index
        super().__init__(f"frame {frame_index}: {message}")
