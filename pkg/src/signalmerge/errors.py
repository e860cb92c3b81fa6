"""Exception types shared across the package."""


class SignalMergeError(Exception):
    """Base class for all package errors."""


class PipelineError(SignalMergeError):
    """Fatal error raised by a pipeline stage; message is stage-labeled."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"{stage}: {message}")


class UndefinedScoreError(SignalMergeError):
    """A correlation score does not exist (e.g. zero-variance input)."""
