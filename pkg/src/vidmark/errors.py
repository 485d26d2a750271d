"""Exception types shared across the toolkit.

CLI exit codes: 0 success, 2 config error, 3 data error, 4 backend
unreachable.
"""


class VidmarkError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(VidmarkError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2


class DataFormatError(VidmarkError):
    """Malformed input data (annotation lines, mask records, frames)."""

    exit_code = 3


class BackendError(VidmarkError):
    """A remote backend (segmentation, LM, Vid-LLM) could not be reached."""

    exit_code = 4


class AnswerParseError(VidmarkError):
    """Model reply did not contain a parsable answer.

    Carries the raw reply; the harness scores such items as zero-IoU
    rather than aborting the run.
    """

    def __init__(self, raw: str, message: str = "no parsable answer"):
        super().__init__(f"{message}: {raw!r}")
        self.raw = raw
