"""Exception types shared across the toolkit."""


class ScriptAlignError(Exception):
    """Base class for all toolkit errors."""


class InputError(ScriptAlignError):
    """Malformed or incomplete input record/file."""


class ConfigError(ScriptAlignError):
    """Configuration value out of range or unreadable."""


class EmptyInput(ScriptAlignError):
    """Screenplay text contains no non-blank lines."""


class EmptyTrack(ScriptAlignError):
    """Subtitle input yielded no well-formed cues."""


class EncodingError(ScriptAlignError):
    """Input bytes are not UTF-8."""


class WindowExceeded(ScriptAlignError):
    """LCS input exceeds the configured window bound."""


class MovieMismatch(ScriptAlignError):
    """Story and alignment refer to different movies."""


class EmptyCorpus(ScriptAlignError):
    """Statistics requested over zero stories."""


class RunMismatch(ScriptAlignError):
    """Evaluation runs cover different or duplicated sample sets."""


class EmptyGroup(ScriptAlignError):
    """A (reference_type, run_id) verdict group is empty."""


class MissingAnswer(ScriptAlignError):
    """QA answers lack entries for some items."""

    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(
            "missing answers for: " + ", ".join(map(str, self.missing))
        )


class JudgeError(ScriptAlignError):
    """Base class for judge-endpoint failures."""


class TransportError(JudgeError):
    """Network failure or unexpected HTTP status from the judge endpoint."""


class AuthError(JudgeError):
    """Judge endpoint rejected the credentials."""


class RateLimited(JudgeError):
    """Judge endpoint kept rate-limiting after all retries."""


class MalformedResponse(JudgeError):
    """Judge endpoint returned a payload the client cannot interpret."""


class UnparseableVerdict(ScriptAlignError):
    """Judge response did not contain exactly one A/B/TIE verdict."""

    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(f"no unambiguous verdict in response: {raw!r}")
