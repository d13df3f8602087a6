"""Exception hierarchy shared across the toolkit.

Agent/protocol failures derive from AgentError so callers (notably the CLI)
can distinguish them from plain validation errors.
"""


class StreamEvalError(Exception):
    """Base class for all toolkit errors."""


class AgentError(StreamEvalError):
    """Base class for failures of an agent or its wire protocol."""


# -- timeline ---------------------------------------------------------------

class NonMonotoneDelay(StreamEvalError):
    """A commit's delay decreased relative to the previous commit."""


class EmptyCommit(StreamEvalError):
    """A commit carried no tokens."""


class LogFinalized(StreamEvalError):
    """Attempted to mutate an emission log that was already finalized."""


class DelayExceedsSource(StreamEvalError):
    """A recorded ideal delay lies beyond the source duration."""


# -- agents -----------------------------------------------------------------

class PrefixConflict(StreamEvalError):
    """The committed prefix is incompatible with a decoded hypothesis."""


class MissingAttention(StreamEvalError):
    """An attention-based operation received a hypothesis without attention."""


class BadAttentionShape(StreamEvalError):
    """An attention matrix has the wrong number of rows or columns."""


class NonStochasticRow(StreamEvalError):
    """An attention row is not a probability vector within tolerance."""


class MissingAgent(StreamEvalError):
    """An operation that needs an agent was invoked without one."""


class TrackLengthMismatch(StreamEvalError):
    """Dual-track output sequences differ in length."""


class ProtocolError(AgentError):
    """An external agent sent a malformed or unexpected record."""


class AgentCrashed(AgentError):
    """The external agent process terminated or closed its streams."""


class AgentTimeout(AgentError):
    """The external agent did not answer within the configured timeout."""


# -- metrics ----------------------------------------------------------------

class EmptyLog(StreamEvalError):
    """A latency metric was requested for a log with no tokens."""


class MissingReference(StreamEvalError):
    """A reference-dependent metric was requested without a reference."""


class ZeroDuration(StreamEvalError):
    """Source duration is zero where a positive duration is required."""


class SizeMismatch(StreamEvalError):
    """Hypothesis and reference corpora differ in size."""


class EmptyTimeline(StreamEvalError):
    """A token timeline required to be nonempty was empty."""


# -- cascade ----------------------------------------------------------------

class NonMonotoneRequests(StreamEvalError):
    """Speech output requests are not in non-decreasing time order."""


# -- corpus tools -----------------------------------------------------------

class ManifestParseError(StreamEvalError):
    """A manifest line could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class DuplicateId(StreamEvalError):
    """Two manifest entries share an id."""


class ZeroTokens(StreamEvalError):
    """An entry has no output tokens where at least one is required."""
