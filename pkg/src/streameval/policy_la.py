"""Local Agreement commit policy.

After each new source chunk the agent re-decodes; the policy commits the
longest common prefix of the n most recent full hypotheses, minus whatever
is already committed. Nothing is committed before n hypotheses exist. On the
final chunk the agreement test is skipped and the whole remaining hypothesis
is committed, so every session ends with the complete last decode.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import PrefixConflict
from .timeline import lcp


@dataclass(frozen=True)
class LaConfig:
    chunk_ms: float
    n: int = 2

    def __post_init__(self):
        if self.chunk_ms <= 0:
            raise ValueError("chunk_ms must be positive")
        if self.n < 1:
            raise ValueError("agreement window n must be >= 1")


@dataclass
class LaState:
    """Rolling window of the n most recent hypotheses plus the committed prefix."""

    n: int
    recent: deque = field(default_factory=deque)
    committed: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.recent = deque(self.recent, maxlen=self.n)


def la_commit_step(
    state: LaState, new_hypothesis: list[str], config: LaConfig
) -> tuple[LaState, list[str]]:
    """Push one hypothesis and commit the agreed extension.

    Returns (new state, newly committed tokens); the input state is left
    untouched. The committed prefix must be a prefix of the hypothesis
    (constrained decoding guarantees this upstream); with fewer than n
    hypotheses stored nothing is committed.
    """
    if new_hypothesis[: len(state.committed)] != state.committed:
        raise PrefixConflict("hypothesis does not extend the committed prefix")
    recent = deque(state.recent, maxlen=config.n)
    recent.append(list(new_hypothesis))
    committed = list(state.committed)
    newly: list[str] = []
    if len(recent) >= config.n:
        agreed = list(recent[0])
        for hyp in list(recent)[1:]:
            agreed = lcp(agreed, hyp)
        newly = agreed[len(committed):]
        committed.extend(newly)
    return LaState(n=config.n, recent=recent, committed=committed), newly


class LocalAgreement:
    """Chunk-loop policy object driven by the session runner."""

    needs_attention = False

    def __init__(self, config: LaConfig):
        self.config = config
        self._state = LaState(n=config.n)

    @property
    def chunk_ms(self) -> float:
        return self.config.chunk_ms

    @property
    def committed(self) -> list[str]:
        return list(self._state.committed)

    def reset(self) -> None:
        self._state = LaState(n=self.config.n)

    def advance(self, tokens: list[str], attention, is_final: bool) -> list[str]:
        if is_final:
            # End of source: commit the last full hypothesis without agreement.
            if tokens[: len(self._state.committed)] != self._state.committed:
                raise PrefixConflict("hypothesis does not extend the committed prefix")
            newly = list(tokens[len(self._state.committed):])
            self._state.recent.append(list(tokens))
            self._state.committed.extend(newly)
            return newly
        self._state, newly = la_commit_step(self._state, tokens, self.config)
        return newly
