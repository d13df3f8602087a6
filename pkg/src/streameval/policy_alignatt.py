"""Attention-based commit policy.

A freshly decoded token is safe to emit while its attention mass peaks at
least f frames behind the end of the received source: with F frames
available, emit tokens whose argmax frame position (1-based) is <= F - f,
scanning left to right and stopping at the first violation; everything after
the violator is withheld even if its own alignment is early. Larger f holds
tokens back longer and trades latency for stability. On the final chunk the
stop rule is disabled; an end-of-sequence token always stops the scan and is
never itself committed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadAttentionShape, MissingAttention, PrefixConflict
from .timeline import Hypothesis

DEFAULT_EOS = "</s>"


@dataclass(frozen=True)
class AlignAttConfig:
    f: int
    chunk_ms: float = 800.0
    attention_aggregation: str = "given"  # given | mean_over_heads
    eos_token: str = DEFAULT_EOS

    def __post_init__(self):
        if self.f < 1:
            raise ValueError("frame margin f must be >= 1")
        if self.chunk_ms <= 0:
            raise ValueError("chunk_ms must be positive")
        if self.attention_aggregation not in ("given", "mean_over_heads"):
            raise ValueError(
                f"unknown attention aggregation {self.attention_aggregation!r}"
            )


@dataclass(frozen=True)
class AlignAttRoundResult:
    """Outcome of scanning one chunk's new tokens."""

    emitted: tuple[str, ...]
    stopped: bool  # scan ended before exhausting the hypothesis
    stop_reason: str | None  # violation | eos | None when not stopped
    stop_token_alignment: int | None  # 1-based frame of the violating token


def aggregate_attention(attention, method: str = "given") -> np.ndarray:
    """Collapse a (heads, tokens, frames) stack to (tokens, frames) if asked."""
    att = np.asarray(attention, dtype=float)
    if method == "mean_over_heads":
        if att.ndim != 3:
            raise BadAttentionShape(
                f"mean_over_heads expects a 3-d stack, got {att.ndim}-d"
            )
        att = att.mean(axis=0)
    if att.ndim != 2:
        raise BadAttentionShape(
            f"attention must be 2-d after aggregation, got {att.ndim}-d"
        )
    return att


def alignatt_round(
    hyp: Hypothesis,
    frames_available: int,
    committed: list[str],
    config: AlignAttConfig,
) -> AlignAttRoundResult:
    """Scan the not-yet-committed tokens of one decode left to right.

    Each new token's alignment is the argmax of its attention row (1-based;
    ties resolve to the lowest frame). Tokens with alignment <= F - f are
    emitted; the first violator stops the scan. EOS stops the scan and is
    never emitted.
    """
    if hyp.tokens[: len(committed)] != list(committed):
        raise PrefixConflict("hypothesis does not extend the committed prefix")
    new_tokens = hyp.tokens[len(committed):]
    emitted: list[str] = []
    if not new_tokens:
        return AlignAttRoundResult((), False, None, None)
    if hyp.attention is None:
        raise MissingAttention("attention required to apply the frame-margin rule")
    att = aggregate_attention(hyp.attention, config.attention_aggregation)
    if att.shape != (len(hyp.tokens), frames_available):
        raise BadAttentionShape(
            f"attention shape {att.shape}, expected "
            f"({len(hyp.tokens)}, {frames_available})"
        )
    threshold = frames_available - config.f
    for idx, tok in enumerate(new_tokens, start=len(committed)):
        if tok == config.eos_token:
            return AlignAttRoundResult(tuple(emitted), True, "eos", None)
        alignment = int(np.argmax(att[idx])) + 1  # 1-based frame position
        if alignment > threshold:
            return AlignAttRoundResult(tuple(emitted), True, "violation", alignment)
        emitted.append(tok)
    return AlignAttRoundResult(tuple(emitted), False, None, None)


class AlignAtt:
    """Chunk-loop policy object driven by the session runner."""

    needs_attention = True

    def __init__(self, config: AlignAttConfig):
        self.config = config
        self._committed: list[str] = []

    @property
    def chunk_ms(self) -> float:
        return self.config.chunk_ms

    @property
    def committed(self) -> list[str]:
        return list(self._committed)

    def reset(self) -> None:
        self._committed = []

    def advance(
        self, tokens: list[str], attention, is_final: bool
    ) -> list[str]:
        if is_final:
            # Stop rule off at end of source; EOS still terminates the output.
            if tokens[: len(self._committed)] != self._committed:
                raise PrefixConflict("hypothesis does not extend the committed prefix")
            newly = []
            for tok in tokens[len(self._committed):]:
                if tok == self.config.eos_token:
                    break
                newly.append(tok)
            self._committed.extend(newly)
            return newly
        frames = 0
        if attention is not None:
            frames = aggregate_attention(
                attention, self.config.attention_aggregation
            ).shape[1]
        hyp = Hypothesis(tokens=list(tokens), attention=attention)
        result = alignatt_round(hyp, frames, self._committed, self.config)
        newly = list(result.emitted)
        self._committed.extend(newly)
        return newly
