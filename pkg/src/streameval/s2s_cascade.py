"""Speech-to-speech cascade simulation.

Committed translation prefixes are handed to a TTS stage as requests
(immediately, gated on sentence boundaries, or gated by a dual-track
phoneme/prosody estimator), then scheduled on a single speech output
channel: a segment cannot start before its request, nor before the previous
segment finishes, so queued speech delays everything after it. Timing
diagrams render the three lanes (source, text commits, output speech) for
side-by-side policy comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import MissingAgent, NonMonotoneRequests, TrackLengthMismatch
from .policy_alignatt import AlignAttConfig, aggregate_attention, alignatt_round
from .timeline import TIME_EPS_MS, EmissionLog, Hypothesis, SourceStream

HANDOFF_IMMEDIATE = "immediate"
HANDOFF_BOUNDARY = "boundary_gated"
HANDOFF_ESTIMATOR = "estimator_gated"

PROSODY_VOCAB = frozenset({"rise", "fall", "boundary", "blank"})
BOUNDARY_PUNCT = ".!?。！？"  # . ! ? 。 ！ ？
DEFAULT_BOUNDARY_TOKENS = frozenset(BOUNDARY_PUNCT) | {"boundary"}


@dataclass(frozen=True)
class HandoffPolicy:
    kind: str = HANDOFF_IMMEDIATE
    estimator_f: int = 1
    boundary_tokens: frozenset = DEFAULT_BOUNDARY_TOKENS

    def __post_init__(self):
        if self.kind not in (HANDOFF_IMMEDIATE, HANDOFF_BOUNDARY, HANDOFF_ESTIMATOR):
            raise ValueError(f"unknown handoff kind {self.kind!r}")
        if self.estimator_f < 1:
            raise ValueError("estimator_f must be >= 1")

    def is_boundary(self, token: str) -> bool:
        return token in self.boundary_tokens or (
            bool(token) and token[-1] in BOUNDARY_PUNCT
        )


@dataclass(frozen=True)
class SpeechOutputSegment:
    text: tuple[str, ...]
    duration_ms: float
    requested_at_ms: float
    starts_at_ms: float
    ends_at_ms: float

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ValueError("segment duration must be positive")
        if self.starts_at_ms < self.requested_at_ms - TIME_EPS_MS:
            raise ValueError("segment cannot start before it was requested")
        if abs(self.ends_at_ms - (self.starts_at_ms + self.duration_ms)) > TIME_EPS_MS:
            raise ValueError("segment end must equal start + duration")


@dataclass(frozen=True)
class ChannelSchedule:
    """Non-overlapping speech segments on the single output channel."""

    segments: tuple[SpeechOutputSegment, ...]
    source_duration_ms: float = 0.0

    def __post_init__(self):
        for prev, cur in zip(self.segments, self.segments[1:]):
            if cur.starts_at_ms < prev.ends_at_ms - TIME_EPS_MS:
                raise ValueError(
                    f"segments overlap: {prev.ends_at_ms} > {cur.starts_at_ms}"
                )

    @property
    def total_speech_ms(self) -> float:
        return sum(seg.duration_ms for seg in self.segments)


@dataclass(frozen=True)
class DualTrackResult:
    phonemes: tuple[str, ...]
    prosody: tuple[str, ...]

    def __post_init__(self):
        if len(self.phonemes) != len(self.prosody):
            raise TrackLengthMismatch(
                f"{len(self.phonemes)} phonemes vs {len(self.prosody)} prosody tokens"
            )
        bad = set(self.prosody) - PROSODY_VOCAB
        if bad:
            raise ValueError(f"prosody tokens outside the vocabulary: {sorted(bad)}")


# -- duration model --------------------------------------------------------------

DURATION_PER_WORD = "per_word"
DURATION_CHAR_BIGRAM = "char_bigram"
DURATION_TABLE = "table"


@dataclass(frozen=True)
class DurationModel:
    """Speaking-time model: 300 ms per word, per character bigram, or a table."""

    kind: str = DURATION_PER_WORD
    ms_per_unit: float = 300.0
    table: dict | None = None

    def __post_init__(self):
        if self.kind not in (DURATION_PER_WORD, DURATION_CHAR_BIGRAM, DURATION_TABLE):
            raise ValueError(f"unknown duration model {self.kind!r}")
        if self.ms_per_unit <= 0:
            raise ValueError("ms_per_unit must be positive")
        if self.kind == DURATION_TABLE and self.table is None:
            raise ValueError("table duration model needs a table")

    def duration_ms(self, tokens) -> float:
        if self.kind == DURATION_PER_WORD:
            return self.ms_per_unit * len(tokens)
        if self.kind == DURATION_CHAR_BIGRAM:
            chars = sum(len(t) for t in tokens)
            return self.ms_per_unit * math.ceil(chars / 2)
        return sum(self.table.get(t, self.ms_per_unit) for t in tokens)


# -- handoff ----------------------------------------------------------------------


def handoff(
    log: EmissionLog, policy: HandoffPolicy, agent=None
) -> list[tuple[list[str], float]]:
    """Turn a finalized commit log into TTS requests (text chunk, time).

    immediate: one request per commit at its wall time. boundary_gated:
    commits are buffered until the buffer ends in a boundary token; the
    final commit always flushes what is left. estimator_gated: the buffered
    text is run through a dual-track agent and flushed up to the last text
    position a stably-emitted phoneme attends to, under the frame-margin
    rule with f = estimator_f.
    """
    if policy.kind == HANDOFF_IMMEDIATE:
        return [
            (list(commit.tokens), commit.wall_delay_ms) for commit in log.commits
        ]
    if policy.kind == HANDOFF_BOUNDARY:
        requests: list[tuple[list[str], float]] = []
        buffer: list[str] = []
        for i, commit in enumerate(log.commits):
            buffer.extend(commit.tokens)
            is_last = i == len(log.commits) - 1
            if buffer and (is_last or policy.is_boundary(buffer[-1])):
                requests.append((buffer, commit.wall_delay_ms))
                buffer = []
        return requests
    if agent is None:
        raise MissingAgent("estimator-gated handoff needs a dual-track agent")
    return _estimator_handoff(log, policy, agent)


def _estimator_handoff(
    log: EmissionLog, policy: HandoffPolicy, agent
) -> list[tuple[list[str], float]]:
    config = AlignAttConfig(f=policy.estimator_f)
    requests: list[tuple[list[str], float]] = []
    text: list[str] = []
    committed_ph: list[str] = []
    flushed = 0
    for i, commit in enumerate(log.commits):
        text.extend(commit.tokens)
        is_last = i == len(log.commits) - 1
        if is_last:
            # Source ended: release everything still buffered.
            if flushed < len(text):
                requests.append((text[flushed:], commit.wall_delay_ms))
                flushed = len(text)
            break
        resp = agent.dual_decode(text, committed_ph)
        if resp.aux_tokens is not None and len(resp.aux_tokens) != len(resp.tokens):
            raise TrackLengthMismatch(
                f"aux track has {len(resp.aux_tokens)} tokens, "
                f"expected {len(resp.tokens)}"
            )
        hyp = Hypothesis(tokens=list(resp.tokens), attention=resp.attention)
        result = alignatt_round(hyp, len(text), committed_ph, config)
        if not result.emitted:
            continue
        att = aggregate_attention(resp.attention, config.attention_aggregation)
        start = len(committed_ph)
        # Flush text up to the last position a newly emitted phoneme attends to.
        high = max(
            int(att[start + j].argmax()) + 1 for j in range(len(result.emitted))
        )
        committed_ph.extend(result.emitted)
        if high > flushed:
            requests.append((text[flushed:high], commit.wall_delay_ms))
            flushed = high
    return requests


# -- channel scheduling -----------------------------------------------------------


def schedule_speech(
    requests: list[tuple[list[str], float]],
    duration_model: DurationModel | None = None,
    synthesis_latency_ms: float = 0.0,
    source_duration_ms: float = 0.0,
) -> ChannelSchedule:
    """Queue TTS requests on the single output channel.

    Segment i starts at max(request_i + synthesis latency, end of segment
    i-1); request times must be non-decreasing. Empty text chunks are
    dropped (nothing to say).
    """
    if synthesis_latency_ms < 0:
        raise ValueError("synthesis_latency_ms must be >= 0")
    segments: list[SpeechOutputSegment] = []
    duration_model = duration_model or DurationModel()
    previous_request = -math.inf
    channel_free = 0.0
    for text, requested in requests:
        if requested < previous_request - TIME_EPS_MS:
            raise NonMonotoneRequests(
                f"request at {requested} ms after one at {previous_request} ms"
            )
        previous_request = requested
        if not text:
            continue
        duration = duration_model.duration_ms(text)
        start = max(requested + synthesis_latency_ms, channel_free)
        segment = SpeechOutputSegment(
            text=tuple(text),
            duration_ms=duration,
            requested_at_ms=requested + synthesis_latency_ms,
            starts_at_ms=start,
            ends_at_ms=start + duration,
        )
        segments.append(segment)
        channel_free = segment.ends_at_ms
    return ChannelSchedule(tuple(segments), source_duration_ms)


# -- dual-track estimation ----------------------------------------------------------


def estimate_dual_tracks(text_tokens: list[str], agent, f: int = 1) -> DualTrackResult:
    """Incrementally estimate phoneme and prosody tracks from target text.

    The text is fed token by token; with i tokens visible, a phoneme is
    emitted only if its attention argmax falls at least f positions behind i
    (frame-margin rule). The final step disables the rule, so the tracks are
    always complete.
    """
    config = AlignAttConfig(f=f)
    phonemes: list[str] = []
    prosody: list[str] = []
    for i in range(1, len(text_tokens) + 1):
        resp = agent.dual_decode(text_tokens[:i], phonemes)
        if resp.aux_tokens is None or len(resp.aux_tokens) != len(resp.tokens):
            raise TrackLengthMismatch(
                "dual decode must return equal-length phoneme and prosody tracks"
            )
        if i == len(text_tokens):
            emitted = tuple(resp.tokens[len(phonemes):])
        else:
            hyp = Hypothesis(tokens=list(resp.tokens), attention=resp.attention)
            emitted = alignatt_round(hyp, i, phonemes, config).emitted
        start = len(phonemes)
        phonemes.extend(emitted)
        prosody.extend(resp.aux_tokens[start : start + len(emitted)])
    return DualTrackResult(tuple(phonemes), tuple(prosody))


# -- timing diagrams ----------------------------------------------------------------


@dataclass(frozen=True)
class DiagramSpan:
    label: str
    start_ms: float
    end_ms: float


@dataclass(frozen=True)
class TimingDiagram:
    """Three aligned lanes: source axis, text commits, output speech."""

    lanes: tuple[tuple[str, tuple[DiagramSpan, ...]], ...]
    total_ms: float

    def to_json(self) -> str:
        doc = {
            "total_ms": self.total_ms,
            "lanes": [
                {
                    "name": name,
                    "spans": [
                        {"label": s.label, "start_ms": s.start_ms, "end_ms": s.end_ms}
                        for s in spans
                    ],
                }
                for name, spans in self.lanes
            ],
        }
        return json.dumps(doc, ensure_ascii=False, separators=(",", ":"))

    def to_text(self, width: int = 72) -> str:
        """Monospaced render: one row per lane, spans as bracketed boxes."""
        span_end = max(
            [self.total_ms]
            + [s.end_ms for _, spans in self.lanes for s in spans]
        )
        scale = width / span_end if span_end > 0 else 0.0
        name_width = max([4] + [len(name) for name, _ in self.lanes])
        end_label = f"{span_end:g}ms"
        ruler = "0ms" + " " * max(1, width - 2 - len(end_label)) + end_label
        lines = [f"{'':<{name_width}} {ruler}"]
        for name, spans in self.lanes:
            row = [" "] * (width + 1)
            for span in spans:
                lo = round(span.start_ms * scale)
                hi = max(lo + 1, round(span.end_ms * scale))
                row[lo] = "["
                for col in range(lo + 1, min(hi, width)):
                    row[col] = "="
                row[min(hi, width)] = "]"
                label = span.label[: max(0, hi - lo - 1)]
                for k, ch in enumerate(label):
                    row[lo + 1 + k] = ch
            lines.append(f"{name:<{name_width}} {''.join(row)}")
        return "\n".join(lines) + "\n"


def render_timing_diagram(
    source: SourceStream | float,
    log: EmissionLog,
    schedule: ChannelSchedule | None = None,
) -> TimingDiagram:
    """Build the three-lane diagram for one session.

    The text lane shows each commit as a box from its wall time to the next
    commit's wall time (the last box ends at max(wall, T)), so runs of the
    same session under different policies differ only in box boundaries.
    """
    total = source.total_duration_ms if isinstance(source, SourceStream) else float(source)
    source_spans = (
        (DiagramSpan("source", 0.0, total),) if total > 0 else ()
    )
    text_spans = []
    for i, commit in enumerate(log.commits):
        start = commit.wall_delay_ms
        if i + 1 < len(log.commits):
            end = log.commits[i + 1].wall_delay_ms
        else:
            end = max(start, total)
        text_spans.append(DiagramSpan(" ".join(commit.tokens), start, end))
    speech_spans = []
    if schedule is not None:
        speech_spans = [
            DiagramSpan(" ".join(seg.text), seg.starts_at_ms, seg.ends_at_ms)
            for seg in schedule.segments
        ]
    return TimingDiagram(
        lanes=(
            ("source", tuple(source_spans)),
            ("text", tuple(text_spans)),
            ("speech", tuple(speech_spans)),
        ),
        total_ms=total,
    )
