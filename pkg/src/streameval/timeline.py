"""Core data model: timed sources, hypotheses, commits, and emission logs.

All times are real-valued milliseconds. Tokens are opaque strings compared by
exact equality; detokenization is an ingestion/reporting concern.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadAttentionShape,
    DelayExceedsSource,
    EmptyCommit,
    LogFinalized,
    NonMonotoneDelay,
    NonStochasticRow,
)

# Tolerance for time comparisons, in milliseconds.
TIME_EPS_MS = 1e-6

IDEAL = "ideal"
COMPUTATION_AWARE = "computation_aware"


def lcp(a: list[str], b: list[str]) -> list[str]:
    """Longest common prefix of two token sequences."""
    out = []
    for x, y in zip(a, b):
        if x != y:
            break
        out.append(x)
    return out


@dataclass(frozen=True)
class Frame:
    """One timed slice of the source; the payload is opaque to the harness."""

    duration_ms: float
    payload_id: str = ""


@dataclass
class SourceStream:
    """A timed source: frames plus the total duration they add up to."""

    frames: list[Frame]
    total_duration_ms: float
    frame_ms: float
    reference_tokens: list[str] | None = None

    def __post_init__(self):
        if self.frame_ms <= 0:
            raise ValueError("frame_ms must be positive")
        if self.total_duration_ms < 0:
            raise ValueError("total_duration_ms must be non-negative")
        total = sum(f.duration_ms for f in self.frames)
        if abs(total - self.total_duration_ms) > TIME_EPS_MS:
            raise ValueError(
                f"frame durations sum to {total} ms, expected {self.total_duration_ms} ms"
            )
        ends = []
        t = 0.0
        for f in self.frames:
            t += f.duration_ms
            ends.append(t)
        self._frame_ends = ends

    @classmethod
    def uniform(
        cls,
        total_duration_ms: float,
        frame_ms: float,
        reference_tokens: list[str] | None = None,
    ) -> "SourceStream":
        """Build a stream of uniform frames; the last frame may be partial."""
        if frame_ms <= 0:
            raise ValueError("frame_ms must be positive")
        count = math.ceil(max(total_duration_ms, 0.0) / frame_ms - TIME_EPS_MS)
        frames = []
        for i in range(count):
            start = i * frame_ms
            end = min((i + 1) * frame_ms, total_duration_ms)
            frames.append(Frame(duration_ms=end - start, payload_id=str(i)))
        return cls(
            frames=frames,
            total_duration_ms=total_duration_ms,
            frame_ms=frame_ms,
            reference_tokens=reference_tokens,
        )

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def frames_available_at(self, t_ms: float) -> int:
        """Number of frames fully received by time t_ms."""
        n = 0
        for end in self._frame_ends:
            if end <= t_ms + TIME_EPS_MS:
                n += 1
            else:
                break
        return n


@dataclass
class Hypothesis:
    """A token sequence plus optional per-token attention over source frames."""

    tokens: list[str]
    attention: np.ndarray | None = None

    def validate(self, frames: int | None = None) -> None:
        if self.attention is None:
            return
        att = np.asarray(self.attention, dtype=float)
        if att.ndim != 2 or att.shape[0] != len(self.tokens):
            raise BadAttentionShape(
                f"attention shape {att.shape} does not match {len(self.tokens)} tokens"
            )
        if frames is not None and att.shape[1] != frames:
            raise BadAttentionShape(
                f"attention has {att.shape[1]} columns, expected {frames}"
            )
        if not np.all(np.isfinite(att)) or np.any(att < 0):
            raise NonStochasticRow("attention rows must be finite and non-negative")
        if att.shape[0] and np.any(np.abs(att.sum(axis=1) - 1.0) > 1e-6):
            raise NonStochasticRow("attention rows must each sum to 1 within 1e-6")


@dataclass(frozen=True)
class CommitEvent:
    """An irreversible emission of target tokens at a point in the session.

    ideal_delay_ms is the source audio consumed at commit time;
    wall_delay_ms is the elapsed wall clock including model computation.
    """

    tokens: tuple[str, ...]
    ideal_delay_ms: float
    wall_delay_ms: float

    def __post_init__(self):
        if not self.tokens:
            raise EmptyCommit("a commit must carry at least one token")
        if self.wall_delay_ms < self.ideal_delay_ms - TIME_EPS_MS:
            raise NonMonotoneDelay(
                f"wall delay {self.wall_delay_ms} ms < ideal delay {self.ideal_delay_ms} ms"
            )


@dataclass
class EmissionLog:
    """Per-session record of committed tokens with ideal and wall-clock delays."""

    source_duration_ms: float | None = None
    commits: list[CommitEvent] = field(default_factory=list)
    reference_tokens: list[str] | None = None
    finalized: bool = False

    def record_commit(
        self, tokens: list[str], ideal_delay_ms: float, wall_delay_ms: float
    ) -> "EmissionLog":
        """Append a commit, enforcing monotone delays and non-empty tokens."""
        if self.finalized:
            raise LogFinalized("cannot record into a finalized log")
        if not tokens:
            raise EmptyCommit("a commit must carry at least one token")
        if self.commits:
            last = self.commits[-1]
            if ideal_delay_ms < last.ideal_delay_ms - TIME_EPS_MS:
                raise NonMonotoneDelay(
                    f"ideal delay decreased: {ideal_delay_ms} < {last.ideal_delay_ms}"
                )
            if wall_delay_ms < last.wall_delay_ms - TIME_EPS_MS:
                raise NonMonotoneDelay(
                    f"wall delay decreased: {wall_delay_ms} < {last.wall_delay_ms}"
                )
        self.commits.append(
            CommitEvent(tuple(tokens), float(ideal_delay_ms), float(wall_delay_ms))
        )
        return self

    def finalize(self, total_duration_ms: float) -> "EmissionLog":
        """Close the log at source duration T.

        The final tokens are only known complete once the full source has been
        read, so the last commit is re-stamped to exactly T (its wall delay is
        raised to at least T). Any ideal delay beyond T is an error.
        """
        if self.finalized:
            raise LogFinalized("log already finalized")
        total = float(total_duration_ms)
        for c in self.commits:
            if c.ideal_delay_ms > total + TIME_EPS_MS:
                raise DelayExceedsSource(
                    f"commit at {c.ideal_delay_ms} ms exceeds source duration {total} ms"
                )
        if self.commits:
            last = self.commits[-1]
            self.commits[-1] = CommitEvent(
                last.tokens, total, max(last.wall_delay_ms, total)
            )
        self.source_duration_ms = total
        self.finalized = True
        return self

    def tokens(self) -> list[str]:
        return [t for c in self.commits for t in c.tokens]

    @property
    def num_tokens(self) -> int:
        return sum(len(c.tokens) for c in self.commits)

    def token_delays(self, mode: str = IDEAL) -> list[float]:
        """Per-token delays; every token inherits its commit's delay."""
        if mode == IDEAL:
            return [c.ideal_delay_ms for c in self.commits for _ in c.tokens]
        if mode == COMPUTATION_AWARE:
            return [c.wall_delay_ms for c in self.commits for _ in c.tokens]
        raise ValueError(f"unknown mode {mode!r}")

    # -- line-delimited serialization ----------------------------------------

    def to_json_line(self) -> str:
        """Serialize one finalized session to the interchange schema."""
        record = {
            "source_duration_ms": self.source_duration_ms,
            "commits": [
                {"tokens": list(c.tokens), "d": c.ideal_delay_ms, "c": c.wall_delay_ms}
                for c in self.commits
            ],
            "reference_tokens": (
                list(self.reference_tokens) if self.reference_tokens is not None else None
            ),
        }
        return json.dumps(record, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "EmissionLog":
        record = json.loads(line)
        log = cls(reference_tokens=record.get("reference_tokens"))
        for c in record["commits"]:
            log.record_commit(c["tokens"], c["d"], c["c"])
        log.finalize(record["source_duration_ms"])
        return log


def save_logs(logs: list[EmissionLog], path, meta: dict | None = None) -> None:
    """Write one session per line; an optional meta record leads the file."""
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}, ensure_ascii=False,
                                separators=(",", ":"), sort_keys=True) + "\n")
        for log in logs:
            fh.write(log.to_json_line() + "\n")


def load_logs(path) -> tuple[list[EmissionLog], dict | None]:
    """Read a session-per-line log file; returns (logs, meta or None)."""
    logs = []
    meta = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "meta" in record and "commits" not in record:
                meta = record["meta"]
                continue
            logs.append(EmissionLog.from_json_line(line))
    return logs, meta
