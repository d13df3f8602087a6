"""Incremental-model abstraction.

Two in-process agents back desk-scale experiments: a deterministic toy
transducer with known span alignments (so policy behavior is brute-force
checkable) and a table-driven dual-track romanizer for the speech cascade.
ExternalAgentClient speaks the same interface to a subprocess over a
line-delimited stdio protocol.

Agents MUST return the committed prefix as a prefix of their output
(constrained decoding); the harness enforces this rather than trusting them.
"""

from __future__ import annotations

import json
import logging
import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AgentCrashed,
    AgentTimeout,
    BadAttentionShape,
    NonStochasticRow,
    PrefixConflict,
    ProtocolError,
    TrackLengthMismatch,
)
from .timeline import Hypothesis

LOGGER = logging.getLogger("streameval.agents")

PROTOCOL_VERSION = 1
PROSODY_VOCAB = ("rise", "fall", "boundary", "blank")
PROSODY_BLANK = "blank"

# Renormalize attention rows whose sum strays from 1 by less than this.
ROW_SUM_TOLERANCE = 1e-3


@dataclass
class AgentRequest:
    """One request to an agent; frames_available must not decrease in a session."""

    kind: str  # decode | dual_decode | reset | close
    frames_available: int = 0
    committed_prefix: list[str] = field(default_factory=list)
    beam: int = 5
    source_text: list[str] | None = None  # dual_decode input tokens

    def to_wire(self) -> dict:
        record = {
            "kind": self.kind,
            "frames": self.frames_available,
            "committed": list(self.committed_prefix),
            "beam": self.beam,
        }
        if self.source_text is not None:
            record["text"] = list(self.source_text)
        return record


@dataclass
class AgentResponse:
    """An agent's answer: tokens, optional attention/aux track/compute cost."""

    tokens: list[str]
    attention: np.ndarray | None = None
    aux_tokens: list[str] | None = None
    compute_ms: float | None = None


def validate_attention(resp: AgentResponse, frames: int) -> AgentResponse:
    """Check shape (|tokens| x frames) and renormalize near-stochastic rows.

    Rows whose sums deviate from 1 by less than 1e-3 are renormalized in
    place of the original; larger deviations, negative entries, or
    non-finite values raise NonStochasticRow.
    """
    if resp.attention is None:
        raise BadAttentionShape("response carries no attention matrix")
    att = np.asarray(resp.attention, dtype=float)
    if not resp.tokens and att.size == 0:
        att = att.reshape(0, frames)
    if att.ndim != 2 or att.shape != (len(resp.tokens), frames):
        raise BadAttentionShape(
            f"attention shape {att.shape}, expected ({len(resp.tokens)}, {frames})"
        )
    if not np.all(np.isfinite(att)):
        raise NonStochasticRow("attention contains non-finite entries")
    if np.any(att < 0):
        raise NonStochasticRow("attention contains negative entries")
    if att.shape[0]:
        sums = att.sum(axis=1)
        if np.any(sums <= 0) or np.any(np.abs(sums - 1.0) >= ROW_SUM_TOLERANCE):
            raise NonStochasticRow("attention row sums deviate from 1 beyond tolerance")
        att = att / sums[:, None]
    return AgentResponse(
        tokens=list(resp.tokens),
        attention=att,
        aux_tokens=resp.aux_tokens,
        compute_ms=resp.compute_ms,
    )


# -- deterministic toy transducer ---------------------------------------------


@dataclass(frozen=True)
class SpanEntry:
    """One aligned target token; frames are 1-based inclusive positions."""

    start_frame: int
    end_frame: int
    token: str


@dataclass(frozen=True)
class ToyTransducerSpec:
    """Ground-truth alignment table for the deterministic toy agent.

    A token becomes available once end_frame frames have been received.
    With instability k > 0, tokens whose span ends within k frames of the
    received boundary are replaced by seeded decoy tokens, except when the
    full source has been received (a full-source decode is always stable).
    """

    entries: tuple[SpanEntry, ...]
    total_frames: int
    instability: int = 0
    seed: int = 0

    def __post_init__(self):
        prev_start = 0
        for e in self.entries:
            if not (1 <= e.start_frame <= e.end_frame <= self.total_frames):
                raise ValueError(f"span {e} outside source of {self.total_frames} frames")
            if e.start_frame < prev_start:
                raise ValueError("span start frames must be non-decreasing")
            prev_start = e.start_frame
        if self.instability < 0:
            raise ValueError("instability must be >= 0")

    @property
    def target_tokens(self) -> list[str]:
        return [e.token for e in self.entries]


def decoy_token(token: str, seed: int, index: int) -> str:
    """Deterministic decoy for an unstable token at 0-based position index.

    Independent of the frame count on purpose: an unstable model keeps
    guessing the same wrong continuation until enough source arrives, which
    is what lets agreement policies commit it.
    """
    h = (seed * 31 + index * 7) % 100
    return f"{token}~{h:02d}"


def toy_decode(
    spec: ToyTransducerSpec, frames_available: int, committed: list[str]
) -> Hypothesis:
    """Deterministic prefix-constrained decode from the span table.

    Returns every token whose span end <= frames_available, with the last
    min(k, count) of them replaced by decoys when their span end lies within
    k frames of the boundary. Attention is one-hot at each token's span-end
    frame. The committed prefix is replayed verbatim; a committed token that
    is neither the aligned token nor its decoy raises PrefixConflict.
    """
    if frames_available < 0:
        raise ValueError("frames_available must be >= 0")
    F = min(frames_available, spec.total_frames)
    included = [e for e in spec.entries if e.end_frame <= F]
    tokens = [e.token for e in included]
    if spec.instability > 0 and F < spec.total_frames:
        n_perturb = min(spec.instability, len(tokens))
        for pos in range(len(tokens) - n_perturb, len(tokens)):
            if included[pos].end_frame > F - spec.instability:
                tokens[pos] = decoy_token(included[pos].token, spec.seed, pos)

    if len(committed) > len(tokens):
        raise PrefixConflict(
            f"{len(committed)} committed tokens but only {len(tokens)} decodable"
        )
    for j, tok in enumerate(committed):
        stable = included[j].token
        if tok != tokens[j] and tok != stable and tok != decoy_token(stable, spec.seed, j):
            raise PrefixConflict(
                f"committed token {tok!r} at position {j} conflicts with {stable!r}"
            )
    out_tokens = list(committed) + tokens[len(committed):]

    attention = None
    if frames_available > 0:
        attention = np.zeros((len(out_tokens), frames_available), dtype=float)
        for row, entry in enumerate(included[: len(out_tokens)]):
            attention[row, entry.end_frame - 1] = 1.0
    elif not out_tokens:
        attention = np.zeros((0, 0), dtype=float)
    return Hypothesis(tokens=out_tokens, attention=attention)


class ToyTransducerAgent:
    """In-process agent wrapping toy_decode."""

    def __init__(self, spec: ToyTransducerSpec):
        self.spec = spec

    def decode(self, frames: int, committed: list[str], beam: int = 5) -> AgentResponse:
        hyp = toy_decode(self.spec, frames, committed)
        return AgentResponse(tokens=hyp.tokens, attention=hyp.attention)

    def offline_tokens(self) -> list[str]:
        return self.spec.target_tokens

    def reset(self) -> None:
        pass

    def close(self) -> None:
        pass


def load_toy_spec(path) -> tuple[ToyTransducerSpec, float]:
    """Load a toy spec JSON file; returns (spec, frame_ms)."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    entries = tuple(
        SpanEntry(start_frame=e["start"], end_frame=e["end"], token=e["token"])
        for e in data["entries"]
    )
    spec = ToyTransducerSpec(
        entries=entries,
        total_frames=data["total_frames"],
        instability=data.get("instability", 0),
        seed=data.get("seed", 0),
    )
    return spec, float(data.get("frame_ms", 100.0))


# -- dual-track romanizer ------------------------------------------------------


class RomanizerAgent:
    """Table-driven phoneme + prosody estimator over target text tokens.

    The source "frames" of a dual decode are the text tokens available so
    far; each phoneme attends one-hot to the text token it came from. Text
    tokens missing from the table fall back to character-level phonemes with
    blank prosody.
    """

    def __init__(self, table: dict[str, tuple[list[str], list[str]]]):
        for key, (phonemes, prosody) in table.items():
            if len(phonemes) != len(prosody):
                raise TrackLengthMismatch(f"table entry {key!r} has unequal track lengths")
        self.table = table

    def _expand(self, token: str) -> tuple[list[str], list[str]]:
        if token in self.table:
            phonemes, prosody = self.table[token]
            return list(phonemes), list(prosody)
        chars = list(token)
        return chars, [PROSODY_BLANK] * len(chars)

    def dual_decode(
        self, text: list[str], committed: list[str], beam: int = 5
    ) -> AgentResponse:
        phonemes: list[str] = []
        prosody: list[str] = []
        positions: list[int] = []
        for pos, token in enumerate(text, start=1):
            ph, pr = self._expand(token)
            phonemes.extend(ph)
            prosody.extend(pr)
            positions.extend([pos] * len(ph))
        if committed != phonemes[: len(committed)]:
            raise PrefixConflict("committed phonemes conflict with the table expansion")
        frames = len(text)
        attention = np.zeros((len(phonemes), frames), dtype=float)
        for row, pos in enumerate(positions):
            attention[row, pos - 1] = 1.0
        return AgentResponse(tokens=phonemes, attention=attention, aux_tokens=prosody)

    def reset(self) -> None:
        pass

    def close(self) -> None:
        pass


def load_romanizer_table(path) -> dict[str, tuple[list[str], list[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return {
        key: (list(value["phonemes"]), list(value["prosody"]))
        for key, value in data.items()
    }


# -- external agent client -----------------------------------------------------


class ExternalAgentClient:
    """Client for an agent subprocess speaking the line-delimited protocol.

    One JSON record per line over the agent's stdin/stdout, UTF-8, no
    pretty-printing. The first line the agent emits must be the handshake
    {"proto": 1}.
    """

    def __init__(self, command, timeout_s: float = 60.0):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.timeout_s = timeout_s
        self._last_frames = 0
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise AgentCrashed(f"could not start agent {self.command!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        handshake = self._read_record()
        if handshake.get("proto") != PROTOCOL_VERSION:
            self._terminate()
            raise ProtocolError(f"bad handshake: {handshake!r}")

    def _pump(self) -> None:
        try:
            for line in self._proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)

    def _read_record(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            self._terminate()
            raise AgentTimeout(
                f"agent gave no response within {self.timeout_s} s"
            ) from None
        if line is None:
            raise AgentCrashed("agent closed its output stream")
        line = line.strip()
        if not line:
            raise ProtocolError("agent sent an empty line")
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed response line: {line[:200]!r}") from exc
        if not isinstance(record, dict):
            raise ProtocolError(f"response is not a record: {line[:200]!r}")
        return record

    def _roundtrip(self, request: AgentRequest) -> dict:
        if self._proc.poll() is not None:
            raise AgentCrashed(f"agent exited with code {self._proc.returncode}")
        payload = json.dumps(request.to_wire(), ensure_ascii=False, separators=(",", ":"))
        try:
            self._proc.stdin.write(payload + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise AgentCrashed("agent stdin closed") from exc
        record = self._read_record()
        if "error" in record:
            raise ProtocolError(f"agent error: {record['error']}")
        return record

    def _response_from(self, record: dict, frames: int) -> AgentResponse:
        if "tokens" not in record or not isinstance(record["tokens"], list):
            raise ProtocolError(f"response lacks a token list: {record!r}")
        attention = record.get("attention")
        matrix = None
        if attention is not None:
            try:
                matrix = np.asarray(attention, dtype=float)
            except ValueError as exc:
                raise BadAttentionShape(f"ragged attention matrix: {exc}") from exc
        resp = AgentResponse(
            tokens=[str(t) for t in record["tokens"]],
            attention=matrix,
            aux_tokens=record.get("aux"),
            compute_ms=record.get("compute_ms"),
        )
        if resp.attention is not None:
            resp = validate_attention(resp, frames)
        if resp.aux_tokens is not None and len(resp.aux_tokens) != len(resp.tokens):
            raise TrackLengthMismatch(
                f"aux track has {len(resp.aux_tokens)} tokens, expected {len(resp.tokens)}"
            )
        return resp

    def decode(self, frames: int, committed: list[str], beam: int = 5) -> AgentResponse:
        if frames < self._last_frames:
            raise ValueError("frames_available must be non-decreasing within a session")
        self._last_frames = frames
        request = AgentRequest("decode", frames, list(committed), beam)
        started = time.perf_counter()
        record = self._roundtrip(request)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        resp = self._response_from(record, frames)
        if resp.compute_ms is None:
            resp.compute_ms = elapsed_ms
        return resp

    def dual_decode(self, text: list[str], committed: list[str], beam: int = 5) -> AgentResponse:
        request = AgentRequest(
            "dual_decode", len(text), list(committed), beam, source_text=list(text)
        )
        record = self._roundtrip(request)
        return self._response_from(record, len(text))

    def reset(self) -> None:
        self._roundtrip(AgentRequest("reset"))
        self._last_frames = 0

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._roundtrip(AgentRequest("close"))
            except Exception:  # best-effort shutdown
                pass
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._terminate()

    def _terminate(self) -> None:
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
