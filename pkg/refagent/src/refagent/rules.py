"""Rule engines behind the reference agent.

ToyRules reads the span-table JSON (entries with 1-based inclusive frame
spans, total_frames, instability, seed) and answers `decode` requests.
RomanizerRules reads the phoneme/prosody table JSON and answers
`dual_decode` requests. Both return plain JSON-ready records; attention
matrices are nested lists of floats with one row per output token.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


class RuleError(Exception):
    """A request the rules cannot satisfy; reported as an error record."""


def _decoy(token: str, seed: int, index: int) -> str:
    # Frame-independent on purpose: the same wrong guess repeats until the
    # span stabilizes, which is what agreement policies end up committing.
    h = (seed * 31 + index * 7) % 100
    return f"{token}~{h:02d}"


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    token: str


class ToyRules:
    """Deterministic transducer over an alignment span table."""

    kind = "decode"

    def __init__(self, spec_path):
        with open(spec_path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        self.spans = [Span(e["start"], e["end"], e["token"]) for e in data["entries"]]
        self.total_frames = int(data["total_frames"])
        self.instability = int(data.get("instability", 0))
        self.seed = int(data.get("seed", 0))
        prev_start = 0
        for span in self.spans:
            if not (1 <= span.start <= span.end <= self.total_frames):
                raise ValueError(f"span {span} outside {self.total_frames} frames")
            if span.start < prev_start:
                raise ValueError("span starts must be non-decreasing")
            prev_start = span.start
        if self.instability < 0:
            raise ValueError("instability must be >= 0")

    def __call__(self, record: dict, state: dict) -> dict:
        frames = record.get("frames")
        committed = record.get("committed")
        if not isinstance(frames, int) or frames < 0:
            raise RuleError("decode needs a non-negative integer 'frames'")
        if not isinstance(committed, list) or not all(
            isinstance(t, str) for t in committed
        ):
            raise RuleError("decode needs 'committed' as a list of tokens")
        received = min(frames, self.total_frames)
        included = [s for s in self.spans if s.end <= received]
        tokens = [s.token for s in included]
        if self.instability > 0 and received < self.total_frames:
            unstable = min(self.instability, len(tokens))
            for pos in range(len(tokens) - unstable, len(tokens)):
                if included[pos].end > received - self.instability:
                    tokens[pos] = _decoy(included[pos].token, self.seed, pos)
        if len(committed) > len(tokens):
            raise RuleError(
                f"{len(committed)} committed tokens but only {len(tokens)} decodable"
            )
        for j, tok in enumerate(committed):
            stable = included[j].token
            if tok not in (tokens[j], stable, _decoy(stable, self.seed, j)):
                raise RuleError(
                    f"committed token {tok!r} at position {j} conflicts with {stable!r}"
                )
        out = list(committed) + tokens[len(committed):]
        response = {"tokens": out}
        if frames > 0:
            rows = []
            for span in included[: len(out)]:
                row = [0.0] * frames
                row[span.end - 1] = 1.0
                rows.append(row)
            response["attention"] = rows
        elif not out:
            response["attention"] = []
        return response


class RomanizerRules:
    """Phoneme + prosody expansion of target text tokens.

    Tokens missing from the table fall back to their characters with blank
    prosody; each output phoneme attends one-hot to its text token.
    """

    kind = "dual_decode"

    def __init__(self, table_path):
        with open(table_path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        self.table = {}
        for key, value in data.items():
            phonemes = list(value["phonemes"])
            prosody = list(value["prosody"])
            if len(phonemes) != len(prosody):
                raise ValueError(f"table entry {key!r} has unequal track lengths")
            self.table[key] = (phonemes, prosody)

    def __call__(self, record: dict, state: dict) -> dict:
        text = record.get("text")
        committed = record.get("committed")
        if not isinstance(text, list) or not all(isinstance(t, str) for t in text):
            raise RuleError("dual_decode needs 'text' as a list of tokens")
        if not isinstance(committed, list):
            raise RuleError("dual_decode needs a 'committed' list")
        phonemes: list[str] = []
        prosody: list[str] = []
        positions: list[int] = []
        for pos, token in enumerate(text, start=1):
            if token in self.table:
                ph, pr = self.table[token]
                ph, pr = list(ph), list(pr)
            else:
                ph = list(token)
                pr = ["blank"] * len(ph)
            phonemes.extend(ph)
            prosody.extend(pr)
            positions.extend([pos] * len(ph))
        if committed != phonemes[: len(committed)]:
            raise RuleError("committed phonemes conflict with the table expansion")
        rows = []
        for pos in positions:
            row = [0.0] * len(text)
            row[pos - 1] = 1.0
            rows.append(row)
        return {"tokens": phonemes, "attention": rows, "aux": prosody}
