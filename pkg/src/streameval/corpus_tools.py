"""Corpus manifests, the sample-per-token ratio filter, and report export.

Manifest format: tab-separated, one utterance per line,
`id<TAB>duration_ms<TAB>sample_count<TAB>sample_rate<TAB>reference<TAB>agent_binding`
with backslash escaping (\\t, \\n, \\\\) inside text fields; the reference is a
space-separated token sequence; the last column is optional. Lines starting
with # and blank lines are skipped.

Agent bindings:
  toy:<path>        in-process deterministic transducer; path to its span
                    table, relative to the manifest directory
  cmd:<command>     external agent subprocess speaking the wire protocol;
                    cmd@<frame_ms>:<command> overrides the default 100 ms
                    frame granularity; {id} in the command expands to the
                    utterance id
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path

from .agents import ExternalAgentClient, ToyTransducerAgent, load_toy_spec
from .errors import DuplicateId, ManifestParseError, ZeroTokens
from .simulator import TradeoffRow
from .timeline import SourceStream

LOGGER = logging.getLogger("streameval.corpus")

DEFAULT_FRAME_MS = 100.0
DEFAULT_MAX_RATIO = 4000.0

TRADEOFF_HEADER = (
    "policy,chunk_ms,param,bleu,AL,LAAL,AP,DAL,ATD,"
    "AL_CA,LAAL_CA,AP_CA,DAL_CA,ATD_CA,Start_Offset,End_Offset"
)


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    source_duration_ms: float
    source_sample_count: int
    sample_rate: int
    reference: tuple[str, ...]
    agent_binding: str | None = None

    def __post_init__(self):
        if self.source_duration_ms < 0 or self.sample_rate <= 0:
            raise ValueError("duration must be >= 0 and sample rate positive")
        expected = self.source_duration_ms * self.sample_rate / 1000.0
        if abs(self.source_sample_count - expected) > 1.0 + 1e-9:
            raise ValueError(
                f"{self.id}: {self.source_sample_count} samples inconsistent with "
                f"{self.source_duration_ms} ms at {self.sample_rate} Hz"
            )


@dataclass(frozen=True)
class FilterConfig:
    max_ratio: float = DEFAULT_MAX_RATIO  # source samples per output token

    def __post_init__(self):
        if self.max_ratio <= 0:
            raise ValueError("max_ratio must be positive")


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"t": "\t", "n": "\n", "\\": "\\"}.get(nxt, "\\" + nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def load_manifest(path) -> list[ManifestEntry]:
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) not in (5, 6):
                raise ManifestParseError(
                    f"line {lineno}: expected 5 or 6 tab-separated fields, "
                    f"got {len(fields)}",
                    line_number=lineno,
                )
            try:
                entry = ManifestEntry(
                    id=_unescape(fields[0]),
                    source_duration_ms=float(fields[1]),
                    source_sample_count=int(fields[2]),
                    sample_rate=int(fields[3]),
                    reference=tuple(_unescape(fields[4]).split()),
                    agent_binding=_unescape(fields[5]) if len(fields) == 6 and fields[5] else None,
                )
            except ValueError as exc:
                raise ManifestParseError(
                    f"line {lineno}: {exc}", line_number=lineno
                ) from exc
            if entry.id in seen:
                raise DuplicateId(f"duplicate utterance id {entry.id!r} at line {lineno}")
            seen.add(entry.id)
            entries.append(entry)
    return entries


def save_manifest(entries: list[ManifestEntry], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fields = [
                _escape(e.id),
                f"{e.source_duration_ms!r}",
                str(e.source_sample_count),
                str(e.sample_rate),
                _escape(" ".join(e.reference)),
            ]
            if e.agent_binding is not None:
                fields.append(_escape(e.agent_binding))
            fh.write("\t".join(fields) + "\n")


def ratio_filter(entry: ManifestEntry, config: FilterConfig | None = None) -> bool:
    """Keep an utterance iff source samples per output token <= max_ratio."""
    config = config or FilterConfig()
    if not entry.reference:
        raise ZeroTokens(f"{entry.id}: reference has no tokens")
    return entry.source_sample_count / len(entry.reference) <= config.max_ratio


def filter_manifest(
    entries: list[ManifestEntry], config: FilterConfig | None = None
) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Split entries into (kept, excluded) under the ratio filter."""
    kept, excluded = [], []
    for entry in entries:
        (kept if ratio_filter(entry, config) else excluded).append(entry)
    return kept, excluded


# -- agent/session resolution ------------------------------------------------------


def parse_binding(binding: str) -> tuple[str, float | None, str]:
    """Split an agent binding into (kind, frame_ms override, payload)."""
    head, sep, payload = binding.partition(":")
    if not sep:
        raise ValueError(f"agent binding {binding!r} has no kind prefix")
    kind, at, frame = head.partition("@")
    frame_ms = float(frame) if at else None
    if kind not in ("toy", "cmd"):
        raise ValueError(f"unknown agent binding kind {kind!r}")
    return kind, frame_ms, payload


def build_session(
    entry: ManifestEntry,
    base_dir,
    agent_cmd: str | None = None,
    timeout_s: float = 60.0,
) -> tuple[SourceStream, object]:
    """Materialize one manifest entry as a (source, fresh agent) pair.

    agent_cmd, when given, overrides the entry's binding with an external
    command; {id} inside either command expands to the utterance id.
    """
    base_dir = Path(base_dir)
    binding = f"cmd:{agent_cmd}" if agent_cmd else entry.agent_binding
    if binding is None:
        raise ValueError(f"{entry.id}: no agent binding and no command override")
    kind, frame_ms, payload = parse_binding(binding)
    payload = payload.replace("{id}", entry.id)
    if kind == "toy":
        spec, spec_frame_ms = load_toy_spec(base_dir / payload)
        agent: object = ToyTransducerAgent(spec)
        frame_ms = frame_ms or spec_frame_ms
    else:
        agent = ExternalAgentClient(payload, timeout_s=timeout_s)
        frame_ms = frame_ms or DEFAULT_FRAME_MS
    source = SourceStream.uniform(
        total_duration_ms=entry.source_duration_ms,
        frame_ms=frame_ms,
        reference_tokens=list(entry.reference),
    )
    return source, agent


def session_factory(base_dir, agent_cmd: str | None = None, timeout_s: float = 60.0):
    """An agent_factory for the sweep runner over manifest entries."""

    def factory(entry: ManifestEntry):
        return build_session(entry, base_dir, agent_cmd, timeout_s)

    return factory


# -- trade-off report export --------------------------------------------------------


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_tradeoff_row(row: TradeoffRow) -> str:
    """One CSV line in header order; floats use round-trippable repr."""
    cells = [
        row.policy,
        _format_cell(row.chunk_ms),
        str(row.param),
        _format_cell(row.bleu),
        _format_cell(row.al),
        _format_cell(row.laal),
        _format_cell(row.ap),
        _format_cell(row.dal),
        _format_cell(row.atd),
        _format_cell(row.al_ca),
        _format_cell(row.laal_ca),
        _format_cell(row.ap_ca),
        _format_cell(row.dal_ca),
        _format_cell(row.atd_ca),
        _format_cell(row.start_offset),
        _format_cell(row.end_offset),
    ]
    return ",".join(cells)


def export_tradeoff(rows: list[TradeoffRow], path, seed: int = 0) -> None:
    """Write the sweep CSV; a `# seed=N` comment pins the run's randomness."""
    if not rows:
        raise ValueError("no rows to export")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# seed={seed}\n")
        fh.write(TRADEOFF_HEADER + "\n")
        for row in rows:
            fh.write(format_tradeoff_row(row) + "\n")


def read_tradeoff(path) -> tuple[list[TradeoffRow], int]:
    """Read a sweep CSV back; returns (rows, seed)."""
    seed = 0
    rows: list[TradeoffRow] = []
    with open(path, "r", encoding="utf-8") as fh:
        text_rows = []
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# seed="):
                seed = int(line.split("=", 1)[1])
                continue
            if line:
                text_rows.append(line)
    if not text_rows or text_rows[0] != TRADEOFF_HEADER:
        raise ValueError("missing or unexpected trade-off CSV header")
    for record in csv.reader(io.StringIO("\n".join(text_rows[1:]))):
        rows.append(
            TradeoffRow(
                policy=record[0],
                chunk_ms=float(record[1]),
                param=int(record[2]),
                bleu=float(record[3]),
                al=float(record[4]),
                laal=float(record[5]),
                ap=float(record[6]),
                dal=float(record[7]),
                atd=float(record[8]),
                al_ca=float(record[9]),
                laal_ca=float(record[10]),
                ap_ca=float(record[11]),
                dal_ca=float(record[12]),
                atd_ca=float(record[13]),
                start_offset=float(record[14]),
                end_offset=float(record[15]),
            )
        )
    return rows, seed
