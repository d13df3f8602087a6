"""Session driver: chunk scheduler, dual clocks, cost models, sweep runner.

A session delivers the source to the agent in chunk_ms increments. Each
commit records two delays: the ideal delay d (source consumed, as if decode
were free) and the wall delay c (source consumed plus all computation spent
so far). Under the ideal clock c = d; under the computation-aware clock the
per-decode cost accumulates, so smaller chunks (more decode calls per second
of source) widen the c - d gap. This is the mechanism that degrades
low-latency quality in computation-aware conditions.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

from . import metrics
from .agents import validate_attention
from .policy_alignatt import AlignAtt, AlignAttConfig
from .policy_la import LaConfig, LocalAgreement
from .timeline import COMPUTATION_AWARE, IDEAL, EmissionLog, SourceStream

LOGGER = logging.getLogger("streameval.simulator")

COST_MEASURED = "measured"
COST_FIXED = "fixed_per_decode"
COST_PER_FRAME = "per_frame"


@dataclass(frozen=True)
class CostModel:
    """Per-decode computation charge: measured wall time or a simulated cost."""

    kind: str = COST_MEASURED
    ms: float = 0.0  # fixed cost, or cost per frame for per_frame

    def __post_init__(self):
        if self.kind not in (COST_MEASURED, COST_FIXED, COST_PER_FRAME):
            raise ValueError(f"unknown cost model kind {self.kind!r}")
        if self.ms < 0:
            raise ValueError("cost must be >= 0")

    @classmethod
    def measured(cls) -> "CostModel":
        return cls(COST_MEASURED)

    @classmethod
    def fixed_per_decode(cls, ms: float) -> "CostModel":
        return cls(COST_FIXED, ms)

    @classmethod
    def per_frame(cls, ms_per_frame: float) -> "CostModel":
        return cls(COST_PER_FRAME, ms_per_frame)

    @classmethod
    def parse(cls, text: str) -> "CostModel":
        """Parse 'measured', 'fixed:<ms>', or 'per_frame:<ms>'."""
        kind, _, value = text.partition(":")
        if kind == COST_MEASURED and not value:
            return cls.measured()
        if kind in ("fixed", COST_FIXED):
            return cls.fixed_per_decode(float(value))
        if kind == COST_PER_FRAME:
            return cls.per_frame(float(value))
        raise ValueError(f"unknown cost model {text!r}")


@dataclass(frozen=True)
class DecodeCall:
    """What one decode request looked like, for cost charging."""

    frames: int
    reported_ms: float | None = None


@dataclass(frozen=True)
class ClockModel:
    mode: str = IDEAL  # ideal | computation_aware
    cost_model: CostModel = field(default_factory=CostModel)

    def __post_init__(self):
        if self.mode not in (IDEAL, COMPUTATION_AWARE):
            raise ValueError(f"unknown clock mode {self.mode!r}")

    @classmethod
    def ideal(cls) -> "ClockModel":
        return cls(IDEAL)

    @classmethod
    def computation_aware(cls, cost_model: CostModel | None = None) -> "ClockModel":
        return cls(COMPUTATION_AWARE, cost_model or CostModel())


def apply_cost(clock: ClockModel, call: DecodeCall, measured_ms: float) -> float:
    """Charge for one decode: 0 (ideal), the fixed/per-frame cost, or the
    measured time (agent-reported when available)."""
    if clock.mode == IDEAL:
        return 0.0
    model = clock.cost_model
    if model.kind == COST_FIXED:
        return model.ms
    if model.kind == COST_PER_FRAME:
        return model.ms * call.frames
    if call.reported_ms is not None:
        return call.reported_ms
    return measured_ms


def chunk_boundaries(total_duration_ms: float, chunk_ms: float) -> list[float]:
    """Chunk boundary times min(k * chunk_ms, T); the last chunk may be short."""
    if chunk_ms <= 0:
        raise ValueError("chunk_ms must be positive")
    count = max(1, math.ceil(total_duration_ms / chunk_ms)) if total_duration_ms > 0 else 0
    return [min(k * chunk_ms, total_duration_ms) for k in range(1, count + 1)]


def run_session(
    source: SourceStream,
    agent,
    policy,
    clock: ClockModel | None = None,
    beam: int = 5,
) -> EmissionLog:
    """Drive one streaming session; returns the finalized emission log."""
    clock = clock or ClockModel.ideal()
    policy.reset()
    log = EmissionLog(
        source_duration_ms=source.total_duration_ms,
        reference_tokens=source.reference_tokens,
    )
    boundaries = chunk_boundaries(source.total_duration_ms, policy.chunk_ms)
    spent_ms = 0.0
    for k, t in enumerate(boundaries, start=1):
        is_final = k == len(boundaries)
        frames = source.frames_available_at(t)
        started = time.perf_counter()
        resp = agent.decode(frames, policy.committed, beam)
        measured_ms = (time.perf_counter() - started) * 1000.0
        if policy.needs_attention and resp.attention is not None:
            resp = validate_attention(resp, frames)
        spent_ms += apply_cost(clock, DecodeCall(frames, resp.compute_ms), measured_ms)
        newly = policy.advance(resp.tokens, resp.attention, is_final)
        if newly:
            wall = t if clock.mode == IDEAL else t + spent_ms
            log.record_commit(newly, t, wall)
    log.finalize(source.total_duration_ms)
    return log


def run_la(
    source: SourceStream,
    agent,
    config: LaConfig,
    clock: ClockModel | None = None,
    beam: int = 5,
) -> EmissionLog:
    return run_session(source, agent, LocalAgreement(config), clock, beam)


def run_alignatt(
    source: SourceStream,
    agent,
    config: AlignAttConfig,
    clock: ClockModel | None = None,
    beam: int = 5,
) -> EmissionLog:
    return run_session(source, agent, AlignAtt(config), clock, beam)


# -- sweeps ---------------------------------------------------------------------

POLICY_LA = "la"
POLICY_ALIGNATT = "alignatt"


@dataclass(frozen=True)
class SweepConfig:
    """Grid of (chunk_ms, policy parameter) points over a fixed corpus.

    The corpus is a sequence of opaque session descriptors; agent_factory
    maps each one to a fresh (source, agent) pair so sessions never share
    agent state across grid points.
    """

    policy: str  # la | alignatt
    grid: tuple[tuple[float, int], ...]
    corpus: tuple
    beam: int = 5
    cost_model: CostModel = field(default_factory=CostModel)

    def __post_init__(self):
        if self.policy not in (POLICY_LA, POLICY_ALIGNATT):
            raise ValueError(f"unknown policy {self.policy!r}")
        if not self.grid:
            raise ValueError("sweep grid must be nonempty")


@dataclass(frozen=True)
class TradeoffRow:
    """One grid point: configuration, corpus BLEU, and all latency columns."""

    policy: str
    chunk_ms: float
    param: int
    bleu: float
    al: float
    laal: float
    ap: float
    dal: float
    atd: float
    al_ca: float
    laal_ca: float
    ap_ca: float
    dal_ca: float
    atd_ca: float
    start_offset: float
    end_offset: float


def make_policy(policy: str, chunk_ms: float, param: int):
    if policy == POLICY_LA:
        return LocalAgreement(LaConfig(chunk_ms=chunk_ms, n=param))
    if policy == POLICY_ALIGNATT:
        return AlignAtt(AlignAttConfig(f=param, chunk_ms=chunk_ms))
    raise ValueError(f"unknown policy {policy!r}")


def summarize_logs(
    policy: str, chunk_ms: float, param: int, logs: list[EmissionLog]
) -> TradeoffRow:
    """Corpus BLEU plus session-averaged latency metrics for one grid point."""
    hypotheses = [log.tokens() for log in logs]
    references = [log.reference_tokens or [] for log in logs]
    bleu = metrics.corpus_bleu(hypotheses, references)

    def mean(values: list[float]) -> float:
        return sum(values) / len(values)

    ideal = [metrics.delay_metrics(log, IDEAL) for log in logs]
    aware = [metrics.delay_metrics(log, COMPUTATION_AWARE) for log in logs]
    return TradeoffRow(
        policy=policy,
        chunk_ms=chunk_ms,
        param=param,
        bleu=bleu,
        al=mean([m.al for m in ideal]),
        laal=mean([m.laal for m in ideal]),
        ap=mean([m.ap for m in ideal]),
        dal=mean([m.dal for m in ideal]),
        atd=mean([m.atd for m in ideal]),
        al_ca=mean([m.al for m in aware]),
        laal_ca=mean([m.laal for m in aware]),
        ap_ca=mean([m.ap for m in aware]),
        dal_ca=mean([m.dal for m in aware]),
        atd_ca=mean([m.atd for m in aware]),
        start_offset=mean([m.start_offset for m in ideal]),
        end_offset=mean([m.end_offset for m in ideal]),
    )


def run_sweep(config: SweepConfig, agent_factory) -> list[TradeoffRow]:
    """Run every session at every grid point; one row per grid point.

    Sessions run under the computation-aware clock so each log carries real
    c values; ideal columns read the d side of the same logs.
    """
    rows = []
    clock = ClockModel.computation_aware(config.cost_model)
    for chunk_ms, param in config.grid:
        logs = []
        for item in config.corpus:
            source, agent = agent_factory(item)
            policy = make_policy(config.policy, chunk_ms, param)
            try:
                logs.append(run_session(source, agent, policy, clock, config.beam))
            finally:
                agent.close()
        if not logs:
            raise ValueError("sweep corpus is empty")
        rows.append(summarize_logs(config.policy, chunk_ms, param, logs))
        LOGGER.info(
            "sweep point policy=%s chunk=%s param=%s done (%d sessions)",
            config.policy, chunk_ms, param, len(logs),
        )
    return rows
