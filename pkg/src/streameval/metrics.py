"""Quality and latency metrics over emission logs.

Latency metrics consume per-token delays: token j has delay d_j (ideal mode,
source consumed at commit) or c_j (computation-aware mode, wall clock at
commit). N is the emitted token count, T the source duration, N_ref the
reference length. Speech output is compared against the source by cutting
both into fixed 300 ms segments treated as tokens; text tokens keep their
commit times.

Conventions pinned here:
  AL   = (1/tau) * sum_{j<=tau} (d_j - (j-1)*T/N),
         tau = first j with d_j >= T, else N
  LAAL = same with normalizer T/max(N, N_ref); tau unchanged
  AP   = sum_j d_j / (N*T)
  DAL  = (1/N) * sum_j (g_j - (j-1)*T/N),
         g_1 = d_1, g_j = max(d_j, g_{j-1} + T/N)
  ATD  = (1/N) * sum_j (end(y_j) - end(x_{a(j)})), a(j) = min(j, |X|)
  Start_Offset = onset time of the first output
  End_Offset   = completion time of the last output - T
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyLog,
    EmptyTimeline,
    MissingReference,
    SizeMismatch,
    ZeroDuration,
)
from .timeline import IDEAL, TIME_EPS_MS, EmissionLog

LOGGER = logging.getLogger("streameval.metrics")

DEFAULT_SEGMENT_MS = 300.0


@dataclass(frozen=True)
class AtdConfig:
    segment_ms: float = DEFAULT_SEGMENT_MS

    def __post_init__(self):
        if self.segment_ms <= 0:
            raise ValueError("segment_ms must be positive")


@dataclass(frozen=True)
class DelayMetricsResult:
    """All latency metrics of one log in one mode, plus AL diagnostics."""

    al: float
    laal: float
    ap: float
    dal: float
    atd: float
    start_offset: float
    end_offset: float
    mode: str
    tau: int  # AL cutoff: index of the first full-source token (1-based)
    gamma_step: float  # T/N normalizer


def _delays(log: EmissionLog, mode: str) -> np.ndarray:
    delays = np.asarray(log.token_delays(mode), dtype=float)
    if delays.size == 0:
        raise EmptyLog("log has no committed tokens")
    return delays


def _al_with_tau(delays: np.ndarray, total_ms: float, step: float) -> tuple[float, int]:
    full = delays >= total_ms - TIME_EPS_MS
    tau = int(np.argmax(full)) + 1 if full.any() else delays.size
    lags = delays - np.arange(delays.size) * step
    return float(lags[:tau].mean()), tau


def compute_al(log: EmissionLog, mode: str = IDEAL) -> float:
    """Average lagging in ms."""
    delays = _delays(log, mode)
    al, _ = _al_with_tau(delays, log.source_duration_ms, log.source_duration_ms / delays.size)
    return al


def compute_laal(log: EmissionLog, mode: str = IDEAL) -> float:
    """Length-adaptive average lagging: normalizer uses max(N, N_ref)."""
    if log.reference_tokens is None:
        raise MissingReference("length-adaptive lagging needs a reference")
    delays = _delays(log, mode)
    step = log.source_duration_ms / max(delays.size, len(log.reference_tokens))
    laal, _ = _al_with_tau(delays, log.source_duration_ms, step)
    return laal


def compute_ap(log: EmissionLog, mode: str = IDEAL) -> float:
    """Average proportion: mean delay as a fraction of the source duration."""
    delays = _delays(log, mode)
    if log.source_duration_ms <= 0:
        raise ZeroDuration("average proportion needs a positive source duration")
    return float(delays.sum() / (delays.size * log.source_duration_ms))


def compute_dal(log: EmissionLog, mode: str = IDEAL) -> float:
    """Differentiable average lagging: delays spaced at least T/N apart."""
    delays = _delays(log, mode)
    step = log.source_duration_ms / delays.size
    offsets = np.arange(delays.size) * step
    # g_j - (j-1)*step == running max of (d_j - (j-1)*step)
    return float(np.maximum.accumulate(delays - offsets).mean())


# -- fixed-interval segmentation and ATD ----------------------------------------


def segment_source(total_duration_ms: float, config: AtdConfig | None = None) -> list[float]:
    """End times of the source cut into segment_ms tokens; the last may be short."""
    config = config or AtdConfig()
    if total_duration_ms <= 0:
        return []
    count = math.ceil(total_duration_ms / config.segment_ms)
    return [min(i * config.segment_ms, total_duration_ms) for i in range(1, count + 1)]


def segment_output(obj, config: AtdConfig | None = None, mode: str = IDEAL) -> list[float]:
    """Token end times of the output side.

    An emission log yields one end time per token (text is read at commit
    time); a channel schedule's speech segments are cut into segment_ms
    pieces with absolute end times.
    """
    config = config or AtdConfig()
    if isinstance(obj, EmissionLog):
        return [float(t) for t in obj.token_delays(mode)]
    ends: list[float] = []
    for seg in obj.segments:
        count = math.ceil(seg.duration_ms / config.segment_ms)
        ends.extend(
            seg.starts_at_ms + min(i * config.segment_ms, seg.duration_ms)
            for i in range(1, count + 1)
        )
    return ends


def capped_pairing(target_index: int, source_count: int) -> int:
    """Default one-to-one pairing a(j) = min(j, |X|), 1-based."""
    return min(target_index, source_count)


def compute_atd(
    source_end_times: list[float],
    target_end_times: list[float],
    pairing=capped_pairing,
) -> float:
    """Average time difference between paired source and target tokens."""
    if not target_end_times:
        raise EmptyTimeline("no target tokens to pair")
    if not source_end_times:
        raise EmptyTimeline("no source tokens to pair")
    n_source = len(source_end_times)
    total = 0.0
    for j, end in enumerate(target_end_times, start=1):
        total += end - source_end_times[pairing(j, n_source) - 1]
    return total / len(target_end_times)


def atd_from_log(
    log: EmissionLog, mode: str = IDEAL, config: AtdConfig | None = None
) -> float:
    """ATD of a text log: segmented source vs commit-timed target tokens."""
    return compute_atd(
        segment_source(log.source_duration_ms, config),
        segment_output(log, config, mode),
    )


def compute_offsets(obj, mode: str = IDEAL) -> tuple[float, float]:
    """(start_offset, end_offset): first output onset, last completion - T.

    For a text log the onset and completion are commit delays in the given
    mode; for a channel schedule they are physical segment start/end times.
    """
    if isinstance(obj, EmissionLog):
        if not obj.commits:
            raise EmptyLog("log has no commits")
        delays = obj.token_delays(mode)
        return float(delays[0]), float(delays[-1] - obj.source_duration_ms)
    if not obj.segments:
        raise EmptyLog("schedule has no segments")
    start = obj.segments[0].starts_at_ms
    end = obj.segments[-1].ends_at_ms
    return float(start), float(end - obj.source_duration_ms)


def delay_metrics(
    log: EmissionLog, mode: str = IDEAL, atd_config: AtdConfig | None = None
) -> DelayMetricsResult:
    """The full latency suite of one log in one mode."""
    delays = _delays(log, mode)
    total = log.source_duration_ms
    step = total / delays.size
    al, tau = _al_with_tau(delays, total, step)
    start_offset, end_offset = compute_offsets(log, mode)
    return DelayMetricsResult(
        al=al,
        laal=compute_laal(log, mode),
        ap=compute_ap(log, mode),
        dal=compute_dal(log, mode),
        atd=atd_from_log(log, mode, atd_config),
        start_offset=start_offset,
        end_offset=end_offset,
        mode=mode,
        tau=tau,
        gamma_step=step,
    )


# -- corpus BLEU -----------------------------------------------------------------


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    sys_len: int
    ref_len: int
    max_n: int
    zero_precision: bool  # some n-gram order matched nothing (unsmoothed)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu_details(
    hypotheses: list[list[str]],
    references: list[list[str]],
    max_n: int = 4,
    smooth_add: float = 0.0,
) -> BleuScore:
    """Corpus BLEU: modified n-gram precisions under a brevity penalty.

    No smoothing by default; a zero precision yields score 0.0 with a
    diagnostic. smooth_add > 0 adds that count to numerator and denominator
    of every order n >= 2 (for tiny desk-scale corpora).
    """
    if len(hypotheses) != len(references):
        raise SizeMismatch(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    sys_len = sum(len(h) for h in hypotheses)
    ref_len = sum(len(r) for r in references)
    matched = [0.0] * max_n
    total = [0.0] * max_n
    for hyp, ref in zip(hypotheses, references):
        for n in range(1, max_n + 1):
            hyp_counts = _ngrams(hyp, n)
            if not hyp_counts:
                continue
            ref_counts = _ngrams(ref, n)
            total[n - 1] += sum(hyp_counts.values())
            matched[n - 1] += sum(
                min(count, ref_counts[gram]) for gram, count in hyp_counts.items()
            )
    precisions = []
    for n in range(1, max_n + 1):
        num, den = matched[n - 1], total[n - 1]
        if n >= 2 and smooth_add > 0:
            num, den = num + smooth_add, den + smooth_add
        precisions.append(num / den if den > 0 else 0.0)
    if sys_len == 0 or any(p == 0.0 for p in precisions):
        if sys_len:
            LOGGER.warning(
                "zero %d-gram precision; score is 0 (consider smoothing or a "
                "smaller max_n for short corpora)",
                precisions.index(0.0) + 1,
            )
        return BleuScore(0.0, tuple(precisions), 0.0, sys_len, ref_len, max_n, True)
    brevity = 1.0 if sys_len >= ref_len else math.exp(1.0 - ref_len / sys_len)
    log_mean = sum(math.log(p) for p in precisions) / max_n
    score = 100.0 * brevity * math.exp(log_mean)
    return BleuScore(score, tuple(precisions), brevity, sys_len, ref_len, max_n, False)


def corpus_bleu(
    hypotheses: list[list[str]],
    references: list[list[str]],
    max_n: int = 4,
    smooth_add: float = 0.0,
) -> float:
    """Corpus BLEU in [0, 100]."""
    return corpus_bleu_details(hypotheses, references, max_n, smooth_add).score
