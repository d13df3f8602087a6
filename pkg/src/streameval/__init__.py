"""Streaming translation policy harness and quality/latency evaluation toolkit."""

from .agents import (
    AgentRequest,
    AgentResponse,
    ExternalAgentClient,
    RomanizerAgent,
    SpanEntry,
    ToyTransducerAgent,
    ToyTransducerSpec,
    decoy_token,
    load_romanizer_table,
    load_toy_spec,
    toy_decode,
    validate_attention,
)
from .corpus_tools import (
    FilterConfig,
    ManifestEntry,
    build_session,
    export_tradeoff,
    filter_manifest,
    load_manifest,
    ratio_filter,
    read_tradeoff,
    save_manifest,
)
from .metrics import (
    AtdConfig,
    BleuScore,
    DelayMetricsResult,
    compute_al,
    compute_ap,
    compute_atd,
    compute_dal,
    compute_laal,
    compute_offsets,
    corpus_bleu,
    corpus_bleu_details,
    delay_metrics,
    segment_output,
    segment_source,
)
from .policy_alignatt import AlignAtt, AlignAttConfig, AlignAttRoundResult, alignatt_round
from .policy_la import LaConfig, LaState, LocalAgreement, la_commit_step
from .s2s_cascade import (
    ChannelSchedule,
    DualTrackResult,
    DurationModel,
    HandoffPolicy,
    SpeechOutputSegment,
    TimingDiagram,
    estimate_dual_tracks,
    handoff,
    render_timing_diagram,
    schedule_speech,
)
from .simulator import (
    ClockModel,
    CostModel,
    SweepConfig,
    TradeoffRow,
    apply_cost,
    run_alignatt,
    run_la,
    run_session,
    run_sweep,
)
from .timeline import (
    COMPUTATION_AWARE,
    IDEAL,
    CommitEvent,
    EmissionLog,
    Frame,
    Hypothesis,
    SourceStream,
    lcp,
    load_logs,
    save_logs,
)

__version__ = "0.1.0"
