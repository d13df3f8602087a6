import math

import pytest

from streameval.agents import SpanEntry, ToyTransducerAgent, ToyTransducerSpec
from streameval.policy_alignatt import AlignAttConfig
from streameval.policy_la import LaConfig, LocalAgreement
from streameval.simulator import (
    ClockModel,
    CostModel,
    DecodeCall,
    SweepConfig,
    TradeoffRow,
    apply_cost,
    chunk_boundaries,
    make_policy,
    run_alignatt,
    run_la,
    run_session,
    run_sweep,
    summarize_logs,
)
from streameval.timeline import SourceStream


def spec_10(k=0, seed=0):
    entries = (SpanEntry(1, 3, "t1"), SpanEntry(4, 7, "t2"), SpanEntry(7, 9, "t3"))
    return ToyTransducerSpec(entries=entries, total_frames=10, instability=k, seed=seed)


def source_10(reference=("t1", "t2", "t3")):
    return SourceStream.uniform(1000.0, 100.0, list(reference))


# -- clock plumbing ---------------------------------------------------------------


def test_chunk_boundaries():
    assert chunk_boundaries(3000.0, 800.0) == [800.0, 1600.0, 2400.0, 3000.0]
    assert chunk_boundaries(1000.0, 500.0) == [500.0, 1000.0]
    assert chunk_boundaries(400.0, 500.0) == [400.0]
    with pytest.raises(ValueError):
        chunk_boundaries(1000.0, 0.0)


def test_cost_model_parse():
    assert CostModel.parse("measured").kind == "measured"
    fixed = CostModel.parse("fixed:50")
    assert fixed.kind == "fixed_per_decode" and fixed.ms == 50.0
    per = CostModel.parse("per_frame:0.5")
    assert per.kind == "per_frame" and per.ms == 0.5
    with pytest.raises(ValueError):
        CostModel.parse("hourly:3")
    with pytest.raises(ValueError):
        CostModel.parse("fixed:")
    with pytest.raises(ValueError):
        CostModel.parse("fixed:-1")


def test_apply_cost_by_kind():
    call = DecodeCall(frames=8, reported_ms=12.0)
    assert apply_cost(ClockModel.ideal(), call, measured_ms=99.0) == 0.0
    fixed = ClockModel.computation_aware(CostModel.fixed_per_decode(50.0))
    assert apply_cost(fixed, call, measured_ms=99.0) == 50.0
    per = ClockModel.computation_aware(CostModel.per_frame(2.5))
    assert apply_cost(per, call, measured_ms=99.0) == 20.0
    measured = ClockModel.computation_aware(CostModel.measured())
    # agent-reported compute time wins over the harness stopwatch
    assert apply_cost(measured, call, measured_ms=99.0) == 12.0
    blind = DecodeCall(frames=8, reported_ms=None)
    assert apply_cost(measured, blind, measured_ms=99.0) == 99.0


# -- session runs -----------------------------------------------------------------


def test_ideal_clock_wall_equals_ideal():
    log = run_la(source_10(), ToyTransducerAgent(spec_10()), LaConfig(500.0, n=1))
    assert log.token_delays("ideal") == log.token_delays("computation_aware")


def test_fixed_cost_accumulates_across_chunks():
    clock = ClockModel.computation_aware(CostModel.fixed_per_decode(50.0))
    log = run_la(
        source_10(), ToyTransducerAgent(spec_10()), LaConfig(500.0, n=1), clock
    )
    # chunk k commits at ideal k*500 and wall k*500 + k*50 (cumulative cost)
    assert log.commits[0].ideal_delay_ms == 500.0
    assert log.commits[0].wall_delay_ms == 550.0
    assert log.commits[1].ideal_delay_ms == 1000.0
    assert log.commits[1].wall_delay_ms == 1100.0


def test_per_frame_cost_accumulates_frames():
    clock = ClockModel.computation_aware(CostModel.per_frame(2.0))
    log = run_la(
        source_10(), ToyTransducerAgent(spec_10()), LaConfig(500.0, n=1), clock
    )
    # decode at F=5 costs 10 ms, decode at F=10 costs 20 ms more
    assert log.commits[0].wall_delay_ms == 510.0
    assert log.commits[1].wall_delay_ms == 1030.0


def test_run_session_equals_wrappers():
    by_wrapper = run_la(
        source_10(), ToyTransducerAgent(spec_10()), LaConfig(500.0, n=2)
    )
    by_session = run_session(
        source_10(), ToyTransducerAgent(spec_10()), LocalAgreement(LaConfig(500.0, n=2))
    )
    assert by_wrapper.to_json_line() == by_session.to_json_line()


def test_alignatt_session_is_finalized_and_complete():
    log = run_alignatt(
        source_10(), ToyTransducerAgent(spec_10()), AlignAttConfig(f=2, chunk_ms=500.0)
    )
    assert log.finalized
    assert log.tokens() == ["t1", "t2", "t3"]
    assert log.token_delays("ideal")[-1] == 1000.0


def test_make_policy():
    la = make_policy("la", 500.0, 3)
    assert isinstance(la, LocalAgreement) and la.config.n == 3
    aa = make_policy("alignatt", 400.0, 6)
    assert aa.config.f == 6 and aa.chunk_ms == 400.0
    with pytest.raises(ValueError):
        make_policy("waitk", 500.0, 3)


# -- sweeps -----------------------------------------------------------------------


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(policy="la", grid=tuple(), corpus=tuple())


def test_summarize_logs_means():
    # four tokens so that default BLEU-4 has at least one 4-gram to count
    spec = ToyTransducerSpec(
        entries=tuple(
            SpanEntry(max(1, e - 2), e, f"t{i}") for i, e in enumerate([3, 5, 7, 10])
        ),
        total_frames=10,
    )
    src = SourceStream.uniform(1000.0, 100.0, spec.target_tokens)
    logs = [
        run_la(src, ToyTransducerAgent(spec), LaConfig(500.0, n=1)),
        run_la(src, ToyTransducerAgent(spec), LaConfig(250.0, n=1)),
    ]
    row = summarize_logs("la", 500.0, 1, logs)
    assert row.policy == "la"
    assert row.bleu == 100.0
    assert not math.isnan(row.al) and not math.isnan(row.al_ca)
    # t0 spans frames 1-3: the 250 ms session first commits at 500, too
    assert row.start_offset == 500.0


def test_run_sweep_runs_grid_with_fresh_agents():
    created = []

    def factory(item):
        agent = ToyTransducerAgent(spec_10(k=item["k"], seed=3))
        created.append(agent)
        return source_10(), agent

    corpus = ({"k": 1}, {"k": 2})
    config = SweepConfig(
        policy="la",
        grid=((500.0, 1), (500.0, 2)),
        corpus=corpus,
        cost_model=CostModel.fixed_per_decode(10.0),
    )
    rows = run_sweep(config, factory)
    assert len(rows) == 2
    assert len(created) == 4  # one fresh agent per (grid point, corpus item)
    for row in rows:
        assert row.al_ca >= row.al - 1e-9
        assert row.ap_ca >= row.ap - 1e-9
        assert row.chunk_ms == 500.0
    assert rows[0].param == 1 and rows[1].param == 2


def test_tradeoff_row_field_order_matches_header():
    row = TradeoffRow(
        policy="la", chunk_ms=500.0, param=2, bleu=1.0, al=2.0, laal=3.0, ap=4.0,
        dal=5.0, atd=6.0, al_ca=7.0, laal_ca=8.0, ap_ca=9.0, dal_ca=10.0,
        atd_ca=11.0, start_offset=12.0, end_offset=13.0,
    )
    values = [getattr(row, name) for name in (
        "bleu", "al", "laal", "ap", "dal", "atd",
        "al_ca", "laal_ca", "ap_ca", "dal_ca", "atd_ca",
        "start_offset", "end_offset",
    )]
    assert values == [float(v) for v in range(1, 14)]
