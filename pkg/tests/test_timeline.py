import json
import random

import numpy as np
import pytest

from streameval.errors import (
    BadAttentionShape,
    DelayExceedsSource,
    EmptyCommit,
    LogFinalized,
    NonMonotoneDelay,
)
from streameval.timeline import (
    CommitEvent,
    EmissionLog,
    Frame,
    Hypothesis,
    SourceStream,
    lcp,
    load_logs,
    save_logs,
)

from oracles import naive_lcp, random_finalized_log


def test_lcp_basics():
    assert lcp(["a", "b", "c"], ["a", "b", "d"]) == ["a", "b"]
    assert lcp([], ["a"]) == []
    assert lcp(["a"], ["a"]) == ["a"]
    assert lcp(["x"], ["y"]) == []


def test_lcp_matches_naive_on_random_pairs():
    rng = random.Random(5)
    alphabet = ["a", "b", "c"]
    for _ in range(300):
        a = [rng.choice(alphabet) for _ in range(rng.randint(0, 8))]
        b = [rng.choice(alphabet) for _ in range(rng.randint(0, 8))]
        assert lcp(a, b) == naive_lcp(a, b)


def test_uniform_stream_layout():
    src = SourceStream.uniform(1000.0, 100.0, ["a"])
    assert len(src.frames) == 10
    assert src.total_duration_ms == 1000.0
    assert src.reference_tokens == ["a"]
    # a trailing partial frame still counts as one frame
    ragged = SourceStream.uniform(950.0, 300.0, None)
    assert len(ragged.frames) == 4


def test_frames_available_at_counts_whole_frames():
    src = SourceStream.uniform(1000.0, 100.0, None)
    assert src.frames_available_at(0.0) == 0
    assert src.frames_available_at(99.9) == 0
    assert src.frames_available_at(100.0) == 1
    assert src.frames_available_at(300.0) == 3
    assert src.frames_available_at(5000.0) == 10
    # sub-microsecond jitter at a boundary must not drop the frame
    assert src.frames_available_at(300.0 - 5e-7) == 3


def test_hypothesis_validate_shapes():
    hyp = Hypothesis(tokens=["a", "b"], attention=np.eye(2))
    hyp.validate(frames=2)
    with pytest.raises(BadAttentionShape):
        Hypothesis(tokens=["a"], attention=np.eye(2)).validate(frames=2)
    with pytest.raises(BadAttentionShape):
        Hypothesis(tokens=["a", "b"], attention=np.eye(2)).validate(frames=3)
    Hypothesis(tokens=["a"], attention=None).validate(frames=4)


def test_commit_event_validation():
    with pytest.raises(EmptyCommit):
        CommitEvent(tuple(), 100.0, 100.0)
    with pytest.raises(NonMonotoneDelay):
        CommitEvent(("a",), 200.0, 100.0)
    ev = CommitEvent(("a",), 100.0, 150.0)
    assert ev.tokens == ("a",)


def test_record_commit_enforces_monotone_delays():
    log = EmissionLog()
    log.record_commit(["a"], 500.0, 600.0)
    with pytest.raises(NonMonotoneDelay):
        log.record_commit(["b"], 400.0, 700.0)
    with pytest.raises(NonMonotoneDelay):
        log.record_commit(["b"], 700.0, 500.0)
    with pytest.raises(EmptyCommit):
        log.record_commit([], 700.0, 700.0)


def test_finalize_restamps_last_commit():
    log = EmissionLog()
    log.record_commit(["a"], 500.0, 520.0)
    log.record_commit(["b", "c"], 900.0, 980.0)
    log.finalize(1000.0)
    assert log.finalized
    assert log.commits[-1].ideal_delay_ms == 1000.0
    assert log.commits[-1].wall_delay_ms == 1000.0
    assert log.token_delays("ideal") == [500.0, 1000.0, 1000.0]
    assert log.token_delays("computation_aware") == [520.0, 1000.0, 1000.0]
    with pytest.raises(LogFinalized):
        log.record_commit(["d"], 1000.0, 1000.0)
    with pytest.raises(LogFinalized):
        log.finalize(1000.0)


def test_finalize_keeps_larger_wall_delay():
    log = EmissionLog()
    log.record_commit(["a"], 800.0, 1400.0)
    log.finalize(1000.0)
    assert log.commits[-1].ideal_delay_ms == 1000.0
    assert log.commits[-1].wall_delay_ms == 1400.0


def test_finalize_rejects_delay_beyond_source():
    log = EmissionLog()
    log.record_commit(["a"], 1200.0, 1200.0)
    with pytest.raises(DelayExceedsSource):
        log.finalize(1000.0)


def test_finalize_empty_log_is_fine():
    log = EmissionLog()
    log.finalize(1000.0)
    assert log.num_tokens == 0
    assert log.tokens() == []


def test_token_accessors():
    log = EmissionLog()
    log.record_commit(["a", "b"], 300.0, 300.0)
    log.record_commit(["c"], 600.0, 650.0)
    log.finalize(600.0)
    assert log.tokens() == ["a", "b", "c"]
    assert log.num_tokens == 3
    with pytest.raises(ValueError):
        log.token_delays("bogus")


def test_json_line_round_trip_preserves_unicode():
    log = EmissionLog(reference_tokens=["ref", "猫"])
    log.record_commit(["猫", "が"], 300.0, 351.25)
    log.finalize(600.0)
    line = log.to_json_line()
    assert "猫" in line  # not escaped to \\u sequences
    back = EmissionLog.from_json_line(line)
    assert back.to_json_line() == line
    assert back.tokens() == ["猫", "が"]
    assert back.reference_tokens == ["ref", "猫"]
    assert back.source_duration_ms == 600.0


def test_save_and_load_logs_round_trip(tmp_path):
    rng = random.Random(11)
    logs = [random_finalized_log(rng) for _ in range(6)]
    path = tmp_path / "logs.jsonl"
    save_logs(logs, path, meta={"policy": "la", "chunk_ms": 500.0})
    loaded, meta = load_logs(path)
    assert meta == {"policy": "la", "chunk_ms": 500.0}
    assert [l.to_json_line() for l in loaded] == [l.to_json_line() for l in logs]
    # byte-identical second save
    path2 = tmp_path / "logs2.jsonl"
    save_logs(loaded, path2, meta=meta)
    assert path.read_bytes() == path2.read_bytes()


def test_load_logs_without_meta(tmp_path):
    log = EmissionLog()
    log.record_commit(["a"], 100.0, 100.0)
    log.finalize(200.0)
    path = tmp_path / "plain.jsonl"
    save_logs([log], path)
    loaded, meta = load_logs(path)
    assert meta is None
    assert len(loaded) == 1
    first_record = json.loads(path.read_text().splitlines()[0])
    assert "meta" not in first_record


def test_frame_payloads_survive_stream_construction():
    frames = [Frame(100.0, payload_id=i) for i in range(3)]
    src = SourceStream(frames=frames, total_duration_ms=300.0, frame_ms=100.0)
    assert src.frames_available_at(250.0) == 2
