"""Command-line surface.

Commands:
  simulate  run one policy over a manifest and write emission logs (JSONL)
  sweep     run a (chunk_ms x parameter) grid and write the trade-off CSV
  score     read emission logs and emit the same CSV row schema
  diagram   render per-session timing diagrams (JSON + text)
  filter    apply the sample-per-token ratio filter to a manifest

Exit codes: 0 success, 1 validation/usage error, 2 agent or protocol failure.
All artifacts carry the seed in their header so runs are reproducible
byte-for-byte; the default cost setting is the ideal clock, which is
deterministic by construction.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import corpus_tools, s2s_cascade, simulator
from .agents import RomanizerAgent, load_romanizer_table
from .errors import AgentError, PrefixConflict, StreamEvalError
from .simulator import ClockModel, CostModel, SweepConfig, TradeoffRow
from .timeline import COMPUTATION_AWARE, IDEAL, load_logs, save_logs

LOGGER = logging.getLogger("streameval.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_AGENT = 2


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 with a one-line remedy instead of 2."""

    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n"
                              f"{self.prog}: run with --help for usage\n")


def parse_values(text: str, integer: bool = False) -> list:
    """Parse a flag value grid: '800', '1,2,3', or '200..1000:200'.

    Ranges are inclusive of both ends; integer ranges default to step 1,
    float ranges require an explicit ':step'.
    """
    values = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo_text, _, rest = part.partition("..")
            hi_text, _, step_text = rest.partition(":")
            if integer:
                lo, hi = int(lo_text), int(hi_text)
                step = int(step_text) if step_text else 1
            else:
                if not step_text:
                    raise ValueError(
                        f"range {part!r} needs an explicit step, like 200..1000:200"
                    )
                lo, hi, step = float(lo_text), float(hi_text), float(step_text)
            if step <= 0 or hi < lo:
                raise ValueError(f"bad range {part!r}")
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            values.extend(lo + i * step for i in range(count))
        else:
            values.append(int(part) if integer else float(part))
    if not values:
        raise ValueError(f"no values in {text!r}")
    return values


def parse_clock(text: str) -> ClockModel:
    """'ideal' or a computation-aware cost: 'measured', 'fixed:50', 'per_frame:0.5'."""
    if text == "ideal":
        return ClockModel.ideal()
    return ClockModel.computation_aware(CostModel.parse(text))


def _policy_param(args) -> int:
    return args.n if args.policy == simulator.POLICY_LA else args.f


def _add_common_run_flags(sub, grid: bool):
    sub.add_argument("--policy", required=True,
                     choices=[simulator.POLICY_LA, simulator.POLICY_ALIGNATT])
    sub.add_argument("--manifest", required=True, help="corpus manifest (TSV)")
    sub.add_argument("--out", required=True, help="output file")
    if grid:
        sub.add_argument("--chunk-ms", required=True,
                         help="chunk sizes: 800, or 200..1000:200, or a comma list")
        sub.add_argument("--n", default="2",
                         help="agreement window sizes (la), same grid syntax")
        sub.add_argument("--f", default="1",
                         help="frame margins (alignatt), same grid syntax")
    else:
        sub.add_argument("--chunk-ms", required=True, type=float)
        sub.add_argument("--n", type=int, default=2,
                         help="agreement window (la)")
        sub.add_argument("--f", type=int, default=1,
                         help="frame margin (alignatt)")
    sub.add_argument("--beam", type=int, default=5)
    sub.add_argument("--cost", default="ideal",
                     help="ideal | measured | fixed:<ms> | per_frame:<ms>")
    sub.add_argument("--seed", type=int, default=0,
                     help="recorded in the artifact header")
    sub.add_argument("--agent-cmd", default=None,
                     help="external agent command overriding manifest bindings; "
                          "{id} expands to the utterance id")
    sub.add_argument("--timeout-s", type=float, default=60.0)


def cmd_simulate(args) -> int:
    entries = corpus_tools.load_manifest(args.manifest)
    base_dir = Path(args.manifest).parent
    clock = parse_clock(args.cost)
    policy_param = _policy_param(args)
    logs = []
    for entry in entries:
        source, agent = corpus_tools.build_session(
            entry, base_dir, args.agent_cmd, args.timeout_s
        )
        try:
            policy = simulator.make_policy(args.policy, args.chunk_ms, policy_param)
            logs.append(simulator.run_session(source, agent, policy, clock, args.beam))
        finally:
            agent.close()
    meta = {
        "seed": args.seed,
        "policy": args.policy,
        "chunk_ms": args.chunk_ms,
        "param": policy_param,
    }
    save_logs(logs, args.out, meta=meta)
    print(f"wrote {len(logs)} session logs to {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    entries = corpus_tools.load_manifest(args.manifest)
    base_dir = Path(args.manifest).parent
    clock = parse_clock(args.cost)
    chunks = parse_values(args.chunk_ms)
    params = parse_values(args.n if args.policy == simulator.POLICY_LA else args.f,
                          integer=True)
    grid = tuple((chunk, param) for chunk in chunks for param in params)
    config = SweepConfig(
        policy=args.policy,
        grid=grid,
        corpus=tuple(entries),
        beam=args.beam,
        cost_model=clock.cost_model if clock.mode == COMPUTATION_AWARE
        else CostModel.fixed_per_decode(0.0),
    )
    factory = corpus_tools.session_factory(base_dir, args.agent_cmd, args.timeout_s)
    rows = simulator.run_sweep(config, factory)
    corpus_tools.export_tradeoff(rows, args.out, seed=args.seed)
    print(f"wrote {len(rows)} grid rows to {args.out}")
    return EXIT_OK


def cmd_score(args) -> int:
    logs, meta = load_logs(args.logs)
    if not logs:
        raise StreamEvalError(f"no session logs in {args.logs}")
    meta = meta or {}
    policy = meta.get("policy", "unknown")
    chunk_ms = float(meta.get("chunk_ms", 0.0))
    param = int(meta.get("param", 0))
    seed = int(meta.get("seed", 0))
    row = simulator.summarize_logs(policy, chunk_ms, param, logs)
    if args.mode != "both":
        # Only the requested clock's columns are meaningful; blank the other
        # side with nan so nobody mistakes it for a measurement.
        nan = float("nan")
        if args.mode == IDEAL:
            row = TradeoffRow(
                policy, chunk_ms, param, row.bleu,
                row.al, row.laal, row.ap, row.dal, row.atd,
                nan, nan, nan, nan, nan,
                row.start_offset, row.end_offset,
            )
        else:
            row = TradeoffRow(
                policy, chunk_ms, param, row.bleu,
                nan, nan, nan, nan, nan,
                row.al_ca, row.laal_ca, row.ap_ca, row.dal_ca, row.atd_ca,
                row.start_offset, row.end_offset,
            )
    if args.out:
        corpus_tools.export_tradeoff([row], args.out, seed=seed)
        print(f"wrote metrics for {len(logs)} sessions to {args.out}")
    else:
        print(f"# seed={seed}")
        print(corpus_tools.TRADEOFF_HEADER)
        print(corpus_tools.format_tradeoff_row(row))
    return EXIT_OK


def cmd_diagram(args) -> int:
    logs, _ = load_logs(args.logs)
    if not logs:
        raise StreamEvalError(f"no session logs in {args.logs}")
    policy = s2s_cascade.HandoffPolicy(kind=args.handoff, estimator_f=args.estimator_f)
    agent = None
    if args.handoff == s2s_cascade.HANDOFF_ESTIMATOR:
        if not args.romanizer:
            raise StreamEvalError(
                "estimator_gated handoff needs --romanizer <table.json>"
            )
        agent = RomanizerAgent(load_romanizer_table(args.romanizer))
    duration_model = s2s_cascade.DurationModel(
        kind=args.duration_model, ms_per_unit=args.ms_per_unit
    )
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    for i, log in enumerate(logs):
        requests = s2s_cascade.handoff(log, policy, agent)
        schedule = s2s_cascade.schedule_speech(
            requests,
            duration_model,
            synthesis_latency_ms=args.synthesis_latency_ms,
            source_duration_ms=log.source_duration_ms,
        )
        diagram = s2s_cascade.render_timing_diagram(
            log.source_duration_ms, log, schedule
        )
        json_path = Path(f"{prefix}_{i:03d}.json")
        text_path = Path(f"{prefix}_{i:03d}.txt")
        json_path.write_text(diagram.to_json() + "\n", encoding="utf-8")
        text_path.write_text(diagram.to_text(), encoding="utf-8")
    print(f"wrote {len(logs)} timing diagrams to {prefix}_*.json/.txt")
    return EXIT_OK


def cmd_filter(args) -> int:
    entries = corpus_tools.load_manifest(args.manifest)
    config = corpus_tools.FilterConfig(max_ratio=args.max_ratio)
    kept, excluded = corpus_tools.filter_manifest(entries, config)
    corpus_tools.save_manifest(kept, args.out)
    if args.excluded:
        corpus_tools.save_manifest(excluded, args.excluded)
    print(f"kept {len(kept)} of {len(entries)} entries "
          f"(excluded {len(excluded)} above ratio {args.max_ratio})")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="streameval",
                     description="Streaming translation policy harness and "
                                 "quality/latency evaluation toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_sim = sub.add_parser("simulate", help="run one policy configuration")
    _add_common_run_flags(p_sim, grid=False)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run a quality-latency grid")
    _add_common_run_flags(p_sweep, grid=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_score = sub.add_parser("score", help="compute metrics from emission logs")
    p_score.add_argument("--logs", required=True)
    p_score.add_argument("--mode", default="both",
                         choices=[IDEAL, COMPUTATION_AWARE, "both"])
    p_score.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p_score.set_defaults(func=cmd_score)

    p_diag = sub.add_parser("diagram", help="render timing diagrams from logs")
    p_diag.add_argument("--logs", required=True)
    p_diag.add_argument("--out-prefix", required=True,
                        help="writes <prefix>_NNN.json and <prefix>_NNN.txt")
    p_diag.add_argument("--handoff", default=s2s_cascade.HANDOFF_IMMEDIATE,
                        choices=[s2s_cascade.HANDOFF_IMMEDIATE,
                                 s2s_cascade.HANDOFF_BOUNDARY,
                                 s2s_cascade.HANDOFF_ESTIMATOR])
    p_diag.add_argument("--estimator-f", type=int, default=1)
    p_diag.add_argument("--romanizer", default=None,
                        help="dual-track table JSON (estimator_gated)")
    p_diag.add_argument("--duration-model", default=s2s_cascade.DURATION_PER_WORD,
                        choices=[s2s_cascade.DURATION_PER_WORD,
                                 s2s_cascade.DURATION_CHAR_BIGRAM])
    p_diag.add_argument("--ms-per-unit", type=float, default=300.0)
    p_diag.add_argument("--synthesis-latency-ms", type=float, default=0.0)
    p_diag.set_defaults(func=cmd_diagram)

    p_filter = sub.add_parser("filter", help="apply the sample/token ratio filter")
    p_filter.add_argument("--manifest", required=True)
    p_filter.add_argument("--out", required=True)
    p_filter.add_argument("--excluded", default=None,
                          help="also write excluded entries here")
    p_filter.add_argument("--max-ratio", type=float,
                          default=corpus_tools.DEFAULT_MAX_RATIO)
    p_filter.set_defaults(func=cmd_filter)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
    )
    try:
        return args.func(args)
    except (AgentError, PrefixConflict) as exc:
        print(f"agent failure: {exc}", file=sys.stderr)
        return EXIT_AGENT
    except (StreamEvalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
