import argparse
import sys

from .rules import RomanizerRules, ToyRules
from .server import AgentLoop


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refagent",
        description="Reference agent speaking the line-delimited decode protocol "
                    "on stdin/stdout",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    toy = sub.add_parser("toy", help="serve decode requests from a span-table JSON")
    toy.add_argument("--spec", required=True, help="alignment span table (JSON)")
    rom = sub.add_parser("romanize",
                         help="serve dual_decode requests from a phoneme table JSON")
    rom.add_argument("--table", required=True, help="phoneme/prosody table (JSON)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "toy":
        handler = ToyRules(args.spec)
    else:
        handler = RomanizerRules(args.table)
    return AgentLoop(handler).serve()


if __name__ == "__main__":
    sys.exit(main())
