"""Reference agent for the line-delimited streaming-translation protocol.

This package deliberately shares no code with the evaluation harness: the
rule engines are re-derived from the fixture file formats, so driving the
harness against this agent is a genuine cross-implementation check.
"""

from .rules import RomanizerRules, ToyRules
from .server import PROTOCOL_VERSION, AgentLoop

__all__ = ["AgentLoop", "PROTOCOL_VERSION", "RomanizerRules", "ToyRules"]
