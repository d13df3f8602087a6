"""Shared pytest wiring: a per-criterion verdict table after the run.

The acceptance tests in test_acceptance.py are named test_cNN_*; this hook
folds their outcomes into one PASS/FAIL line per criterion so a full run
ends with a readable scoreboard.
"""

ACCEPTANCE_CRITERIA = [
    ("test_c01", "C1  latency closed forms match definitional sums on 500 random logs (1e-9, <5s)"),
    ("test_c02", "C2  hand-worked AL/LAAL/AP/DAL/ATD fixtures reproduce exactly"),
    ("test_c03", "C3  local agreement: append-only, n=1 commits fully, lossless at zero instability"),
    ("test_c04", "C4  attention-margin rounds match brute force; delays non-decreasing in f"),
    ("test_c05", "C5  computation-aware lag gap grows as chunks shrink; CA dominates ideal"),
    ("test_c06", "C6  chunk sweep: corpus BLEU and AL monotone non-decreasing (rho >= 0.9)"),
    ("test_c07", "C7  speech channel: overlap-free, fixture spans exact, speech ends after text"),
    ("test_c08", "C8  ratio filter: threshold boundaries and token-count monotonicity"),
    ("test_c09", "C9  corpus BLEU: perfect 100, disjoint 0, short-sentence example to 1e-6"),
    ("test_c10", "C10 emission logs and trade-off CSV round-trip byte-identically"),
]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[str, set[bool]] = {}
    for key in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(key, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::" not in nodeid:
                continue
            if getattr(report, "when", "call") != "call" and key == "passed":
                continue
            name = nodeid.split("::")[-1]
            for prefix, _ in ACCEPTANCE_CRITERIA:
                if name.startswith(prefix):
                    outcomes.setdefault(prefix, set()).add(key == "passed")
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for prefix, label in ACCEPTANCE_CRITERIA:
        seen = outcomes.get(prefix)
        if seen is None:
            verdict = "NOT RUN"
        elif all(seen):
            verdict = "PASS"
        else:
            verdict = "FAIL"
        terminalreporter.write_line(f"{verdict:8} {label}")
