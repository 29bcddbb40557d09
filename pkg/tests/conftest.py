"""Shared pytest config: prints one verdict line per acceptance criterion."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for outcome, label in (("passed", "PASS"), ("failed", "FAIL"), ("skipped", "SKIP")):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(rep.nodeid)
            if m and getattr(rep, "when", "call") in ("call", "setup"):
                num = int(m.group(1))
                name = m.group(2).replace("_", " ")
                verdicts.setdefault(num, (name, label))
    if not verdicts:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(verdicts):
        name, label = verdicts[num]
        terminalreporter.write_line(f"criterion {num:2d} ({name}): {label}")
