import os
import sys

# Oversubscribe on small machines so thread-count independence is actually exercised.
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

sys.path.insert(0, os.path.dirname(__file__))

import acceptance_record  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    lines = acceptance_record.summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
