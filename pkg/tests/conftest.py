import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    import verdicts

    if verdicts.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in verdicts.lines():
            terminalreporter.write_line(line)
