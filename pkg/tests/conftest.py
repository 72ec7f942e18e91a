import sys
from pathlib import Path

# so test modules can `import oracles`
sys.path.insert(0, str(Path(__file__).parent))

# one pass/fail line per acceptance criterion, shown after the run
ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.skipped and report.when == "setup"):
        return
    mod, _, name = report.nodeid.partition("::")
    if not mod.endswith("test_acceptance.py"):
        return
    status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
    ACCEPTANCE_RESULTS[name] = status


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{status:4}  {name}")
