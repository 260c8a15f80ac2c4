import sys
from pathlib import Path

# shared oracles live next to the tests
sys.path.insert(0, str(Path(__file__).parent))

_verdicts = []


def pytest_runtest_logreport(report):
    # acceptance tests attach a "criterion" property; collect one verdict each
    if report.when != "call":
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _verdicts.append((props["criterion"], "PASS" if report.passed else "FAIL", props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict, detail in sorted(_verdicts):
        terminalreporter.write_line(f"{verdict} {label}: {detail}")
