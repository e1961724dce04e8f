import re

from hypothesis import settings

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")

_CRITERION_RE = re.compile(r"::test_(a\d+)_")
_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    match = _CRITERION_RE.search(report.nodeid)
    if match:
        _acceptance_results[match.group(1).upper()] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for criterion in sorted(_acceptance_results, key=lambda c: int(c[1:])):
        outcome = _acceptance_results[criterion]
        line = f"{criterion}: {'PASS' if outcome == 'PASSED' else 'FAIL'}"
        terminalreporter.write_line(line)
