import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for tag in sorted(mod.RESULTS, key=lambda t: int(t[1:])):
        terminalreporter.write_line(mod.RESULTS[tag][1])
