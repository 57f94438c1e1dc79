import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-criterion verdict lines into the run summary.

    The acceptance tests print one PASS/FAIL line per criterion; stdout of
    passing tests is captured, so the lines are replayed here where they
    stay visible in the plain ``pytest -v`` output.
    """
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "_CRITERION_LINES", None) if mod is not None else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for text in lines:
            terminalreporter.write_line(text)
