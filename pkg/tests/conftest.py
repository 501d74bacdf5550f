"""Collects the one-line verdicts of the acceptance suite and prints them at the end."""

VERDICTS = {}


def record(key, passed, detail):
    line = f"[{key}] {'PASS' if passed else 'FAIL'}  {detail}"
    VERDICTS[key] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(VERDICTS, key=lambda k: int(k.split()[-1])):
        terminalreporter.write_line(VERDICTS[key])
