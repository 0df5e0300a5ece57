ACCEPTANCE_LINES = {}


def record_acceptance(number, passed, text):
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {text}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
