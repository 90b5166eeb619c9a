"""Collects one verdict line per acceptance criterion for the terminal summary."""

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    line = f"{criterion:<4} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
