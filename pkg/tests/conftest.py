_CRITERIA: list[tuple[str, bool, str]] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    _CRITERIA.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in sorted(_CRITERIA, key=lambda t: t[0]):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {name}: {status} - {detail}")
