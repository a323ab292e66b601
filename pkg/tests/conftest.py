import pytest

_ACCEPTANCE = []


def record_acceptance(number, description, status, detail=""):
    """status is 'PASS', 'FAIL', or 'SKIP'."""
    _ACCEPTANCE.append((number, description, status, detail))


@pytest.fixture(scope="session")
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, description, status, detail in sorted(_ACCEPTANCE):
        line = f"criterion {number}: {status} - {description}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)
