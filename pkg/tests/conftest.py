import pytest

from degenflow import kernels

ACCEPTANCE_LINES = []

requires_compiled = pytest.mark.skipif(kernels.compiled_backend is None,
                                       reason="compiled extension not built")


@pytest.fixture(autouse=True)
def artifact_dir(tmp_path, monkeypatch):
    out = tmp_path / "artifacts"
    monkeypatch.setenv("DEGENFLOW_OUT", str(out))
    return out


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
