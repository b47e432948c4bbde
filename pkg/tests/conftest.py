import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria suite")


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    from _support import build_synthetic_corpus

    root = tmp_path_factory.mktemp("corpus")
    manifest, frames = build_synthetic_corpus(root)
    return manifest, frames


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion_line():
    """Record one acceptance verdict line; all lines are printed in the terminal summary."""

    def emit(number, passed, detail):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        line = f"[{status}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
