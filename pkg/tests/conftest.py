import pytest

from voxelparkour.physics import PhysicsConfig
from voxelparkour.world import Course, resolve_course


@pytest.fixture
def physics_config() -> PhysicsConfig:
    return PhysicsConfig()


@pytest.fixture
def gapless() -> Course:
    return resolve_course("gapless")


@pytest.fixture
def two_gap() -> Course:
    return resolve_course("two-gap")


@pytest.fixture
def wall() -> Course:
    return resolve_course("wall")


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line; the lines are echoed in the terminal summary."""
    lines = request.config.stash[ACCEPTANCE]

    def record(number: int, ok: bool, detail: str) -> bool:
        lines.append((number, f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
