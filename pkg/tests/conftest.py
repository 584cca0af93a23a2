from pathlib import Path

import pytest

from multisem.hierarchy import default_coco_hierarchy

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def coco():
    return default_coco_hierarchy()


@pytest.fixture
def train_fixture():
    return FIXTURES / "instances_train_mini.json"


@pytest.fixture
def val_fixture():
    return FIXTURES / "instances_val_mini.json"


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
