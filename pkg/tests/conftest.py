import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from weedspray.geometry import BoundingBox, Dataset, ImageRecord  # noqa: E402

DATA = Path(__file__).parent / "data"

_criteria: list[str] = []


def record_criterion(line: str) -> None:
    _criteria.append(line)


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criteria):
            terminalreporter.write_line(line)


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def two_image_dataset() -> Dataset:
    a = ImageRecord(
        "a",
        100,
        100,
        (BoundingBox(0, 0, 10, 10, 0), BoundingBox(20, 20, 40, 40, 1)),
        (BoundingBox(0, 0, 10, 10, 0, 0.9), BoundingBox(21, 20, 40, 41, 1, 0.7)),
    )
    b = ImageRecord("b", 100, 100, (BoundingBox(50, 50, 60, 70, 1),), ())
    return Dataset("tiny", (a, b))
