import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.models import Rect, Segment, Vec2  # noqa: E402
from src.world import build_scenario, load_scenario  # noqa: E402


@pytest.fixture
def empty_room():
    return build_scenario("room", Rect(0.0, 0.0, 8.0, 8.0), [], Rect(0.5, 0.5, 7.5, 7.5))


@pytest.fixture
def walled_room():
    """Room cut in two by a full-height wall at x = 3."""
    wall = Segment(Vec2(3.0, 0.0), Vec2(3.0, 8.0))
    return build_scenario("walled", Rect(0.0, 0.0, 8.0, 8.0), [wall], Rect(0.5, 0.5, 2.5, 7.5))


@pytest.fixture
def env1():
    return load_scenario(ROOT / "scenarios" / "env1.yaml")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
